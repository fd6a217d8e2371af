//! EM-type estimation of the parametric model: exponential temporal kernel,
//! Gaussian spatial kernel, and a Gaussian-mixture background centred on
//! every other event with node-pair weights `beta`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::omega::DecayStats;
use super::{default_decay, default_spatial_variance, node_pair_sums, window_layout, FitTrace, IterationRecord};
use crate::error::{domain, Error, Result};
use crate::math;
use crate::model::{EventCatalog, ParametricParams, ResponsibilityMatrix, TriggeringMatrix};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub enum ParametricInit {
    /// `K = 0.5/U`, `beta = 1/U`, `ω = 1 / mean same-node gap`,
    /// `σ² = η² =` half the mean squared step between consecutive events.
    Default,
    /// Defaults perturbed by independent uniform factors in `[0.5, 1.5)`.
    Random { seed: u64 },
    Given(ParametricParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricConfig {
    /// Stop when the max-norm parameter change falls below this.
    pub eps: f64,
    pub max_iters: usize,
    /// Pairs with `ω⁰ Δt` above this are given zero responsibility; `None`
    /// keeps every pair.
    pub decay_cutoff: Option<f64>,
    pub init: ParametricInit,
    /// Lower bound applied to the fitted spatial variance.
    pub variance_floor: f64,
    /// When false, `η²` gets its own update from the background
    /// attributions instead of sharing `σ²`.
    pub tie_variances: bool,
    /// Compute the background sums with rayon (requires the `parallel`
    /// feature; ignored otherwise).
    pub parallel: bool,
}

impl Default for ParametricConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_iters: 500,
            decay_cutoff: Some(40.0),
            init: ParametricInit::Default,
            variance_floor: 1e-10,
            tie_variances: true,
            parallel: false,
        }
    }
}

/// Background attribution of every event, aggregated by source node:
/// entry `(j, v)` is `Σ_{i: u_i = v} p^b_{ji}`, the probability that event
/// `j` is a background event whose Gaussian is centred on a node-`v` event.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundAttribution {
    n_nodes: usize,
    data: Vec<f64>,
}

impl BackgroundAttribution {
    pub fn get(&self, event: usize, source_node: usize) -> f64 {
        self.data[event * self.n_nodes + source_node]
    }

    pub fn event(&self, event: usize) -> &[f64] {
        &self.data[event * self.n_nodes..(event + 1) * self.n_nodes]
    }
}

#[derive(Debug, Clone)]
pub struct ParametricFit {
    pub params: ParametricParams,
    /// Triggering responsibilities; the diagonal holds each event's total
    /// background probability.
    pub responsibilities: ResponsibilityMatrix,
    pub background: BackgroundAttribution,
    pub trace: FitTrace,
    pub converged: bool,
}

impl ParametricFit {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

struct Workspace {
    n_nodes: usize,
    /// `Σ_{i ≠ j, u_i = v} exp(−d²_ij / 2η²)` per `(j, v)`.
    gauss: Vec<f64>,
    /// Same with an extra `d²_ij` factor.
    gauss_d2: Vec<f64>,
    attr: Vec<f64>,
    /// `Σ_v norm β[v][u_j] gauss_d2[j][v] / λ_j`.
    bg_d2: Vec<f64>,
}

struct EStats {
    loglik: f64,
    max_dev: f64,
}

fn background_sums(catalog: &EventCatalog, eta2: f64, ws: &mut Workspace, parallel: bool) {
    let ev = catalog.events();
    let n = ws.n_nodes;
    let inv = 1.0 / (2.0 * eta2);
    // each event's own Gaussian is left out unless it is the only one
    let lone = ev.len() == 1;
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        ws.gauss
            .par_chunks_mut(n)
            .zip(ws.gauss_d2.par_chunks_mut(n))
            .enumerate()
            .for_each(|(j, (g, gd))| {
                g.fill(0.0);
                gd.fill(0.0);
                let ej = ev[j];
                for (i, e) in ev.iter().enumerate() {
                    if i == j && !lone {
                        continue;
                    }
                    let d2 = math::dist2(ej.x, ej.y, e.x, e.y);
                    let w = math::exp(-d2 * inv);
                    g[e.node] += w;
                    gd[e.node] += w * d2;
                }
            });
        return;
    }
    let _ = parallel;
    ws.gauss.fill(0.0);
    ws.gauss_d2.fill(0.0);
    for j in 0..ev.len() {
        let ej = ev[j];
        if lone {
            ws.gauss[j * n + ej.node] += 1.0;
        }
        for (i, ei) in ev[..j].iter().enumerate() {
            let d2 = math::dist2(ej.x, ej.y, ei.x, ei.y);
            let w = math::exp(-d2 * inv);
            let wd = w * d2;
            ws.gauss[j * n + ei.node] += w;
            ws.gauss_d2[j * n + ei.node] += wd;
            ws.gauss[i * n + ej.node] += w;
            ws.gauss_d2[i * n + ej.node] += wd;
        }
    }
}

fn e_step(
    catalog: &EventCatalog,
    params: &ParametricParams,
    resp: &mut ResponsibilityMatrix,
    ws: &mut Workspace,
    parallel: bool,
) -> Result<EStats> {
    let ev = catalog.events();
    let n = ws.n_nodes;
    let horizon = catalog.horizon();
    background_sums(catalog, params.eta2, ws, parallel);

    let bg_norm = 1.0 / (math::TAU * params.eta2 * horizon);
    let trig_norm = params.omega / (math::TAU * params.sigma2);
    let inv_sig = 1.0 / (2.0 * params.sigma2);
    let (starts, parents, background, probs) = resp.parts_mut();

    let mut sum_log = 0.0;
    let mut max_dev: f64 = 0.0;
    for j in 0..ev.len() {
        let ej = ev[j];
        let mut trig = 0.0;
        for pos in starts[j]..starts[j + 1] {
            let ei = ev[parents[pos] as usize];
            let k = params.k.get(ei.node, ej.node);
            let v = if k == 0.0 {
                0.0
            } else {
                let d2 = math::dist2(ej.x, ej.y, ei.x, ei.y);
                k * trig_norm * math::exp(-params.omega * (ej.t - ei.t) - d2 * inv_sig)
            };
            probs[pos] = v;
            trig += v;
        }
        let row = &ws.gauss[j * n..(j + 1) * n];
        let row_d2 = &ws.gauss_d2[j * n..(j + 1) * n];
        let attr = &mut ws.attr[j * n..(j + 1) * n];
        let mut bg = 0.0;
        let mut bg_d2 = 0.0;
        for v in 0..n {
            let b = params.beta.get(v, ej.node) * bg_norm;
            attr[v] = b * row[v];
            bg += attr[v];
            bg_d2 += b * row_d2[v];
        }
        let lambda = bg + trig;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::DegenerateModel { event: j });
        }
        sum_log += math::ln(lambda);
        let inv = 1.0 / lambda;
        let mut col = 0.0;
        for p in &mut probs[starts[j]..starts[j + 1]] {
            *p *= inv;
            col += *p;
        }
        let mut bg_total = 0.0;
        for a in attr.iter_mut() {
            *a *= inv;
            bg_total += *a;
        }
        background[j] = bg_total.min(1.0);
        ws.bg_d2[j] = bg_d2 * inv;
        max_dev = max_dev.max(math::abs(col + bg_total - 1.0));
    }

    let mut compensator = 0.0;
    for e in ev {
        compensator += params.beta.row_sum(e.node)
            + params.k.row_sum(e.node) * (1.0 - math::exp(-params.omega * (horizon - e.t)));
    }
    Ok(EStats { loglik: sum_log - compensator, max_dev })
}

fn m_step(
    catalog: &EventCatalog,
    params: &ParametricParams,
    resp: &ResponsibilityMatrix,
    ws: &Workspace,
    variance_floor: f64,
    tie_variances: bool,
) -> ParametricParams {
    let ev = catalog.events();
    let n = ws.n_nodes;
    let horizon = catalog.horizon();
    let (starts, parents, probs) = (resp.col_start(), resp.parent_indices(), resp.probs());

    let mut resp_sum = 0.0;
    let mut delay_sum = 0.0;
    let mut d2_sum = 0.0;
    for j in 0..ev.len() {
        let ej = ev[j];
        for pos in starts[j]..starts[j + 1] {
            let p = probs[pos];
            if p == 0.0 {
                continue;
            }
            let ei = ev[parents[pos] as usize];
            resp_sum += p;
            delay_sum += p * (ej.t - ei.t);
            d2_sum += p * math::dist2(ej.x, ej.y, ei.x, ei.y);
        }
    }

    let exposure: Vec<(f64, f64)> =
        ev.iter().map(|e| (params.k.row_sum(e.node), horizon - e.t)).collect();
    let omega = DecayStats { responsibility: resp_sum, weighted_delay: delay_sum, exposure: &exposure }
        .update(params.omega);

    let pair_sums = node_pair_sums(catalog, resp);
    let mut k_denom = vec![0.0; n];
    let counts = catalog.node_counts();
    for e in ev {
        k_denom[e.node] += 1.0 - math::exp(-omega * (horizon - e.t));
    }
    let mut k = TriggeringMatrix::zeros(n);
    for a in 0..n {
        if k_denom[a] > 0.0 {
            for b in 0..n {
                k.set(a, b, pair_sums[a * n + b] / k_denom[a]);
            }
        }
    }

    let mut beta_num = vec![0.0; n * n];
    for (j, e) in ev.iter().enumerate() {
        for v in 0..n {
            beta_num[v * n + e.node] += ws.attr[j * n + v];
        }
    }
    let mut beta = TriggeringMatrix::zeros(n);
    for a in 0..n {
        if counts[a] > 0 {
            for b in 0..n {
                beta.set(a, b, beta_num[a * n + b] / counts[a] as f64);
            }
        }
    }

    let bg_weight: f64 = resp.backgrounds().iter().sum();
    let bg_d2: f64 = ws.bg_d2.iter().sum();
    let variance = |sq: f64, w: f64, old: f64| {
        let v = if w > 0.0 { sq / (2.0 * w) } else { old };
        if v >= variance_floor { v } else { variance_floor }
    };
    let (sigma2, eta2) = if tie_variances {
        let s = variance(d2_sum + bg_d2, resp_sum + bg_weight, params.sigma2);
        (s, s)
    } else {
        (variance(d2_sum, resp_sum, params.sigma2), variance(bg_d2, bg_weight, params.eta2))
    };
    ParametricParams { k, beta, omega, sigma2, eta2 }
}

fn max_norm_change(a: &ParametricParams, b: &ParametricParams) -> f64 {
    let mut d: f64 = 0.0;
    for (x, y) in a.k.as_slice().iter().zip(b.k.as_slice()) {
        d = d.max(math::abs(x - y));
    }
    for (x, y) in a.beta.as_slice().iter().zip(b.beta.as_slice()) {
        d = d.max(math::abs(x - y));
    }
    d.max(math::abs(a.omega - b.omega))
        .max(math::abs(a.sigma2 - b.sigma2))
        .max(math::abs(a.eta2 - b.eta2))
}

fn initial_params(catalog: &EventCatalog, init: &ParametricInit) -> Result<ParametricParams> {
    let n = catalog.n_nodes();
    let base = || {
        let s2 = default_spatial_variance(catalog);
        ParametricParams {
            k: TriggeringMatrix::filled(n, 0.5 / n as f64),
            beta: TriggeringMatrix::filled(n, 1.0 / n as f64),
            omega: default_decay(catalog),
            sigma2: s2,
            eta2: s2,
        }
    };
    match init {
        ParametricInit::Default => Ok(base()),
        ParametricInit::Random { seed } => {
            let mut rng = seeded(*seed, 0);
            let mut p = base();
            let jitter = |rng: &mut rand_chacha::ChaCha8Rng| 0.5 + rng.random::<f64>();
            let kd: Vec<f64> = p.k.as_slice().iter().map(|v| v * jitter(&mut rng)).collect();
            let bd: Vec<f64> = p.beta.as_slice().iter().map(|v| v * jitter(&mut rng)).collect();
            p.k = TriggeringMatrix::from_row_major(n, kd)?;
            p.beta = TriggeringMatrix::from_row_major(n, bd)?;
            p.omega *= jitter(&mut rng);
            p.sigma2 *= jitter(&mut rng);
            p.eta2 = p.sigma2;
            Ok(p)
        }
        ParametricInit::Given(p) => {
            if p.n_nodes() != n {
                return Err(domain("initial parameters do not match the catalog's node count"));
            }
            ParametricParams::new(p.k.clone(), p.beta.clone(), p.omega, p.sigma2, p.eta2)
        }
    }
}

/// Alternates the E-step (triggering and background responsibilities) with
/// closed-form M-step updates of `ω`, `K`, `beta` and the shared spatial
/// variance until the max-norm parameter change drops below `eps`.
pub fn fit_parametric(catalog: &EventCatalog, config: &ParametricConfig) -> Result<ParametricFit> {
    if catalog.is_empty() {
        return Err(domain("cannot fit an empty catalog"));
    }
    if !(config.eps > 0.0) {
        return Err(domain("eps must be positive"));
    }
    let mut params = initial_params(catalog, &config.init)?;
    let window = config.decay_cutoff.map(|c| c / params.omega);
    let mut resp = window_layout(catalog, window);
    let n = catalog.n_nodes();
    let len = catalog.len();
    let mut ws = Workspace {
        n_nodes: n,
        gauss: vec![0.0; len * n],
        gauss_d2: vec![0.0; len * n],
        attr: vec![0.0; len * n],
        bg_d2: vec![0.0; len],
    };

    let mut trace = FitTrace::default();
    let mut converged = false;
    for iteration in 0..config.max_iters {
        let stats = e_step(catalog, &params, &mut resp, &mut ws, config.parallel)?;
        let next = m_step(catalog, &params, &resp, &ws, config.variance_floor, config.tie_variances);
        let delta = max_norm_change(&params, &next);
        trace.iterations.push(IterationRecord {
            iteration,
            loglik: stats.loglik,
            delta,
            max_column_deviation: stats.max_dev,
        });
        params = next;
        if delta < config.eps {
            converged = true;
            break;
        }
    }
    let stats = e_step(catalog, &params, &mut resp, &mut ws, config.parallel)?;
    trace.final_loglik = stats.loglik;
    let background = BackgroundAttribution { n_nodes: n, data: ws.attr };
    Ok(ParametricFit { params, responsibilities: resp, background, trace, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::loglik_parametric;
    use crate::model::{Event, Region};

    fn small_catalog() -> EventCatalog {
        let ev = vec![
            Event::new(0, 0.5, 0.2, 0.3),
            Event::new(1, 0.9, 0.25, 0.35),
            Event::new(0, 2.0, 0.8, 0.1),
            Event::new(1, 2.2, 0.7, 0.2),
            Event::new(1, 4.0, 0.4, 0.9),
            Event::new(0, 4.1, 0.45, 0.8),
        ];
        EventCatalog::new(ev, 5.0, Region::unit(), 2).unwrap()
    }

    #[test]
    fn single_event_is_background_and_k_vanishes() {
        let c = EventCatalog::new(vec![Event::new(0, 1.0, 0.5, 0.5)], 10.0, Region::unit(), 2)
            .unwrap();
        let fit = fit_parametric(&c, &ParametricConfig::default()).unwrap();
        assert!((fit.responsibilities.background(0) - 1.0).abs() < 1e-12);
        assert_eq!(fit.params.k.max_entry(), 0.0);
        assert!(fit.params.sigma2 > 0.0);
    }

    #[test]
    fn distant_pair_has_negligible_responsibility() {
        let ev = vec![Event::new(0, 0.0, 0.0, 0.0), Event::new(0, 100.0, 50.0, 50.0)];
        let c = EventCatalog::new(ev, 101.0, Region::new(0.0, 50.0, 0.0, 50.0).unwrap(), 1)
            .unwrap();
        let init = ParametricParams::new(
            TriggeringMatrix::filled(1, 0.5),
            TriggeringMatrix::filled(1, 1.0),
            1.0,
            1.0,
            1e4,
        )
        .unwrap();
        let cfg = ParametricConfig {
            max_iters: 0,
            decay_cutoff: None,
            init: ParametricInit::Given(init),
            ..Default::default()
        };
        let fit = fit_parametric(&c, &cfg).unwrap();
        let p = fit.responsibilities.get(0, 1);
        assert!(p < 1e-6, "p_12 = {p}");
    }

    #[test]
    fn exact_mode_trace_matches_direct_loglik() {
        let c = small_catalog();
        let cfg = ParametricConfig { decay_cutoff: None, max_iters: 5, ..Default::default() };
        let fit = fit_parametric(&c, &cfg).unwrap();
        let direct = loglik_parametric(&fit.params, &c).unwrap().value;
        assert!((direct - fit.trace.final_loglik).abs() < 1e-9 * direct.abs().max(1.0));
        let init = initial_params(&c, &ParametricInit::Default).unwrap();
        let first = loglik_parametric(&init, &c).unwrap().value;
        assert!((first - fit.trace.iterations[0].loglik).abs() < 1e-9 * first.abs().max(1.0));
    }

    #[test]
    fn trace_is_monotone_and_columns_sum_to_one() {
        let c = small_catalog();
        let fit = fit_parametric(&c, &ParametricConfig::default()).unwrap();
        assert!(fit.trace.max_loglik_drop() <= 1e-6);
        assert!(fit.trace.max_column_deviation() <= 1e-9);
        for j in 0..c.len() {
            let total: f64 = fit.background.event(j).iter().sum::<f64>()
                + fit.responsibilities.column(j).map(|(_, p)| p).sum::<f64>();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert!(fit.params.omega > 0.0 && fit.params.sigma2 > 0.0);
        assert_eq!(fit.params.sigma2, fit.params.eta2);
    }

    #[test]
    fn random_init_is_seeded() {
        let c = small_catalog();
        let a = initial_params(&c, &ParametricInit::Random { seed: 4 }).unwrap();
        let b = initial_params(&c, &ParametricInit::Random { seed: 4 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, initial_params(&c, &ParametricInit::Default).unwrap());
    }

    #[test]
    fn empty_catalog_is_rejected() {
        let c = EventCatalog::new(vec![], 1.0, Region::unit(), 1).unwrap();
        assert!(fit_parametric(&c, &ParametricConfig::default()).is_err());
    }
}
