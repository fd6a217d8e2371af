//! Exclusively temporal baseline: `λ_u(t) = μ_u + Σ_{t_i<t} K[u_i][u] ω e^{−ω(t−t_i)}`,
//! fitted by the same EM scheme with the spatial factors removed.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::omega::DecayStats;
use super::{default_decay, node_pair_sums, window_layout, FitTrace, IterationRecord};
use crate::error::{domain, Error, Result};
use crate::math;
use crate::model::{EventCatalog, ResponsibilityMatrix, TriggeringMatrix};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TemporalParams {
    pub k: TriggeringMatrix,
    /// Constant background rate per node.
    pub mu: Vec<f64>,
    pub omega: f64,
}

impl TemporalParams {
    pub fn new(k: TriggeringMatrix, mu: Vec<f64>, omega: f64) -> Result<Self> {
        if mu.len() != k.dim() {
            return Err(crate::error::shape("mu length differs from the matrix dimension"));
        }
        if mu.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(domain("background rates must be finite and nonnegative"));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(domain("omega must be positive"));
        }
        Ok(Self { k, mu, omega })
    }

    pub fn n_nodes(&self) -> usize {
        self.k.dim()
    }

    /// `λ_u(t)` given the catalog's history.
    pub fn intensity(&self, catalog: &EventCatalog, u: usize, t: f64) -> f64 {
        let mut lambda = self.mu[u];
        for e in catalog.events().iter().take_while(|e| e.t < t) {
            lambda += self.k.get(e.node, u) * self.omega * math::exp(-self.omega * (t - e.t));
        }
        lambda
    }

    /// Log-likelihood of the catalog (no truncation).
    pub fn loglik(&self, catalog: &EventCatalog) -> f64 {
        let horizon = catalog.horizon();
        let mut ll = 0.0;
        for e in catalog.events() {
            ll += math::ln(self.intensity(catalog, e.node, e.t));
            ll -= self.k.row_sum(e.node) * (1.0 - math::exp(-self.omega * (horizon - e.t)));
        }
        ll - self.mu.iter().sum::<f64>() * horizon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemporalInit {
    /// `K = 0.5/U`, `μ_u = n_u / 2T`, `ω = 1 / mean same-node gap`.
    Default,
    /// Defaults perturbed by independent uniform factors in `[0.5, 1.5)`.
    Random { seed: u64 },
    Given(TemporalParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalConfig {
    pub eps: f64,
    pub max_iters: usize,
    /// Pairs with `ω⁰ Δt` above this are skipped; `None` keeps every pair.
    pub decay_cutoff: Option<f64>,
    pub init: TemporalInit,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self { eps: 1e-4, max_iters: 500, decay_cutoff: Some(40.0), init: TemporalInit::Default }
    }
}

#[derive(Debug, Clone)]
pub struct TemporalFit {
    pub params: TemporalParams,
    /// Diagonal entries are background probabilities.
    pub responsibilities: ResponsibilityMatrix,
    pub trace: FitTrace,
    pub converged: bool,
}

impl TemporalFit {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

fn e_step(
    catalog: &EventCatalog,
    params: &TemporalParams,
    resp: &mut ResponsibilityMatrix,
) -> Result<(f64, f64)> {
    let ev = catalog.events();
    let horizon = catalog.horizon();
    let (starts, parents, background, probs) = resp.parts_mut();
    // e^{−ω(t_{i+1} − t_i)}; candidate parents are contiguous, so each
    // column's decay factors follow by repeated multiplication
    let step: Vec<f64> =
        ev.windows(2).map(|w| math::exp(-params.omega * (w[1].t - w[0].t))).collect();
    let mut sum_log = 0.0;
    let mut max_dev: f64 = 0.0;
    for (j, ej) in ev.iter().enumerate() {
        let mut trig = 0.0;
        let (lo, hi) = (starts[j], starts[j + 1]);
        if hi > lo {
            let last = parents[hi - 1] as usize;
            let mut decay = params.omega * math::exp(-params.omega * (ej.t - ev[last].t));
            for pos in (lo..hi).rev() {
                let i = parents[pos] as usize;
                if pos < hi - 1 {
                    decay *= step[i];
                }
                let v = params.k.get(ev[i].node, ej.node) * decay;
                probs[pos] = v;
                trig += v;
            }
        }
        let bg = params.mu[ej.node];
        let lambda = bg + trig;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::DegenerateModel { event: j });
        }
        sum_log += math::ln(lambda);
        let inv = 1.0 / lambda;
        let mut col = bg * inv;
        background[j] = col;
        for p in &mut probs[starts[j]..starts[j + 1]] {
            *p *= inv;
            col += *p;
        }
        max_dev = max_dev.max(math::abs(col - 1.0));
    }
    let mut compensator = params.mu.iter().sum::<f64>() * horizon;
    for e in ev {
        compensator += params.k.row_sum(e.node) * (1.0 - math::exp(-params.omega * (horizon - e.t)));
    }
    Ok((sum_log - compensator, max_dev))
}

fn m_step(catalog: &EventCatalog, params: &TemporalParams, resp: &ResponsibilityMatrix) -> TemporalParams {
    let ev = catalog.events();
    let n = catalog.n_nodes();
    let horizon = catalog.horizon();
    let (starts, parents, probs) = (resp.col_start(), resp.parent_indices(), resp.probs());

    let mut resp_sum = 0.0;
    let mut delay_sum = 0.0;
    for (j, ej) in ev.iter().enumerate() {
        for pos in starts[j]..starts[j + 1] {
            let p = probs[pos];
            resp_sum += p;
            delay_sum += p * (ej.t - ev[parents[pos] as usize].t);
        }
    }
    let exposure: Vec<(f64, f64)> =
        ev.iter().map(|e| (params.k.row_sum(e.node), horizon - e.t)).collect();
    let omega = DecayStats { responsibility: resp_sum, weighted_delay: delay_sum, exposure: &exposure }
        .update(params.omega);

    let pair_sums = node_pair_sums(catalog, resp);
    let mut k_denom = vec![0.0; n];
    let mut mu = vec![0.0; n];
    for (j, e) in ev.iter().enumerate() {
        k_denom[e.node] += 1.0 - math::exp(-omega * (horizon - e.t));
        mu[e.node] += resp.background(j);
    }
    for m in &mut mu {
        *m /= horizon;
    }
    let mut k = TriggeringMatrix::zeros(n);
    for a in 0..n {
        if k_denom[a] > 0.0 {
            for b in 0..n {
                k.set(a, b, pair_sums[a * n + b] / k_denom[a]);
            }
        }
    }
    TemporalParams { k, mu, omega }
}

fn max_norm_change(a: &TemporalParams, b: &TemporalParams) -> f64 {
    let mut d = math::abs(a.omega - b.omega);
    for (x, y) in a.k.as_slice().iter().zip(b.k.as_slice()) {
        d = d.max(math::abs(x - y));
    }
    for (x, y) in a.mu.iter().zip(&b.mu) {
        d = d.max(math::abs(x - y));
    }
    d
}

fn initial_params(catalog: &EventCatalog, init: &TemporalInit) -> Result<TemporalParams> {
    let n = catalog.n_nodes();
    let horizon = catalog.horizon();
    let base = || TemporalParams {
        k: TriggeringMatrix::filled(n, 0.5 / n as f64),
        mu: catalog.node_counts().iter().map(|&c| c as f64 / (2.0 * horizon)).collect(),
        omega: default_decay(catalog),
    };
    match init {
        TemporalInit::Default => Ok(base()),
        TemporalInit::Random { seed } => {
            let mut rng = seeded(*seed, 0);
            let mut p = base();
            let kd: Vec<f64> =
                p.k.as_slice().iter().map(|v| v * (0.5 + rng.random::<f64>())).collect();
            p.k = TriggeringMatrix::from_row_major(n, kd)?;
            for m in &mut p.mu {
                *m *= 0.5 + rng.random::<f64>();
            }
            p.omega *= 0.5 + rng.random::<f64>();
            Ok(p)
        }
        TemporalInit::Given(p) => {
            if p.n_nodes() != n {
                return Err(domain("initial parameters do not match the catalog's node count"));
            }
            TemporalParams::new(p.k.clone(), p.mu.clone(), p.omega)
        }
    }
}

/// EM fit of the exclusively temporal model.
pub fn fit_temporal(catalog: &EventCatalog, config: &TemporalConfig) -> Result<TemporalFit> {
    if catalog.is_empty() {
        return Err(domain("cannot fit an empty catalog"));
    }
    if !(config.eps > 0.0) {
        return Err(domain("eps must be positive"));
    }
    let mut params = initial_params(catalog, &config.init)?;
    let window = config.decay_cutoff.map(|c| c / params.omega);
    let mut resp = window_layout(catalog, window);
    let mut trace = FitTrace::default();
    let mut converged = false;
    for iteration in 0..config.max_iters {
        let (loglik, max_dev) = e_step(catalog, &params, &mut resp)?;
        let next = m_step(catalog, &params, &resp);
        let delta = max_norm_change(&params, &next);
        trace.iterations.push(IterationRecord { iteration, loglik, delta, max_column_deviation: max_dev });
        params = next;
        if delta < config.eps {
            converged = true;
            break;
        }
    }
    let (loglik, _) = e_step(catalog, &params, &mut resp)?;
    trace.final_loglik = loglik;
    Ok(TemporalFit { params, responsibilities: resp, trace, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, Region};

    #[test]
    fn single_event_background_rate() {
        let c = EventCatalog::new(vec![Event::new(1, 2.0, 0.0, 0.0)], 8.0, Region::unit(), 2)
            .unwrap();
        let fit = fit_temporal(&c, &TemporalConfig::default()).unwrap();
        assert!((fit.params.mu[1] - 1.0 / 8.0).abs() < 1e-12);
        assert_eq!(fit.params.mu[0], 0.0);
        assert_eq!(fit.params.k.max_entry(), 0.0);
    }

    #[test]
    fn trace_matches_direct_loglik_and_is_monotone() {
        let ev: Vec<Event> = [(0, 0.3), (1, 0.5), (0, 1.1), (1, 1.3), (1, 3.0), (0, 3.2), (0, 3.3)]
            .iter()
            .map(|&(u, t)| Event::new(u, t, 0.0, 0.0))
            .collect();
        let c = EventCatalog::new(ev, 4.0, Region::unit(), 2).unwrap();
        let cfg = TemporalConfig { decay_cutoff: None, ..Default::default() };
        let fit = fit_temporal(&c, &cfg).unwrap();
        let direct = fit.params.loglik(&c);
        assert!((direct - fit.trace.final_loglik).abs() < 1e-9 * direct.abs().max(1.0));
        assert!(fit.trace.max_loglik_drop() <= 1e-6);
        assert!(fit.trace.max_column_deviation() <= 1e-9);
    }
}
