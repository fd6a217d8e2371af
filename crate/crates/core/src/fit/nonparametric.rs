//! EM-type estimation of the nonparametric model: histogram temporal and
//! radial kernels, per-node background rates on an adaptive-bandwidth
//! Gaussian background field.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::bandwidth::{adaptive_bandwidths, Bandwidths};
use super::{FitTrace, IterationRecord};
use crate::error::{domain, Error, Result};
use crate::math;
use crate::model::{
    BackgroundSource, BinnedKernel, EventCatalog, NonparamModel, Region, ResponsibilityMatrix,
    TriggeringMatrix,
};
use crate::rng::seeded;

/// How the background normaliser `Z = ∫∫∫ τ` is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NormalizationRule {
    /// Every background Gaussian is taken to carry unit mass: `Z = Σ_i p_ii`.
    #[default]
    FullMass,
    /// Exact Gaussian mass inside the catalog's rectangular region.
    Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonparamInit {
    /// Each column spread evenly over the background and its candidate parents.
    #[default]
    Uniform,
    /// Independent uniform draws, normalised per column.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonparamConfig {
    pub n_t_bins: usize,
    pub n_r_bins: usize,
    /// Temporal support; defaults to [`default_t_max`].
    pub t_max: Option<f64>,
    /// Radial support; defaults to [`default_r_max`].
    pub r_max: Option<f64>,
    pub n_p: usize,
    /// Minimum bandwidth; defaults to `0.002 ×` the region diagonal.
    pub eps_r: Option<f64>,
    pub normalization: NormalizationRule,
    /// Stop when the largest responsibility change falls below this.
    pub eps: f64,
    pub max_iters: usize,
    pub init: NonparamInit,
}

impl Default for NonparamConfig {
    fn default() -> Self {
        Self {
            n_t_bins: 30,
            n_r_bins: 30,
            t_max: None,
            r_max: None,
            n_p: 15,
            eps_r: None,
            normalization: NormalizationRule::FullMass,
            eps: 1e-4,
            max_iters: 500,
            init: NonparamInit::Uniform,
        }
    }
}

/// Supports and floors actually used by a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NonparamSettings {
    pub n_t_bins: usize,
    pub n_r_bins: usize,
    pub t_max: f64,
    pub r_max: f64,
    pub n_p: usize,
    pub eps_r: f64,
    pub normalization: NormalizationRule,
}

#[derive(Debug, Clone)]
pub struct NonparamFit {
    pub model: NonparamModel,
    pub responsibilities: ResponsibilityMatrix,
    pub bandwidths: Bandwidths,
    pub settings: NonparamSettings,
    pub trace: FitTrace,
    pub converged: bool,
}

impl NonparamFit {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

const TAU_CUTOFF: f64 = 8.0;
const PAIR_SAMPLE: usize = 2000;

/// `default_t_max_factor ×` the 95th percentile of gaps between consecutive
/// events of the same node.
pub fn default_t_max(catalog: &EventCatalog) -> f64 {
    let mut last = vec![f64::NAN; catalog.n_nodes()];
    let mut gaps = Vec::new();
    for e in catalog.events() {
        let prev = last[e.node];
        if !prev.is_nan() && e.t > prev {
            gaps.push(e.t - prev);
        }
        last[e.node] = e.t;
    }
    if gaps.is_empty() {
        return catalog.horizon();
    }
    gaps.sort_by(f64::total_cmp);
    DEFAULT_T_MAX_FACTOR * math::quantile_sorted(&gaps, 0.95)
}

/// `default_r_max_factor ×` the 95th percentile of pairwise distances
/// between (at most 2000 evenly subsampled) events.
pub fn default_r_max(catalog: &EventCatalog) -> f64 {
    let ev = catalog.events();
    let stride = ev.len().div_ceil(PAIR_SAMPLE).max(1);
    let sample: Vec<_> = ev.iter().step_by(stride).collect();
    let mut d = Vec::with_capacity(sample.len() * sample.len().saturating_sub(1) / 2);
    for (k, a) in sample.iter().enumerate() {
        for b in &sample[..k] {
            d.push(math::sqrt(math::dist2(a.x, a.y, b.x, b.y)));
        }
    }
    d.retain(|&r| r > 0.0);
    if d.is_empty() {
        let diag = catalog.region().diagonal();
        return if diag > 0.0 { diag } else { 1.0 };
    }
    d.sort_by(f64::total_cmp);
    DEFAULT_R_MAX_FACTOR * math::quantile_sorted(&d, 0.95)
}

/// Multipliers applied to the percentile-based default supports.
pub const DEFAULT_T_MAX_FACTOR: f64 = 1.0;
pub const DEFAULT_R_MAX_FACTOR: f64 = 1.0;

struct Pairs {
    resp: ResponsibilityMatrix,
    t_bin: Vec<u16>,
    r_bin: Vec<u16>,
}

fn build_pairs(catalog: &EventCatalog, g1: &BinnedKernel, h: &BinnedKernel) -> Pairs {
    let ev = catalog.events();
    let t_max = g1.support();
    let mut col_start = Vec::with_capacity(ev.len() + 1);
    let mut parents = Vec::new();
    let mut t_bin = Vec::new();
    let mut r_bin = Vec::new();
    col_start.push(0);
    let mut lo = 0usize;
    for (j, ej) in ev.iter().enumerate() {
        while lo < j && ej.t - ev[lo].t > t_max {
            lo += 1;
        }
        for (i, ei) in ev.iter().enumerate().take(j).skip(lo) {
            let dt = ej.t - ei.t;
            if !(dt > 0.0) {
                continue;
            }
            let r = math::sqrt(math::dist2(ej.x, ej.y, ei.x, ei.y));
            if let (Some(tb), Some(rb)) = (g1.bin_index(dt), h.bin_index(r)) {
                parents.push(i as u32);
                t_bin.push(tb as u16);
                r_bin.push(rb as u16);
            }
        }
        col_start.push(parents.len());
    }
    Pairs { resp: ResponsibilityMatrix::with_layout(col_start, parents), t_bin, r_bin }
}

/// For each event `j`, the background sources `i` within `8 d_i` and their
/// Gaussian densities at `j`.
struct BackgroundNeighbours {
    start: Vec<usize>,
    source: Vec<u32>,
    density: Vec<f64>,
}

fn background_neighbours(catalog: &EventCatalog, d: &[f64]) -> BackgroundNeighbours {
    let ev = catalog.events();
    let mut start = Vec::with_capacity(ev.len() + 1);
    let mut source = Vec::new();
    let mut density = Vec::new();
    start.push(0);
    for ej in ev {
        for (i, ei) in ev.iter().enumerate() {
            let d2 = math::dist2(ej.x, ej.y, ei.x, ei.y);
            let reach = TAU_CUTOFF * d[i];
            if d2 <= reach * reach {
                source.push(i as u32);
                density.push(math::gauss2(d2, d[i] * d[i]));
            }
        }
        start.push(source.len());
    }
    BackgroundNeighbours { start, source, density }
}

/// Mass of `N((x, y), d² I)` inside `region`.
fn region_mass(region: &Region, x: f64, y: f64, d: f64) -> f64 {
    let s = core::f64::consts::SQRT_2 * d;
    let fx = 0.5 * (math::erf((region.x1 - x) / s) - math::erf((region.x0 - x) / s));
    let fy = 0.5 * (math::erf((region.y1 - y) / s) - math::erf((region.y0 - y) / s));
    fx * fy
}

struct MStep {
    k: TriggeringMatrix,
    gamma: Vec<f64>,
    g1: BinnedKernel,
    h: BinnedKernel,
    z: f64,
}

fn m_step(
    catalog: &EventCatalog,
    pairs: &Pairs,
    masses: &[f64],
    mut g1: BinnedKernel,
    mut h: BinnedKernel,
) -> MStep {
    let ev = catalog.events();
    let n = catalog.n_nodes();
    let resp = &pairs.resp;
    let (starts, parents, probs) = (resp.col_start(), resp.parent_indices(), resp.probs());

    let mut z = 0.0;
    let mut gamma = vec![0.0; n];
    for (j, e) in ev.iter().enumerate() {
        let b = resp.background(j);
        z += b * masses[j];
        gamma[e.node] += b;
    }
    for g in &mut gamma {
        *g = if z > 0.0 { *g / z } else { 0.0 };
    }

    let mut pair_sums = vec![0.0; n * n];
    let mut t_mass = vec![0.0; g1.n_bins()];
    let mut r_mass = vec![0.0; h.n_bins()];
    let mut total = 0.0;
    for (j, ej) in ev.iter().enumerate() {
        for pos in starts[j]..starts[j + 1] {
            let p = probs[pos];
            pair_sums[ev[parents[pos] as usize].node * n + ej.node] += p;
            t_mass[pairs.t_bin[pos] as usize] += p;
            r_mass[pairs.r_bin[pos] as usize] += p;
            total += p;
        }
    }
    let counts = catalog.node_counts();
    let mut k = TriggeringMatrix::zeros(n);
    for a in 0..n {
        if counts[a] > 0 {
            for b in 0..n {
                k.set(a, b, pair_sums[a * n + b] / counts[a] as f64);
            }
        }
    }
    for (kernel, mass) in [(&mut g1, &t_mass), (&mut h, &r_mass)] {
        let widths: Vec<f64> = (0..kernel.n_bins()).map(|b| kernel.width(b)).collect();
        for ((v, m), w) in kernel.values_mut().iter_mut().zip(mass).zip(widths) {
            *v = if total > 0.0 { m / (w * total) } else { 0.0 };
        }
    }
    MStep { k, gamma, g1, h, z }
}

/// Recomputes every column from the M-step quantities and the previous
/// background probabilities; returns `(max |Δp|, loglik, max column
/// deviation)`.
fn e_step(
    catalog: &EventCatalog,
    m: &MStep,
    nb: &BackgroundNeighbours,
    pairs: &mut Pairs,
    prev_bg: &mut Vec<f64>,
) -> Result<(f64, f64, f64)> {
    let ev = catalog.events();
    let horizon = catalog.horizon();
    prev_bg.clear();
    prev_bg.extend_from_slice(pairs.resp.backgrounds());
    let g2: Vec<f64> = (0..m.h.n_bins())
        .map(|b| m.h.values()[b] / (math::TAU * m.h.midpoint(b)))
        .collect();
    let g1 = m.g1.values();
    let (t_bin, r_bin) = (&pairs.t_bin, &pairs.r_bin);
    let (starts, parents, background, probs) = pairs.resp.parts_mut();

    let mut delta: f64 = 0.0;
    let mut sum_log = 0.0;
    let mut max_dev: f64 = 0.0;
    for (j, ej) in ev.iter().enumerate() {
        let mut tau = 0.0;
        for s in nb.start[j]..nb.start[j + 1] {
            tau += prev_bg[nb.source[s] as usize] * nb.density[s];
        }
        let bg = m.gamma[ej.node] * tau / horizon;
        let mut total = bg;
        for pos in starts[j]..starts[j + 1] {
            let ei = ev[parents[pos] as usize];
            let v = m.k.get(ei.node, ej.node) * g1[t_bin[pos] as usize] * g2[r_bin[pos] as usize];
            total += v;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateModel { event: j });
        }
        sum_log += math::ln(total);
        let inv = 1.0 / total;
        let b = bg * inv;
        delta = delta.max(math::abs(b - background[j]));
        background[j] = b;
        let mut col = b;
        for pos in starts[j]..starts[j + 1] {
            let ei = ev[parents[pos] as usize];
            let v = m.k.get(ei.node, ej.node) * g1[t_bin[pos] as usize] * g2[r_bin[pos] as usize]
                * inv;
            delta = delta.max(math::abs(v - probs[pos]));
            probs[pos] = v;
            col += v;
        }
        max_dev = max_dev.max(math::abs(col - 1.0));
    }

    let mut compensator = m.gamma.iter().sum::<f64>() * m.z;
    for e in ev {
        compensator += m.k.row_sum(e.node) * m.g1.cumulative(horizon - e.t) * m.h.integral();
    }
    Ok((delta, sum_log - compensator, max_dev))
}

fn initialise(resp: &mut ResponsibilityMatrix, init: NonparamInit) {
    let (starts, _, background, probs) = resp.parts_mut();
    match init {
        NonparamInit::Uniform => {
            for j in 0..background.len() {
                let v = 1.0 / (starts[j + 1] - starts[j] + 1) as f64;
                background[j] = v;
                probs[starts[j]..starts[j + 1]].fill(v);
            }
        }
        NonparamInit::Random { seed } => {
            let mut rng = seeded(seed, 0);
            for j in 0..background.len() {
                let col = &mut probs[starts[j]..starts[j + 1]];
                // (0, 1] keeps every entry positive
                let mut draw = || 1.0 - rng.random::<f64>();
                let b = draw();
                let mut total = b;
                for p in col.iter_mut() {
                    *p = draw();
                    total += *p;
                }
                background[j] = b / total;
                for p in col.iter_mut() {
                    *p /= total;
                }
            }
        }
    }
}

/// Resolves defaults against the catalog.
pub fn resolve_settings(catalog: &EventCatalog, config: &NonparamConfig) -> Result<NonparamSettings> {
    if config.n_t_bins == 0 || config.n_r_bins == 0 {
        return Err(domain("bin counts must be at least 1"));
    }
    if config.n_t_bins > u16::MAX as usize || config.n_r_bins > u16::MAX as usize {
        return Err(domain("too many bins"));
    }
    let t_max = config.t_max.unwrap_or_else(|| default_t_max(catalog));
    let r_max = config.r_max.unwrap_or_else(|| default_r_max(catalog));
    if !(t_max.is_finite() && t_max > 0.0 && r_max.is_finite() && r_max > 0.0) {
        return Err(domain("kernel supports must be positive"));
    }
    let eps_r = match config.eps_r {
        Some(e) => e,
        None => {
            let diag = catalog.region().diagonal();
            0.002 * if diag > 0.0 { diag } else { 1.0 }
        }
    };
    Ok(NonparamSettings {
        n_t_bins: config.n_t_bins,
        n_r_bins: config.n_r_bins,
        t_max,
        r_max,
        n_p: config.n_p,
        eps_r,
        normalization: config.normalization,
    })
}

/// Iterates the M-step (`γ`, `K`, `g1`, `h` from the current responsibilities)
/// and the E-step until the largest responsibility change drops below `eps`.
pub fn fit_nonparam(catalog: &EventCatalog, config: &NonparamConfig) -> Result<NonparamFit> {
    if catalog.is_empty() {
        return Err(domain("cannot fit an empty catalog"));
    }
    if !(config.eps > 0.0) {
        return Err(domain("eps must be positive"));
    }
    let settings = resolve_settings(catalog, config)?;
    let bandwidths = adaptive_bandwidths(catalog, settings.n_p, settings.eps_r)?;
    let g1 = BinnedKernel::uniform(settings.n_t_bins, settings.t_max)?;
    let h = BinnedKernel::uniform(settings.n_r_bins, settings.r_max)?;
    let mut pairs = build_pairs(catalog, &g1, &h);
    initialise(&mut pairs.resp, config.init);
    let nb = background_neighbours(catalog, &bandwidths.d);
    let region = catalog.region();
    let masses: Vec<f64> = match settings.normalization {
        NormalizationRule::FullMass => vec![1.0; catalog.len()],
        NormalizationRule::Region => catalog
            .events()
            .iter()
            .zip(&bandwidths.d)
            .map(|(e, &d)| region_mass(&region, e.x, e.y, d))
            .collect(),
    };

    let mut trace = FitTrace::default();
    let mut converged = false;
    let mut prev_bg = Vec::with_capacity(catalog.len());
    let mut m = m_step(catalog, &pairs, &masses, g1, h);
    for iteration in 0..config.max_iters.max(1) {
        let (delta, loglik, max_dev) = e_step(catalog, &m, &nb, &mut pairs, &mut prev_bg)?;
        trace.iterations.push(IterationRecord { iteration, loglik, delta, max_column_deviation: max_dev });
        if delta < config.eps {
            converged = true;
            break;
        }
        if iteration + 1 < config.max_iters {
            m = m_step(catalog, &pairs, &masses, m.g1, m.h);
        }
    }
    trace.final_loglik = trace.iterations.last().map_or(f64::NAN, |r| r.loglik);

    // the returned field is the one the last E-step used
    let background = catalog
        .events()
        .iter()
        .zip(&bandwidths.d)
        .zip(&prev_bg)
        .map(|((e, &d), &w)| BackgroundSource { x: e.x, y: e.y, weight: w, bandwidth: d })
        .collect();
    let model = NonparamModel {
        k: m.k,
        gamma: m.gamma,
        g1: m.g1,
        h: m.h,
        background,
        horizon: catalog.horizon(),
    };
    Ok(NonparamFit { model, responsibilities: pairs.resp, bandwidths, settings, trace, converged })
}
