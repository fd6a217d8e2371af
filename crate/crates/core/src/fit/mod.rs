//! EM-type estimators: parametric spatiotemporal, exclusively temporal and
//! nonparametric (histogram kernels with an adaptive-bandwidth background).

mod bandwidth;
mod nonparametric;
mod omega;
mod parametric;
mod temporal;

pub use bandwidth::{adaptive_bandwidths, Bandwidths};
pub use nonparametric::{
    default_r_max, default_t_max, fit_nonparam, resolve_settings, NonparamConfig, NonparamFit,
    NonparamInit, NonparamSettings, NormalizationRule, DEFAULT_R_MAX_FACTOR, DEFAULT_T_MAX_FACTOR,
};
pub use parametric::{fit_parametric, BackgroundAttribution, ParametricConfig, ParametricFit, ParametricInit};
pub use temporal::{fit_temporal, TemporalConfig, TemporalFit, TemporalInit, TemporalParams};

use alloc::vec::Vec;

use crate::math;
use crate::model::{EventCatalog, ResponsibilityMatrix};

/// One EM iteration: log-likelihood at the parameters entering the
/// iteration, the max-norm change produced by it, and the largest deviation
/// of a responsibility column sum from one after its E-step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iteration: usize,
    pub loglik: f64,
    pub delta: f64,
    pub max_column_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitTrace {
    pub iterations: Vec<IterationRecord>,
    /// Log-likelihood at the returned parameters.
    pub final_loglik: f64,
}

impl FitTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// Log-likelihood sequence including the final value.
    pub fn logliks(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.iterations.iter().map(|r| r.loglik).collect();
        v.push(self.final_loglik);
        v
    }

    /// Largest single-step decrease of the log-likelihood (zero if it never
    /// decreases).
    pub fn max_loglik_drop(&self) -> f64 {
        self.logliks().windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn max_column_deviation(&self) -> f64 {
        self.iterations.iter().map(|r| r.max_column_deviation).fold(0.0, f64::max)
    }
}

/// Candidate parents `i` of each event `j`: `t_i < t_j` and, if a window is
/// given, `t_j − t_i ≤ window`. Parents form a contiguous index range.
pub(crate) fn window_layout(catalog: &EventCatalog, window: Option<f64>) -> ResponsibilityMatrix {
    let ev = catalog.events();
    let mut col_start = Vec::with_capacity(ev.len() + 1);
    let mut parents = Vec::new();
    col_start.push(0);
    let mut lo = 0usize;
    for (j, e) in ev.iter().enumerate() {
        if let Some(w) = window {
            while lo < j && e.t - ev[lo].t > w {
                lo += 1;
            }
        }
        // events tied with j in time cannot trigger it
        let hi = ev[..j].partition_point(|p| p.t < e.t);
        for i in lo..hi.max(lo) {
            parents.push(i as u32);
        }
        col_start.push(parents.len());
    }
    ResponsibilityMatrix::with_layout(col_start, parents)
}

/// `1 / mean gap between consecutive events of the same node`; falls back to
/// `N / T` when no node has two events.
pub(crate) fn default_decay(catalog: &EventCatalog) -> f64 {
    let mut last = alloc::vec![f64::NAN; catalog.n_nodes()];
    let (mut sum, mut count) = (0.0, 0usize);
    for e in catalog.events() {
        let prev = last[e.node];
        if !prev.is_nan() && e.t > prev {
            sum += e.t - prev;
            count += 1;
        }
        last[e.node] = e.t;
    }
    if count > 0 && sum > 0.0 {
        count as f64 / sum
    } else {
        (catalog.len().max(1) as f64) / catalog.horizon()
    }
}

/// Half the mean squared displacement between temporally consecutive
/// events; falls back to the region scale.
pub(crate) fn default_spatial_variance(catalog: &EventCatalog) -> f64 {
    let ev = catalog.events();
    let (mut sum, mut count) = (0.0, 0usize);
    for w in ev.windows(2) {
        sum += math::dist2(w[0].x, w[0].y, w[1].x, w[1].y);
        count += 1;
    }
    let v = if count > 0 { sum / (2.0 * count as f64) } else { 0.0 };
    if v > 0.0 {
        v
    } else {
        let d = catalog.region().diagonal();
        if d > 0.0 { d * d / 12.0 } else { 1.0 }
    }
}

/// Row-major per-node pair sums `[u_i][u_j]` of the stored responsibilities.
pub(crate) fn node_pair_sums(catalog: &EventCatalog, p: &ResponsibilityMatrix) -> Vec<f64> {
    let n = catalog.n_nodes();
    let ev = catalog.events();
    let mut sums = alloc::vec![0.0; n * n];
    let (starts, parents, probs) = (p.col_start(), p.parent_indices(), p.probs());
    for j in 0..ev.len() {
        let uj = ev[j].node;
        for pos in starts[j]..starts[j + 1] {
            sums[ev[parents[pos] as usize].node * n + uj] += probs[pos];
        }
    }
    sums
}
