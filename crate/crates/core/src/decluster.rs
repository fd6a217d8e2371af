//! Stochastic declustering into background and triggered events.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{domain, shape, Result};
use crate::math;
use crate::model::ResponsibilityMatrix;
use crate::rng::seeded;

/// `true` marks a background event: `p_ii > U(0, 1)`, one draw per event.
pub fn decluster(p: &ResponsibilityMatrix, seed: u64) -> Vec<bool> {
    decluster_stream(p.backgrounds(), seed, 0)
}

/// Run `run` of a repeated declustering, as used by [`decluster_report`].
pub fn decluster_run(p: &ResponsibilityMatrix, seed: u64, run: u64) -> Vec<bool> {
    decluster_stream(p.backgrounds(), seed, run)
}

fn decluster_stream(background: &[f64], seed: u64, stream: u64) -> Vec<bool> {
    let mut rng = seeded(seed, stream);
    background.iter().map(|&b| b > rng.random::<f64>()).collect()
}

/// `1 − N_b / N`.
pub fn branching_ratio(labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Err(domain("branching ratio of an empty catalog"));
    }
    let nb = labels.iter().filter(|&&b| b).count();
    Ok(1.0 - nb as f64 / labels.len() as f64)
}

/// Limit of the declustered branching ratio, `1 − Σ p_ii / N`.
pub fn expected_branching_ratio(p: &ResponsibilityMatrix) -> Result<f64> {
    if p.n_events() == 0 {
        return Err(domain("branching ratio of an empty catalog"));
    }
    Ok(1.0 - p.backgrounds().iter().sum::<f64>() / p.n_events() as f64)
}

/// Background is the positive class; `None` where a denominator vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrecisionRecall {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn precision_recall(labels: &[bool], truth: &[bool]) -> Result<PrecisionRecall> {
    if labels.len() != truth.len() {
        return Err(shape(format!("{} labels against {} truth labels", labels.len(), truth.len())));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&l, &t) in labels.iter().zip(truth) {
        match (l, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(PrecisionRecall { precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fn_) })
}

/// Mean and sample standard deviation over the runs where a value exists.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            math::sqrt(ss / (n - 1) as f64)
        } else {
            0.0
        };
        Some(Self { mean, sd, n })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeclusterReport {
    pub n_runs: usize,
    pub true_branching_ratio: f64,
    pub branching_ratio: Summary,
    /// `|estimated − true|` branching ratio.
    pub branching_error: Summary,
    pub precision: Option<Summary>,
    pub recall: Option<Summary>,
}

/// Aggregates `n_runs` independent declusterings; run `r` uses substream `r`.
pub fn decluster_report(
    p: &ResponsibilityMatrix,
    truth: &[bool],
    n_runs: usize,
    seed: u64,
) -> Result<DeclusterReport> {
    if n_runs == 0 {
        return Err(domain("at least one run is required"));
    }
    if truth.len() != p.n_events() {
        return Err(shape(format!("{} truth labels for {} events", truth.len(), p.n_events())));
    }
    let true_ratio = branching_ratio(truth)?;
    let (mut ratios, mut errors, mut precisions, mut recalls) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for run in 0..n_runs {
        let labels = decluster_stream(p.backgrounds(), seed, run as u64);
        let r = branching_ratio(&labels)?;
        ratios.push(r);
        errors.push(math::abs(r - true_ratio));
        let pr = precision_recall(&labels, truth)?;
        precisions.extend(pr.precision);
        recalls.extend(pr.recall);
    }
    Ok(DeclusterReport {
        n_runs,
        true_branching_ratio: true_ratio,
        branching_ratio: Summary::of(&ratios).expect("n_runs > 0"),
        branching_error: Summary::of(&errors).expect("n_runs > 0"),
        precision: Summary::of(&precisions),
        recall: Summary::of(&recalls),
    })
}
