//! Evaluation of inferred triggering matrices and kernels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, shape, Result};
use crate::math;
use crate::model::{BinnedKernel, TriggeringMatrix};

/// Zeroes entries below `theta`; survivors are kept or set to one.
pub fn threshold_matrix(k: &TriggeringMatrix, theta: f64, binarize: bool) -> TriggeringMatrix {
    let n = k.dim();
    let mut out = TriggeringMatrix::zeros(n);
    for u in 0..n {
        for v in 0..n {
            let w = k.get(u, v);
            if w >= theta && !(w == 0.0 && binarize) {
                out.set(u, v, if binarize { 1.0 } else { w });
            }
        }
    }
    out
}

/// Reciprocated share of the off-diagonal weight; `None` without any.
pub fn reciprocity_r1(k: &TriggeringMatrix) -> Option<f64> {
    let n = k.dim();
    let (mut recip, mut total) = (0.0, 0.0);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                recip += k.get(u, v).min(k.get(v, u));
                total += k.get(u, v);
            }
        }
    }
    (total > 0.0).then(|| recip / total)
}

/// Pair-level reciprocity means over unordered pairs with some weight.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeReciprocity {
    pub ratio: f64,
    pub coherence: f64,
    pub entropy: f64,
    /// Pairs that entered the means.
    pub pairs: usize,
}

pub fn reciprocity_node(k: &TriggeringMatrix) -> Option<NodeReciprocity> {
    let n = k.dim();
    let (mut ratio, mut coherence, mut entropy) = (0.0, 0.0, 0.0);
    let mut pairs = 0usize;
    for u in 0..n {
        for v in u + 1..n {
            let (a, b) = (k.get(u, v), k.get(v, u));
            let s = a + b;
            if !(s > 0.0) {
                continue;
            }
            pairs += 1;
            ratio += a.min(b) / a.max(b);
            coherence += 2.0 * math::sqrt(a * b) / s;
            entropy += xlog2x_neg(a / s) + xlog2x_neg(b / s);
        }
    }
    (pairs > 0).then(|| {
        let m = pairs as f64;
        NodeReciprocity { ratio: ratio / m, coherence: coherence / m, entropy: entropy / m, pairs }
    })
}

fn xlog2x_neg(r: f64) -> f64 {
    if r > 0.0 { -r * math::log2(r) } else { 0.0 }
}

/// Pearson correlation between `K[u][v]` and `K[v][u]` over pairs `u < v`.
pub fn symmetry_correlation(k: &TriggeringMatrix) -> Option<f64> {
    let n = k.dim();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            xs.push(k.get(u, v));
            ys.push(k.get(v, u));
        }
    }
    pearson(&xs, &ys)
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return None;
    }
    Some((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// R1, the three pair-level means and the symmetry correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReciprocitySuite {
    pub r1: Option<f64>,
    pub ratio: Option<f64>,
    pub coherence: Option<f64>,
    pub entropy: Option<f64>,
    pub correlation: Option<f64>,
}

impl ReciprocitySuite {
    /// `[r1, ratio, coherence, entropy, correlation]`.
    pub fn values(&self) -> [Option<f64>; 5] {
        [self.r1, self.ratio, self.coherence, self.entropy, self.correlation]
    }
}

pub fn reciprocity_suite(k: &TriggeringMatrix) -> ReciprocitySuite {
    let node = reciprocity_node(k);
    ReciprocitySuite {
        r1: reciprocity_r1(k),
        ratio: node.map(|r| r.ratio),
        coherence: node.map(|r| r.coherence),
        entropy: node.map(|r| r.entropy),
        correlation: symmetry_correlation(k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocPoint {
    /// Entries `≥ threshold` are predicted edges.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocCurve {
    /// From `+∞` down to the smallest observed score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Exact ROC over the distinct off-diagonal scores; an edge is any nonzero
/// truth entry. `Ok(None)` when the truth has no edges or no non-edges.
pub fn roc_auc(inferred: &TriggeringMatrix, truth: &TriggeringMatrix) -> Result<Option<RocCurve>> {
    let n = inferred.dim();
    if truth.dim() != n {
        return Err(shape(format!("{n}x{n} inferred matrix against {0}x{0} truth", truth.dim())));
    }
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(n * n.saturating_sub(1));
    for u in 0..n {
        for v in 0..n {
            if u != v {
                scored.push((inferred.get(u, v), truth.get(u, v) != 0.0));
            }
        }
    }
    let pos = scored.iter().filter(|s| s.1).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Ok(None);
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < scored.len() {
        let value = scored[k].0;
        while k < scored.len() && scored[k].0 == value {
            if scored[k].1 { tp += 1 } else { fp += 1 }
            k += 1;
        }
        let prev = points[points.len() - 1];
        let p = RocPoint { threshold: value, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) * 0.5;
        points.push(p);
    }
    Ok(Some(RocCurve { points, auc }))
}

/// Square-root normalised mutual information (natural logarithms). If
/// either partition has a single community the value is 1 for identical
/// partitions and 0 otherwise.
pub fn nmi(s1: &[usize], s2: &[usize]) -> Result<f64> {
    if s1.len() != s2.len() {
        return Err(shape(format!("partitions of {} and {} nodes", s1.len(), s2.len())));
    }
    if s1.is_empty() {
        return Err(domain("partitions must be nonempty"));
    }
    let (a, na) = relabel(s1);
    let (b, nb) = relabel(s2);
    let n = a.len() as f64;
    let mut joint = vec![0usize; na * nb];
    let mut ca = vec![0usize; na];
    let mut cb = vec![0usize; nb];
    for (&x, &y) in a.iter().zip(&b) {
        joint[x * nb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let entropy = |c: &[usize]| -> f64 {
        c.iter()
            .filter(|&&k| k > 0)
            .map(|&k| {
                let p = k as f64 / n;
                -p * math::ln(p)
            })
            .sum()
    };
    let (ha, hb) = (entropy(&ca), entropy(&cb));
    if ha == 0.0 || hb == 0.0 {
        let same = same_partition(&a, &b);
        return Ok(if same { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for x in 0..na {
        for y in 0..nb {
            let k = joint[x * nb + y];
            if k > 0 {
                let pxy = k as f64 / n;
                mi += pxy * math::ln(pxy * n * n / (ca[x] as f64 * cb[y] as f64));
            }
        }
    }
    Ok((mi / math::sqrt(ha * hb)).clamp(0.0, 1.0))
}

/// Labels renumbered densely in order of first appearance.
fn relabel(s: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    let out = s
        .iter()
        .map(|&l| match seen.iter().find(|p| p.0 == l) {
            Some(p) => p.1,
            None => {
                seen.push((l, seen.len()));
                seen.len() - 1
            }
        })
        .collect();
    (out, seen.len())
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    // both are first-appearance relabelings, so equal partitions coincide
    a == b
}

/// `∫ |fitted − truth|` over `[0, max(support, upper)]` by the composite
/// midpoint rule, splitting the grid across the fitted bins (and the tail
/// past the fitted support) in proportion to their lengths.
pub fn kernel_l1<F: Fn(f64) -> f64>(fitted: &BinnedKernel, truth: F, upper: f64, grid_n: usize) -> f64 {
    let support = fitted.support();
    let end = support.max(upper);
    let grid_n = grid_n.max(1);
    let mut segments: Vec<(f64, f64, f64)> = (0..fitted.n_bins())
        .map(|k| (fitted.edges()[k], fitted.edges()[k + 1], fitted.values()[k]))
        .collect();
    if end > support {
        segments.push((support, end, 0.0));
    }
    let mut total = 0.0;
    for (a, b, value) in segments {
        let len = b - a;
        let m = ((grid_n as f64 * len / end) as usize).max(1);
        let step = len / m as f64;
        let mut acc = 0.0;
        for q in 0..m {
            let x = a + (q as f64 + 0.5) * step;
            acc += math::abs(value - truth(x));
        }
        total += acc * step;
    }
    total
}

/// `∫_0^upper |f − g|` for two continuous densities by the composite
/// midpoint rule on `grid_n` cells.
pub fn density_l1<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G, upper: f64, grid_n: usize) -> f64 {
    let grid_n = grid_n.max(1);
    let step = upper / grid_n as f64;
    let mut acc = 0.0;
    for q in 0..grid_n {
        let x = (q as f64 + 0.5) * step;
        acc += math::abs(f(x) - g(x));
    }
    acc * step
}

/// Exponential density `ω e^{−ωt}` on `t ≥ 0`.
pub fn exponential_pdf(omega: f64, t: f64) -> f64 {
    if t < 0.0 { 0.0 } else { omega * math::exp(-omega * t) }
}

/// Radial density of an isotropic Gaussian with per-axis variance `σ²`:
/// `(r/σ²) e^{−r²/2σ²}`.
pub fn rayleigh_pdf(sigma2: f64, r: f64) -> f64 {
    if r < 0.0 { 0.0 } else { r / sigma2 * math::exp(-r * r / (2.0 * sigma2)) }
}

/// Point past which an exponential density keeps under `e^{−40}` of its mass.
pub fn exponential_upper(omega: f64) -> f64 {
    40.0 / omega
}

/// Point past which a Rayleigh density keeps under `e^{−40}` of its mass.
pub fn rayleigh_upper(sigma2: f64) -> f64 {
    math::sqrt(80.0 * sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> TriggeringMatrix {
        TriggeringMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn thresholding() {
        let k = m(&[&[0.2, 0.05], &[0.3, 0.0]]);
        assert_eq!(threshold_matrix(&k, 0.1, true), m(&[&[1.0, 0.0], &[1.0, 0.0]]));
        assert_eq!(threshold_matrix(&k, 0.0, false), k);
        assert_eq!(threshold_matrix(&k, 0.5, false).max_entry(), 0.0);
        assert_eq!(threshold_matrix(&k, 0.0, true), m(&[&[1.0, 1.0], &[1.0, 0.0]]));
    }

    #[test]
    fn r1_examples() {
        assert_eq!(reciprocity_r1(&m(&[&[0.0, 2.0], &[1.0, 0.0]])), Some(2.0 / 3.0));
        assert_eq!(reciprocity_r1(&m(&[&[0.0, 1.0], &[0.0, 0.0]])), Some(0.0));
        assert_eq!(reciprocity_r1(&m(&[&[5.0, 0.0], &[0.0, 1.0]])), None);
    }

    #[test]
    fn node_reciprocity_examples() {
        let r = reciprocity_node(&m(&[&[0.0, 3.0], &[1.0, 0.0]])).unwrap();
        assert!((r.ratio - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.coherence - 3f64.sqrt() / 2.0).abs() < 1e-15);
        let h = -(0.75 * 0.75f64.log2()) - 0.25 * 0.25f64.log2();
        assert!((r.entropy - h).abs() < 1e-15);
        let one = reciprocity_node(&m(&[&[0.0, 1.0], &[0.0, 0.0]])).unwrap();
        assert_eq!((one.ratio, one.coherence, one.entropy), (0.0, 0.0, 0.0));
        let z = m(&[&[0.0, 2.0, 0.0], &[2.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert_eq!(reciprocity_node(&z).unwrap().pairs, 1);
    }

    #[test]
    fn correlation_examples() {
        let sym = m(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 4.0], &[2.0, 4.0, 0.0]]);
        assert!((symmetry_correlation(&sym).unwrap() - 1.0).abs() < 1e-15);
        let anti = m(&[&[0.0, 1.0, 2.0], &[4.0, 0.0, 3.0], &[3.0, 2.0, 0.0]]);
        assert!((symmetry_correlation(&anti).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(symmetry_correlation(&TriggeringMatrix::filled(3, 1.0)), None);
    }

    #[test]
    fn auc_extremes() {
        let truth = m(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]);
        assert_eq!(roc_auc(&truth, &truth).unwrap().unwrap().auc, 1.0);
        let flat = TriggeringMatrix::filled(3, 0.4);
        assert_eq!(roc_auc(&flat, &truth).unwrap().unwrap().auc, 0.5);
        assert_eq!(roc_auc(&flat, &TriggeringMatrix::zeros(3)).unwrap(), None);
        assert!(roc_auc(&flat, &TriggeringMatrix::zeros(2)).is_err());
    }

    #[test]
    fn nmi_examples() {
        assert!((nmi(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap() - 1.0).abs() < 1e-15);
        let v = nmi(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap();
        assert!((v - (2f64.ln() / 4f64.ln()).sqrt()).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0], &[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 0]).unwrap(), 0.0);
        assert!(nmi(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn l1_basics() {
        let mut k = BinnedKernel::uniform(4, 2.0).unwrap();
        k.values_mut().fill(0.5);
        assert!(kernel_l1(&k, |x| if x <= 2.0 { 0.5 } else { 0.0 }, 2.0, 10_000) < 1e-15);
        let zero = BinnedKernel::uniform(4, 2.0).unwrap();
        let l1 = kernel_l1(&zero, |t| exponential_pdf(0.6, t), exponential_upper(0.6), 100_000);
        assert!((l1 - 1.0).abs() < 1e-6);
        let l1 = kernel_l1(&zero, |r| rayleigh_pdf(0.3, r), rayleigh_upper(0.3), 100_000);
        assert!((l1 - 1.0).abs() < 1e-6);
    }
}
