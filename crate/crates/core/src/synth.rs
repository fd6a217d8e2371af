//! Ground-truth triggering matrices from a weighted stochastic block model,
//! filtered by the Hawkes stability condition.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{domain, Error, Result};
use crate::math;
use crate::model::TriggeringMatrix;
use crate::rng::seeded;

/// How the two exponential weight parameters are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum WeightParam {
    /// `mean_in`/`mean_out` are means of the exponential weights.
    #[default]
    Mean,
    /// `mean_in`/`mean_out` are rates: the mean weight is their reciprocal.
    Rate,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WsbmSpec {
    pub community_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub mean_in: f64,
    pub mean_out: f64,
    pub weight_param: WeightParam,
    pub seed: u64,
}

impl WsbmSpec {
    /// Four communities of sizes 10, 10, 5, 5; edge probabilities 0.68 and
    /// 0.2; weight means 0.1 and 0.01.
    pub fn reference(seed: u64) -> Self {
        Self {
            community_sizes: alloc::vec![10, 10, 5, 5],
            p_in: 0.68,
            p_out: 0.2,
            mean_in: 0.1,
            mean_out: 0.01,
            weight_param: WeightParam::Mean,
            seed,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.community_sizes.iter().sum()
    }

    /// Community label of every node, in node order.
    pub fn labels(&self) -> Vec<usize> {
        self.community_sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| core::iter::repeat_n(c, s))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.community_sizes.is_empty() || self.community_sizes.contains(&0) {
            return Err(domain("community sizes must be positive"));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(domain(format!("{name} = {p} is not a probability")));
            }
        }
        for (name, m) in [("mean_in", self.mean_in), ("mean_out", self.mean_out)] {
            if !(m.is_finite() && m > 0.0) {
                return Err(domain(format!("{name} must be positive, got {m}")));
            }
        }
        Ok(())
    }

    fn mean_weight(&self, within: bool) -> f64 {
        let v = if within { self.mean_in } else { self.mean_out };
        match self.weight_param {
            WeightParam::Mean => v,
            WeightParam::Rate => 1.0 / v,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> TriggeringMatrix {
        let labels = self.labels();
        let n = labels.len();
        let exp_in = Exp::new(1.0 / self.mean_weight(true)).expect("validated rate");
        let exp_out = Exp::new(1.0 / self.mean_weight(false)).expect("validated rate");
        let mut k = TriggeringMatrix::zeros(n);
        for u in 0..n {
            for v in u..n {
                let within = labels[u] == labels[v];
                let p = if within { self.p_in } else { self.p_out };
                if rng.random::<f64>() < p {
                    let w = if within { exp_in.sample(rng) } else { exp_out.sample(rng) };
                    k.set(u, v, w);
                    k.set(v, u, w);
                }
            }
        }
        k
    }
}

/// One symmetric draw: each unordered pair (diagonal included) gets a
/// Bernoulli edge and, if present, an exponential weight assigned to both
/// directions.
pub fn generate_wsbm(spec: &WsbmSpec) -> Result<TriggeringMatrix> {
    spec.validate()?;
    let mut rng = seeded(spec.seed, 0);
    Ok(spec.draw(&mut rng))
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(k: &TriggeringMatrix) -> f64 {
    let n = k.dim();
    if n == 0 || k.max_entry() == 0.0 {
        return 0.0;
    }
    let m = nalgebra::DMatrix::from_row_slice(n, n, k.as_slice());
    m.complex_eigenvalues()
        .iter()
        .map(|c| math::hypot(c.re, c.im))
        .fold(0.0, f64::max)
}

pub fn is_stable(k: &TriggeringMatrix) -> bool {
    spectral_radius(k) < 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct StableDraw {
    pub matrix: TriggeringMatrix,
    pub attempts: usize,
    pub spectral_radius: f64,
}

/// Redraws from the block model until the spectral radius is below one.
pub fn generate_stable(spec: &WsbmSpec, max_attempts: usize) -> Result<StableDraw> {
    spec.validate()?;
    if max_attempts == 0 {
        return Err(domain("max_attempts must be at least 1"));
    }
    let mut rng = seeded(spec.seed, 0);
    let mut min_radius = f64::INFINITY;
    for attempt in 1..=max_attempts {
        let k = spec.draw(&mut rng);
        let rho = spectral_radius(&k);
        if rho < 1.0 {
            return Ok(StableDraw { matrix: k, attempts: attempt, spectral_radius: rho });
        }
        min_radius = min_radius.min(rho);
    }
    Err(Error::StabilityExhausted { attempts: max_attempts, min_radius })
}

/// Fraction of `n_draws` consecutive draws that pass the stability filter.
pub fn acceptance_rate(spec: &WsbmSpec, n_draws: usize) -> Result<f64> {
    spec.validate()?;
    let mut rng = seeded(spec.seed, 0);
    let ok = (0..n_draws).filter(|_| is_stable(&spec.draw(&mut rng))).count();
    Ok(ok as f64 / n_draws.max(1) as f64)
}
