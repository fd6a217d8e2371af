//! Branching-structure simulation of a multivariate spatiotemporal Hawkes
//! process with ground-truth parentage.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use crate::error::{domain, shape, Error, Result};
use crate::model::{Event, EventCatalog, Region, TriggeringMatrix};
use crate::rng::seeded;
use crate::synth::spectral_radius;

/// Draws the delay between a parent and its offspring.
pub trait DelaySampler {
    fn sample_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

/// Draws the planar displacement of an offspring from its parent.
pub trait DisplacementSampler {
    fn sample_displacement<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64);
}

/// `Δt ~ Exponential(ω)`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialDelay {
    dist: Exp<f64>,
}

impl ExponentialDelay {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(domain(format!("omega must be positive, got {omega}")));
        }
        Ok(Self { dist: Exp::new(omega).map_err(|_| domain("invalid exponential rate"))? })
    }
}

impl DelaySampler for ExponentialDelay {
    fn sample_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }
}

/// Isotropic Gaussian displacement with per-axis variance `σ²`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianDisplacement {
    dist: Normal<f64>,
}

impl GaussianDisplacement {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(domain(format!("sigma2 must be positive, got {sigma2}")));
        }
        let sd = crate::math::sqrt(sigma2);
        Ok(Self { dist: Normal::new(0.0, sd).map_err(|_| domain("invalid standard deviation"))? })
    }
}

impl DisplacementSampler for GaussianDisplacement {
    fn sample_displacement<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        (self.dist.sample(rng), self.dist.sample(rng))
    }
}

/// Samplers of the parametric kernels `ω e^{−ωt}` and `N(0, σ² I)`.
pub fn parametric_samplers(omega: f64, sigma2: f64) -> Result<(ExponentialDelay, GaussianDisplacement)> {
    Ok((ExponentialDelay::new(omega)?, GaussianDisplacement::new(sigma2)?))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    /// Keep offspring that fall after the horizon (they are never expanded).
    pub retain_beyond_horizon: bool,
}

/// Simulates on `[0, horizon] × region`. Background events are uniform;
/// each event spawns `Poisson(Σ_v K[u][v])` offspring whose node, delay and
/// displacement are drawn independently. The stack is processed last in,
/// first out.
#[allow(clippy::too_many_arguments)]
pub fn simulate<D: DelaySampler, S: DisplacementSampler>(
    k: &TriggeringMatrix,
    gamma: &[f64],
    delay: &D,
    spread: &S,
    horizon: f64,
    region: Region,
    seed: u64,
    options: SimulateOptions,
) -> Result<EventCatalog> {
    let n = k.dim();
    if gamma.len() != n {
        return Err(shape(format!("{} background rates for {n} nodes", gamma.len())));
    }
    if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(domain("background rates must be finite and nonnegative"));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(domain(format!("horizon must be positive, got {horizon}")));
    }
    let rho = spectral_radius(k);
    if rho >= 1.0 {
        return Err(Error::Unstable { radius: rho });
    }

    let mut rng = seeded(seed, 0);
    let mut events: Vec<Event> = Vec::new();
    let mut parents: Vec<Option<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();

    for (u, &g) in gamma.iter().enumerate() {
        let count = poisson(&mut rng, g * horizon);
        for _ in 0..count {
            let t = rng.random::<f64>() * horizon;
            let x = region.x0 + rng.random::<f64>() * region.width();
            let y = region.y0 + rng.random::<f64>() * region.height();
            stack.push(events.len());
            events.push(Event::new(u, t, x, y));
            parents.push(None);
        }
    }

    let cumulative: Vec<Vec<f64>> = (0..n)
        .map(|u| {
            let mut acc = 0.0;
            k.row(u).iter().map(|w| { acc += w; acc }).collect()
        })
        .collect();

    while let Some(idx) = stack.pop() {
        let parent = events[idx];
        let row = &cumulative[parent.node];
        let total = row.last().copied().unwrap_or(0.0);
        let count = poisson(&mut rng, total);
        for _ in 0..count {
            let t = parent.t + delay.sample_delay(&mut rng);
            let (dx, dy) = spread.sample_displacement(&mut rng);
            let target = rng.random::<f64>() * total;
            let node = row.partition_point(|&c| c <= target).min(n - 1);
            let child = events.len();
            events.push(Event::new(node, t, parent.x + dx, parent.y + dy));
            parents.push(Some(idx));
            if t <= horizon {
                stack.push(child);
            }
        }
    }

    if !options.retain_beyond_horizon {
        let keep: Vec<bool> = events.iter().map(|e| e.t <= horizon).collect();
        let mut new_index = alloc::vec![usize::MAX; events.len()];
        let mut kept_events = Vec::new();
        let mut kept_parents = Vec::new();
        for (old, e) in events.iter().enumerate() {
            if keep[old] {
                new_index[old] = kept_events.len();
                kept_events.push(*e);
                // parents of kept events were expanded, hence kept
                kept_parents.push(parents[old].map(|p| new_index[p]));
            }
        }
        events = kept_events;
        parents = kept_parents;
    }

    EventCatalog::with_parents(events, parents, horizon, region, n)
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}
