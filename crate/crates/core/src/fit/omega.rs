//! Decay-rate update shared by the exponential-kernel estimators.
//!
//! With `A = Σ p_ij`, `B = Σ p_ij (t_j − t_i)`, `c_i = Σ_v K[u_i][v]` and
//! `s_i = T − t_i`, the expected complete-data log-likelihood in `ω` is
//! `A ln ω − B ω − Σ_i c_i (1 − e^{−ω s_i})`. One fixed-point substitution
//! `ω ← A / (B + Σ_i c_i s_i e^{−ω s_i})` is taken from the current value and
//! halved back toward it until that objective does not decrease.

use crate::math;

pub(crate) struct DecayStats<'a> {
    pub responsibility: f64,
    pub weighted_delay: f64,
    /// `(c_i, s_i)` per event.
    pub exposure: &'a [(f64, f64)],
}

impl DecayStats<'_> {
    fn objective(&self, omega: f64) -> f64 {
        let comp: f64 = self
            .exposure
            .iter()
            .map(|&(c, s)| c * (1.0 - math::exp(-omega * s)))
            .sum();
        self.responsibility * math::ln(omega) - self.weighted_delay * omega - comp
    }

    fn fixed_point(&self, omega: f64) -> f64 {
        let tail: f64 = self
            .exposure
            .iter()
            .map(|&(c, s)| c * s * math::exp(-omega * s))
            .sum();
        self.responsibility / (self.weighted_delay + tail)
    }

    pub fn update(&self, omega: f64) -> f64 {
        if !(self.responsibility > 0.0) {
            return omega;
        }
        let target = self.fixed_point(omega);
        if !(target.is_finite() && target > 0.0) {
            return omega;
        }
        let base = self.objective(omega);
        let mut step = target - omega;
        for _ in 0..60 {
            let cand = omega + step;
            if cand > 0.0 && self.objective(cand) >= base {
                return cand;
            }
            step *= 0.5;
        }
        omega
    }
}
