//! Per-event background bandwidths from `n_p`-th nearest neighbours.

use alloc::vec::Vec;

use crate::error::{domain, Result};
use crate::math;
use crate::model::EventCatalog;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bandwidths {
    pub d: Vec<f64>,
    /// Set when the catalog has at most `n_p` events and every bandwidth
    /// fell back to the region diameter.
    pub flagged: bool,
}

/// `d_i = max(eps_r, distance from i to its n_p-th nearest other event)`.
pub fn adaptive_bandwidths(catalog: &EventCatalog, n_p: usize, eps_r: f64) -> Result<Bandwidths> {
    if n_p == 0 {
        return Err(domain("n_p must be at least 1"));
    }
    if !(eps_r.is_finite() && eps_r > 0.0) {
        return Err(domain("eps_r must be positive"));
    }
    let ev = catalog.events();
    if ev.len() <= n_p {
        let fallback = eps_r.max(catalog.region().diagonal());
        return Ok(Bandwidths { d: alloc::vec![fallback; ev.len()], flagged: true });
    }
    let mut scratch: Vec<f64> = Vec::with_capacity(ev.len());
    let d = ev
        .iter()
        .enumerate()
        .map(|(i, a)| {
            scratch.clear();
            scratch.extend(
                ev.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .map(|(_, b)| math::dist2(a.x, a.y, b.x, b.y)),
            );
            let (_, kth, _) = scratch.select_nth_unstable_by(n_p - 1, f64::total_cmp);
            math::sqrt(*kth).max(eps_r)
        })
        .collect();
    Ok(Bandwidths { d, flagged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, Region};
    use alloc::vec;

    fn catalog(points: &[(f64, f64)]) -> EventCatalog {
        let ev = points
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| Event::new(0, k as f64, x, y))
            .collect();
        EventCatalog::new(ev, points.len() as f64 + 1.0, Region::bounding(&[]), 1).unwrap()
    }

    #[test]
    fn collinear_nearest_neighbours() {
        let b = adaptive_bandwidths(&catalog(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]), 1, 0.01)
            .unwrap();
        assert_eq!(b.d, vec![1.0, 1.0, 2.0]);
        assert!(!b.flagged);
    }

    #[test]
    fn colocated_events_hit_the_floor() {
        let b = adaptive_bandwidths(&catalog(&[(0.5, 0.5); 5]), 2, 0.03).unwrap();
        assert!(b.d.iter().all(|&d| d == 0.03));
    }

    #[test]
    fn tiny_catalog_is_flagged() {
        let b = adaptive_bandwidths(&catalog(&[(0.1, 0.1), (0.2, 0.2)]), 15, 0.001).unwrap();
        assert!(b.flagged);
        assert!(b.d.iter().all(|&d| (d - 2f64.sqrt()).abs() < 1e-15));
    }
}
