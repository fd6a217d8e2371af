//! End-to-end behaviour of the three estimators on small simulated catalogs.

use hawkesnet_core::fit::{
    fit_nonparam, fit_parametric, fit_temporal, NonparamConfig, ParametricConfig, TemporalConfig,
};
use hawkesnet_core::intensity::loglik_parametric;
use hawkesnet_core::simulate::{parametric_samplers, simulate};
use hawkesnet_core::{Event, EventCatalog, ParametricParams, Region, TriggeringMatrix};

fn small_k() -> TriggeringMatrix {
    TriggeringMatrix::from_rows(&[
        vec![0.3, 0.2, 0.0, 0.0, 0.0],
        vec![0.2, 0.3, 0.1, 0.0, 0.0],
        vec![0.0, 0.1, 0.2, 0.2, 0.0],
        vec![0.0, 0.0, 0.2, 0.2, 0.1],
        vec![0.0, 0.0, 0.0, 0.1, 0.3],
    ])
    .unwrap()
}

fn catalog(k: &TriggeringMatrix, horizon: f64, seed: u64) -> EventCatalog {
    let (dl, sp) = parametric_samplers(0.6, 0.3).unwrap();
    simulate(k, &vec![0.2; k.dim()], &dl, &sp, horizon, Region::unit(), seed, Default::default()).unwrap()
}

#[test]
fn loglik_prefers_the_true_decay() {
    let k = small_k();
    let mut wins = 0;
    for seed in 0..10 {
        let c = catalog(&k, 250.0, seed);
        // background weights that spread γT expected events over the catalog
        let beta = TriggeringMatrix::filled(5, 0.2 * 250.0 / c.len() as f64);
        let truth = ParametricParams::new(k.clone(), beta.clone(), 0.6, 0.3, 0.3).unwrap();
        let off = ParametricParams::new(k.clone(), beta, 1.2, 0.3, 0.3).unwrap();
        if loglik_parametric(&truth, &c).unwrap().value >= loglik_parametric(&off, &c).unwrap().value {
            wins += 1;
        }
    }
    assert!(wins >= 8, "{wins} of 10");
}

#[test]
fn temporal_fit_finds_no_triggering_in_poisson_data() {
    let zero = TriggeringMatrix::zeros(5);
    let mut mean = vec![0.0; 25];
    for seed in 0..10 {
        let fit = fit_temporal(&catalog(&zero, 500.0, 100 + seed), &TemporalConfig::default()).unwrap();
        for (m, v) in mean.iter_mut().zip(fit.params.k.as_slice()) {
            *m += v / 10.0;
        }
    }
    // slow-decay local optima leave a few entries above 0.1 on average
    let overall = mean.iter().sum::<f64>() / 25.0;
    assert!(overall < 0.1, "{overall}");
    assert!(mean.iter().all(|&m| m < 0.2), "{mean:?}");
}

#[test]
fn nonparametric_fit_finds_little_triggering_in_poisson_data() {
    let zero = TriggeringMatrix::zeros(5);
    for seed in 0..10 {
        let c = catalog(&zero, 250.0, 200 + seed);
        let fit = fit_nonparam(&c, &NonparamConfig::default()).unwrap();
        let total: f64 = fit.model.k.as_slice().iter().sum();
        assert!(total < 0.05 * c.len() as f64, "seed {seed}: {total}");
    }
}

#[test]
fn em_traces_are_sound() {
    let k = small_k();
    for seed in 0..3 {
        let c = catalog(&k, 150.0, 300 + seed);
        let p = fit_parametric(&c, &ParametricConfig { max_iters: 60, ..Default::default() }).unwrap();
        assert!(p.trace.max_column_deviation() <= 1e-9);
        assert!(p.trace.max_loglik_drop() <= 1e-6, "drop {}", p.trace.max_loglik_drop());
        assert!(p.params.omega > 0.0 && p.params.sigma2 > 0.0);
        let t = fit_temporal(&c, &TemporalConfig::default()).unwrap();
        assert!(t.trace.max_column_deviation() <= 1e-9);
        assert!(t.trace.max_loglik_drop() <= 1e-6);
        let n = fit_nonparam(&c, &NonparamConfig::default()).unwrap();
        assert!(n.trace.max_column_deviation() <= 1e-9);
        assert!((n.model.g1.integral() - 1.0).abs() < 1e-6);
        assert!((n.model.h.integral() - 1.0).abs() < 1e-6);
    }
}

fn relabel(c: &EventCatalog, perm: &[usize]) -> EventCatalog {
    let ev = c.events().iter().map(|e| Event::new(perm[e.node], e.t, e.x, e.y)).collect();
    EventCatalog::new(ev, c.horizon(), c.region(), c.n_nodes()).unwrap()
}

#[test]
fn parametric_fit_is_equivariant_under_relabeling() {
    let c = catalog(&small_k(), 120.0, 7);
    let perm = [3, 0, 4, 1, 2];
    let cfg = ParametricConfig { max_iters: 20, ..Default::default() };
    let a = fit_parametric(&c, &cfg).unwrap();
    let b = fit_parametric(&relabel(&c, &perm), &cfg).unwrap();
    for u in 0..5 {
        for v in 0..5 {
            let (x, y) = (a.params.k.get(u, v), b.params.k.get(perm[u], perm[v]));
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "K {u} {v}");
            let (x, y) = (a.params.beta.get(u, v), b.params.beta.get(perm[u], perm[v]));
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "beta {u} {v}");
        }
    }
}

#[test]
fn nonparametric_fit_is_invariant_to_spatial_scale() {
    let c = catalog(&small_k(), 120.0, 9);
    let doubled: Vec<Event> = c.events().iter().map(|e| Event::new(e.node, e.t, 2.0 * e.x, 2.0 * e.y)).collect();
    let r = c.region();
    let region = Region::new(2.0 * r.x0, 2.0 * r.x1, 2.0 * r.y0, 2.0 * r.y1).unwrap();
    let c2 = EventCatalog::new(doubled, c.horizon(), region, c.n_nodes()).unwrap();
    let cfg = NonparamConfig { t_max: Some(5.0), r_max: Some(1.5), max_iters: 50, ..Default::default() };
    let cfg2 = NonparamConfig { r_max: Some(3.0), ..cfg.clone() };
    let a = fit_nonparam(&c, &cfg).unwrap();
    let b = fit_nonparam(&c2, &cfg2).unwrap();
    assert_eq!(a.model.k, b.model.k);
    assert_eq!(a.model.g1, b.model.g1);
    assert_eq!(b.model.h.support(), 2.0 * a.model.h.support());
    for (x, y) in a.model.h.values().iter().zip(b.model.h.values()) {
        assert_eq!(*y, x / 2.0);
    }
}
