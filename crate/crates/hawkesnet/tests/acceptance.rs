//! Acceptance suite. Prints one PASS/FAIL line per criterion followed by the
//! measured values. Set `ACCEPTANCE_STRICT=1` to exit non-zero on a FAIL and
//! `GOWALLA_DIR` to a directory holding `loc-gowalla_totalCheckins.txt` and
//! `loc-gowalla_edges.txt` to run the check-in replication on real data.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::time::Instant;

use hawkesnet::cli::KernelErrors;
use hawkesnet::ingest::{
    date_timestamp, preset, read_checkins, read_friendships, run_pipeline, to_catalog, users, CheckinRecord,
    FriendEdgeList, PipelineSpec, Restriction,
};
use hawkesnet_core::decluster::{decluster_report, DeclusterReport};
use hawkesnet_core::eventnet::{
    degree_preserving_randomize, motif_census_3, motif_zscores, EventGraph, Motif, MotifCounts,
};
use hawkesnet_core::fit::{
    adaptive_bandwidths, fit_nonparam, fit_parametric, fit_temporal, FitTrace, NonparamConfig, NonparamFit,
    ParametricConfig, ParametricFit, TemporalConfig, TemporalFit,
};
use hawkesnet_core::intensity::intensity_parametric;
use hawkesnet_core::metrics::{exponential_upper, kernel_l1, nmi, reciprocity_suite, roc_auc, ReciprocitySuite};
use hawkesnet_core::simulate::{parametric_samplers, simulate};
use hawkesnet_core::synth::{generate_stable, WsbmSpec};
use hawkesnet_core::{
    BinnedKernel, Event, EventCatalog, ParametricParams, Region, ResponsibilityMatrix, TriggeringMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const U_GAMMA: f64 = 0.2;
const OMEGA: f64 = 0.6;
const SIGMA2: f64 = 0.3;
const HORIZON: f64 = 250.0;
const N_SIMS: usize = 10;
const DECLUSTER_RUNS: usize = 20;

struct Verdict {
    passed: usize,
    failed: usize,
}

impl Verdict {
    fn check(&mut self, name: &str, pass: bool, lines: &[String]) {
        println!("{} {name}", if pass { "PASS" } else { "FAIL" });
        for l in lines {
            println!("     {l}");
        }
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1).max(1) as f64).sqrt()
}

fn ms(v: &[f64]) -> String {
    format!("{:.4} (sd {:.4})", mean(v), sd(v))
}

struct Fits {
    truth: TriggeringMatrix,
    catalog: EventCatalog,
    np: NonparamFit,
    pm: ParametricFit,
    tp: TemporalFit,
    /// Wall time of the simulation and the two spatiotemporal fits.
    seconds: f64,
}

fn parametric_config() -> ParametricConfig {
    ParametricConfig { max_iters: 100, ..Default::default() }
}

fn simulate_and_fit(truth: &TriggeringMatrix, seed: u64) -> Fits {
    let (d, s) = parametric_samplers(OMEGA, SIGMA2).unwrap();
    let gamma = vec![U_GAMMA; truth.dim()];
    let t0 = Instant::now();
    let catalog = simulate(truth, &gamma, &d, &s, HORIZON, Region::unit(), seed, Default::default()).unwrap();
    let np = fit_nonparam(&catalog, &NonparamConfig::default()).unwrap();
    let pm = fit_parametric(&catalog, &parametric_config()).unwrap();
    let seconds = t0.elapsed().as_secs_f64();
    let tp = fit_temporal(&catalog, &TemporalConfig::default()).unwrap();
    Fits { truth: truth.clone(), catalog, np, pm, tp, seconds }
}

fn stable_matrix(seed: u64) -> TriggeringMatrix {
    generate_stable(&WsbmSpec::reference(seed), 100_000).unwrap().matrix
}

fn kernel_recovery(v: &mut Verdict, fits: &[Fits], seconds: f64) {
    let mut np_t = Vec::new();
    let mut np_s = Vec::new();
    let mut pm_t = Vec::new();
    for f in fits {
        let e = KernelErrors::nonparametric(&f.np.model.g1, &f.np.model.h, OMEGA, Some(SIGMA2));
        np_t.push(e.temporal);
        np_s.push(e.spatial.unwrap());
        pm_t.push(KernelErrors::parametric(f.pm.params.omega, None, OMEGA, None).temporal);
    }
    let pass = mean(&np_t) <= 0.15 && mean(&np_s) <= 0.12 && mean(&pm_t) <= 0.06 && seconds <= 600.0;
    v.check(
        "1 kernel recovery",
        pass,
        &[
            format!("nonparametric temporal L1 {} (need <= 0.15)", ms(&np_t)),
            format!("nonparametric spatial L1  {} (need <= 0.12)", ms(&np_s)),
            format!("parametric temporal L1    {} (need <= 0.06)", ms(&pm_t)),
            format!("simulation and spatiotemporal fitting took {seconds:.0} s (budget 600 s)"),
        ],
    );
}

fn suite_means(ks: &[&TriggeringMatrix]) -> [f64; 5] {
    let suites: Vec<ReciprocitySuite> = ks.iter().map(|k| reciprocity_suite(k)).collect();
    let mut out = [0.0; 5];
    for (s, slot) in out.iter_mut().enumerate() {
        let vals: Vec<f64> = suites.iter().filter_map(|x| x.values()[s]).collect();
        *slot = if vals.is_empty() { f64::NAN } else { mean(&vals) };
    }
    out
}

fn reciprocity_ordering(v: &mut Verdict, fits: &[Fits]) {
    let np = suite_means(&fits.iter().map(|f| &f.np.model.k).collect::<Vec<_>>());
    let pm = suite_means(&fits.iter().map(|f| &f.pm.params.k).collect::<Vec<_>>());
    let tp = suite_means(&fits.iter().map(|f| &f.tp.params.k).collect::<Vec<_>>());
    let names = ["r1", "ratio", "coherence", "entropy", "correlation"];
    let ranked = (0..5).all(|s| np[s] > tp[s] && pm[s] > tp[s]);
    let pass = np[0] - tp[0] >= 0.1 && pm[0] - tp[0] >= 0.1 && ranked;
    let lines: Vec<String> = names
        .iter()
        .enumerate()
        .map(|(s, n)| format!("{n:<12} nonparametric {:.4}  parametric {:.4}  temporal {:.4}", np[s], pm[s], tp[s]))
        .collect();
    v.check("2 reciprocity ordering", pass, &lines);
}

fn aucs(f: &Fits) -> [f64; 3] {
    let a = |k: &TriggeringMatrix| roc_auc(k, &f.truth).unwrap().map_or(f64::NAN, |c| c.auc);
    [a(&f.np.model.k), a(&f.pm.params.k), a(&f.tp.params.k)]
}

fn edge_reconstruction(v: &mut Verdict, fits: &[Fits]) {
    let all: Vec<[f64; 3]> = fits.iter().map(aucs).collect();
    let col = |m: usize| all.iter().map(|a| a[m]).collect::<Vec<_>>();
    let (np, pm, tp) = (col(0), col(1), col(2));
    let pass = mean(&np) - mean(&tp) >= 0.05 && mean(&pm) >= mean(&np) - 0.02;
    v.check(
        "3 edge reconstruction",
        pass,
        &[
            format!("AUC nonparametric {}", ms(&np)),
            format!("AUC parametric    {}", ms(&pm)),
            format!("AUC temporal      {}", ms(&tp)),
            format!("nonparametric - temporal {:.4} (need >= 0.05)", mean(&np) - mean(&tp)),
            format!("parametric - nonparametric {:.4} (need >= -0.02)", mean(&pm) - mean(&np)),
        ],
    );
}

fn declustering(v: &mut Verdict, fits: &[Fits]) {
    let mut recall = Vec::new();
    let mut precision = Vec::new();
    let mut err = Vec::new();
    let mut wins = 0;
    for (k, f) in fits.iter().enumerate() {
        let truth = f.catalog.background_labels().unwrap();
        let r = |p: &ResponsibilityMatrix| -> DeclusterReport {
            decluster_report(p, &truth, DECLUSTER_RUNS, 1000 + k as u64).unwrap()
        };
        let (np, tp) = (r(&f.np.responsibilities), r(&f.tp.responsibilities));
        let get = |x: &Option<hawkesnet_core::decluster::Summary>| x.map_or(f64::NAN, |s| s.mean);
        recall.push(get(&np.recall));
        precision.push(get(&np.precision));
        err.push(np.branching_error.mean);
        if get(&np.recall) > get(&tp.recall) && get(&np.precision) > get(&tp.precision) {
            wins += 1;
        }
    }
    let pass = mean(&recall) >= 0.65 && mean(&precision) >= 0.60 && wins >= 8 && mean(&err) <= 0.08;
    v.check(
        "4 declustering",
        pass,
        &[
            format!("recall {} (need >= 0.65)", ms(&recall)),
            format!("precision {} (need >= 0.60)", ms(&precision)),
            format!("seeds where both beat the temporal fit: {wins} of {} (need >= 8)", fits.len()),
            format!("branching-ratio error {} (need <= 0.08)", ms(&err)),
        ],
    );
}

fn em_soundness(v: &mut Verdict, fits: &[&Fits]) {
    let mut col = 0.0f64;
    let mut drop = 0.0f64;
    let mut n = 0;
    let mut worst_col = |t: &FitTrace, p: &ResponsibilityMatrix| {
        n += 1;
        col = col.max(t.max_column_deviation()).max(column_deviation(p));
    };
    for f in fits {
        worst_col(&f.np.trace, &f.np.responsibilities);
        worst_col(&f.pm.trace, &f.pm.responsibilities);
        worst_col(&f.tp.trace, &f.tp.responsibilities);
        drop = drop.max(f.pm.trace.max_loglik_drop());
    }
    v.check(
        "5 EM soundness",
        col <= 1e-9 && drop <= 1e-6,
        &[
            format!("{n} fits; worst column-sum deviation over all iterations {col:.3e} (need <= 1e-9)"),
            format!("worst parametric log-likelihood drop {drop:.3e} (need <= 1e-6)"),
        ],
    );
}

/// Recomputes column sums from the stored entries.
fn column_deviation(p: &ResponsibilityMatrix) -> f64 {
    (0..p.n_events())
        .map(|j| (p.background(j) + p.column(j).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn random_catalog(rng: &mut ChaCha8Rng, n_nodes: usize, max_events: usize) -> EventCatalog {
    let n = rng.random_range(0..=max_events);
    let ev = (0..n)
        .map(|_| {
            Event::new(
                rng.random_range(0..n_nodes),
                rng.random_range(0.0..10.0),
                rng.random_range(-1.0..2.0),
                rng.random_range(-1.0..2.0),
            )
        })
        .collect();
    EventCatalog::new(ev, 10.0, Region::new(-1.0, 2.0, -1.0, 2.0).unwrap(), n_nodes).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, hi: f64) -> TriggeringMatrix {
    TriggeringMatrix::from_row_major(n, (0..n * n).map(|_| rng.random_range(0.0..hi)).collect()).unwrap()
}

fn oracle_intensity(p: &ParametricParams, c: &EventCatalog, u: usize, t: f64, x: f64, y: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut total = 0.0;
    for e in c.events() {
        let d2 = (x - e.x).powi(2) + (y - e.y).powi(2);
        total += p.beta.get(e.node, u) / (2.0 * pi * p.eta2 * c.horizon()) * (-d2 / (2.0 * p.eta2)).exp();
        if e.t < t {
            total += p.k.get(e.node, u) * p.omega * (-p.omega * (t - e.t)).exp() / (2.0 * pi * p.sigma2)
                * (-d2 / (2.0 * p.sigma2)).exp();
        }
    }
    total
}

fn oracle_auc(inferred: &TriggeringMatrix, truth: &TriggeringMatrix) -> Option<f64> {
    let n = inferred.dim();
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for u in 0..n {
        for w in 0..n {
            if u != w {
                if truth.get(u, w) != 0.0 { &mut pos } else { &mut neg }.push(inferred.get(u, w));
            }
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for a in &pos {
        for b in &neg {
            wins += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

fn oracle_nmi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut ca: HashMap<usize, f64> = HashMap::new();
    let mut cb: HashMap<usize, f64> = HashMap::new();
    let mut cab: HashMap<(usize, usize), f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_default() += 1.0;
        *cb.entry(y).or_default() += 1.0;
        *cab.entry((x, y)).or_default() += 1.0;
    }
    let h = |m: &HashMap<usize, f64>| -> f64 { m.values().map(|c| -(c / n) * (c / n).ln()).sum() };
    let (ha, hb) = (h(&ca), h(&cb));
    if ha == 0.0 || hb == 0.0 {
        return if cab.len() == ca.len() && cab.len() == cb.len() { 1.0 } else { 0.0 };
    }
    let i: f64 = cab.iter().map(|(&(x, y), &c)| (c / n) * ((c / n) / ((ca[&x] / n) * (cb[&y] / n))).ln()).sum();
    i / (ha * hb).sqrt()
}

/// Classifies each vertex triple by brute-force matching against the arc
/// sets of the four templates under all relabelings.
fn oracle_census(n: usize, edges: &[(usize, usize)]) -> MotifCounts {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
    }
    let templates: [&[(usize, usize)]; 4] = [&[(0, 1), (1, 2)], &[(0, 1), (0, 2)], &[(0, 2), (1, 2)], &[(0, 1), (1, 2), (0, 2)]];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut counts = MotifCounts::default();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let s = [a, b, c];
                let mut arcs = [[false; 3]; 3];
                for x in 0..3 {
                    for y in 0..3 {
                        arcs[x][y] = x != y && adj[s[x]][s[y]];
                    }
                }
                let links = [(0, 1), (0, 2), (1, 2)].iter().filter(|&&(x, y)| arcs[x][y] || arcs[y][x]).count();
                if links < 2 {
                    continue;
                }
                let found = templates.iter().position(|tpl| {
                    perms.iter().any(|p| {
                        let mut want = [[false; 3]; 3];
                        for &(x, y) in *tpl {
                            want[p[x]][p[y]] = true;
                        }
                        want == arcs
                    })
                });
                match found {
                    Some(0) => counts.chain += 1,
                    Some(1) => counts.fan_out += 1,
                    Some(2) => counts.fan_in += 1,
                    Some(3) => counts.feedforward += 1,
                    _ => counts.other += 1,
                }
            }
        }
    }
    counts
}

/// Exact `∫ |fitted − ω e^{−ωt}|` over `[0, upper]`: on each bin the
/// decreasing density crosses the constant at most once.
fn oracle_exponential_l1(g: &BinnedKernel, omega: f64, upper: f64) -> f64 {
    let cdf = |t: f64| 1.0 - (-omega * t).exp();
    let piece = |a: f64, b: f64, c: f64| -> f64 {
        // f(t) >= c for t <= t_star
        let t_star = if c <= 0.0 { f64::INFINITY } else { -(c / omega).ln() / omega };
        let m = t_star.clamp(a, b);
        let above = (cdf(m) - cdf(a)) - c * (m - a);
        let below = c * (b - m) - (cdf(b) - cdf(m));
        above + below
    };
    let mut total = 0.0;
    for k in 0..g.n_bins() {
        total += piece(g.edges()[k], g.edges()[k + 1], g.values()[k]);
    }
    let end = g.support().max(upper);
    if end > g.support() {
        total += cdf(end) - cdf(g.support());
    }
    total
}

fn oracle_equivalence(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut fails: BTreeMap<&str, usize> = BTreeMap::new();
    let mut note = |name: &'static str, err: f64, ok: bool| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(err);
        *fails.entry(name).or_insert(0) += usize::from(!ok);
    };
    for _ in 0..50 {
        let c = random_catalog(&mut rng, 3, 12);
        let p = ParametricParams::new(
            random_matrix(&mut rng, 3, 0.5),
            random_matrix(&mut rng, 3, 1.0),
            rng.random_range(0.1..3.0),
            rng.random_range(0.05..1.0),
            rng.random_range(0.05..1.0),
        )
        .unwrap();
        let (u, t, x, y) = (rng.random_range(0..3), rng.random_range(0.0..10.0), rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0));
        let got = intensity_parametric(&p, &c, u, t, x, y).unwrap();
        let want = oracle_intensity(&p, &c, u, t, x, y);
        note("intensity", (got - want).abs() / want.abs().max(1.0), close(got, want, 1e-12));
    }
    for _ in 0..50 {
        let n = rng.random_range(2..8);
        let inferred = TriggeringMatrix::from_row_major(n, (0..n * n).map(|_| rng.random_range(0..4) as f64).collect()).unwrap();
        let truth = TriggeringMatrix::from_row_major(n, (0..n * n).map(|_| f64::from(rng.random::<f64>() < 0.4)).collect()).unwrap();
        let got = roc_auc(&inferred, &truth).unwrap().map(|c| c.auc);
        let want = oracle_auc(&inferred, &truth);
        let err = match (got, want) {
            (Some(g), Some(w)) => (g - w).abs(),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        };
        note("auc", err, err <= 1e-12);
    }
    for _ in 0..50 {
        let len = rng.random_range(1..40);
        let a: Vec<usize> = (0..len).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<usize> = (0..len).map(|_| rng.random_range(0..5)).collect();
        let err = (nmi(&a, &b).unwrap() - oracle_nmi(&a, &b)).abs();
        note("nmi", err, err <= 1e-12);
    }
    for _ in 0..50 {
        let n = rng.random_range(3..12);
        let edges: BTreeSet<(usize, usize)> =
            (0..rng.random_range(0..n * 3)).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).filter(|(a, b)| a != b).collect();
        let edges: Vec<(usize, usize)> = edges.into_iter().collect();
        let same = motif_census_3(&EventGraph::new(n, edges.clone()).unwrap()) == oracle_census(n, &edges);
        note("motif census", if same { 0.0 } else { 1.0 }, same);
    }
    for _ in 0..50 {
        let c = random_catalog(&mut rng, 2, 30);
        let n_p = rng.random_range(1..6);
        let eps_r = rng.random_range(1e-3..0.3);
        let b = adaptive_bandwidths(&c, n_p, eps_r).unwrap();
        let ev = c.events();
        let mut err = 0.0f64;
        let mut ok = true;
        if ev.len() <= n_p {
            ok = b.flagged;
        } else {
            for (i, a) in ev.iter().enumerate() {
                let mut d: Vec<f64> = ev
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != i)
                    .map(|(_, e)| ((a.x - e.x).powi(2) + (a.y - e.y).powi(2)).sqrt())
                    .collect();
                d.sort_by(f64::total_cmp);
                let want = d[n_p - 1].max(eps_r);
                err = err.max((b.d[i] - want).abs());
                ok &= close(b.d[i], want, 1e-12);
            }
        }
        note("bandwidths", err, ok);
    }
    for _ in 0..50 {
        let n_bins = rng.random_range(1..40);
        let support = rng.random_range(0.5..20.0);
        let values = (0..n_bins).map(|_| rng.random_range(0.0..1.5)).collect();
        let g = BinnedKernel::new((0..=n_bins).map(|k| support * k as f64 / n_bins as f64).collect(), values).unwrap();
        let omega = rng.random_range(0.1..3.0);
        let upper = exponential_upper(omega);
        let got = kernel_l1(&g, |t| omega * (-omega * t).exp(), upper, 100_000);
        let err = (got - oracle_exponential_l1(&g, omega, upper)).abs();
        note("kernel L1", err, err <= 1e-4);
    }
    let pass = fails.values().all(|&f| f == 0);
    let lines: Vec<String> = worst
        .iter()
        .map(|(k, w)| format!("{k:<13} 50 instances, {} mismatches, worst error {w:.3e}", fails[k]))
        .collect();
    v.check("6 oracle equivalence", pass, &lines);
}

fn motif_pipeline(v: &mut Verdict) {
    let mut edges = Vec::new();
    for k in 0..50 {
        let b = 3 * k;
        edges.extend([(b, b + 1), (b, b + 2), (b + 1, b + 2)]);
    }
    let ffl = EventGraph::new(150, edges).unwrap();
    let r = motif_zscores(&ffl, 100, 150, 7).unwrap();
    let st = r.stat(Motif::FeedForward);
    let ffl_ok = st.infinite_z || st.z.is_some_and(|z| z > 2.0);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 100;
    let mut calm = 0;
    for trial in 0..trials {
        let n = 30;
        let mut e = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < 0.08 {
                    e.push((a, b));
                }
            }
        }
        let base = EventGraph::new(n, e).unwrap();
        let g = degree_preserving_randomize(&base, 150 * base.n_edges(), 5000 + trial);
        let rep = motif_zscores(&g, 100, 150, 9000 + trial).unwrap();
        if rep.stats.iter().all(|s| !s.infinite_z && s.z.is_none_or(|z| z.abs() < 3.0)) {
            calm += 1;
        }
    }
    let frac = calm as f64 / trials as f64;
    let z = if st.infinite_z { "inf".to_string() } else { format!("{:.2}", st.z.unwrap_or(f64::NAN)) };
    v.check(
        "7 motif pipeline",
        ffl_ok && frac >= 0.95,
        &[
            format!("50 disjoint feedforward loops: FFL z = {z} (need > 2)"),
            format!("null-family graphs with all |z| < 3: {calm} of {trials} (need >= 95%)"),
        ],
    );
}

fn synthetic_city() -> (Vec<CheckinRecord>, FriendEdgeList) {
    let start = date_timestamp(2010, 4, 1).unwrap();
    let end = date_timestamp(2010, 11, 1).unwrap();
    let mut r = Vec::new();
    let mut push = |user: &str, n: usize, lat: f64, lon: f64, t0: i64| {
        for k in 0..n {
            r.push(CheckinRecord::new(user, t0 + 3600 * k as i64, lat, lon).unwrap());
        }
    };
    push("a", 120, 40.70, -74.00, start);
    push("b", 100, 40.75, -73.95, start + 10);
    push("c", 500, 40.60, -73.90, start + 20);
    push("d", 99, 40.70, -74.00, start);
    push("e", 501, 40.70, -74.00, start);
    push("f", 150, 40.70, -74.00, start);
    push("a", 30, 34.05, -118.25, start);
    push("b", 40, 40.70, -74.00, end);
    (r, FriendEdgeList::new([("a", "b"), ("b", "c"), ("d", "a"), ("e", "f")]))
}

fn friendship_matrix(ids: &[String], friends: &FriendEdgeList) -> TriggeringMatrix {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect();
    let mut m = TriggeringMatrix::zeros(ids.len());
    for (a, b) in friends.pairs() {
        if let (Some(&i), Some(&j)) = (index.get(a), index.get(b)) {
            m.set(i, j, 1.0);
            m.set(j, i, 1.0);
        }
    }
    m
}

fn gowalla(v: &mut Verdict) {
    let Some(dir) = std::env::var_os("GOWALLA_DIR") else {
        let (r, f) = synthetic_city();
        let out = run_pipeline(&r, Some(&f), &preset("nyc").unwrap().into()).unwrap();
        let counts: Vec<(usize, usize)> = out.stages.iter().map(|s| (s.users, s.records)).collect();
        let want = vec![(6, 1540), (6, 1500), (6, 1470), (4, 870), (3, 720)];
        let ego_spec = PipelineSpec { restriction: Some(Restriction::EgoOfMostConnected), ..Default::default() };
        let ego = run_pipeline(&r, Some(&f), &ego_spec).unwrap();
        let ego_ok = ego.center == Some(("a".to_string(), 2)) && users(&ego.records).len() == 3;
        v.check(
            "8 check-in pipeline (synthetic fixtures; GOWALLA_DIR unset, real-data replication not run)",
            counts == want && ego_ok,
            &[format!("stage sizes (users, check-ins) {counts:?}, expected {want:?}"), format!("ego center {:?}", ego.center)],
        );
        return;
    };
    let dir = Path::new(&dir);
    let records = read_checkins(&dir.join("loc-gowalla_totalCheckins.txt")).unwrap();
    let friends = read_friendships(&dir.join("loc-gowalla_edges.txt")).unwrap();
    let expected = [("nyc", Some(46), 8495), ("la", Some(23), 6203), ("sf", None, 9887)];
    let mut sizes_ok = true;
    let mut lines = Vec::new();
    let mut city_auc = Vec::new();
    for (city, want_users, want_records) in expected {
        let p = preset(city).unwrap();
        let out = run_pipeline(&records, Some(&friends), &p.into()).unwrap();
        let n_users = users(&out.records).len();
        let ok = out.records.len() == want_records && want_users.is_none_or(|u| u == n_users);
        sizes_ok &= ok;
        let days = (p.window.1 - p.window.0) as f64 / 86_400.0;
        let ing = to_catalog(&out.records, Some(p.window.0), Some(days), None).unwrap();
        let fit = fit_nonparam(&ing.catalog, &NonparamConfig::default()).unwrap();
        let truth = friendship_matrix(&ing.users, &friends);
        let auc = roc_auc(&fit.model.k.symmetrized(), &truth).unwrap().map_or(f64::NAN, |c| c.auc);
        city_auc.push(auc);
        lines.push(format!("{city}: {n_users} users, {} check-ins (expected {want_users:?}, {want_records}); AUC {auc:.4}", out.records.len()));
    }
    let m = mean(&city_auc);
    lines.push(format!("mean AUC {m:.4} (need 0.6692 +/- 0.08)"));
    v.check("8 check-in replication (real data)", sizes_ok && (m - 0.6692).abs() <= 0.08, &lines);
}

fn main() {
    let mut v = Verdict { passed: 0, failed: 0 };
    let started = Instant::now();

    let truth = stable_matrix(2024);
    let shared: Vec<Fits> = (0..N_SIMS as u64).map(|s| simulate_and_fit(&truth, 100 + s)).collect();
    kernel_recovery(&mut v, &shared, shared.iter().map(|f| f.seconds).sum());
    reciprocity_ordering(&mut v, &shared);

    let distinct: Vec<Fits> = (0..N_SIMS as u64).map(|s| simulate_and_fit(&stable_matrix(3000 + s), 200 + s)).collect();
    edge_reconstruction(&mut v, &distinct);
    declustering(&mut v, &shared);
    em_soundness(&mut v, &shared.iter().chain(&distinct).collect::<Vec<_>>());
    oracle_equivalence(&mut v);
    motif_pipeline(&mut v);
    gowalla(&mut v);

    println!(
        "acceptance: {} passed, {} failed in {:.0} s",
        v.passed,
        v.failed,
        started.elapsed().as_secs_f64()
    );
    if v.failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
