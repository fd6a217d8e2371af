use std::path::Path;

use hawkesnet_core::decluster::{decluster_report, decluster_run, expected_branching_ratio, Summary as RunSummary};
use hawkesnet_core::eventnet::{build_event_network, motif_zscores, Motif};
use hawkesnet_core::fit::{
    fit_nonparam, fit_parametric, fit_temporal, IterationRecord, NonparamConfig, NonparamInit, NormalizationRule,
    ParametricConfig, ParametricInit, TemporalConfig, TemporalInit,
};
use hawkesnet_core::metrics::{
    density_l1, exponential_pdf, exponential_upper, kernel_l1, nmi, rayleigh_pdf, rayleigh_upper, reciprocity_node,
    reciprocity_r1, roc_auc, symmetry_correlation, threshold_matrix, NodeReciprocity, RocCurve,
};
use hawkesnet_core::simulate::{parametric_samplers, simulate as run_simulation};
use hawkesnet_core::synth::{generate_stable, spectral_radius, WeightParam, WsbmSpec};
use hawkesnet_core::{BinnedKernel, Region, TriggeringMatrix};
use serde::Serialize;
use serde_json::{json, Value};

use super::text::{fmt, Summary};
use super::*;
use crate::error::{usage, Error, Result};
use crate::ingest::{
    date_timestamp, parse_timestamp, preset, read_checkins, read_friendships, run_pipeline, to_catalog, BoundingBox,
    PipelineSpec, Restriction,
};
use crate::io::{self, sibling};
use crate::provenance::Provenance;

/// Grid size of the kernel error quadrature.
pub const KERNEL_GRID: usize = 100_000;

fn seed_or_fresh(seed: Option<u64>) -> (u64, bool) {
    use std::hash::BuildHasher;
    match seed {
        Some(s) => (s, false),
        None => (std::collections::hash_map::RandomState::new().hash_one(std::time::SystemTime::now()), true),
    }
}

fn seed_row(s: &mut Summary, seed: (u64, bool)) {
    if seed.1 {
        s.row("seed", format!("{} (generated)", seed.0));
    } else {
        s.row("seed", seed.0);
    }
}

pub fn synth(a: &SynthArgs, argv: Vec<String>) -> Result<()> {
    let seed = seed_or_fresh(a.seed);
    let spec = WsbmSpec {
        community_sizes: a.sizes.clone(),
        p_in: a.p_in,
        p_out: a.p_out,
        mean_in: a.mean_in,
        mean_out: a.mean_out,
        weight_param: if a.rates { WeightParam::Rate } else { WeightParam::Mean },
        seed: seed.0,
    };
    let draw = generate_stable(&spec, a.max_attempts)?;
    io::save_matrix(&draw.matrix, &a.out)?;
    let communities = sibling(&a.out, ".communities.csv");
    io::save_communities(&spec.labels(), &communities)?;

    let mut prov = Provenance::new("synth", argv);
    prov.seed("seed", seed.0).output(&a.out).output(&communities);
    prov.details = json!({
        "spec": spec,
        "attempts": draw.attempts,
        "spectral_radius": draw.spectral_radius,
    });
    prov.write(&sibling(&a.out, ".provenance.json"))?;

    let mut s = Summary::default();
    s.row("matrix", a.out.display())
        .row("nodes", spec.n_nodes())
        .row("attempts", draw.attempts)
        .num("spectral radius", draw.spectral_radius);
    seed_row(&mut s, seed);
    s.print();
    Ok(())
}

pub fn simulate(a: &SimulateArgs, argv: Vec<String>) -> Result<()> {
    let seed = seed_or_fresh(a.seed);
    let k = io::load_matrix(&a.matrix)?;
    let rho = spectral_radius(&k);
    if !(rho < 1.0) {
        return Err(hawkesnet_core::Error::Unstable { radius: rho }.into());
    }
    let gamma = match a.gamma.len() {
        1 => vec![a.gamma[0]; k.dim()],
        n if n == k.dim() => a.gamma.clone(),
        n => return Err(usage(format!("--gamma has {n} values for {} nodes", k.dim()))),
    };
    let region = match a.region[..] {
        [x0, x1, y0, y1] => Region::new(x0, x1, y0, y1)?,
        _ => return Err(usage("--region takes four values x0,x1,y0,y1")),
    };
    let (delay, spread) = parametric_samplers(a.omega, a.sigma2)?;
    let catalog = run_simulation(&k, &gamma, &delay, &spread, a.horizon, region, seed.0, Default::default())?;
    io::save_events(&catalog, &a.out, None)?;

    let n = catalog.len();
    let n_bg = catalog.background_labels().map_or(0, |l| l.iter().filter(|&&b| b).count());
    let ratio = (n > 0).then(|| 1.0 - n_bg as f64 / n as f64);
    let summary_path = sibling(&a.out, ".summary.json");
    io::write_json(
        &summary_path,
        &json!({
            "n_events": n,
            "n_background": n_bg,
            "branching_ratio": ratio,
            "spectral_radius": rho,
            "horizon": a.horizon,
        }),
    )?;
    let mut prov = Provenance::new("simulate", argv);
    prov.seed("seed", seed.0).input(&a.matrix)?;
    prov.output(&a.out).output(&io::meta_path(&a.out)).output(&summary_path);
    prov.write(&sibling(&a.out, ".provenance.json"))?;

    let mut s = Summary::default();
    s.row("catalog", a.out.display()).row("events", n).row("background", n_bg).opt("branching ratio", ratio);
    seed_row(&mut s, seed);
    s.print();
    Ok(())
}

#[derive(Serialize)]
struct FitReport<'a> {
    model: &'static str,
    events: String,
    n_events: usize,
    n_nodes: usize,
    iterations: usize,
    converged: bool,
    final_loglik: f64,
    max_loglik_drop: f64,
    max_column_deviation: f64,
    params: Value,
    trace: &'a [IterationRecord],
}

pub fn fit(a: &FitArgs, argv: Vec<String>) -> Result<()> {
    let loaded = io::load_events(&a.events)?;
    for n in &loaded.notices {
        eprintln!("notice: {n}");
    }
    let catalog = &loaded.catalog;
    let dir = &a.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let random = (a.init == Init::Random).then(|| seed_or_fresh(a.seed));
    let mut prov = Provenance::new("fit", argv);
    prov.input(&a.events)?;
    if let Some(seed) = random {
        prov.seed("init", seed.0);
    }
    let k_path = dir.join("K.csv");
    let r_path = dir.join("responsibilities.csv");
    let mut outputs = vec![k_path.clone(), r_path.clone()];

    let (name, trace, converged, params) = match a.model {
        Model::Parametric => {
            let d = ParametricConfig::default();
            let cfg = ParametricConfig {
                eps: a.eps.unwrap_or(d.eps),
                max_iters: a.max_iters.unwrap_or(d.max_iters),
                decay_cutoff: if a.no_cutoff { None } else { a.decay_cutoff.or(d.decay_cutoff) },
                init: random.map_or(ParametricInit::Default, |s| ParametricInit::Random { seed: s.0 }),
                tie_variances: !a.untied_variances,
                // the serial path halves the pair work through symmetry
                parallel: rayon::current_num_threads() > 1,
                ..d
            };
            let f = fit_parametric(catalog, &cfg)?;
            io::save_matrix(&f.params.k, &k_path)?;
            io::save_responsibilities(&f.responsibilities, &r_path)?;
            let beta = dir.join("beta.csv");
            io::save_matrix(&f.params.beta, &beta)?;
            outputs.push(beta);
            let params = json!({"omega": f.params.omega, "sigma2": f.params.sigma2, "eta2": f.params.eta2});
            ("parametric", f.trace, f.converged, params)
        }
        Model::Nonparametric => {
            let d = NonparamConfig::default();
            let cfg = NonparamConfig {
                n_t_bins: a.t_bins.unwrap_or(d.n_t_bins),
                n_r_bins: a.r_bins.unwrap_or(d.n_r_bins),
                t_max: a.t_max,
                r_max: a.r_max,
                n_p: a.n_p.unwrap_or(d.n_p),
                eps_r: a.eps_r,
                normalization: match a.normalization {
                    Normalization::FullMass => NormalizationRule::FullMass,
                    Normalization::Region => NormalizationRule::Region,
                },
                eps: a.eps.unwrap_or(d.eps),
                max_iters: a.max_iters.unwrap_or(d.max_iters),
                init: random.map_or(NonparamInit::Uniform, |s| NonparamInit::Random { seed: s.0 }),
            };
            let f = fit_nonparam(catalog, &cfg)?;
            io::save_matrix(&f.model.k, &k_path)?;
            io::save_responsibilities(&f.responsibilities, &r_path)?;
            let (g1, h, bg) = (dir.join("g1.csv"), dir.join("h.csv"), dir.join("background.csv"));
            io::save_kernel(&f.model.g1, &g1)?;
            io::save_kernel(&f.model.h, &h)?;
            io::save_background(&f.model.background, &bg)?;
            outputs.extend([g1, h, bg]);
            let params = json!({"gamma": f.model.gamma, "settings": f.settings});
            ("nonparametric", f.trace, f.converged, params)
        }
        Model::Temporal => {
            let d = TemporalConfig::default();
            let cfg = TemporalConfig {
                eps: a.eps.unwrap_or(d.eps),
                max_iters: a.max_iters.unwrap_or(d.max_iters),
                decay_cutoff: if a.no_cutoff { None } else { a.decay_cutoff.or(d.decay_cutoff) },
                init: random.map_or(TemporalInit::Default, |s| TemporalInit::Random { seed: s.0 }),
            };
            let f = fit_temporal(catalog, &cfg)?;
            io::save_matrix(&f.params.k, &k_path)?;
            io::save_responsibilities(&f.responsibilities, &r_path)?;
            let params = json!({"omega": f.params.omega, "mu": f.params.mu});
            ("temporal", f.trace, f.converged, params)
        }
    };

    let report = FitReport {
        model: name,
        events: a.events.display().to_string(),
        n_events: catalog.len(),
        n_nodes: catalog.n_nodes(),
        iterations: trace.len(),
        converged,
        final_loglik: trace.final_loglik,
        max_loglik_drop: trace.max_loglik_drop(),
        max_column_deviation: trace.max_column_deviation(),
        params,
        trace: &trace.iterations,
    };
    let report_path = dir.join("report.json");
    io::write_json(&report_path, &report)?;
    outputs.push(report_path);
    for o in &outputs {
        prov.output(o);
    }
    prov.write(&dir.join("provenance.json"))?;

    let mut s = Summary::default();
    s.row("model", name)
        .row("events", catalog.len())
        .row("iterations", trace.len())
        .row("converged", converged)
        .num("log-likelihood", trace.final_loglik)
        .num("max loglik drop", trace.max_loglik_drop())
        .num("max column deviation", trace.max_column_deviation())
        .row("output", dir.display());
    if let Some(seed) = random {
        seed_row(&mut s, seed);
    }
    s.print();
    Ok(())
}

/// L1 distances between fitted and true triggering densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelErrors {
    pub temporal: f64,
    /// Radial density; absent for a purely temporal fit or without the
    /// true variance.
    pub spatial: Option<f64>,
}

impl KernelErrors {
    /// Histogram kernels against exponential and Rayleigh truths.
    pub fn nonparametric(g1: &BinnedKernel, h: &BinnedKernel, omega: f64, sigma2: Option<f64>) -> Self {
        let temporal = kernel_l1(g1, |t| exponential_pdf(omega, t), exponential_upper(omega), KERNEL_GRID);
        let spatial = sigma2.map(|s2| kernel_l1(h, |r| rayleigh_pdf(s2, r), rayleigh_upper(s2), KERNEL_GRID));
        Self { temporal, spatial }
    }

    /// Fitted exponential and Rayleigh densities against the truth.
    pub fn parametric(omega_hat: f64, sigma2_hat: Option<f64>, omega: f64, sigma2: Option<f64>) -> Self {
        let upper = exponential_upper(omega).max(exponential_upper(omega_hat));
        let temporal =
            density_l1(|t| exponential_pdf(omega_hat, t), |t| exponential_pdf(omega, t), upper, KERNEL_GRID);
        let spatial = match (sigma2_hat, sigma2) {
            (Some(a), Some(b)) => Some(density_l1(
                |r| rayleigh_pdf(a, r),
                |r| rayleigh_pdf(b, r),
                rayleigh_upper(a).max(rayleigh_upper(b)),
                KERNEL_GRID,
            )),
            _ => None,
        };
        Self { temporal, spatial }
    }
}

fn fit_dir_kernel_errors(dir: &Path, omega: f64, sigma2: Option<f64>) -> Result<KernelErrors> {
    let report_path = dir.join("report.json");
    let report: Value = io::read_json(&report_path)?;
    let field = |name: &str| report["params"][name].as_f64();
    match report["model"].as_str() {
        Some("nonparametric") => {
            let g1 = io::load_kernel(&dir.join("g1.csv"))?;
            let h = io::load_kernel(&dir.join("h.csv"))?;
            Ok(KernelErrors::nonparametric(&g1, &h, omega, sigma2))
        }
        Some("parametric") | Some("temporal") => {
            let w = field("omega").ok_or_else(|| Error::parse(&report_path, 0, "report lacks params.omega"))?;
            Ok(KernelErrors::parametric(w, field("sigma2"), omega, sigma2))
        }
        _ => Err(Error::parse(&report_path, 0, "report does not name a known model")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_reciprocity: Option<Option<NodeReciprocity>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_l1: Option<KernelErrors>,
}

/// Computes the requested metrics. Reciprocity statistics use the
/// thresholded matrix; the ROC curve always uses the raw scores.
pub fn eval_report(
    inferred: &TriggeringMatrix,
    truth: Option<&TriggeringMatrix>,
    communities: Option<(&[usize], &[usize])>,
    kernels: Option<KernelErrors>,
    metrics: &[Metric],
    threshold: Option<f64>,
) -> Result<(EvalReport, Option<RocCurve>)> {
    let k = match threshold {
        Some(t) => threshold_matrix(inferred, t, false),
        None => inferred.clone(),
    };
    let mut rep = EvalReport {
        n_nodes: inferred.dim(),
        threshold,
        r1: None,
        node_reciprocity: None,
        correlation: None,
        auc: None,
        nmi: None,
        kernel_l1: None,
    };
    let mut roc = None;
    for m in metrics {
        match m {
            Metric::R1 => rep.r1 = Some(reciprocity_r1(&k)),
            Metric::NodeReciprocity => rep.node_reciprocity = Some(reciprocity_node(&k)),
            Metric::Correlation => rep.correlation = Some(symmetry_correlation(&k)),
            Metric::Roc => {
                let truth = truth.ok_or_else(|| usage("roc needs --truth"))?;
                let curve = roc_auc(inferred, truth)?;
                rep.auc = Some(curve.as_ref().map(|c| c.auc));
                roc = curve;
            }
            Metric::Nmi => {
                let (a, b) = communities.ok_or_else(|| usage("nmi needs --labels and --truth-labels"))?;
                rep.nmi = Some(nmi(a, b)?);
            }
            Metric::KernelL1 => {
                rep.kernel_l1 =
                    Some(kernels.ok_or_else(|| usage("kernel-l1 needs a fit directory as --inferred and --omega"))?);
            }
        }
    }
    Ok((rep, roc))
}

pub fn eval(a: &EvalArgs, argv: Vec<String>) -> Result<()> {
    let is_dir = a.inferred.is_dir();
    let matrix_path = if is_dir { a.inferred.join("K.csv") } else { a.inferred.clone() };
    let inferred = io::load_matrix(&matrix_path)?;
    let truth = a.truth.as_deref().map(io::load_matrix).transpose()?;
    let labels = a.labels.as_deref().map(io::load_communities).transpose()?;
    let truth_labels = a.truth_labels.as_deref().map(io::load_communities).transpose()?;
    let communities = match (&labels, &truth_labels) {
        (Some(l), Some(t)) => Some((l.as_slice(), t.as_slice())),
        _ => None,
    };
    let mut metrics = a.metrics.clone();
    let wants_kernels = metrics.is_empty() || metrics.contains(&Metric::KernelL1);
    let kernels = match (is_dir, a.omega) {
        (true, Some(w)) if wants_kernels => Some(fit_dir_kernel_errors(&a.inferred, w, a.sigma2)?),
        _ => None,
    };
    if metrics.is_empty() {
        metrics = vec![Metric::R1, Metric::NodeReciprocity, Metric::Correlation];
        if truth.is_some() {
            metrics.push(Metric::Roc);
        }
        if communities.is_some() {
            metrics.push(Metric::Nmi);
        }
        if kernels.is_some() {
            metrics.push(Metric::KernelL1);
        }
    }
    let (rep, roc) = eval_report(&inferred, truth.as_ref(), communities, kernels, &metrics, a.threshold)?;

    let mut s = Summary::default();
    s.row("nodes", rep.n_nodes);
    if let Some(v) = rep.r1 {
        s.opt("R1", v);
    }
    if let Some(v) = rep.node_reciprocity {
        s.opt("ratio", v.map(|r| r.ratio)).opt("coherence", v.map(|r| r.coherence)).opt("entropy", v.map(|r| r.entropy));
    }
    if let Some(v) = rep.correlation {
        s.opt("correlation", v);
    }
    if let Some(v) = rep.auc {
        s.opt("AUC", v);
    }
    if let Some(v) = rep.nmi {
        s.num("NMI", v);
    }
    if let Some(k) = rep.kernel_l1 {
        s.num("temporal kernel L1", k.temporal).opt("spatial kernel L1", k.spatial);
    }

    if let Some(out) = &a.out {
        io::write_json(out, &rep)?;
        let mut prov = Provenance::new("eval", argv);
        prov.input(&matrix_path)?;
        for p in [&a.truth, &a.labels, &a.truth_labels].into_iter().flatten() {
            prov.input(p)?;
        }
        if kernels.is_some() {
            prov.input(&a.inferred.join("report.json"))?;
        }
        prov.output(out);
        if let Some(curve) = &roc {
            let roc_path = sibling(out, ".roc.csv");
            io::save_roc(curve, &roc_path)?;
            prov.output(&roc_path);
        }
        prov.write(&sibling(out, ".provenance.json"))?;
        s.row("report", out.display());
    }
    s.print();
    Ok(())
}

pub fn decluster(a: &DeclusterArgs, argv: Vec<String>) -> Result<()> {
    let seed = seed_or_fresh(a.seed);
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let p = io::load_responsibilities(&a.responsibilities, None)?;
    let truth = match (&a.events, &a.truth_labels) {
        (Some(ev), _) => {
            let c = io::load_events(ev)?.catalog;
            Some(c.background_labels().ok_or_else(|| usage(format!("{} has no parent column", ev.display())))?)
        }
        (None, Some(l)) => Some(io::load_labels(l)?),
        (None, None) => None,
    };
    let expected = expected_branching_ratio(&p)?;
    let mut s = Summary::default();
    s.row("events", p.n_events()).row("runs", a.runs).num("expected branching ratio", expected);
    let report = match &truth {
        Some(t) => {
            let r = decluster_report(&p, t, a.runs, seed.0)?;
            s.num("true branching ratio", r.true_branching_ratio)
                .row("branching ratio", summary_text(Some(r.branching_ratio)))
                .row("branching error", summary_text(Some(r.branching_error)))
                .row("precision", summary_text(r.precision))
                .row("recall", summary_text(r.recall));
            json!({"n_events": p.n_events(), "expected_branching_ratio": expected, "report": r})
        }
        None => {
            let ratios: Vec<f64> = (0..a.runs)
                .map(|r| hawkesnet_core::decluster::branching_ratio(&decluster_run(&p, seed.0, r as u64)))
                .collect::<hawkesnet_core::Result<_>>()?;
            let sum = RunSummary::of(&ratios);
            s.row("branching ratio", summary_text(sum));
            json!({
                "n_events": p.n_events(),
                "expected_branching_ratio": expected,
                "n_runs": a.runs,
                "branching_ratio": sum,
            })
        }
    };
    let mut prov = Provenance::new("decluster", argv);
    prov.seed("seed", seed.0).input(&a.responsibilities)?;
    for path in [&a.events, &a.truth_labels].into_iter().flatten() {
        prov.input(path)?;
    }
    if let Some(out) = &a.labels_out {
        io::save_labels(&decluster_run(&p, seed.0, 0), out)?;
        prov.output(out);
    }
    if let Some(out) = &a.out {
        io::write_json(out, &report)?;
        prov.output(out);
    }
    if let Some(base) = a.out.as_ref().or(a.labels_out.as_ref()) {
        prov.write(&sibling(base, ".provenance.json"))?;
    }
    seed_row(&mut s, seed);
    s.print();
    Ok(())
}

fn summary_text(s: Option<RunSummary>) -> String {
    match s {
        Some(s) => format!("{} (sd {})", fmt(s.mean), fmt(s.sd)),
        None => "undefined".into(),
    }
}

pub fn motifs(a: &MotifsArgs, argv: Vec<String>) -> Result<()> {
    let seed = seed_or_fresh(a.seed);
    let mut prov = Provenance::new("motifs", argv);
    prov.seed("seed", seed.0);
    let g = match (&a.responsibilities, &a.edges) {
        (Some(r), _) => {
            prov.input(r)?;
            build_event_network(&io::load_responsibilities(r, None)?, a.threshold)?
        }
        (None, Some(e)) => {
            prov.input(e)?;
            io::load_edges(e, a.n_nodes)?
        }
        (None, None) => return Err(usage("one of --responsibilities or --edges is required")),
    };
    let report = motif_zscores(&g, a.n_null, a.swap_factor, seed.0)?;
    if let Some(out) = &a.network_out {
        io::save_edges(&g, out)?;
        prov.output(out);
    }
    if let Some(out) = &a.out {
        let threshold = a.responsibilities.as_ref().map(|_| a.threshold);
        io::write_json(
            out,
            &json!({
                "n_vertices": g.n_nodes(),
                "n_edges": g.n_edges(),
                "threshold": threshold,
                "swap_factor": a.swap_factor,
                "report": report,
            }),
        )?;
        prov.output(out);
    }
    if let Some(base) = a.out.as_ref().or(a.network_out.as_ref()) {
        prov.write(&sibling(base, ".provenance.json"))?;
    }

    let mut s = Summary::default();
    s.row("vertices", g.n_nodes()).row("edges", g.n_edges()).row("null replicates", a.n_null);
    for m in Motif::ALL {
        let st = report.stat(m);
        let z = match st.z {
            Some(z) => fmt(z),
            None => "undefined".into(),
        };
        s.row(
            m.name(),
            format!("count {}  null {} (sd {})  z {z}", st.count, fmt(st.null_mean), fmt(st.null_sd)),
        );
    }
    seed_row(&mut s, seed);
    s.print();
    Ok(())
}

fn parse_time(s: &str) -> Result<i64> {
    if let [y, m, d] = s.split('-').collect::<Vec<_>>()[..] {
        if let (Ok(y), Ok(m), Ok(d)) = (y.parse(), m.parse(), d.parse()) {
            return date_timestamp(y, m, d).ok_or_else(|| usage(format!("invalid date `{s}`")));
        }
    }
    parse_timestamp(s).ok_or_else(|| usage(format!("cannot read `{s}` as a time")))
}

pub fn ingest(a: &IngestArgs, argv: Vec<String>) -> Result<()> {
    let mut spec = match a.preset {
        Some(City::Nyc) => PipelineSpec::from(preset("nyc").expect("known preset")),
        Some(City::La) => PipelineSpec::from(preset("la").expect("known preset")),
        Some(City::Sf) => PipelineSpec::from(preset("sf").expect("known preset")),
        None => PipelineSpec::default(),
    };
    if let Some(b) = &a.bbox {
        let [north, south, east, west] = b[..] else {
            return Err(usage("--bbox takes four values north,south,east,west"));
        };
        spec.bbox = Some(BoundingBox { north, south, east, west });
    }
    if a.start.is_some() || a.end.is_some() {
        let (s0, e0) = spec.window.unwrap_or((i64::MIN, i64::MAX));
        let start = a.start.as_deref().map(parse_time).transpose()?.unwrap_or(s0);
        let end = a.end.as_deref().map(parse_time).transpose()?.unwrap_or(e0);
        spec.window = Some((start, end));
    }
    if a.min_checkins.is_some() || a.max_checkins.is_some() {
        let (lo, hi) = spec.activity.unwrap_or((0, usize::MAX));
        spec.activity = Some((a.min_checkins.unwrap_or(lo), a.max_checkins.unwrap_or(hi)));
    }
    if a.lcc {
        spec.restriction = Some(Restriction::Lcc);
    }
    if let Some(c) = &a.ego {
        spec.ego = Some(c.clone());
    }

    let records = read_checkins(&a.checkins)?;
    let friends = a.friends.as_deref().map(read_friendships).transpose()?;
    let out = run_pipeline(&records, friends.as_ref(), &spec)?;
    let bounded = spec.window.filter(|w| w.0 != i64::MIN && w.1 != i64::MAX);
    let origin = bounded.map(|w| w.0);
    let horizon = bounded.map(|w| (w.1 - w.0) as f64 / 86_400.0);
    let ing = to_catalog(&out.records, origin, horizon, None)?;
    io::save_events(&ing.catalog, &a.out, Some(&ing.users))?;

    let summary_path = sibling(&a.out, ".summary.json");
    io::write_json(
        &summary_path,
        &json!({
            "stages": out.stages,
            "center": out.center.as_ref().map(|(u, d)| json!({"user": u, "friends": d})),
            "n_events": ing.catalog.len(),
            "n_users": ing.users.len(),
            "time_origin": ing.time_origin,
            "projection": {"lat0": ing.projection.lat0, "lon0": ing.projection.lon0, "unit": "km"},
        }),
    )?;
    let mut prov = Provenance::new("ingest", argv);
    prov.input(&a.checkins)?;
    if let Some(f) = &a.friends {
        prov.input(f)?;
    }
    prov.output(&a.out).output(&io::meta_path(&a.out)).output(&summary_path);
    prov.write(&sibling(&a.out, ".provenance.json"))?;

    let mut s = Summary::default();
    for st in &out.stages {
        s.row(&st.stage, format!("{} users, {} check-ins", st.users, st.records));
    }
    if let Some((u, d)) = &out.center {
        s.row("ego", format!("{u} ({d} friends)"));
    }
    s.row("catalog", a.out.display()).num("horizon (days)", ing.catalog.horizon());
    s.print();
    Ok(())
}
