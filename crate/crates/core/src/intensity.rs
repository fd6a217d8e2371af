//! Conditional intensities and the parametric log-likelihood.
//!
//! These are direct evaluations meant for queries and cross-checks; the fit
//! modules carry their own single-pass versions.

use alloc::format;

use crate::error::{domain, shape, Result};
use crate::math;
use crate::model::{Event, EventCatalog, NonparamModel, ParametricParams};

fn check_query(catalog: &EventCatalog, n_nodes: usize, u: usize, t: f64, x: f64, y: f64) -> Result<()> {
    if !(t.is_finite() && x.is_finite() && y.is_finite()) {
        return Err(domain("intensity query must be finite"));
    }
    if u >= n_nodes {
        return Err(domain(format!("node {u} out of range for {n_nodes} nodes")));
    }
    if catalog.n_nodes() != n_nodes {
        return Err(shape(format!(
            "catalog has {} nodes but the model has {n_nodes}",
            catalog.n_nodes()
        )));
    }
    Ok(())
}

/// Background rate `μ_u(x, y)` of the parametric model. Built from every
/// event of the catalog, independent of time.
pub fn background_parametric(params: &ParametricParams, catalog: &EventCatalog, u: usize, x: f64, y: f64) -> f64 {
    let norm = 1.0 / (math::TAU * params.eta2 * catalog.horizon());
    let mut acc = 0.0;
    for e in catalog.events() {
        let b = params.beta.get(e.node, u);
        if b == 0.0 {
            continue;
        }
        acc += b * math::exp(-math::dist2(x, y, e.x, e.y) / (2.0 * params.eta2));
    }
    acc * norm
}

/// `λ_u(t, x, y)` of the parametric model; only events strictly before `t`
/// trigger.
pub fn intensity_parametric(
    params: &ParametricParams,
    catalog: &EventCatalog,
    u: usize,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    check_query(catalog, params.n_nodes(), u, t, x, y)?;
    let mut trig = 0.0;
    for e in catalog.events().iter().take_while(|e| e.t < t) {
        let k = params.k.get(e.node, u);
        if k == 0.0 {
            continue;
        }
        trig += k
            * params.omega
            * math::exp(-params.omega * (t - e.t))
            * math::gauss2(math::dist2(x, y, e.x, e.y), params.sigma2);
    }
    Ok(background_parametric(params, catalog, u, x, y) + trig)
}

fn intensity_at_event(params: &ParametricParams, events: &[Event], k: usize, norm: f64) -> f64 {
    let e = events[k];
    let mut bg = 0.0;
    let mut trig = 0.0;
    for (i, s) in events.iter().enumerate() {
        if i == k && events.len() > 1 {
            continue;
        }
        let d2 = math::dist2(e.x, e.y, s.x, s.y);
        bg += params.beta.get(s.node, e.node) * math::exp(-d2 / (2.0 * params.eta2));
        if s.t < e.t {
            trig += params.k.get(s.node, e.node)
                * params.omega
                * math::exp(-params.omega * (e.t - s.t))
                * math::gauss2(d2, params.sigma2);
        }
    }
    bg * norm + trig
}

/// Log-likelihood value; `degenerate_event` names the first event whose
/// intensity was zero, in which case `value` is `-inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub degenerate_event: Option<usize>,
}

impl LogLikelihood {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate_event.is_some()
    }
}

/// `Σ_k log λ_{u_k}(t_k, x_k, y_k) − Σ_u [Σ_i β_{u_i u} + Σ_i K_{u_i u}(1 − e^{−ω(T − t_i)})]`,
/// with spatial integrals taken over the whole plane. At each event the
/// background mixture omits that event's own Gaussian, without which the
/// likelihood grows without bound as `η → 0`; a lone event keeps it.
pub fn loglik_parametric(params: &ParametricParams, catalog: &EventCatalog) -> Result<LogLikelihood> {
    if catalog.n_nodes() != params.n_nodes() {
        return Err(shape(format!(
            "catalog has {} nodes but the model has {}",
            catalog.n_nodes(),
            params.n_nodes()
        )));
    }
    let horizon = catalog.horizon();
    let mut sum_log = 0.0;
    let mut degenerate = None;
    let events = catalog.events();
    let norm = 1.0 / (math::TAU * params.eta2 * horizon);
    for k in 0..events.len() {
        let lam = intensity_at_event(params, events, k, norm);
        if !(lam > 0.0) || !lam.is_finite() {
            degenerate.get_or_insert(k);
            continue;
        }
        sum_log += math::ln(lam);
    }
    let mut compensator = 0.0;
    for e in catalog.events() {
        let decay = 1.0 - math::exp(-params.omega * (horizon - e.t));
        compensator += params.beta.row_sum(e.node) + params.k.row_sum(e.node) * decay;
    }
    Ok(match degenerate {
        Some(_) => LogLikelihood { value: f64::NEG_INFINITY, degenerate_event: degenerate },
        None => LogLikelihood { value: sum_log - compensator, degenerate_event: None },
    })
}

/// `λ_u(t, x, y)` of the nonparametric model: `γ_u τ(x, y)` plus histogram
/// triggering from earlier events.
pub fn intensity_nonparam(
    model: &NonparamModel,
    catalog: &EventCatalog,
    u: usize,
    t: f64,
    x: f64,
    y: f64,
) -> Result<f64> {
    check_query(catalog, model.n_nodes(), u, t, x, y)?;
    let mut trig = 0.0;
    for e in catalog.events().iter().take_while(|e| e.t < t) {
        let k = model.k.get(e.node, u);
        if k == 0.0 {
            continue;
        }
        let r = math::sqrt(math::dist2(x, y, e.x, e.y));
        trig += k * model.g1.eval(t - e.t) * model.g2(r);
    }
    Ok(model.gamma[u] * model.evaluate_tau(x, y) + trig)
}
