//! Domain types shared by the simulation, estimation and evaluation modules.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, shape, Result};
use crate::math;

/// One marked spatiotemporal event.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    pub node: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl Event {
    pub fn new(node: usize, t: f64, x: f64, y: f64) -> Self {
        Self { node, t, x, y }
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Region {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
            return Err(domain("region bounds must be finite"));
        }
        if x1 < x0 || y1 < y0 {
            return Err(domain(format!("inverted region [{x0},{x1}]x[{y0},{y1}]")));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn unit() -> Self {
        Self { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    /// Smallest rectangle containing every event.
    pub fn bounding(events: &[Event]) -> Self {
        let mut r = Self {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for e in events {
            r.x0 = r.x0.min(e.x);
            r.x1 = r.x1.max(e.x);
            r.y0 = r.y0.min(e.y);
            r.y1 = r.y1.max(e.y);
        }
        if events.is_empty() {
            r = Self::unit();
        }
        r
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn diagonal(&self) -> f64 {
        math::hypot(self.width(), self.height())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Time-ordered catalog of events on `[0, T] × S`, optionally carrying the
/// simulated parent of every event.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventCatalog {
    events: Vec<Event>,
    horizon: f64,
    region: Region,
    n_nodes: usize,
    parents: Option<Vec<Option<usize>>>,
}

impl EventCatalog {
    /// Builds a catalog, sorting events by time (stable for ties).
    pub fn new(events: Vec<Event>, horizon: f64, region: Region, n_nodes: usize) -> Result<Self> {
        Self::build(events, None, horizon, region, n_nodes)
    }

    /// Builds a catalog with ground-truth parentage. `parents[k]` indexes into
    /// the *input* order; it is remapped to the sorted order.
    pub fn with_parents(
        events: Vec<Event>,
        parents: Vec<Option<usize>>,
        horizon: f64,
        region: Region,
        n_nodes: usize,
    ) -> Result<Self> {
        if parents.len() != events.len() {
            return Err(shape(format!(
                "{} parents for {} events",
                parents.len(),
                events.len()
            )));
        }
        Self::build(events, Some(parents), horizon, region, n_nodes)
    }

    fn build(
        events: Vec<Event>,
        parents: Option<Vec<Option<usize>>>,
        horizon: f64,
        region: Region,
        n_nodes: usize,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(domain(format!("horizon must be positive, got {horizon}")));
        }
        for (k, e) in events.iter().enumerate() {
            if e.node >= n_nodes {
                return Err(domain(format!(
                    "event {k}: node {} out of range for {n_nodes} nodes",
                    e.node
                )));
            }
            if !(e.t.is_finite() && e.x.is_finite() && e.y.is_finite()) {
                return Err(domain(format!("event {k}: nonfinite coordinate")));
            }
            if e.t < 0.0 {
                return Err(domain(format!("event {k}: negative time {}", e.t)));
            }
        }
        let mut order: Vec<usize> = (0..events.len()).collect();
        order.sort_by(|&a, &b| events[a].t.total_cmp(&events[b].t));
        let mut rank = vec![0usize; events.len()];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let sorted: Vec<Event> = order.iter().map(|&k| events[k]).collect();
        let parents = match parents {
            None => None,
            Some(p) => {
                let mut out = vec![None; p.len()];
                for (old, parent) in p.iter().enumerate() {
                    let child = rank[old];
                    if let Some(par) = *parent {
                        if par >= p.len() {
                            return Err(domain(format!("event {old}: parent {par} out of range")));
                        }
                        let np = rank[par];
                        if np >= child {
                            return Err(domain(format!(
                                "event {old}: parent {par} does not precede it"
                            )));
                        }
                        out[child] = Some(np);
                    } else {
                        let e = &sorted[child];
                        if !region.contains(e.x, e.y) {
                            return Err(domain(format!(
                                "background event {old} lies outside the region"
                            )));
                        }
                    }
                }
                Some(out)
            }
        };
        Ok(Self { events: sorted, horizon, region, n_nodes, parents })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Ground-truth parent of each event (`None` for background), if known.
    pub fn parents(&self) -> Option<&[Option<usize>]> {
        self.parents.as_deref()
    }

    /// `true` for background events, from the ground truth.
    pub fn background_labels(&self) -> Option<Vec<bool>> {
        self.parents.as_ref().map(|p| p.iter().map(Option::is_none).collect())
    }

    /// Number of events per node.
    pub fn node_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_nodes];
        for e in &self.events {
            c[e.node] += 1;
        }
        c
    }

    /// Same events with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(domain(format!("horizon must be positive, got {horizon}")));
        }
        let mut c = self.clone();
        c.horizon = horizon;
        Ok(c)
    }

    /// Drops the ground truth.
    pub fn without_parents(&self) -> Self {
        let mut c = self.clone();
        c.parents = None;
        c
    }
}

/// `U × U` nonnegative matrix; entry `(u, v)` is the expected number of
/// node-`v` events triggered by one node-`u` event.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TriggeringMatrix {
    n: usize,
    data: Vec<f64>,
}

impl TriggeringMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self { n, data: vec![value; n * n] }
    }

    /// Row-major construction; rejects negative or nonfinite entries.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(shape(format!("{} entries for a {n}x{n} matrix", data.len())));
        }
        if let Some(k) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain(format!(
                "entry ({}, {}) = {} is not a finite nonnegative value",
                k / n,
                k % n,
                data[k]
            )));
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (u, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(shape(format!("row {u} has {} entries, expected {n}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(n, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.n + v]
    }

    /// Panics on negative or nonfinite values.
    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        assert!(value.is_finite() && value >= 0.0, "entry must be finite and nonnegative");
        self.data[u * self.n + v] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.n..(u + 1) * self.n]
    }

    pub fn row_sum(&self, u: usize) -> f64 {
        self.row(u).iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for u in 0..self.n {
            for v in 0..self.n {
                t.data[v * self.n + u] = self.get(u, v);
            }
        }
        t
    }

    /// `(K + Kᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut s = Self::zeros(self.n);
        for u in 0..self.n {
            for v in 0..self.n {
                s.data[u * self.n + v] = 0.5 * (self.get(u, v) + self.get(v, u));
            }
        }
        s
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_row_major(self.n, self.data.iter().map(|v| v * factor).collect())
    }

    /// Relabels nodes: entry `(perm[u], perm[v])` of the result equals `(u, v)`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut p = Self::zeros(self.n);
        for u in 0..self.n {
            for v in 0..self.n {
                p.data[perm[u] * self.n + perm[v]] = self.get(u, v);
            }
        }
        p
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Parameters of the parametric spatiotemporal model: triggering matrix,
/// background contributions `beta[u][v]`, temporal decay `omega`, triggering
/// spatial variance `sigma2` and background spatial variance `eta2`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParametricParams {
    pub k: TriggeringMatrix,
    pub beta: TriggeringMatrix,
    pub omega: f64,
    pub sigma2: f64,
    pub eta2: f64,
}

impl ParametricParams {
    pub fn new(
        k: TriggeringMatrix,
        beta: TriggeringMatrix,
        omega: f64,
        sigma2: f64,
        eta2: f64,
    ) -> Result<Self> {
        if k.dim() != beta.dim() {
            return Err(shape(format!("K is {0}x{0} but beta is {1}x{1}", k.dim(), beta.dim())));
        }
        for (name, v) in [("omega", omega), ("sigma2", sigma2), ("eta2", eta2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { k, beta, omega, sigma2, eta2 })
    }

    pub fn n_nodes(&self) -> usize {
        self.k.dim()
    }
}

/// Piecewise-constant function on `[edges[0], edges[last]]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinnedKernel {
    edges: Vec<f64>,
    values: Vec<f64>,
}

impl BinnedKernel {
    pub fn new(edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || values.len() + 1 != edges.len() {
            return Err(shape(format!(
                "{} edges for {} values",
                edges.len(),
                values.len()
            )));
        }
        if edges[0] != 0.0 {
            return Err(domain("kernel bins must start at 0"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(domain("kernel edges must be finite and strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(domain("kernel values must be finite and nonnegative"));
        }
        Ok(Self { edges, values })
    }

    /// `n_bins` equal-width bins on `[0, support]`, all zero.
    pub fn uniform(n_bins: usize, support: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(domain("at least one bin is required"));
        }
        if !(support.is_finite() && support > 0.0) {
            return Err(domain(format!("kernel support must be positive, got {support}")));
        }
        let width = support / n_bins as f64;
        let mut edges: Vec<f64> = (0..=n_bins).map(|k| k as f64 * width).collect();
        edges[n_bins] = support;
        Ok(Self { edges, values: vec![0.0; n_bins] })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_bins(&self) -> usize {
        self.values.len()
    }

    pub fn support(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.edges[k] + self.edges[k + 1])
    }

    /// Bin containing `x`; the right end of the support belongs to the last
    /// bin.
    pub fn bin_index(&self, x: f64) -> Option<usize> {
        let last = self.support();
        if !(x >= 0.0 && x <= last) {
            return None;
        }
        if x == last {
            return Some(self.values.len() - 1);
        }
        // edges[k] <= x < edges[k + 1]
        let k = self.edges.partition_point(|&e| e <= x);
        Some(k - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.bin_index(x).map_or(0.0, |k| self.values[k])
    }

    /// `Σ_k value_k · width_k`.
    pub fn integral(&self) -> f64 {
        (0..self.values.len()).map(|k| self.values[k] * self.width(k)).sum()
    }

    /// `∫_0^x` of the kernel.
    pub fn cumulative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.values.len() {
            let (a, b) = (self.edges[k], self.edges[k + 1]);
            if x <= a {
                break;
            }
            acc += self.values[k] * (x.min(b) - a);
        }
        acc
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// One Gaussian of the adaptive-bandwidth background field: centre, weight
/// `p_ii` and bandwidth `d_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BackgroundSource {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub bandwidth: f64,
}

/// Fitted nonparametric model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NonparamModel {
    pub k: TriggeringMatrix,
    /// Per-node background intensities.
    pub gamma: Vec<f64>,
    /// Temporal triggering density.
    pub g1: BinnedKernel,
    /// Radial triggering density; the planar kernel is `h(r) / (2πr)`.
    pub h: BinnedKernel,
    pub background: Vec<BackgroundSource>,
    pub horizon: f64,
}

impl NonparamModel {
    /// Background field `τ(x, y) = (1/T) Σ_i p_ii N((x, y); (x_i, y_i), d_i²)`.
    pub fn evaluate_tau(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for s in &self.background {
            if s.weight == 0.0 {
                continue;
            }
            let d2 = math::dist2(x, y, s.x, s.y);
            acc += s.weight * math::gauss2(d2, s.bandwidth * s.bandwidth);
        }
        acc / self.horizon
    }

    /// Planar spatial kernel `g2(r)`, constant on each radial bin and
    /// evaluated at the bin midpoint radius.
    pub fn g2(&self, r: f64) -> f64 {
        match self.h.bin_index(r) {
            Some(k) => self.h.values()[k] / (math::TAU * self.h.midpoint(k)),
            None => 0.0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.k.dim()
    }
}

/// Column-sparse responsibility matrix. Column `j` holds the background
/// probability of event `j` and the probability of each candidate parent
/// `i < j` having triggered it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResponsibilityMatrix {
    background: Vec<f64>,
    col_start: Vec<usize>,
    parents: Vec<u32>,
    probs: Vec<f64>,
}

impl ResponsibilityMatrix {
    /// Builds from per-column candidate parents. Parents must be strictly
    /// increasing and smaller than their column.
    pub fn from_columns(background: Vec<f64>, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if background.len() != columns.len() {
            return Err(shape("one column per event is required"));
        }
        let mut col_start = Vec::with_capacity(columns.len() + 1);
        let mut parents = Vec::new();
        let mut probs = Vec::new();
        col_start.push(0);
        for (j, col) in columns.iter().enumerate() {
            let mut prev: Option<usize> = None;
            for &(i, p) in col {
                if i >= j || prev.is_some_and(|q| q >= i) {
                    return Err(domain(format!("column {j}: invalid parent {i}")));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(domain(format!("entry ({i}, {j}) = {p} outside [0, 1]")));
                }
                prev = Some(i);
                parents.push(i as u32);
                probs.push(p);
            }
            col_start.push(parents.len());
        }
        if background.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(domain("background probabilities must lie in [0, 1]"));
        }
        Ok(Self { background, col_start, parents, probs })
    }

    /// Empty structure over a candidate-parent layout; all values zero.
    pub(crate) fn with_layout(col_start: Vec<usize>, parents: Vec<u32>) -> Self {
        let n = col_start.len() - 1;
        let nnz = parents.len();
        Self { background: vec![0.0; n], col_start, parents, probs: vec![0.0; nnz] }
    }

    pub fn n_events(&self) -> usize {
        self.background.len()
    }

    /// Number of stored off-diagonal entries.
    pub fn nnz(&self) -> usize {
        self.parents.len()
    }

    pub fn background(&self, j: usize) -> f64 {
        self.background[j]
    }

    pub fn backgrounds(&self) -> &[f64] {
        &self.background
    }

    /// `(parent, probability)` pairs of column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_start[j]..self.col_start[j + 1];
        self.parents[r.clone()].iter().map(|&i| i as usize).zip(self.probs[r].iter().copied())
    }

    /// Entry `(i, j)`; zero when absent or when `i > j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.background[j];
        }
        if i > j {
            return 0.0;
        }
        let r = self.col_start[j]..self.col_start[j + 1];
        match self.parents[r.clone()].binary_search(&(i as u32)) {
            Ok(k) => self.probs[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.background[j] + self.column(j).map(|(_, p)| p).sum::<f64>()
    }

    /// `max_j |Σ_i p_ij − 1|`.
    pub fn max_column_deviation(&self) -> f64 {
        (0..self.n_events())
            .map(|j| math::abs(self.column_sum(j) - 1.0))
            .fold(0.0, f64::max)
    }

    /// All stored entries as `(i, j, p)`, diagonal first within each column.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_events()).flat_map(move |j| {
            core::iter::once((j, j, self.background[j]))
                .chain(self.column(j).map(move |(i, p)| (i, j, p)))
        })
    }

    /// Builds from `(i, j, p)` triplets with `i ≤ j`; missing diagonal
    /// entries are zero.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut background = vec![0.0; n];
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, p) in triplets {
            if j >= n || i > j {
                return Err(domain(format!("entry ({i}, {j}) is not upper-triangular in {n} events")));
            }
            if i == j {
                background[j] = p;
            } else {
                columns[j].push((i, p));
            }
        }
        for c in &mut columns {
            c.sort_by_key(|&(i, _)| i);
        }
        Self::from_columns(background, columns)
    }

    pub(crate) fn col_start(&self) -> &[usize] {
        &self.col_start
    }

    pub(crate) fn parent_indices(&self) -> &[u32] {
        &self.parents
    }

    pub(crate) fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `(col_start, parents, background, probs)` with the values mutable.
    pub(crate) fn parts_mut(&mut self) -> (&[usize], &[u32], &mut [f64], &mut [f64]) {
        (&self.col_start, &self.parents, &mut self.background, &mut self.probs)
    }
}
