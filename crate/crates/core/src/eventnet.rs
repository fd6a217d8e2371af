//! Event networks built from responsibilities, and 3-node motif analysis
//! against a degree-preserving null model.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{domain, Result};
use crate::math;
use crate::model::ResponsibilityMatrix;
use crate::rng::seeded;

/// Directed simple graph on events: no self-loops, no duplicate edges.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EventGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    weights: Option<Vec<f64>>,
}

impl EventGraph {
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::build(n_nodes, edges, None)
    }

    pub fn with_weights(n_nodes: usize, edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != edges.len() {
            return Err(domain(format!("{} weights for {} edges", weights.len(), edges.len())));
        }
        Self::build(n_nodes, edges, Some(weights))
    }

    fn build(n_nodes: usize, edges: Vec<(usize, usize)>, weights: Option<Vec<f64>>) -> Result<Self> {
        let mut seen: Vec<(usize, usize)> = edges.clone();
        for &(a, b) in &edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(domain(format!("edge {a}->{b} out of range for {n_nodes} nodes")));
            }
            if a == b {
                return Err(domain(format!("self-loop at {a}")));
            }
        }
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("duplicate edge"));
        }
        Ok(Self { n_nodes, edges, weights })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for &(a, _) in &self.edges {
            d[a] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for &(_, b) in &self.edges {
            d[b] += 1;
        }
        d
    }

    /// `true` when every edge points from a lower to a higher index, which
    /// implies acyclicity.
    pub fn is_forward(&self) -> bool {
        self.edges.iter().all(|&(a, b)| a < b)
    }

    /// Kahn's algorithm.
    pub fn is_acyclic(&self) -> bool {
        let mut indeg = self.in_degrees();
        let out = self.out_lists();
        let mut queue: Vec<usize> = (0..self.n_nodes).filter(|&v| indeg[v] == 0).collect();
        let mut visited = 0;
        while let Some(v) = queue.pop() {
            visited += 1;
            for &w in &out[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push(w);
                }
            }
        }
        visited == self.n_nodes
    }

    fn out_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_nodes];
        for &(a, b) in &self.edges {
            out[a].push(b);
        }
        out
    }

    /// Sorted edge list.
    pub fn sorted_edges(&self) -> Vec<(usize, usize)> {
        let mut e = self.edges.clone();
        e.sort_unstable();
        e
    }
}

/// Edge `i → j` for every stored `p_ij ≥ theta` with `i < j`; weights are
/// the responsibilities.
pub fn build_event_network(p: &ResponsibilityMatrix, theta: f64) -> Result<EventGraph> {
    if !(theta > 0.0) {
        return Err(domain(format!("threshold must be positive, got {theta}")));
    }
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for j in 0..p.n_events() {
        for (i, w) in p.column(j) {
            if i < j && w >= theta {
                edges.push((i, j));
                weights.push(w);
            }
        }
    }
    EventGraph::with_weights(p.n_events(), edges, weights)
}

/// Induced connected 3-node subgraphs by pattern. `other` collects patterns
/// that cannot occur in a DAG (cycles, reciprocated pairs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotifCounts {
    pub chain: u64,
    pub fan_out: u64,
    pub fan_in: u64,
    pub feedforward: u64,
    pub other: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Motif {
    Chain,
    FanOut,
    FanIn,
    FeedForward,
}

impl Motif {
    pub const ALL: [Motif; 4] = [Motif::Chain, Motif::FanOut, Motif::FanIn, Motif::FeedForward];

    pub fn name(self) -> &'static str {
        match self {
            Motif::Chain => "chain",
            Motif::FanOut => "fan_out",
            Motif::FanIn => "fan_in",
            Motif::FeedForward => "feedforward",
        }
    }
}

impl MotifCounts {
    pub fn get(&self, m: Motif) -> u64 {
        match m {
            Motif::Chain => self.chain,
            Motif::FanOut => self.fan_out,
            Motif::FanIn => self.fan_in,
            Motif::FeedForward => self.feedforward,
        }
    }

    pub fn total(&self) -> u64 {
        self.chain + self.fan_out + self.fan_in + self.feedforward + self.other
    }

    fn add(&mut self, m: Option<Motif>) {
        match m {
            Some(Motif::Chain) => self.chain += 1,
            Some(Motif::FanOut) => self.fan_out += 1,
            Some(Motif::FanIn) => self.fan_in += 1,
            Some(Motif::FeedForward) => self.feedforward += 1,
            None => self.other += 1,
        }
    }
}

struct Adjacency {
    out: Vec<Vec<usize>>,
    und: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(g: &EventGraph) -> Self {
        let mut out = vec![Vec::new(); g.n_nodes];
        let mut und = vec![Vec::new(); g.n_nodes];
        for &(a, b) in &g.edges {
            out[a].push(b);
            und[a].push(b);
            und[b].push(a);
        }
        for l in out.iter_mut().chain(und.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        Self { out, und }
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.out[a].binary_search(&b).is_ok()
    }
}

/// Classifies the induced pattern on `{a, b, c}` from its six possible arcs.
fn classify(adj: &Adjacency, nodes: [usize; 3]) -> Option<Motif> {
    let mut outdeg = [0u8; 3];
    let mut indeg = [0u8; 3];
    let mut arcs = 0u8;
    for x in 0..3 {
        for y in 0..3 {
            if x != y && adj.has(nodes[x], nodes[y]) {
                if adj.has(nodes[y], nodes[x]) {
                    return None;
                }
                outdeg[x] += 1;
                indeg[y] += 1;
                arcs += 1;
            }
        }
    }
    match arcs {
        2 => {
            if outdeg.contains(&2) {
                Some(Motif::FanOut)
            } else if indeg.contains(&2) {
                Some(Motif::FanIn)
            } else {
                Some(Motif::Chain)
            }
        }
        // transitive triangle iff some node sends both arcs
        3 if outdeg.contains(&2) => Some(Motif::FeedForward),
        _ => None,
    }
}

/// Induced census: every weakly connected 3-node subset is counted once.
pub fn motif_census_3(g: &EventGraph) -> MotifCounts {
    let adj = Adjacency::new(g);
    let mut counts = MotifCounts::default();
    for v in 0..g.n_nodes {
        let nb = &adj.und[v];
        for (x, &u) in nb.iter().enumerate() {
            for &w in &nb[x + 1..] {
                let closed = adj.und[u].binary_search(&w).is_ok();
                // a closed triple is seen from each of its three centres
                if closed && !(v < u && v < w) {
                    continue;
                }
                counts.add(classify(&adj, [v, u, w]));
            }
        }
    }
    counts
}

/// Attempts `n_swaps` double-edge swaps `(a→b, c→d) ⇒ (a→d, c→b)`,
/// rejecting those that would create a self-loop or a duplicate edge. In-
/// and out-degrees are preserved; acyclicity is not. Weights are dropped.
pub fn degree_preserving_randomize(g: &EventGraph, n_swaps: usize, seed: u64) -> EventGraph {
    randomize_stream(g, n_swaps, seed, 0)
}

fn randomize_stream(g: &EventGraph, n_swaps: usize, seed: u64, stream: u64) -> EventGraph {
    let m = g.edges.len();
    if m < 2 {
        return g.clone();
    }
    let mut rng = seeded(seed, stream);
    let mut edges = g.edges.clone();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); g.n_nodes];
    for &(a, b) in &edges {
        out[a].push(b);
    }
    for _ in 0..n_swaps {
        let e1 = rng.random_range(0..m);
        let e2 = rng.random_range(0..m);
        if e1 == e2 {
            continue;
        }
        let (a, b) = edges[e1];
        let (c, d) = edges[e2];
        if a == d || c == b || out[a].contains(&d) || out[c].contains(&b) {
            continue;
        }
        replace(&mut out[a], b, d);
        replace(&mut out[c], d, b);
        edges[e1] = (a, d);
        edges[e2] = (c, b);
    }
    EventGraph { n_nodes: g.n_nodes, edges, weights: None }
}

fn replace(list: &mut [usize], from: usize, to: usize) {
    if let Some(slot) = list.iter_mut().find(|x| **x == from) {
        *slot = to;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotifStat {
    pub motif: Motif,
    pub count: u64,
    pub null_mean: f64,
    pub null_sd: f64,
    /// `(count − mean) / sd`; infinite when `sd = 0` and the counts differ,
    /// absent when both vanish.
    pub z: Option<f64>,
    pub infinite_z: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotifReport {
    pub observed: MotifCounts,
    pub n_null: usize,
    pub n_swaps: usize,
    pub stats: Vec<MotifStat>,
}

impl MotifReport {
    pub fn stat(&self, m: Motif) -> &MotifStat {
        self.stats.iter().find(|s| s.motif == m).expect("all motifs present")
    }
}

/// z-scores of the observed census against `n_null` randomised replicates,
/// each with `swap_factor × |E|` swap attempts; replicate `r` uses substream
/// `r + 1`.
pub fn motif_zscores(g: &EventGraph, n_null: usize, swap_factor: usize, seed: u64) -> Result<MotifReport> {
    if n_null < 2 {
        return Err(domain("at least two null replicates are required"));
    }
    let observed = motif_census_3(g);
    let n_swaps = swap_factor * g.n_edges();
    let replicate = |r: usize| motif_census_3(&randomize_stream(g, n_swaps, seed, r as u64 + 1));
    #[cfg(feature = "parallel")]
    let null: Vec<MotifCounts> = {
        use rayon::prelude::*;
        (0..n_null).into_par_iter().map(replicate).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let null: Vec<MotifCounts> = (0..n_null).map(replicate).collect();

    let stats = Motif::ALL
        .iter()
        .map(|&motif| {
            let values: Vec<f64> = null.iter().map(|c| c.get(motif) as f64).collect();
            let mean = values.iter().sum::<f64>() / n_null as f64;
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            let sd = math::sqrt(ss / (n_null - 1) as f64);
            let count = observed.get(motif);
            let diff = count as f64 - mean;
            let (z, infinite_z) = if sd > 0.0 {
                (Some(diff / sd), false)
            } else if diff != 0.0 {
                (Some(if diff > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }), true)
            } else {
                (None, false)
            };
            MotifStat { motif, count, null_mean: mean, null_sd: sd, z, infinite_z }
        })
        .collect();
    Ok(MotifReport { observed, n_null, n_swaps, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, e: &[(usize, usize)]) -> EventGraph {
        EventGraph::new(n, e.to_vec()).unwrap()
    }

    #[test]
    fn census_of_small_patterns() {
        let ffl = motif_census_3(&g(3, &[(0, 1), (0, 2), (1, 2)]));
        assert_eq!(ffl, MotifCounts { feedforward: 1, ..Default::default() });
        let chain = motif_census_3(&g(3, &[(0, 1), (1, 2)]));
        assert_eq!(chain, MotifCounts { chain: 1, ..Default::default() });
        let out = motif_census_3(&g(3, &[(1, 0), (1, 2)]));
        assert_eq!(out, MotifCounts { fan_out: 1, ..Default::default() });
        let inn = motif_census_3(&g(3, &[(0, 2), (1, 2)]));
        assert_eq!(inn, MotifCounts { fan_in: 1, ..Default::default() });
        let cycle = motif_census_3(&g(3, &[(0, 1), (1, 2), (2, 0)]));
        assert_eq!(cycle, MotifCounts { other: 1, ..Default::default() });
        let mutual = motif_census_3(&g(3, &[(0, 1), (1, 0), (1, 2)]));
        assert_eq!(mutual, MotifCounts { other: 1, ..Default::default() });
    }

    #[test]
    fn network_from_responsibilities() {
        let p = ResponsibilityMatrix::from_triplets(
            3,
            &[(0, 0, 1.0), (1, 1, 0.8), (0, 1, 0.2), (2, 2, 0.9), (0, 2, 0.05), (1, 2, 0.05)],
        )
        .unwrap();
        let net = build_event_network(&p, 0.1).unwrap();
        assert_eq!(net.edges(), &[(0, 1)]);
        assert_eq!(net.weights(), Some(&[0.2][..]));
        assert_eq!(build_event_network(&p, 0.5).unwrap().n_edges(), 0);
        assert!(build_event_network(&p, 0.0).is_err());
    }

    #[test]
    fn randomization_keeps_degrees() {
        let graph = g(6, &[(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 5), (1, 4)]);
        let r = degree_preserving_randomize(&graph, 500, 11);
        assert_eq!(r.out_degrees(), graph.out_degrees());
        assert_eq!(r.in_degrees(), graph.in_degrees());
        assert!(EventGraph::new(6, r.edges().to_vec()).is_ok());
        assert_eq!(r, degree_preserving_randomize(&graph, 500, 11));
        let empty = g(4, &[]);
        assert_eq!(degree_preserving_randomize(&empty, 100, 0), empty);
    }

    #[test]
    fn edgeless_graph_has_undefined_z() {
        let r = motif_zscores(&g(5, &[]), 10, 150, 0).unwrap();
        assert_eq!(r.observed.total(), 0);
        assert!(r.stats.iter().all(|s| s.z.is_none() && !s.infinite_z));
    }

    #[test]
    fn graph_validation() {
        assert!(EventGraph::new(2, vec![(0, 0)]).is_err());
        assert!(EventGraph::new(2, vec![(0, 1), (0, 1)]).is_err());
        assert!(EventGraph::new(2, vec![(0, 2)]).is_err());
        assert!(g(3, &[(0, 1), (1, 2)]).is_acyclic());
        assert!(!g(3, &[(0, 1), (1, 2), (2, 0)]).is_acyclic());
    }
}
