//! Synthetic graphs, node attributes, thresholds and seed sets.
//!
//! Every generator is a pure function of its arguments: the same seed always
//! yields the same output.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::network::{Graph, NodeId, NodeSet};

/// Lower clamp for generated thresholds. A zero threshold would activate a
/// node with no active neighbors at all.
pub const THRESHOLD_EPS: f64 = 1e-6;

/// Number of attributes carrying weight in the linear threshold scheme.
pub const LINEAR_SUPPORT: usize = 10;

pub(crate) fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GraphModel {
    ErdosRenyi { p: f64 },
    /// Barabási–Albert: each arriving node attaches `k` edges.
    PrefAttach { k: usize },
    ForestFire { forward: f64, backward: f64 },
    WattsStrogatz { k: usize, rewire: f64 },
}

impl GraphModel {
    pub const DEFAULT_BACKWARD: f64 = 0.1;
    pub const DEFAULT_REWIRE: f64 = 0.1;

    pub fn forest_fire(forward: f64) -> Self {
        GraphModel::ForestFire { forward, backward: Self::DEFAULT_BACKWARD }
    }

    pub fn watts_strogatz(k: usize) -> Self {
        GraphModel::WattsStrogatz { k, rewire: Self::DEFAULT_REWIRE }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            GraphModel::ErdosRenyi { .. } => "erdos_renyi",
            GraphModel::PrefAttach { .. } => "pref_attach",
            GraphModel::ForestFire { .. } => "forest_fire",
            GraphModel::WattsStrogatz { .. } => "watts_strogatz",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::arg(format!("graph generators need n >= 2, got {n}")));
        }
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        match *self {
            GraphModel::ErdosRenyi { p } if !open_unit(p) => Err(Error::arg(format!("erdos_renyi: p = {p} not in (0, 1)"))),
            GraphModel::PrefAttach { k } if k < 1 || k >= n => {
                Err(Error::arg(format!("pref_attach: k = {k} not in [1, n)")))
            }
            GraphModel::ForestFire { forward, backward } if !open_unit(forward) || !open_unit(backward) => Err(
                Error::arg(format!("forest_fire: probabilities ({forward}, {backward}) not in (0, 1)")),
            ),
            GraphModel::WattsStrogatz { k, rewire } if k < 2 || k % 2 != 0 || k >= n || !(0.0..=1.0).contains(&rewire) => {
                Err(Error::arg(format!(
                    "watts_strogatz: need even 2 <= k < n and rewire in [0, 1], got k = {k}, rewire = {rewire}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Generates an undirected graph with `n` nodes and no features.
pub fn gen_graph(model: GraphModel, n: usize, seed: u64) -> Result<Graph> {
    model.validate(n)?;
    let mut rng = rng_from(seed);
    let edges = match model {
        GraphModel::ErdosRenyi { p } => erdos_renyi(n, p, &mut rng),
        GraphModel::PrefAttach { k } => pref_attach(n, k, &mut rng),
        GraphModel::ForestFire { forward, backward } => forest_fire(n, forward, backward, &mut rng),
        GraphModel::WattsStrogatz { k, rewire } => watts_strogatz(n, k, rewire, &mut rng),
    };
    Graph::with_edges(n, edges, false, None)
}

fn erdos_renyi(n: usize, p: f64, rng: &mut impl Rng) -> Vec<(NodeId, NodeId)> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    edges
}

/// Starts from a star on `k + 1` nodes; each later node attaches to `k`
/// distinct targets drawn proportionally to degree.
fn pref_attach(n: usize, k: usize, rng: &mut impl Rng) -> Vec<(NodeId, NodeId)> {
    let mut edges: Vec<(NodeId, NodeId)> = (1..=k).map(|v| (0, v)).collect();
    // Each node appears once per incident edge endpoint.
    let mut repeated: Vec<NodeId> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    for source in (k + 1)..n {
        let mut targets = HashSet::with_capacity(k);
        let mut chosen = Vec::with_capacity(k);
        while chosen.len() < k {
            let t = repeated[rng.random_range(0..repeated.len())];
            if targets.insert(t) {
                chosen.push(t);
            }
        }
        for t in chosen {
            edges.push((t, source));
            repeated.push(t);
            repeated.push(source);
        }
    }
    edges
}

/// Number of links burned: geometric with mean `p / (1 - p)`.
fn geometric(p: f64, rng: &mut impl Rng) -> usize {
    let mut k = 0;
    while rng.random::<f64>() < p {
        k += 1;
    }
    k
}

/// Forest-fire growth. The burning walks a directed citation structure
/// (new node -> burned nodes); the returned graph is its undirected version.
fn forest_fire(n: usize, forward: f64, backward: f64, rng: &mut impl Rng) -> Vec<(NodeId, NodeId)> {
    let mut out_links: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut in_links: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut edges = Vec::new();
    let mut visited = vec![usize::MAX; n];
    for v in 1..n {
        let ambassador = rng.random_range(0..v);
        let mut frontier = vec![ambassador];
        visited[ambassador] = v;
        let mut burned = vec![ambassador];
        while let Some(w) = frontier.pop() {
            let fresh = |list: &Vec<NodeId>, visited: &Vec<usize>| -> Vec<NodeId> {
                list.iter().copied().filter(|&x| visited[x] != v).collect()
            };
            let mut outs = fresh(&out_links[w], &visited);
            let mut ins = fresh(&in_links[w], &visited);
            let take_out = geometric(forward, rng).min(outs.len());
            let take_in = geometric(backward, rng).min(ins.len());
            for (pool, take) in [(&mut outs, take_out), (&mut ins, take_in)] {
                for i in 0..take {
                    let j = rng.random_range(i..pool.len());
                    pool.swap(i, j);
                    let x = pool[i];
                    if visited[x] != v {
                        visited[x] = v;
                        burned.push(x);
                        frontier.push(x);
                    }
                }
            }
        }
        burned.sort_unstable();
        for w in burned {
            out_links[v].push(w);
            in_links[w].push(v);
            edges.push((w, v));
        }
    }
    edges
}

/// Ring lattice with `k / 2` neighbors per side, each lattice edge rewired
/// to a uniform new endpoint with probability `rewire`.
fn watts_strogatz(n: usize, k: usize, rewire: f64, rng: &mut impl Rng) -> Vec<(NodeId, NodeId)> {
    let mut adj: Vec<HashSet<NodeId>> = vec![HashSet::new(); n];
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    if rewire > 0.0 {
        for j in 1..=k / 2 {
            for u in 0..n {
                let v = (u + j) % n;
                if rng.random::<f64>() >= rewire || !adj[u].contains(&v) || adj[u].len() >= n - 1 {
                    continue;
                }
                let w = loop {
                    let w = rng.random_range(0..n);
                    if w != u && !adj[u].contains(&w) {
                        break w;
                    }
                };
                adj[u].remove(&v);
                adj[v].remove(&u);
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
    }
    let mut edges: Vec<(NodeId, NodeId)> = adj
        .iter()
        .enumerate()
        .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    edges.sort_unstable();
    edges
}

/// `n x m` matrix of i.i.d. standard normal draws.
pub fn gen_attributes(n: usize, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || m == 0 {
        return Err(Error::arg(format!("attributes need n, m >= 1, got {n} x {m}")));
    }
    let mut rng = rng_from(seed);
    Ok((0..n)
        .map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdScheme {
    Linear,
    Quadrant,
    External,
}

impl fmt::Display for ThresholdScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdScheme::Linear => "linear",
            ThresholdScheme::Quadrant => "quadrant",
            ThresholdScheme::External => "external",
        })
    }
}

impl FromStr for ThresholdScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ThresholdScheme::Linear),
            "quadrant" => Ok(ThresholdScheme::Quadrant),
            "external" => Ok(ThresholdScheme::External),
            other => Err(Error::arg(format!("unknown threshold scheme `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SchemeParams {
    /// One coefficient per attribute; exactly `LINEAR_SUPPORT` are nonzero.
    Linear { coefficients: Vec<f64> },
    /// Thresholds for the cells `(+,+)`, `(+,-)`, `(-,+)`, `(-,-)` of
    /// attributes 0 and 1.
    Quadrant { cells: [f64; 4] },
    External,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdAssignment {
    pub thresholds: Vec<f64>,
    pub scheme: ThresholdScheme,
    pub params: SchemeParams,
}

impl ThresholdAssignment {
    /// Wraps externally supplied thresholds.
    pub fn external(thresholds: Vec<f64>) -> Result<Self> {
        if let Some(bad) = thresholds.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::arg(format!("threshold {bad} is not a finite non-negative value")));
        }
        Ok(ThresholdAssignment { thresholds, scheme: ThresholdScheme::External, params: SchemeParams::External })
    }
}

/// Index of the quadrant cell for a feature row. Zero counts as positive.
pub fn quadrant_cell(x: &[f64]) -> usize {
    match (x[0] >= 0.0, x[1] >= 0.0) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

pub fn gen_thresholds(scheme: ThresholdScheme, features: &[Vec<f64>], seed: u64) -> Result<ThresholdAssignment> {
    let m = features.first().map_or(0, Vec::len);
    if features.iter().any(|row| row.len() != m) {
        return Err(Error::arg("feature rows have unequal lengths"));
    }
    let mut rng = rng_from(seed);
    match scheme {
        ThresholdScheme::Linear => {
            if m < LINEAR_SUPPORT {
                return Err(Error::arg(format!("linear scheme needs m >= {LINEAR_SUPPORT}, got {m}")));
            }
            let mut support = index::sample(&mut rng, m, LINEAR_SUPPORT).into_vec();
            support.sort_unstable();
            let mut coefficients = vec![0.0; m];
            for &j in &support {
                // A normal draw of exactly 0 has probability zero; keep the
                // support size exact regardless.
                coefficients[j] = loop {
                    let c: f64 = StandardNormal.sample(&mut rng);
                    if c != 0.0 {
                        break c;
                    }
                };
            }
            let scores: Vec<f64> = features
                .iter()
                .map(|row| support.iter().map(|&j| coefficients[j] * row[j]).sum())
                .collect();
            let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(Error::Degenerate("linear threshold scores have zero range".into()));
            }
            let thresholds = scores
                .iter()
                .map(|s| ((s - lo) / (hi - lo)).clamp(THRESHOLD_EPS, 1.0))
                .collect();
            Ok(ThresholdAssignment { thresholds, scheme, params: SchemeParams::Linear { coefficients } })
        }
        ThresholdScheme::Quadrant => {
            if m < 2 {
                return Err(Error::arg(format!("quadrant scheme needs m >= 2, got {m}")));
            }
            let mut cells = [0.0; 4];
            for c in &mut cells {
                *c = rng.random::<f64>().max(THRESHOLD_EPS);
            }
            let thresholds = features.iter().map(|row| cells[quadrant_cell(row)]).collect();
            Ok(ThresholdAssignment { thresholds, scheme, params: SchemeParams::Quadrant { cells } })
        }
        ThresholdScheme::External => Err(Error::arg("external thresholds are loaded, not generated")),
    }
}

/// `count` distinct nodes drawn uniformly from `0..n`.
pub fn seed_activations(n: usize, count: usize, seed: u64) -> Result<NodeSet> {
    if count == 0 || count > n {
        return Err(Error::arg(format!("seed count {count} not in [1, {n}]")));
    }
    let mut rng = rng_from(seed);
    NodeSet::from_ids(n, index::sample(&mut rng, n, count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erdos_renyi_edge_count_near_mean() {
        let (n, p) = (1000usize, 0.1);
        let pairs = (n * (n - 1) / 2) as f64;
        let mean = p * pairs;
        let sd = (pairs * p * (1.0 - p)).sqrt();
        for seed in 0..3 {
            let g = gen_graph(GraphModel::ErdosRenyi { p }, n, seed).unwrap();
            assert_eq!(g.node_count(), n);
            assert!(((g.edge_count() as f64) - mean).abs() < 4.0 * sd, "seed {seed}: {}", g.edge_count());
        }
    }

    #[test]
    fn pref_attach_k1_is_tree() {
        let g = gen_graph(GraphModel::PrefAttach { k: 1 }, 100, 7).unwrap();
        assert_eq!(g.edge_count(), 99);
        // Connected: BFS from 0 reaches everything.
        let mut seen = [false; 100];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in g.neighbors(v).unwrap() {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn pref_attach_edge_count() {
        let g = gen_graph(GraphModel::PrefAttach { k: 3 }, 200, 1).unwrap();
        assert_eq!(g.edge_count(), 3 + (200 - 4) * 3);
    }

    #[test]
    fn ring_lattice_is_regular() {
        let g = gen_graph(GraphModel::WattsStrogatz { k: 4, rewire: 0.0 }, 50, 3).unwrap();
        for v in 0..50 {
            assert_eq!(g.degree(v).unwrap(), 4);
        }
    }

    #[test]
    fn rewiring_preserves_edge_count() {
        let g = gen_graph(GraphModel::watts_strogatz(6), 300, 3).unwrap();
        assert_eq!(g.edge_count(), 300 * 3);
    }

    #[test]
    fn forest_fire_is_connected_and_deterministic() {
        let a = gen_graph(GraphModel::forest_fire(0.35), 300, 11).unwrap();
        let b = gen_graph(GraphModel::forest_fire(0.35), 300, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.edge_count() >= 299);
        for v in 1..300 {
            assert!(!a.neighbors(v).unwrap().is_empty());
        }
    }

    #[test]
    fn generators_are_deterministic() {
        for model in [
            GraphModel::ErdosRenyi { p: 0.05 },
            GraphModel::PrefAttach { k: 2 },
            GraphModel::watts_strogatz(4),
        ] {
            assert_eq!(gen_graph(model, 120, 5).unwrap(), gen_graph(model, 120, 5).unwrap());
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(gen_graph(GraphModel::ErdosRenyi { p: 0.0 }, 10, 0).is_err());
        assert!(gen_graph(GraphModel::ErdosRenyi { p: 1.0 }, 10, 0).is_err());
        assert!(gen_graph(GraphModel::PrefAttach { k: 10 }, 10, 0).is_err());
        assert!(gen_graph(GraphModel::forest_fire(1.0), 10, 0).is_err());
        assert!(gen_graph(GraphModel::WattsStrogatz { k: 3, rewire: 0.1 }, 10, 0).is_err());
        assert!(gen_graph(GraphModel::ErdosRenyi { p: 0.5 }, 1, 0).is_err());
    }

    #[test]
    fn attribute_columns_centered() {
        let x = gen_attributes(1000, 100, 42).unwrap();
        let bound = 4.0 / (1000f64).sqrt();
        for j in 0..100 {
            let mean = x.iter().map(|r| r[j]).sum::<f64>() / 1000.0;
            assert!(mean.abs() < bound, "column {j} mean {mean}");
        }
    }

    #[test]
    fn attributes_deterministic_and_shaped() {
        assert_eq!(gen_attributes(10, 1, 9).unwrap(), gen_attributes(10, 1, 9).unwrap());
        let one = gen_attributes(1, 3, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 3);
        assert!(gen_attributes(0, 3, 0).is_err());
    }

    #[test]
    fn quadrant_cells_share_thresholds() {
        let x = gen_attributes(500, 4, 1).unwrap();
        let a = gen_thresholds(ThresholdScheme::Quadrant, &x, 2).unwrap();
        let mut distinct: Vec<f64> = a.thresholds.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        assert!(distinct.len() <= 4);
        let pp: Vec<usize> = (0..500).filter(|&i| x[i][0] >= 0.0 && x[i][1] >= 0.0).collect();
        assert!(pp.len() >= 2);
        assert!(pp.iter().all(|&i| a.thresholds[i] == a.thresholds[pp[0]]));
        let manual = gen_thresholds(ThresholdScheme::Quadrant, &[vec![1.0, 2.0], vec![0.0, 0.5]], 3).unwrap();
        assert_eq!(manual.thresholds[0], manual.thresholds[1]);
    }

    #[test]
    fn linear_scheme_shape() {
        let x = gen_attributes(300, 100, 4).unwrap();
        let a = gen_thresholds(ThresholdScheme::Linear, &x, 5).unwrap();
        let SchemeParams::Linear { coefficients } = &a.params else { panic!("expected linear params") };
        assert_eq!(coefficients.iter().filter(|c| **c != 0.0).count(), 10);
        let lo = a.thresholds.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = a.thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, THRESHOLD_EPS);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn linear_scheme_preserves_score_order() {
        let x = gen_attributes(200, 12, 8).unwrap();
        let a = gen_thresholds(ThresholdScheme::Linear, &x, 9).unwrap();
        let SchemeParams::Linear { coefficients } = &a.params else { unreachable!() };
        let score = |r: &Vec<f64>| r.iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..200 {
            for j in 0..200 {
                if score(&x[i]) < score(&x[j]) {
                    assert!(a.thresholds[i] <= a.thresholds[j]);
                }
            }
        }
    }

    #[test]
    fn threshold_errors() {
        let x = gen_attributes(20, 5, 0).unwrap();
        assert!(matches!(gen_thresholds(ThresholdScheme::Linear, &x, 0), Err(Error::Argument(_))));
        let narrow = gen_attributes(20, 1, 0).unwrap();
        assert!(matches!(gen_thresholds(ThresholdScheme::Quadrant, &narrow, 0), Err(Error::Argument(_))));
        let constant = vec![vec![1.0; 10]; 5];
        assert!(matches!(gen_thresholds(ThresholdScheme::Linear, &constant, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn seed_sets() {
        let s = seed_activations(1000, 50, 3).unwrap();
        assert_eq!(s.len(), 50);
        assert_eq!(s, seed_activations(1000, 50, 3).unwrap());
        assert_eq!(seed_activations(7, 7, 0).unwrap(), NodeSet::full(7));
        assert!(seed_activations(5, 6, 0).is_err());
    }
}
