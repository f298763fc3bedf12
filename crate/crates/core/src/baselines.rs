//! Baseline threshold estimators.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::datasets::TrainingTable;
use crate::error::{Error, Result};
use crate::learners::{fit_ols, Regressor};
use crate::ltm::{activation_influence, DiffusionTrace};
use crate::network::{Graph, NodeId};
use crate::synthgen::rng_from;

/// Threshold used by Heuristic Expected when nothing has activated.
pub const EXPECTED_FALLBACK: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Random,
    HeuristicExpected,
    HeuristicIndividual,
    LinearRegression,
    CausalTree,
    StLr,
    StDt,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Random,
        Method::HeuristicExpected,
        Method::HeuristicIndividual,
        Method::LinearRegression,
        Method::CausalTree,
        Method::StLr,
        Method::StDt,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::HeuristicExpected => "heuristic_expected",
            Method::HeuristicIndividual => "heuristic_individual",
            Method::LinearRegression => "linear_regression",
            Method::CausalTree => "causal_tree",
            Method::StLr => "st_lr",
            Method::StDt => "st_dt",
        }
    }

    /// Stable per-method index, used to derive independent random streams.
    pub fn stream(self) -> u64 {
        Method::ALL.iter().position(|m| *m == self).unwrap() as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::arg(format!("unknown estimator `{s}`")))
    }
}

/// Estimated thresholds for a set of nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEstimate {
    pub method: Method,
    pub nodes: Vec<NodeId>,
    pub values: Vec<f64>,
}

impl ThresholdEstimate {
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    /// Full threshold vector: estimates for listed nodes, `fill` elsewhere.
    pub fn to_dense(&self, node_count: usize, fill: f64) -> Vec<f64> {
        let mut out = vec![fill; node_count];
        for (v, t) in self.iter() {
            out[v] = t;
        }
        out
    }
}

/// Uniform `[0, 1)` draws, one per node.
pub fn estimate_random(nodes: &[NodeId], seed: u64) -> ThresholdEstimate {
    let mut rng = rng_from(seed);
    ThresholdEstimate {
        method: Method::Random,
        nodes: nodes.to_vec(),
        values: nodes.iter().map(|_| rng.random::<f64>()).collect(),
    }
}

fn activated_influences(table: &TrainingTable) -> Vec<f64> {
    table.rows.iter().filter(|r| r.y).map(|r| r.influence).collect()
}

/// One shared threshold: the mean influence at activation.
pub fn estimate_heuristic_expected(table: &TrainingTable, nodes: &[NodeId]) -> ThresholdEstimate {
    let at_activation = activated_influences(table);
    let c = if at_activation.is_empty() {
        EXPECTED_FALLBACK
    } else {
        at_activation.iter().sum::<f64>() / at_activation.len() as f64
    };
    ThresholdEstimate { method: Method::HeuristicExpected, nodes: nodes.to_vec(), values: vec![c; nodes.len()] }
}

/// Per-node uniform draws from the observed range of influence at activation.
pub fn estimate_heuristic_individual(table: &TrainingTable, nodes: &[NodeId], seed: u64) -> ThresholdEstimate {
    let at_activation = activated_influences(table);
    let (lo, hi) = if at_activation.is_empty() {
        (0.0, 1.0)
    } else {
        (
            at_activation.iter().copied().fold(f64::INFINITY, f64::min),
            at_activation.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let mut rng = rng_from(seed);
    let values = nodes
        .iter()
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect();
    ThresholdEstimate { method: Method::HeuristicIndividual, nodes: nodes.to_vec(), values }
}

/// Labels each node activated at `1 <= t_v <= snapshot_t` with its influence
/// just before activation, regresses labels on features, and predicts for
/// `nodes` with the output clamped to `[0, 1]`.
pub fn estimate_linear_regression(
    g: &Graph,
    trace: &DiffusionTrace,
    snapshot_t: usize,
    nodes: &[NodeId],
) -> Result<ThresholdEstimate> {
    if snapshot_t > trace.horizon() {
        return Err(Error::arg(format!("snapshot {snapshot_t} beyond horizon {}", trace.horizon())));
    }
    let mut x = Vec::new();
    let mut labels = Vec::new();
    for v in 0..g.node_count() {
        let Some(t) = trace.activation_time(v) else { continue };
        if t == 0 || t > snapshot_t || g.degree(v)? == 0 {
            continue;
        }
        x.push(g.features(v)?.to_vec());
        labels.push(activation_influence(g, v, trace.active_at(t - 1)?)?);
    }
    if labels.is_empty() {
        return Err(Error::EstimatorUnavailable("no activated non-seed node to label".into()));
    }
    let model = fit_ols(&x, &labels)?;
    let values = nodes
        .iter()
        .map(|&v| Ok(model.predict(g.features(v)?)?.clamp(0.0, 1.0)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ThresholdEstimate { method: Method::LinearRegression, nodes: nodes.to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{build_training_table, TrainingRow};
    use crate::ltm::simulate;
    use crate::network::NodeSet;

    fn table_with(influences: &[(f64, bool)]) -> TrainingTable {
        let rows = influences
            .iter()
            .enumerate()
            .map(|(i, &(influence, y))| TrainingRow { node: i, step: 1, x: vec![], influence, z: false, y })
            .collect();
        TrainingTable { rows, feature_dim: 0 }
    }

    #[test]
    fn random_is_uniform_and_deterministic() {
        let nodes: Vec<usize> = (0..10_000).collect();
        let a = estimate_random(&nodes, 3);
        assert_eq!(a, estimate_random(&nodes, 3));
        assert!(a.values.iter().all(|v| (0.0..1.0).contains(v)));
        let mean = a.values.iter().sum::<f64>() / 1e4;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn heuristic_expected() {
        let t = table_with(&[(0.2, true), (0.4, true), (0.9, false)]);
        let e = estimate_heuristic_expected(&t, &[0, 5, 9]);
        assert!(e.values.iter().all(|v| (v - 0.3).abs() < 1e-15));
        let spread = e.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - e.values.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(spread, 0.0);
        let none = estimate_heuristic_expected(&table_with(&[(0.7, false)]), &[1, 2]);
        assert_eq!(none.values, vec![0.5, 0.5]);
    }

    #[test]
    fn heuristic_individual_ranges() {
        let nodes: Vec<usize> = (0..500).collect();
        let e = estimate_heuristic_individual(&table_with(&[(0.25, true), (0.75, true), (0.1, false)]), &nodes, 1);
        assert!(e.values.iter().all(|v| (0.25..=0.75).contains(v)));
        let single = estimate_heuristic_individual(&table_with(&[(0.4, true)]), &nodes, 1);
        assert!(single.values.iter().all(|&v| v == 0.4));
        let none = estimate_heuristic_individual(&TrainingTable::default(), &nodes, 1);
        assert!(none.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn linear_regression_label_is_pre_activation_influence() {
        // Node 4 has neighbors 0..=3; node 0 is seeded, so 4 activates at
        // t = 1 with one of four neighbors active.
        let feats: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let g = Graph::from_edge_list(&[(0, 4), (1, 4), (2, 4), (3, 4)], false, Some(feats)).unwrap();
        let theta = [0.5, 2.0, 2.0, 2.0, 0.25];
        let trace = simulate(&g, &theta, &NodeSet::from_ids(5, [0]).unwrap(), 2).unwrap();
        assert_eq!(trace.activation_time(4), Some(1));
        let est = estimate_linear_regression(&g, &trace, 2, &[4]).unwrap();
        // One label, so OLS predicts its value everywhere.
        assert!((est.values[0] - 0.25).abs() < 1e-9);
        assert!(matches!(
            estimate_linear_regression(&g, &trace, 0, &[4]),
            Err(Error::EstimatorUnavailable(_))
        ));
    }

    #[test]
    fn linear_regression_clamps() {
        // Labels 0.5 (x=0) and 1.0 (x=1) extrapolate below zero at x = -2.
        let feats = vec![vec![0.0], vec![1.0], vec![9.0], vec![9.0], vec![-2.0], vec![9.0]];
        let g = Graph::from_edge_list(&[(2, 0), (3, 0), (2, 1), (0, 4), (5, 4)], true, Some(feats)).unwrap();
        let times = vec![Some(1), Some(1), Some(0), None, None, None];
        let trace = DiffusionTrace::from_activation_times(&times, 1).unwrap();
        let est = estimate_linear_regression(&g, &trace, 1, &[4, 5]).unwrap();
        assert_eq!(est.values[0], 0.0);
        assert_eq!(est.values[1], 1.0);
    }

    #[test]
    fn linear_regression_recovers_linear_labels() {
        // Star-of-stars: each labeled node sees exactly its threshold at activation.
        let mut edges = Vec::new();
        let mut feats = Vec::new();
        let mut hub_count = 0;
        let mut expected = Vec::new();
        for (k, d) in [(1usize, 4usize), (2, 4), (3, 4), (1, 2), (1, 5), (2, 5)] {
            let v = feats.len();
            let label = k as f64 / d as f64;
            feats.push(vec![label * 2.0 + 1.0]);
            expected.push((v, label));
            for j in 0..d {
                let u = feats.len();
                feats.push(vec![0.0]);
                edges.push((u, v));
                if j < k {
                    hub_count += 1;
                }
            }
        }
        let _ = hub_count;
        let n = feats.len();
        let g = Graph::from_edge_list(&edges, true, Some(feats)).unwrap();
        let mut times = vec![None; n];
        for &(v, _) in &expected {
            times[v] = Some(1);
            let nbrs = g.neighbors(v).unwrap().to_vec();
            let k = (expected.iter().find(|e| e.0 == v).unwrap().1 * nbrs.len() as f64).round() as usize;
            for &u in &nbrs[..k] {
                times[u] = Some(0);
            }
        }
        let trace = DiffusionTrace::from_activation_times(&times, 1).unwrap();
        let labeled: Vec<usize> = expected.iter().map(|e| e.0).collect();
        let est = estimate_linear_regression(&g, &trace, 1, &labeled).unwrap();
        let mse: f64 = est.values.iter().zip(&expected).map(|(p, e)| (p - e.1).powi(2)).sum::<f64>() / 6.0;
        assert!(mse < 1e-6, "{mse}");
    }

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert!("st_rf".parse::<Method>().is_err());
    }

    #[test]
    fn table_driven_expected_matches_manual_mean() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2)], false, None).unwrap();
        let trace = simulate(&g, &[0.5; 3], &NodeSet::from_ids(3, [0]).unwrap(), 2).unwrap();
        let table = build_training_table(&g, &trace, 2).unwrap();
        let e = estimate_heuristic_expected(&table, &[2]);
        assert_eq!(e.values, vec![0.75]);
    }
}
