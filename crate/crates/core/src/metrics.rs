//! Evaluation metrics: threshold MSE, average Jaccard, reach curves.

use crate::baselines::{Method, ThresholdEstimate};
use crate::error::{Error, Result};
use crate::ltm::DiffusionTrace;

/// Mean squared threshold error, averaged per snapshot and then across
/// snapshots. Each estimate must list nodes in strictly increasing order.
pub fn threshold_mse(true_thetas: &[f64], estimates_per_snapshot: &[ThresholdEstimate]) -> Result<f64> {
    if estimates_per_snapshot.is_empty() {
        return Err(Error::arg("no snapshot estimates"));
    }
    let mut total = 0.0;
    for est in estimates_per_snapshot {
        total += snapshot_mse(true_thetas, est)?;
    }
    Ok(total / estimates_per_snapshot.len() as f64)
}

/// Mean squared error of one estimate. An empty node set scores 0.
pub fn snapshot_mse(true_thetas: &[f64], est: &ThresholdEstimate) -> Result<f64> {
    if est.nodes.len() != est.values.len() {
        return Err(Error::arg(format!(
            "{} nodes but {} estimates",
            est.nodes.len(),
            est.values.len()
        )));
    }
    if est.nodes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("estimate nodes must be strictly increasing"));
    }
    if let Some(&v) = est.nodes.iter().find(|&&v| v >= true_thetas.len()) {
        return Err(Error::arg(format!("node {v} has no true threshold")));
    }
    if est.nodes.is_empty() {
        return Ok(0.0);
    }
    let sse: f64 = est.iter().map(|(v, t)| (true_thetas[v] - t).powi(2)).sum();
    Ok(sse / est.nodes.len() as f64)
}

/// `1/(T+1) * sum_t |D_t & P_t| / |D_t | P_t|`, with `0/0 = 1`.
pub fn avg_jaccard(truth: &DiffusionTrace, pred: &DiffusionTrace) -> Result<f64> {
    if truth.horizon() != pred.horizon() {
        return Err(Error::arg(format!(
            "horizons differ: {} vs {}",
            truth.horizon(),
            pred.horizon()
        )));
    }
    if truth.node_count() != pred.node_count() {
        return Err(Error::arg(format!(
            "node counts differ: {} vs {}",
            truth.node_count(),
            pred.node_count()
        )));
    }
    let sum: f64 = truth
        .active_sets()
        .iter()
        .zip(pred.active_sets())
        .map(|(a, b)| {
            let union = a.union_len(b);
            if union == 0 {
                1.0
            } else {
                a.intersection_len(b) as f64 / union as f64
            }
        })
        .sum();
    Ok(sum / (truth.horizon() + 1) as f64)
}

/// `(t, |D_t|)` for every step.
pub fn reach_curve(trace: &DiffusionTrace) -> Vec<(usize, usize)> {
    trace.active_sets().iter().enumerate().map(|(t, s)| (t, s.len())).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MseRecord {
    pub rep: usize,
    pub snapshot: usize,
    pub method: Method,
    pub mse: f64,
    pub n_nodes: usize,
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JaccardRecord {
    pub rep: usize,
    pub snapshot: usize,
    pub method: Method,
    pub jaccard: f64,
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachRecord {
    pub rep: usize,
    pub snapshot: usize,
    pub method: Method,
    pub t: usize,
    pub true_count: usize,
    pub pred_count: usize,
}

/// All metric rows of a run plus the resolved configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub config_echo: Vec<(String, String)>,
    pub rep_seeds: Vec<u64>,
    pub mse: Vec<MseRecord>,
    pub jaccard: Vec<JaccardRecord>,
    pub reach: Vec<ReachRecord>,
}

impl ExperimentReport {
    fn mean_where<T>(rows: &[T], keep: impl Fn(&T) -> bool, value: impl Fn(&T) -> f64) -> Option<f64> {
        let vals: Vec<f64> = rows.iter().filter(|r| keep(r)).map(value).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Per-snapshot MSE averaged over snapshots, for one repetition and method.
    pub fn rep_mse(&self, rep: usize, method: Method) -> Option<f64> {
        Self::mean_where(&self.mse, |r| r.rep == rep && r.method == method, |r| r.mse)
    }

    pub fn rep_jaccard(&self, rep: usize, method: Method) -> Option<f64> {
        Self::mean_where(&self.jaccard, |r| r.rep == rep && r.method == method, |r| r.jaccard)
    }

    pub fn mean_mse(&self, method: Method) -> Option<f64> {
        Self::mean_where(&self.mse, |r| r.method == method, |r| r.mse)
    }

    pub fn mean_jaccard(&self, method: Method) -> Option<f64> {
        Self::mean_where(&self.jaccard, |r| r.method == method, |r| r.jaccard)
    }

    /// Methods present in the report, in canonical order.
    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.mse.iter().map(|r| r.method).chain(self.jaccard.iter().map(|r| r.method)).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn repetitions(&self) -> usize {
        self.rep_seeds.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltm::simulate;
    use crate::network::{Graph, NodeSet};
    use crate::synthgen::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    fn est(nodes: Vec<usize>, values: Vec<f64>) -> ThresholdEstimate {
        ThresholdEstimate { method: Method::Random, nodes, values }
    }

    fn sets(n: usize, steps: &[&[usize]]) -> DiffusionTrace {
        DiffusionTrace::from_sets(steps.iter().map(|s| NodeSet::from_ids(n, s.iter().copied()).unwrap()).collect()).unwrap()
    }

    #[test]
    fn mse_basics() {
        let truth = [0.2, 0.4, 0.6];
        assert_eq!(threshold_mse(&truth, &[est(vec![0, 2], vec![0.2, 0.6])]).unwrap(), 0.0);
        let off = est(vec![0, 1, 2], vec![0.3, 0.5, 0.7]);
        assert!((threshold_mse(&truth, &[off.clone(), off]).unwrap() - 0.01).abs() < 1e-15);
        assert!(threshold_mse(&truth, &[est(vec![0, 1], vec![0.1])]).is_err());
        assert!(threshold_mse(&truth, &[est(vec![3], vec![0.1])]).is_err());
        assert!(threshold_mse(&truth, &[est(vec![1, 0], vec![0.1, 0.1])]).is_err());
        assert!(threshold_mse(&truth, &[]).is_err());
    }

    #[test]
    fn mse_of_two_uniforms_is_one_sixth() {
        let mut rng = rng_from(11);
        let n = 100_000;
        let truth: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let guess: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let m = threshold_mse(&truth, &[est((0..n).collect(), guess)]).unwrap();
        assert!((m - 1.0 / 6.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn jaccard_cases() {
        let a = sets(4, &[&[1, 2]]);
        let b = sets(4, &[&[2, 3]]);
        assert!((avg_jaccard(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let a = sets(4, &[&[2], &[1, 2]]);
        let b = sets(4, &[&[2], &[1, 2, 3]]);
        assert!((avg_jaccard(&a, &b).unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        let empty = sets(4, &[&[], &[]]);
        assert_eq!(avg_jaccard(&empty, &empty).unwrap(), 1.0);
        assert!(avg_jaccard(&a, &sets(4, &[&[2]])).is_err());
    }

    #[test]
    fn reach_of_path_graph() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2)], false, None).unwrap();
        let trace = simulate(&g, &[0.5; 3], &NodeSet::from_ids(3, [0]).unwrap(), 4).unwrap();
        assert_eq!(reach_curve(&trace), vec![(0, 1), (1, 2), (2, 3), (3, 3), (4, 3)]);
        let none = simulate(&g, &[0.5; 3], &NodeSet::empty(3), 2).unwrap();
        assert_eq!(reach_curve(&none), vec![(0, 0), (1, 0), (2, 0)]);
    }

    fn trace_strategy() -> impl Strategy<Value = DiffusionTrace> {
        prop::collection::vec(prop::option::of(0usize..5), 1..20)
            .prop_map(|times| DiffusionTrace::from_activation_times(&times, 4).unwrap())
    }

    proptest! {
        #[test]
        fn jaccard_self_and_symmetry(a in trace_strategy(), b in trace_strategy()) {
            prop_assert_eq!(avg_jaccard(&a, &a).unwrap(), 1.0);
            if a.node_count() == b.node_count() {
                let ab = avg_jaccard(&a, &b).unwrap();
                prop_assert_eq!(ab, avg_jaccard(&b, &a).unwrap());
                prop_assert!((0.0..=1.0).contains(&ab));
            }
            let r = reach_curve(&a);
            prop_assert!(r.windows(2).all(|w| w[0].1 <= w[1].1));
        }
    }
}
