//! Trigger-based causal tree.
//!
//! Each partition carries its own trigger: the influence level that
//! maximizes the partition measure `F = M1 - M0`, the difference in mean
//! outcome above and below the trigger. Splits maximize
//! `N_left * F_left + N_right * F_right`, with each child's trigger searched
//! afresh, and are kept only if the same objective does not drop on a
//! held-out validation sample.

use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::datasets::TrainingTable;
use crate::error::{Error, Result};
use crate::learners::midpoint;
use crate::synthgen::rng_from;
use crate::trigger::{SortedOutcomes, TIE_EPS};

pub use crate::trigger::{TriggerEstimate, TriggerGrid};

/// Fewest rows allowed on either side of a leaf trigger.
pub const MIN_SIDE: usize = 2;

/// Best trigger among `candidates`: effect is
/// `mean(y | I >= r) - mean(y | I < r)`; ties go to the smallest trigger.
///
/// Fails with [`Error::Degenerate`] when no candidate has both sides nonempty.
pub fn best_trigger(influences: &[f64], outcomes: &[bool], candidates: &[f64]) -> Result<TriggerEstimate> {
    if influences.len() != outcomes.len() {
        return Err(Error::arg(format!(
            "{} influences but {} outcomes",
            influences.len(),
            outcomes.len()
        )));
    }
    let mut rows: Vec<(f64, bool)> = influences.iter().copied().zip(outcomes.iter().copied()).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    SortedOutcomes::new(rows.into_iter())
        .best_among(candidates, 1)
        .ok_or_else(|| Error::Degenerate("no candidate trigger splits the influences".into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CausalTreeParams {
    pub min_leaf: usize,
    pub max_depth: usize,
    pub val_fraction: f64,
    pub grid: TriggerGrid,
    /// Per-feature cap on split thresholds examined at each node; thresholds
    /// are thinned to evenly spaced quantiles beyond it.
    pub max_split_candidates: usize,
    pub seed: u64,
}

impl Default for CausalTreeParams {
    fn default() -> Self {
        CausalTreeParams {
            min_leaf: 10,
            max_depth: 10,
            val_fraction: 0.5,
            grid: TriggerGrid::Observed,
            max_split_candidates: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TriggerNode {
    /// Rows with `x[feature] < value` go left.
    Split { feature: usize, value: f64, left: usize, right: usize, n_train: usize, n_val: usize },
    Leaf { trigger: f64, effect: f64, n_train: usize, n_val: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriggerTree {
    pub nodes: Vec<TriggerNode>,
    pub input_dim: usize,
}

struct Sample<'a> {
    x: Vec<&'a [f64]>,
    influence: Vec<f64>,
    y: Vec<bool>,
}

struct Builder<'a> {
    data: Sample<'a>,
    params: &'a CausalTreeParams,
    uniform: Vec<f64>,
    nodes: Vec<TriggerNode>,
}

struct Split {
    feature: usize,
    value: f64,
    objective: f64,
    left: Option<TriggerEstimate>,
    right: Option<TriggerEstimate>,
}

impl Builder<'_> {
    fn outcomes(&self, idx: &[usize]) -> SortedOutcomes {
        SortedOutcomes::new(idx.iter().map(|&i| (self.data.influence[i], self.data.y[i])))
    }

    fn estimate(&self, idx: &[usize]) -> Option<TriggerEstimate> {
        self.outcomes(idx).best(self.params.grid, &self.uniform, MIN_SIDE)
    }

    /// `N * F` on validation rows at a fixed trigger; an empty side scores 0.
    fn validation_measure(&self, val: &[usize], est: Option<TriggerEstimate>) -> f64 {
        match est {
            Some(e) => self
                .outcomes(val)
                .effect_at(e.trigger, 1)
                .map_or(0.0, |f| val.len() as f64 * f),
            None => 0.0,
        }
    }

    fn measure(n: usize, est: Option<TriggerEstimate>) -> f64 {
        est.map_or(0.0, |e| n as f64 * e.effect)
    }

    /// Split thresholds for one feature, thinned to the configured cap.
    fn thresholds(&self, train: &[usize], feature: usize) -> Vec<f64> {
        let mut values: Vec<f64> = train.iter().map(|&i| self.data.x[i][feature]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mids: Vec<f64> = values.windows(2).map(|w| midpoint(w[0], w[1])).collect();
        let cap = self.params.max_split_candidates.max(1);
        if mids.len() <= cap {
            return mids;
        }
        let mut picked: Vec<f64> = (1..=cap).map(|k| mids[k * (mids.len() - 1) / cap]).collect();
        picked.dedup();
        picked
    }

    fn best_split(&self, train: &[usize]) -> Option<Split> {
        let min_leaf = self.params.min_leaf;
        let mut best: Option<Split> = None;
        for feature in 0..self.data.x.first().map_or(0, |r| r.len()) {
            for value in self.thresholds(train, feature) {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    train.iter().partition(|&&i| self.data.x[i][feature] < value);
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let (left, right) = (self.estimate(&l), self.estimate(&r));
                let objective = Self::measure(l.len(), left) + Self::measure(r.len(), right);
                if best.as_ref().is_none_or(|b| objective > b.objective + TIE_EPS) {
                    best = Some(Split { feature, value, objective, left, right });
                }
            }
        }
        best
    }

    /// `train` and `val` are sorted by influence; partitions keep that order.
    fn build(&mut self, train: Vec<usize>, val: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        let own = self.estimate(&train);
        let leaf = match own {
            Some(e) => TriggerNode::Leaf { trigger: e.trigger, effect: e.effect, n_train: train.len(), n_val: val.len() },
            None => TriggerNode::Leaf {
                trigger: self.outcomes(&train).median(),
                effect: 0.0,
                n_train: train.len(),
                n_val: val.len(),
            },
        };
        self.nodes.push(leaf);
        if depth >= self.params.max_depth || train.len() < 2 * self.params.min_leaf {
            return slot;
        }
        let Some(split) = self.best_split(&train) else { return slot };
        if split.objective <= Self::measure(train.len(), own) + TIE_EPS {
            return slot;
        }
        let goes_left = |i: &usize| self.data.x[*i][split.feature] < split.value;
        let (val_l, val_r): (Vec<usize>, Vec<usize>) = val.iter().partition(|i| goes_left(i));
        let parent_val = self.validation_measure(&val, own);
        let child_val = self.validation_measure(&val_l, split.left) + self.validation_measure(&val_r, split.right);
        if child_val < parent_val - TIE_EPS {
            return slot;
        }
        let (tr_l, tr_r): (Vec<usize>, Vec<usize>) = train.iter().partition(|i| goes_left(i));
        let (n_train, n_val) = (train.len(), val.len());
        let left = self.build(tr_l, val_l, depth + 1);
        let right = self.build(tr_r, val_r, depth + 1);
        self.nodes[slot] = TriggerNode::Split { feature: split.feature, value: split.value, left, right, n_train, n_val };
        slot
    }
}

/// Fits a trigger tree on a training table.
pub fn fit(table: &TrainingTable, params: &CausalTreeParams) -> Result<TriggerTree> {
    if table.is_empty() {
        return Err(Error::arg("cannot fit a causal tree on an empty table"));
    }
    if params.min_leaf == 0 || !(0.0..1.0).contains(&params.val_fraction) {
        return Err(Error::arg("min_leaf must be >= 1 and val_fraction in [0, 1)"));
    }
    let n = table.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(params.seed));
    let n_val = ((params.val_fraction * n as f64).floor() as usize).min(n - 1);
    let (val, train) = order.split_at(n_val);
    let by_influence = |idx: &[usize]| {
        let mut v = idx.to_vec();
        v.sort_by(|&a, &b| table.rows[a].influence.total_cmp(&table.rows[b].influence).then(a.cmp(&b)));
        v
    };
    let (train, val) = (by_influence(train), by_influence(val));

    let data = Sample {
        x: table.rows.iter().map(|r| r.x.as_slice()).collect(),
        influence: table.rows.iter().map(|r| r.influence).collect(),
        y: table.rows.iter().map(|r| r.y).collect(),
    };
    let mut builder = Builder { data, params, uniform: TriggerGrid::uniform_points(), nodes: Vec::new() };
    builder.build(train, val, 0);
    Ok(TriggerTree { nodes: builder.nodes, input_dim: table.feature_dim })
}

impl TriggerTree {
    /// Routes `x` to its leaf and returns the leaf trigger and effect.
    pub fn predict_threshold(&self, x: &[f64]) -> Result<TriggerEstimate> {
        if x.len() != self.input_dim {
            return Err(Error::arg(format!(
                "input has {} features, tree expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TriggerNode::Split { feature, value, left, right, .. } => {
                    i = if x[*feature] < *value { *left } else { *right };
                }
                TriggerNode::Leaf { trigger, effect, .. } => {
                    return Ok(TriggerEstimate { trigger: *trigger, effect: *effect });
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &TriggerTree, i: usize) -> usize {
            match &t.nodes[i] {
                TriggerNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TriggerNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TriggerNode::Leaf { .. })).count()
    }

    /// One node per line in preorder:
    /// `kind feature value trigger effect n_train n_val`, `-` for unused fields.
    pub fn to_text(&self) -> String {
        let mut out = format!("# trigger-tree input_dim={}\n", self.input_dim);
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            match &self.nodes[i] {
                TriggerNode::Split { feature, value, left, right, n_train, n_val } => {
                    let _ = writeln!(out, "split {feature} {value:?} - - {n_train} {n_val}");
                    stack.push(*right);
                    stack.push(*left);
                }
                TriggerNode::Leaf { trigger, effect, n_train, n_val } => {
                    let _ = writeln!(out, "leaf - - {trigger:?} {effect:?} {n_train} {n_val}");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<TriggerTree> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::format(Some(1), "empty tree dump"))?;
        let input_dim = header
            .strip_prefix("# trigger-tree input_dim=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::format(Some(1), "missing trigger-tree header"))?;
        let body: Vec<(usize, &str)> = lines.collect();
        let mut nodes = Vec::with_capacity(body.len());
        let mut pos = 0;
        parse_node(&body, &mut pos, &mut nodes)?;
        if pos != body.len() {
            return Err(Error::format(Some(body[pos].0 as u64 + 1), "trailing nodes after a complete tree"));
        }
        Ok(TriggerTree { nodes, input_dim })
    }
}

fn parse_node(body: &[(usize, &str)], pos: &mut usize, nodes: &mut Vec<TriggerNode>) -> Result<usize> {
    let (lineno, line) = *body.get(*pos).ok_or_else(|| Error::format(None, "truncated tree dump"))?;
    let line_no = Some(lineno as u64 + 1);
    *pos += 1;
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 7 {
        return Err(Error::format(line_no, format!("expected 7 fields, found {}", f.len())));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| Error::format(line_no, format!("bad number `{s}`")));
    let count = |s: &str| s.parse::<usize>().map_err(|_| Error::format(line_no, format!("bad count `{s}`")));
    let slot = nodes.len();
    match f[0] {
        "leaf" => {
            nodes.push(TriggerNode::Leaf { trigger: num(f[3])?, effect: num(f[4])?, n_train: count(f[5])?, n_val: count(f[6])? });
        }
        "split" => {
            nodes.push(TriggerNode::Leaf { trigger: 0.0, effect: 0.0, n_train: 0, n_val: 0 });
            let left = parse_node(body, pos, nodes)?;
            let right = parse_node(body, pos, nodes)?;
            nodes[slot] = TriggerNode::Split {
                feature: count(f[1])?,
                value: num(f[2])?,
                left,
                right,
                n_train: count(f[5])?,
                n_val: count(f[6])?,
            };
        }
        other => return Err(Error::format(line_no, format!("unknown node kind `{other}`"))),
    }
    Ok(slot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::TrainingRow;
    use crate::synthgen::rng_from;
    use proptest::prelude::*;
    use rand::Rng;

    /// All 16 activation patterns of four equally weighted neighbors.
    fn binomial_four() -> (Vec<f64>, Vec<bool>) {
        let influences: Vec<f64> = (0u32..16).map(|m| m.count_ones() as f64 / 4.0).collect();
        let outcomes = influences.iter().map(|&i| i >= 0.5).collect();
        (influences, outcomes)
    }

    fn brute_effect(infl: &[f64], y: &[bool], r: f64) -> Option<f64> {
        let above: Vec<bool> = infl.iter().zip(y).filter(|(i, _)| **i >= r).map(|p| *p.1).collect();
        let below: Vec<bool> = infl.iter().zip(y).filter(|(i, _)| **i < r).map(|p| *p.1).collect();
        if above.is_empty() || below.is_empty() {
            return None;
        }
        let mean = |v: &[bool]| v.iter().filter(|b| **b).count() as f64 / v.len() as f64;
        Some(mean(&above) - mean(&below))
    }

    #[test]
    fn binomial_fixture() {
        let (infl, y) = binomial_four();
        assert!((brute_effect(&infl, &y, 0.25).unwrap() - 11.0 / 15.0).abs() < 1e-12);
        assert!((brute_effect(&infl, &y, 0.75).unwrap() - (1.0 - 6.0 / 11.0)).abs() < 1e-12);
        let best = best_trigger(&infl, &y, &[0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(best.trigger, 0.5);
        assert_eq!(best.effect, 1.0);
    }

    #[test]
    fn constant_outcome_picks_smallest() {
        let (infl, _) = binomial_four();
        let y = vec![true; infl.len()];
        let best = best_trigger(&infl, &y, &[0.75, 0.25, 0.5]).unwrap();
        assert_eq!(best, TriggerEstimate { trigger: 0.25, effect: 0.0 });
    }

    #[test]
    fn no_valid_candidate_is_degenerate() {
        assert!(matches!(best_trigger(&[0.5, 0.5], &[true, false], &[0.5, 0.9]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn step_outcome_attains_one_at_threshold() {
        let infl: Vec<f64> = (0..20).map(|k| k as f64 / 19.0).collect();
        let theta = 0.42;
        let y: Vec<bool> = infl.iter().map(|&i| i >= theta).collect();
        let first_above = *infl.iter().find(|&&i| i >= theta).unwrap();
        let best = best_trigger(&infl, &y, &infl).unwrap();
        assert_eq!(best, TriggerEstimate { trigger: first_above, effect: 1.0 });
    }

    fn row(x: Vec<f64>, influence: f64, y: bool) -> TrainingRow {
        TrainingRow { node: 0, step: 1, x, influence, z: false, y }
    }

    fn two_group_table(seed: u64, n: usize) -> TrainingTable {
        let mut rng = rng_from(seed);
        let rows = (0..n)
            .map(|_| {
                let group = rng.random::<bool>();
                let x = vec![if group { 1.0 } else { -1.0 }, rng.random::<f64>(), rng.random::<f64>()];
                let influence = rng.random_range(0..=10) as f64 / 10.0;
                let theta = if group { 0.7 } else { 0.3 };
                row(x, influence, influence >= theta)
            })
            .collect();
        TrainingTable { rows, feature_dim: 3 }
    }

    #[test]
    fn recovers_two_group_thresholds() {
        let table = two_group_table(5, 2000);
        let tree = fit(&table, &CausalTreeParams { seed: 1, ..Default::default() }).unwrap();
        assert!(matches!(tree.nodes[0], TriggerNode::Split { feature: 0, .. }));
        let hi = tree.predict_threshold(&[1.0, 0.5, 0.5]).unwrap();
        let lo = tree.predict_threshold(&[-1.0, 0.5, 0.5]).unwrap();
        assert!((hi.trigger - 0.7).abs() <= 0.1 + 1e-12, "{hi:?}");
        assert!((lo.trigger - 0.3).abs() <= 0.1 + 1e-12, "{lo:?}");
        assert_eq!(hi.effect, 1.0);
    }

    #[test]
    fn homogeneous_threshold_stays_a_stump() {
        let mut rng = rng_from(9);
        let rows = (0..1500)
            .map(|_| {
                let influence = rng.random_range(0..=20) as f64 / 20.0;
                row(vec![rng.random::<f64>(), rng.random::<f64>()], influence, influence >= 0.45)
            })
            .collect();
        let table = TrainingTable { rows, feature_dim: 2 };
        for grid in [TriggerGrid::Observed, TriggerGrid::Uniform101] {
            let tree = fit(&table, &CausalTreeParams { grid, seed: 3, ..Default::default() }).unwrap();
            assert_eq!(tree.depth(), 0, "{grid}");
            let est = tree.predict_threshold(&[0.1, 0.9]).unwrap();
            assert!((est.trigger - 0.45).abs() <= 0.05 + 1e-12, "{grid}: {est:?}");
        }
    }

    #[test]
    fn single_row_is_single_leaf() {
        let table = TrainingTable { rows: vec![row(vec![1.0], 0.3, true)], feature_dim: 1 };
        let tree = fit(&table, &CausalTreeParams::default()).unwrap();
        assert_eq!(tree.nodes, vec![TriggerNode::Leaf { trigger: 0.3, effect: 0.0, n_train: 1, n_val: 0 }]);
    }

    #[test]
    fn empty_table_rejected() {
        assert!(matches!(fit(&TrainingTable::default(), &CausalTreeParams::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let tree = fit(&two_group_table(1, 200), &CausalTreeParams::default()).unwrap();
        assert!(tree.predict_threshold(&[1.0]).is_err());
    }

    #[test]
    fn text_dump_round_trips() {
        let tree = fit(&two_group_table(2, 800), &CausalTreeParams { seed: 4, ..Default::default() }).unwrap();
        let text = tree.to_text();
        assert!(text.lines().nth(1).unwrap().starts_with("split 0 "));
        let back = TriggerTree::from_text(&text).unwrap();
        for x in [[1.0, 0.2, 0.3], [-1.0, 0.9, 0.1]] {
            assert_eq!(back.predict_threshold(&x).unwrap(), tree.predict_threshold(&x).unwrap());
        }
        assert_eq!(back.to_text(), text);
        assert!(TriggerTree::from_text("# trigger-tree input_dim=1\nsplit 0 0.5 - - 3 1\n").is_err());
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let table = two_group_table(8, 600);
        let p = CausalTreeParams { seed: 12, min_leaf: 5, ..Default::default() };
        assert_eq!(fit(&table, &p).unwrap(), fit(&table, &p).unwrap());
    }

    proptest! {
        #[test]
        fn matches_brute_force(seed in 0u64..1000, n in 2usize..40) {
            let mut rng = rng_from(seed);
            let infl: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 7.0).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            let cands: Vec<f64> = (0..=7).map(|k| k as f64 / 7.0).collect();
            let mut best: Option<(f64, f64)> = None;
            for &r in &cands {
                if let Some(e) = brute_effect(&infl, &y, r) {
                    if best.is_none_or(|(_, be)| e > be + 1e-12) {
                        best = Some((r, e));
                    }
                }
            }
            match (best, best_trigger(&infl, &y, &cands)) {
                (Some((r, e)), Ok(got)) => {
                    prop_assert_eq!(got.trigger, r);
                    prop_assert!((got.effect - e).abs() < 1e-12);
                }
                (None, Err(Error::Degenerate(_))) => {}
                (b, g) => prop_assert!(false, "brute {:?} vs {:?}", b, g),
            }
        }

        #[test]
        fn leaf_triggers_are_optimal_within_leaf(seed in 0u64..200) {
            let table = two_group_table(seed, 300);
            let params = CausalTreeParams { seed, min_leaf: 8, val_fraction: 0.0, ..Default::default() };
            let tree = fit(&table, &params).unwrap();
            // With no validation rows every row trains; re-route and re-check each leaf.
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.nodes.len()];
            for (k, r) in table.rows.iter().enumerate() {
                let mut i = 0;
                while let TriggerNode::Split { feature, value, left, right, .. } = &tree.nodes[i] {
                    i = if r.x[*feature] < *value { *left } else { *right };
                }
                members[i].push(k);
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                if let TriggerNode::Leaf { trigger, effect, n_train, .. } = node {
                    prop_assert_eq!(*n_train, members[i].len());
                    let infl: Vec<f64> = members[i].iter().map(|&k| table.rows[k].influence).collect();
                    let ys: Vec<bool> = members[i].iter().map(|&k| table.rows[k].y).collect();
                    let lo = infl.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = infl.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(*trigger >= lo && *trigger <= hi);
                    let mut uniq = infl.clone();
                    uniq.sort_by(f64::total_cmp);
                    uniq.dedup();
                    let below_ok = |r: f64| infl.iter().filter(|&&v| v < r).count() >= MIN_SIDE
                        && infl.iter().filter(|&&v| v >= r).count() >= MIN_SIDE;
                    let brute = uniq.iter().filter(|&&r| below_ok(r)).filter_map(|&r| brute_effect(&infl, &ys, r))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if brute.is_finite() {
                        prop_assert!((effect - brute).abs() < 1e-12);
                        prop_assert!((brute_effect(&infl, &ys, *trigger).unwrap() - effect).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
