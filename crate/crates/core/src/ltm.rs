//! Linear Threshold Model diffusion.
//!
//! Updates are synchronous: every node's activation influence at step `t+1`
//! is read from the active set at step `t`. Active nodes stay active.

use crate::error::{Error, Result};
use crate::network::{Graph, NodeId, NodeSet};

/// Weighted fraction of `v`'s in-neighbors that are in `active`.
///
/// Weights are `1 / |N(v)|`, so the sum is computed as a single division of
/// the active-neighbor count by the degree. Isolated nodes get 0.
pub fn activation_influence(g: &Graph, v: NodeId, active: &NodeSet) -> Result<f64> {
    let nbrs = g.neighbors(v)?;
    check_universe(g, active)?;
    Ok(influence_unchecked(nbrs, active))
}

pub(crate) fn influence_unchecked(nbrs: &[NodeId], active: &NodeSet) -> f64 {
    if nbrs.is_empty() {
        return 0.0;
    }
    let hits = nbrs.iter().filter(|&&u| active.contains(u)).count();
    hits as f64 / nbrs.len() as f64
}

/// One synchronous diffusion step.
pub fn step(g: &Graph, thresholds: &[f64], active: &NodeSet) -> Result<NodeSet> {
    check_universe(g, active)?;
    check_thresholds(g, thresholds)?;
    Ok(step_unchecked(g, thresholds, active))
}

fn step_unchecked(g: &Graph, thresholds: &[f64], active: &NodeSet) -> NodeSet {
    let mut next = active.clone();
    for v in 0..g.node_count() {
        if !active.contains(v) && influence_unchecked(g.in_adjacency(v), active) >= thresholds[v] {
            next.insert(v);
        }
    }
    next
}

/// Per-step active sets `D_0..D_T` together with first-activation times.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionTrace {
    active_sets: Vec<NodeSet>,
    activation_time: Vec<Option<usize>>,
}

impl DiffusionTrace {
    /// Builds a trace from explicit active sets, checking monotonicity.
    pub fn from_sets(active_sets: Vec<NodeSet>) -> Result<Self> {
        let first = active_sets
            .first()
            .ok_or_else(|| Error::arg("a trace needs at least D_0"))?;
        let n = first.universe();
        let mut activation_time = vec![None; n];
        for (t, set) in active_sets.iter().enumerate() {
            if set.universe() != n {
                return Err(Error::arg("active sets cover different node universes"));
            }
            if t > 0 && !active_sets[t - 1].is_subset(set) {
                return Err(Error::arg(format!("active sets are not monotone at t = {t}")));
            }
            for v in set.iter() {
                activation_time[v].get_or_insert(t);
            }
        }
        Ok(DiffusionTrace { active_sets, activation_time })
    }

    /// Builds a trace from per-node activation times, horizon `horizon`.
    pub fn from_activation_times(times: &[Option<usize>], horizon: usize) -> Result<Self> {
        let n = times.len();
        if let Some((v, t)) = times
            .iter()
            .enumerate()
            .find_map(|(v, t)| t.filter(|&t| t > horizon).map(|t| (v, t)))
        {
            return Err(Error::arg(format!("node {v} activates at {t}, beyond horizon {horizon}")));
        }
        let active_sets = (0..=horizon)
            .map(|t| {
                let mut set = NodeSet::empty(n);
                for (v, at) in times.iter().enumerate() {
                    if matches!(at, Some(a) if *a <= t) {
                        set.insert(v);
                    }
                }
                set
            })
            .collect();
        Ok(DiffusionTrace { active_sets, activation_time: times.to_vec() })
    }

    pub fn horizon(&self) -> usize {
        self.active_sets.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.activation_time.len()
    }

    pub fn active_sets(&self) -> &[NodeSet] {
        &self.active_sets
    }

    /// `D_t`, or an argument error beyond the horizon.
    pub fn active_at(&self, t: usize) -> Result<&NodeSet> {
        self.active_sets
            .get(t)
            .ok_or_else(|| Error::arg(format!("t = {t} beyond horizon {}", self.horizon())))
    }

    pub fn seeds(&self) -> &NodeSet {
        &self.active_sets[0]
    }

    pub fn final_set(&self) -> &NodeSet {
        self.active_sets.last().expect("trace is never empty")
    }

    pub fn activation_time(&self, v: NodeId) -> Option<usize> {
        self.activation_time.get(v).copied().flatten()
    }

    pub fn activation_times(&self) -> &[Option<usize>] {
        &self.activation_time
    }

    /// The sub-trace `D_from..=D_to`, re-indexed from 0.
    pub fn window(&self, from: usize, to: usize) -> Result<DiffusionTrace> {
        if from > to || to > self.horizon() {
            return Err(Error::arg(format!(
                "window {from}..={to} invalid for horizon {}",
                self.horizon()
            )));
        }
        DiffusionTrace::from_sets(self.active_sets[from..=to].to_vec())
    }
}

/// Runs `horizon` steps from `seeds`. Stops at a fixed point and pads the
/// remaining steps with that set.
pub fn simulate(g: &Graph, thresholds: &[f64], seeds: &NodeSet, horizon: usize) -> Result<DiffusionTrace> {
    check_universe(g, seeds)?;
    check_thresholds(g, thresholds)?;
    let n = g.node_count();
    let mut activation_time = vec![None; n];
    for v in seeds.iter() {
        activation_time[v] = Some(0);
    }
    let mut active_sets = Vec::with_capacity(horizon + 1);
    active_sets.push(seeds.clone());
    let mut settled = false;
    for t in 1..=horizon {
        let prev = &active_sets[t - 1];
        let next = if settled { prev.clone() } else { step_unchecked(g, thresholds, prev) };
        if next.len() == prev.len() {
            settled = true;
        } else {
            for v in next.iter() {
                activation_time[v].get_or_insert(t);
            }
        }
        active_sets.push(next);
    }
    Ok(DiffusionTrace { active_sets, activation_time })
}

fn check_universe(g: &Graph, set: &NodeSet) -> Result<()> {
    if set.universe() != g.node_count() {
        return Err(Error::arg(format!(
            "node set sized for {} nodes, graph has {}",
            set.universe(),
            g.node_count()
        )));
    }
    Ok(())
}

fn check_thresholds(g: &Graph, thresholds: &[f64]) -> Result<()> {
    if thresholds.len() != g.node_count() {
        return Err(Error::arg(format!(
            "{} thresholds for {} nodes",
            thresholds.len(),
            g.node_count()
        )));
    }
    Ok(())
}
