//! Snapshots of a diffusion and the observation table built from them.

mod files;

pub use files::{
    load_activation_log, load_network, load_thresholds, write_activation_log, write_attribute_csv,
    write_edge_csv, write_thresholds, NodeIndex,
};

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ltm::{influence_unchecked, DiffusionTrace};
use crate::network::{Graph, NodeId, NodeSet};

/// The network state at time `t`: the trace prefix `D_0..=D_t`.
#[derive(Clone, Copy, Debug)]
pub struct Snapshot<'a> {
    trace: &'a DiffusionTrace,
    t: usize,
}

impl<'a> Snapshot<'a> {
    pub fn new(trace: &'a DiffusionTrace, t: usize) -> Result<Self> {
        if t > trace.horizon() {
            return Err(Error::arg(format!(
                "snapshot t = {t} beyond trace horizon {}",
                trace.horizon()
            )));
        }
        Ok(Snapshot { trace, t })
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn prefix(&self) -> &'a [NodeSet] {
        &self.trace.active_sets()[..=self.t]
    }

    pub fn active(&self) -> &'a NodeSet {
        &self.trace.active_sets()[self.t]
    }

    /// Nodes still inactive at the snapshot; these are the ones estimated.
    pub fn inactive(&self) -> Vec<NodeId> {
        self.active().complement()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRow {
    pub node: NodeId,
    pub step: usize,
    pub x: Vec<f64>,
    pub influence: f64,
    /// Outcome at the start of the step. Always false: active nodes emit no rows.
    pub z: bool,
    pub y: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingTable {
    pub rows: Vec<TrainingRow>,
    pub feature_dim: usize,
}

impl TrainingTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn influences(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.influence).collect()
    }

    pub fn outcomes(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.y).collect()
    }
}

/// Which steps of the snapshot prefix contribute rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RowGranularity {
    /// One row per (inactive node, step) for steps `1..=t`.
    #[default]
    PerStep,
    /// Only the last step `t`.
    Final,
}

impl FromStr for RowGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-step" | "per_step" => Ok(RowGranularity::PerStep),
            "final" => Ok(RowGranularity::Final),
            other => Err(Error::arg(format!("unknown row granularity `{other}`"))),
        }
    }
}

impl std::fmt::Display for RowGranularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RowGranularity::PerStep => "per-step",
            RowGranularity::Final => "final",
        })
    }
}

pub fn build_training_table(g: &Graph, trace: &DiffusionTrace, snapshot_t: usize) -> Result<TrainingTable> {
    build_training_table_with(g, trace, snapshot_t, RowGranularity::PerStep)
}

/// For each step `s` and each node `v` inactive in `D_{s-1}`, emits
/// `(x_v, I_v(D_{s-1}), y = [v in D_s])`.
pub fn build_training_table_with(
    g: &Graph,
    trace: &DiffusionTrace,
    snapshot_t: usize,
    granularity: RowGranularity,
) -> Result<TrainingTable> {
    if trace.node_count() != g.node_count() {
        return Err(Error::arg(format!(
            "trace covers {} nodes, graph has {}",
            trace.node_count(),
            g.node_count()
        )));
    }
    let snapshot = Snapshot::new(trace, snapshot_t)?;
    let sets = snapshot.prefix();
    let first = match granularity {
        RowGranularity::PerStep => 1,
        RowGranularity::Final => snapshot_t.max(1),
    };
    let mut rows = Vec::new();
    for s in first..=snapshot_t {
        let (before, after) = (&sets[s - 1], &sets[s]);
        for v in before.complement() {
            rows.push(TrainingRow {
                node: v,
                step: s,
                x: g.features(v)?.to_vec(),
                influence: influence_unchecked(g.neighbors(v)?, before),
                z: false,
                y: after.contains(v),
            });
        }
    }
    Ok(TrainingTable { rows, feature_dim: g.feature_dim() })
}
