//! Experiment configuration: flat `key = value` text with command-line
//! overrides, and the seed fan-out used by the runner.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baselines::Method;
use crate::causal_tree::CausalTreeParams;
use crate::datasets::RowGranularity;
use crate::error::{Error, Result};
use crate::learners::{DEFAULT_MAX_DEPTH, DEFAULT_MIN_LEAF};
use crate::synthgen::{GraphModel, ThresholdScheme};
use crate::trigger::TriggerGrid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Synthetic,
    Ingest,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" | "synth" => Ok(Mode::Synthetic),
            "ingest" => Ok(Mode::Ingest),
            other => Err(Error::config("mode", format!("expected synthetic or ingest, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Synthetic => "synthetic",
            Mode::Ingest => "ingest",
        })
    }
}

/// Input files for ingest mode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestPaths {
    pub edges: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub activations: Option<PathBuf>,
    /// Optional ground-truth thresholds; enables the MSE task.
    pub thresholds: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub graph: GraphModel,
    pub n: usize,
    /// Attribute count.
    pub m: usize,
    pub scheme: ThresholdScheme,
    pub seeds: usize,
    pub horizon: usize,
    /// Snapshot times; empty means `1..horizon`.
    pub snapshots: Vec<usize>,
    pub estimators: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub rows: RowGranularity,
    /// ST-Learner grid; `None` picks uniform101 for synthetic data and
    /// observed for ingested data.
    pub st_grid: Option<TriggerGrid>,
    pub cart_min_leaf: usize,
    pub cart_max_depth: usize,
    pub causal_tree: CausalTreeParams,
    pub directed: bool,
    pub ingest: IngestPaths,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Synthetic,
            graph: GraphModel::ErdosRenyi { p: 0.1 },
            n: 1000,
            m: 100,
            scheme: ThresholdScheme::Linear,
            seeds: 50,
            horizon: 8,
            snapshots: Vec::new(),
            estimators: Method::ALL.to_vec(),
            reps: 10,
            seed: 0,
            workers: 0,
            rows: RowGranularity::PerStep,
            st_grid: None,
            cart_min_leaf: DEFAULT_MIN_LEAF,
            cart_max_depth: DEFAULT_MAX_DEPTH,
            causal_tree: CausalTreeParams::default(),
            directed: false,
            ingest: IngestPaths::default(),
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(key, format!("expected a boolean, got `{value}`"))),
    }
}

fn rename(field: &str, e: Error) -> Error {
    match e {
        Error::Argument(msg) => Error::config(field, msg),
        other => other,
    }
}

fn graph_params(g: &GraphModel) -> Vec<(&'static str, String)> {
    match *g {
        GraphModel::ErdosRenyi { p } => vec![("p", p.to_string())],
        GraphModel::PrefAttach { k } => vec![("k", k.to_string())],
        GraphModel::ForestFire { forward, backward } => {
            vec![("forward", forward.to_string()), ("backward", backward.to_string())]
        }
        GraphModel::WattsStrogatz { k, rewire } => vec![("k", k.to_string()), ("rewire", rewire.to_string())],
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(Some(i as u64 + 1), format!("expected key = value, got `{line}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => self.mode = value.parse()?,
            "graph" => {
                self.graph = match value {
                    "erdos_renyi" | "er" => GraphModel::ErdosRenyi { p: 0.1 },
                    "pref_attach" | "ba" => GraphModel::PrefAttach { k: 2 },
                    "forest_fire" | "ff" => GraphModel::forest_fire(0.3),
                    "watts_strogatz" | "ws" => GraphModel::watts_strogatz(10),
                    other => return Err(Error::config(key, format!("unknown graph model `{other}`"))),
                }
            }
            "p" => match &mut self.graph {
                GraphModel::ErdosRenyi { p } => *p = parse(key, value)?,
                _ => return Err(self.wrong_graph(key)),
            },
            "k" => match &mut self.graph {
                GraphModel::PrefAttach { k } | GraphModel::WattsStrogatz { k, .. } => *k = parse(key, value)?,
                _ => return Err(self.wrong_graph(key)),
            },
            "forward" => match &mut self.graph {
                GraphModel::ForestFire { forward, .. } => *forward = parse(key, value)?,
                _ => return Err(self.wrong_graph(key)),
            },
            "backward" => match &mut self.graph {
                GraphModel::ForestFire { backward, .. } => *backward = parse(key, value)?,
                _ => return Err(self.wrong_graph(key)),
            },
            "rewire" => match &mut self.graph {
                GraphModel::WattsStrogatz { rewire, .. } => *rewire = parse(key, value)?,
                _ => return Err(self.wrong_graph(key)),
            },
            "n" => self.n = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "scheme" => self.scheme = value.parse().map_err(|e| rename(key, e))?,
            "seeds" => self.seeds = parse(key, value)?,
            "horizon" | "T" => self.horizon = parse(key, value)?,
            "snapshots" => {
                self.snapshots = if value.is_empty() || value == "all" {
                    Vec::new()
                } else {
                    value.split(',').map(|s| parse(key, s.trim())).collect::<Result<_>>()?
                }
            }
            "estimators" => self.estimators = parse_estimators(value)?,
            "reps" => self.reps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "rows" => self.rows = value.parse().map_err(|e| rename(key, e))?,
            "st_grid" => {
                self.st_grid = match value {
                    "auto" => None,
                    other => Some(other.parse().map_err(|e| rename(key, e))?),
                }
            }
            "cart_min_leaf" => self.cart_min_leaf = parse(key, value)?,
            "cart_max_depth" => self.cart_max_depth = parse(key, value)?,
            "ct_min_leaf" => self.causal_tree.min_leaf = parse(key, value)?,
            "ct_max_depth" => self.causal_tree.max_depth = parse(key, value)?,
            "ct_val_fraction" => self.causal_tree.val_fraction = parse(key, value)?,
            "ct_grid" => self.causal_tree.grid = value.parse().map_err(|e| rename(key, e))?,
            "ct_max_split_candidates" => self.causal_tree.max_split_candidates = parse(key, value)?,
            "directed" => self.directed = parse_bool(key, value)?,
            "edges" => self.ingest.edges = Some(PathBuf::from(value)),
            "attributes" => self.ingest.attributes = Some(PathBuf::from(value)),
            "activations" => self.ingest.activations = Some(PathBuf::from(value)),
            "thresholds" => self.ingest.thresholds = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    fn wrong_graph(&self, key: &str) -> Error {
        Error::config(key, format!("not a parameter of graph model {}", self.graph.tag()))
    }

    /// Applies a `key=value` override string.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(kv, "override must look like key=value"))?;
        self.set(k.trim(), v.trim())
    }

    /// Snapshot times to evaluate for a given horizon.
    pub fn snapshot_times(&self, horizon: usize) -> Vec<usize> {
        if self.snapshots.is_empty() {
            (1..horizon).collect()
        } else {
            self.snapshots.clone()
        }
    }

    pub fn st_grid_for(&self, mode: Mode) -> TriggerGrid {
        self.st_grid.unwrap_or(match mode {
            Mode::Synthetic => TriggerGrid::Uniform101,
            Mode::Ingest => TriggerGrid::Observed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("reps", "must be >= 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "at least one estimator is required"));
        }
        if self.cart_min_leaf == 0 {
            return Err(Error::config("cart_min_leaf", "must be >= 1"));
        }
        if self.causal_tree.min_leaf == 0 {
            return Err(Error::config("ct_min_leaf", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.causal_tree.val_fraction) {
            return Err(Error::config("ct_val_fraction", "must lie in [0, 1)"));
        }
        if self.causal_tree.max_split_candidates == 0 {
            return Err(Error::config("ct_max_split_candidates", "must be >= 1"));
        }
        match self.mode {
            Mode::Synthetic => {
                if self.horizon == 0 {
                    return Err(Error::config("horizon", "must be >= 1"));
                }
                if let Some(&t) = self.snapshots.iter().find(|&&t| t > self.horizon) {
                    return Err(Error::config("snapshots", format!("snapshot {t} exceeds horizon {}", self.horizon)));
                }
                if self.seeds == 0 || self.seeds > self.n {
                    return Err(Error::config("seeds", format!("need 1 <= seeds <= n = {}", self.n)));
                }
                let min_m = match self.scheme {
                    ThresholdScheme::Linear => crate::synthgen::LINEAR_SUPPORT,
                    ThresholdScheme::Quadrant => 2,
                    ThresholdScheme::External => {
                        return Err(Error::config("scheme", "external thresholds need ingest mode"));
                    }
                };
                if self.m < min_m {
                    return Err(Error::config("m", format!("scheme {} needs m >= {min_m}", self.scheme)));
                }
            }
            Mode::Ingest => {
                if self.ingest.edges.is_none() {
                    return Err(Error::config("edges", "required in ingest mode"));
                }
                if self.ingest.activations.is_none() {
                    return Err(Error::config("activations", "required in ingest mode"));
                }
            }
        }
        Ok(())
    }

    /// Resolved configuration as ordered `(key, value)` pairs.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut p: Vec<(&str, String)> = vec![("mode", self.mode.to_string())];
        if self.mode == Mode::Synthetic {
            p.push(("graph", self.graph.tag().to_string()));
            p.extend(graph_params(&self.graph));
            p.push(("n", self.n.to_string()));
            p.push(("m", self.m.to_string()));
            p.push(("scheme", self.scheme.to_string()));
            p.push(("seeds", self.seeds.to_string()));
            p.push(("horizon", self.horizon.to_string()));
        }
        let snapshots = if self.snapshots.is_empty() {
            "all".to_string()
        } else {
            self.snapshots.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
        };
        p.push(("snapshots", snapshots));
        p.push(("estimators", self.estimators.iter().map(|m| m.tag()).collect::<Vec<_>>().join(",")));
        p.push(("reps", self.reps.to_string()));
        p.push(("seed", self.seed.to_string()));
        p.push(("rows", self.rows.to_string()));
        p.push(("st_grid", self.st_grid_for(self.mode).to_string()));
        p.push(("cart_min_leaf", self.cart_min_leaf.to_string()));
        p.push(("cart_max_depth", self.cart_max_depth.to_string()));
        p.push(("ct_min_leaf", self.causal_tree.min_leaf.to_string()));
        p.push(("ct_max_depth", self.causal_tree.max_depth.to_string()));
        p.push(("ct_val_fraction", self.causal_tree.val_fraction.to_string()));
        p.push(("ct_grid", self.causal_tree.grid.to_string()));
        p.push(("ct_max_split_candidates", self.causal_tree.max_split_candidates.to_string()));
        if self.mode == Mode::Ingest {
            p.push(("directed", self.directed.to_string()));
            let paths = [
                ("edges", &self.ingest.edges),
                ("attributes", &self.ingest.attributes),
                ("activations", &self.ingest.activations),
                ("thresholds", &self.ingest.thresholds),
            ];
            for (k, v) in paths {
                if let Some(path) = v {
                    p.push((k, path.display().to_string()));
                }
            }
        }
        p.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Comma-separated estimator tags, or `all`.
pub fn parse_estimators(list: &str) -> Result<Vec<Method>> {
    if list.trim() == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for tag in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let m: Method = tag.parse().map_err(|e| rename("estimators", e))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent random streams, one per purpose within a repetition.
pub mod stream {
    pub const GRAPH: u64 = 0;
    pub const ATTRIBUTES: u64 = 1;
    pub const THRESHOLDS: u64 = 2;
    pub const SEEDS: u64 = 3;
    /// Estimator streams are `ESTIMATOR_BASE + method * 4096 + snapshot`.
    pub const ESTIMATOR_BASE: u64 = 1 << 20;
}

/// Seed for `(master, rep, stream)`. Pure function of its inputs, so adding
/// streams never shifts existing ones.
pub fn sub_seed(master: u64, rep: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ rep) ^ stream)
}

pub fn estimator_seed(master: u64, rep: u64, method: Method, snapshot: usize) -> u64 {
    sub_seed(master, rep, stream::ESTIMATOR_BASE + method.stream() * 4096 + snapshot as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_synthetic_setup() {
        let c = ExperimentConfig::default();
        assert_eq!((c.n, c.m, c.seeds, c.horizon, c.reps), (1000, 100, 50, 8, 10));
        assert_eq!(c.snapshot_times(c.horizon), (1..8).collect::<Vec<_>>());
        assert_eq!(c.estimators.len(), 7);
        assert_eq!(c.st_grid_for(Mode::Synthetic), TriggerGrid::Uniform101);
        assert_eq!(c.st_grid_for(Mode::Ingest), TriggerGrid::Observed);
        c.validate().unwrap();
    }

    #[test]
    fn parse_and_echo_round_trip() {
        let text = "# small run\nmode = synthetic\ngraph = ws\nk = 6\nrewire = 0.2\nn = 200\nm = 20\n\
                    scheme = quadrant\nestimators = random, st_dt\nreps = 2\nsnapshots = 1,3\nrows = final\n";
        let c = ExperimentConfig::parse_str(text).unwrap();
        assert_eq!(c.graph, GraphModel::WattsStrogatz { k: 6, rewire: 0.2 });
        assert_eq!(c.estimators, vec![Method::Random, Method::StDt]);
        assert_eq!(c.snapshots, vec![1, 3]);
        assert_eq!(c.rows, RowGranularity::Final);
        let again = ExperimentConfig::parse_str(&c.to_text()).unwrap();
        assert_eq!(again.to_text(), c.to_text());
    }

    #[test]
    fn errors_name_the_field() {
        let field = |r: Result<ExperimentConfig>| match r {
            Err(Error::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field(ExperimentConfig::parse_str("reps = x")), "reps");
        assert_eq!(field(ExperimentConfig::parse_str("colour = red")), "colour");
        assert_eq!(field(ExperimentConfig::parse_str("estimators = st_rf")), "estimators");
        assert_eq!(field(ExperimentConfig::parse_str("p = 0.2\ngraph = ba\nk = 0\nforward = 0.1")), "forward");
        let bad = |kv: &str| {
            let mut c = ExperimentConfig::default();
            c.apply_override(kv).unwrap();
            match c.validate() {
                Err(Error::Config { field, .. }) => field,
                other => panic!("{other:?}"),
            }
        };
        assert_eq!(bad("reps=0"), "reps");
        assert_eq!(bad("snapshots=9"), "snapshots");
        assert_eq!(bad("m=5"), "m");
        assert_eq!(bad("mode=ingest"), "edges");
        assert!(matches!(ExperimentConfig::parse_str("no equals sign"), Err(Error::Format { line: Some(1), .. })));
    }

    #[test]
    fn sub_seeds_are_stable_and_distinct() {
        let a = sub_seed(7, 0, stream::GRAPH);
        assert_eq!(a, sub_seed(7, 0, stream::GRAPH));
        let mut all = vec![];
        for rep in 0..10 {
            for s in 0..4 {
                all.push(sub_seed(7, rep, s));
            }
            for m in Method::ALL {
                for t in 0..8 {
                    all.push(estimator_seed(7, rep, m, t));
                }
            }
        }
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
    }
}
