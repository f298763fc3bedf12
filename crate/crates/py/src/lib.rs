//! Python bindings for `ltm-thresholds`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ltm_thresholds::baselines::{Method, ThresholdEstimate};
use ltm_thresholds::causal_tree::{self, CausalTreeParams, TriggerTree};
use ltm_thresholds::config::{ExperimentConfig, Mode};
use ltm_thresholds::datasets::{self, RowGranularity, Snapshot};
use ltm_thresholds::experiment::{self, SnapshotData};
use ltm_thresholds::ltm;
use ltm_thresholds::metrics;
use ltm_thresholds::oracle::{self, Verdict};
use ltm_thresholds::st_learner::{self, BaseLearner, STModel, TriggerGrid};
use ltm_thresholds::synthgen::{self, GraphModel, ThresholdScheme};
use ltm_thresholds::{DiffusionTrace, Error, NodeSet};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Attributed graph with normalized in-neighbor influence weights.
#[pyclass(name = "Graph", frozen)]
pub struct PyGraph {
    inner: ltm_thresholds::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (edges, directed = false, features = None))]
    fn new(edges: Vec<(usize, usize)>, directed: bool, features: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let inner = ltm_thresholds::Graph::from_edge_list(&edges, directed, features).map_err(to_py)?;
        Ok(PyGraph { inner })
    }

    /// Same edges with a new feature matrix, one row per node.
    fn with_features(&self, features: Vec<Vec<f64>>) -> PyResult<Self> {
        let g = &self.inner;
        let inner = ltm_thresholds::Graph::with_edges(g.node_count(), g.edges(), g.is_directed(), Some(features))
            .map_err(to_py)?;
        Ok(PyGraph { inner })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn directed(&self) -> bool {
        self.inner.is_directed()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    fn neighbors(&self, v: usize) -> PyResult<Vec<usize>> {
        self.inner.neighbors(v).map(<[usize]>::to_vec).map_err(to_py)
    }

    fn degree(&self, v: usize) -> PyResult<usize> {
        self.inner.degree(v).map_err(to_py)
    }

    fn influence_weight(&self, u: usize, v: usize) -> PyResult<f64> {
        self.inner.influence_weight(u, v).map_err(to_py)
    }

    fn features(&self, v: usize) -> PyResult<Vec<f64>> {
        self.inner.features(v).map(<[f64]>::to_vec).map_err(to_py)
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(nodes={}, edges={}, directed={}, feature_dim={})",
            self.inner.node_count(),
            self.inner.edge_count(),
            if self.inner.is_directed() { "True" } else { "False" },
            self.inner.feature_dim()
        )
    }
}

#[pyclass(name = "DiffusionTrace", frozen)]
pub struct PyTrace {
    inner: DiffusionTrace,
}

#[pymethods]
impl PyTrace {
    /// Builds a trace from per-node activation times (`None` = never).
    #[staticmethod]
    fn from_activation_times(times: Vec<Option<usize>>, horizon: usize) -> PyResult<Self> {
        Ok(PyTrace { inner: DiffusionTrace::from_activation_times(&times, horizon).map_err(to_py)? })
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn active_sets(&self) -> Vec<Vec<usize>> {
        self.inner.active_sets().iter().map(NodeSet::to_vec).collect()
    }

    #[getter]
    fn activation_times(&self) -> Vec<Option<usize>> {
        self.inner.activation_times().to_vec()
    }

    fn active_at(&self, t: usize) -> PyResult<Vec<usize>> {
        self.inner.active_at(t).map(NodeSet::to_vec).map_err(to_py)
    }

    fn window(&self, start: usize, end: usize) -> PyResult<Self> {
        Ok(PyTrace { inner: self.inner.window(start, end).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "DiffusionTrace(nodes={}, horizon={}, final={})",
            self.inner.node_count(),
            self.inner.horizon(),
            self.inner.final_set().len()
        )
    }
}

/// Observation rows `(node, step, x, influence, y)` built from a trace prefix.
#[pyclass(name = "TrainingTable", frozen)]
pub struct PyTable {
    inner: datasets::TrainingTable,
}

#[pymethods]
impl PyTable {
    #[new]
    #[pyo3(signature = (graph, trace, t, rows = "per-step"))]
    fn new(graph: &PyGraph, trace: &PyTrace, t: usize, rows: &str) -> PyResult<Self> {
        let granularity: RowGranularity = parse(rows)?;
        let inner = datasets::build_training_table_with(&graph.inner, &trace.inner, t, granularity).map_err(to_py)?;
        Ok(PyTable { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn influences(&self) -> Vec<f64> {
        self.inner.influences()
    }

    #[getter]
    fn outcomes(&self) -> Vec<bool> {
        self.inner.outcomes()
    }

    fn rows(&self) -> Vec<(usize, usize, Vec<f64>, f64, bool)> {
        self.inner.rows.iter().map(|r| (r.node, r.step, r.x.clone(), r.influence, r.y)).collect()
    }
}

#[pyclass(name = "CausalTree", frozen)]
pub struct PyCausalTree {
    inner: TriggerTree,
}

#[pymethods]
impl PyCausalTree {
    #[staticmethod]
    #[pyo3(signature = (table, min_leaf = 10, max_depth = 10, val_fraction = 0.5, grid = "observed", max_split_candidates = 32, seed = 0))]
    fn fit(
        table: &PyTable,
        min_leaf: usize,
        max_depth: usize,
        val_fraction: f64,
        grid: &str,
        max_split_candidates: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let params = CausalTreeParams { min_leaf, max_depth, val_fraction, grid: parse(grid)?, max_split_candidates, seed };
        Ok(PyCausalTree { inner: causal_tree::fit(&table.inner, &params).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyCausalTree { inner: TriggerTree::from_text(text).map_err(to_py)? })
    }

    /// `(trigger, effect)` of the leaf `x` falls into.
    fn predict_threshold(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        let e = self.inner.predict_threshold(&x).map_err(to_py)?;
        Ok((e.trigger, e.effect))
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.inner.leaf_count()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

#[pyclass(name = "STLearner", frozen)]
pub struct PySTLearner {
    inner: STModel,
}

#[pymethods]
impl PySTLearner {
    /// `base` is `ols` or `cart`; `grid` is `observed` or `uniform101`.
    #[staticmethod]
    #[pyo3(signature = (table, base = "cart", grid = "uniform101"))]
    fn fit(table: &PyTable, base: &str, grid: &str) -> PyResult<Self> {
        let base: BaseLearner = parse(base)?;
        let grid: TriggerGrid = parse(grid)?;
        Ok(PySTLearner { inner: st_learner::fit(&table.inner, base, grid).map_err(to_py)? })
    }

    fn predict_trigger(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        let e = self.inner.predict_trigger(&x).map_err(to_py)?;
        Ok((e.trigger, e.effect))
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid().to_vec()
    }

    #[getter]
    fn triggers(&self) -> Vec<f64> {
        self.inner.triggers().to_vec()
    }
}

fn graph_model(
    model: &str,
    p: Option<f64>,
    k: Option<usize>,
    forward: Option<f64>,
    backward: f64,
    rewire: f64,
) -> PyResult<GraphModel> {
    let need = |name: &str| PyValueError::new_err(format!("{model} needs `{name}`"));
    Ok(match model {
        "erdos_renyi" => GraphModel::ErdosRenyi { p: p.ok_or_else(|| need("p"))? },
        "pref_attach" => GraphModel::PrefAttach { k: k.ok_or_else(|| need("k"))? },
        "forest_fire" => GraphModel::ForestFire { forward: forward.ok_or_else(|| need("forward"))?, backward },
        "watts_strogatz" => GraphModel::WattsStrogatz { k: k.ok_or_else(|| need("k"))?, rewire },
        other => return Err(PyValueError::new_err(format!("unknown graph model `{other}`"))),
    })
}

#[pyfunction]
#[pyo3(signature = (model, n, seed, p = None, k = None, forward = None, backward = 0.1, rewire = 0.1))]
#[allow(clippy::too_many_arguments)]
fn gen_graph(
    model: &str,
    n: usize,
    seed: u64,
    p: Option<f64>,
    k: Option<usize>,
    forward: Option<f64>,
    backward: f64,
    rewire: f64,
) -> PyResult<PyGraph> {
    let model = graph_model(model, p, k, forward, backward, rewire)?;
    Ok(PyGraph { inner: synthgen::gen_graph(model, n, seed).map_err(to_py)? })
}

#[pyfunction]
fn gen_attributes(n: usize, m: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    synthgen::gen_attributes(n, m, seed).map_err(to_py)
}

#[pyfunction]
fn gen_thresholds(scheme: &str, features: Vec<Vec<f64>>, seed: u64) -> PyResult<Vec<f64>> {
    let scheme: ThresholdScheme = parse(scheme)?;
    Ok(synthgen::gen_thresholds(scheme, &features, seed).map_err(to_py)?.thresholds)
}

#[pyfunction]
fn seed_activations(n: usize, count: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(synthgen::seed_activations(n, count, seed).map_err(to_py)?.to_vec())
}

fn node_set(g: &PyGraph, ids: Vec<usize>) -> PyResult<NodeSet> {
    NodeSet::from_ids(g.inner.node_count(), ids).map_err(to_py)
}

#[pyfunction]
fn activation_influence(graph: &PyGraph, v: usize, active: Vec<usize>) -> PyResult<f64> {
    ltm::activation_influence(&graph.inner, v, &node_set(graph, active)?).map_err(to_py)
}

#[pyfunction]
fn simulate(graph: &PyGraph, thresholds: Vec<f64>, seeds: Vec<usize>, horizon: usize) -> PyResult<PyTrace> {
    let seeds = node_set(graph, seeds)?;
    Ok(PyTrace { inner: ltm::simulate(&graph.inner, &thresholds, &seeds, horizon).map_err(to_py)? })
}

#[pyfunction]
fn best_trigger(influences: Vec<f64>, outcomes: Vec<bool>, candidates: Vec<f64>) -> PyResult<(f64, f64)> {
    let e = causal_tree::best_trigger(&influences, &outcomes, &candidates).map_err(to_py)?;
    Ok((e.trigger, e.effect))
}

/// Thresholds for the nodes inactive at snapshot `t`, as `(nodes, values, fallback)`.
#[pyfunction]
#[pyo3(signature = (method, graph, trace, t, seed = 0, rows = "per-step", st_grid = "uniform101"))]
fn estimate(
    method: &str,
    graph: &PyGraph,
    trace: &PyTrace,
    t: usize,
    seed: u64,
    rows: &str,
    st_grid: &str,
) -> PyResult<(Vec<usize>, Vec<f64>, bool)> {
    let method: Method = parse(method)?;
    let cfg = ExperimentConfig { rows: parse(rows)?, st_grid: Some(parse(st_grid)?), ..Default::default() };
    let table = datasets::build_training_table_with(&graph.inner, &trace.inner, t, cfg.rows).map_err(to_py)?;
    let nodes = Snapshot::new(&trace.inner, t).map_err(to_py)?.inactive();
    let data = SnapshotData { graph: &graph.inner, trace: &trace.inner, t, table: &table, nodes: &nodes };
    let out = experiment::run_estimator(method, &data, &cfg, Mode::Synthetic, seed).map_err(to_py)?;
    Ok((out.estimate.nodes, out.estimate.values, out.fallback))
}

/// Mean over snapshots of the per-snapshot MSE; each entry is `(nodes, values)`.
#[pyfunction]
fn threshold_mse(true_thetas: Vec<f64>, estimates: Vec<(Vec<usize>, Vec<f64>)>) -> PyResult<f64> {
    let estimates: Vec<ThresholdEstimate> = estimates
        .into_iter()
        .map(|(nodes, values)| ThresholdEstimate { method: Method::Random, nodes, values })
        .collect();
    metrics::threshold_mse(&true_thetas, &estimates).map_err(to_py)
}

#[pyfunction]
fn avg_jaccard(truth: &PyTrace, pred: &PyTrace) -> PyResult<f64> {
    metrics::avg_jaccard(&truth.inner, &pred.inner).map_err(to_py)
}

#[pyfunction]
fn reach_curve(trace: &PyTrace) -> Vec<(usize, usize)> {
    metrics::reach_curve(&trace.inner)
}

/// Returns `(verdict, argmax, max_effect)`; verdict is `holds`, `fails` or
/// `inconclusive`.
#[pyfunction]
fn verify_theorem(weights: Vec<f64>, theta: f64, candidates: Vec<f64>) -> PyResult<(String, Vec<f64>, Option<f64>)> {
    Ok(match oracle::verify_theorem1(&weights, theta, &candidates).map_err(to_py)? {
        Verdict::Holds { argmax, max_effect } => ("holds".into(), argmax, Some(max_effect)),
        Verdict::Fails { argmax, max_effect } => ("fails".into(), argmax, Some(max_effect)),
        Verdict::Inconclusive { .. } => ("inconclusive".into(), Vec::new(), None),
    })
}

#[pyfunction]
#[pyo3(signature = (trials = 200, max_neighbors = 8, seed = 0))]
fn verify_batch<'py>(py: Python<'py>, trials: usize, max_neighbors: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let s = oracle::verify_batch(trials, max_neighbors, seed).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("trials", s.trials)?;
    d.set_item("conclusive", s.conclusive)?;
    d.set_item("inconclusive", s.inconclusive)?;
    d.set_item("failed", s.failed)?;
    Ok(d)
}

/// Runs an experiment from `key = value` config text plus overrides. Writes
/// the CSV outputs when `out` is given. Returns `{method: (mse, jaccard)}`.
#[pyfunction]
#[pyo3(signature = (config = "", overrides = Vec::new(), out = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    overrides: Vec<String>,
    out: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = ExperimentConfig::parse_str(config).map_err(to_py)?;
    for kv in &overrides {
        cfg.apply_override(kv).map_err(to_py)?;
    }
    let report = py.detach(|| experiment::run_experiment(&cfg)).map_err(to_py)?;
    if let Some(dir) = out {
        experiment::write_report(&report, &dir).map_err(to_py)?;
    }
    let d = PyDict::new(py);
    for m in report.methods() {
        d.set_item(m.tag(), (report.mean_mse(m), report.mean_jaccard(m)))?;
    }
    Ok(d)
}

#[pymodule]
pub fn pyltm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyCausalTree>()?;
    m.add_class::<PySTLearner>()?;
    m.add_function(wrap_pyfunction!(gen_graph, m)?)?;
    m.add_function(wrap_pyfunction!(gen_attributes, m)?)?;
    m.add_function(wrap_pyfunction!(gen_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(seed_activations, m)?)?;
    m.add_function(wrap_pyfunction!(activation_influence, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(best_trigger, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_mse, m)?)?;
    m.add_function(wrap_pyfunction!(avg_jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(reach_curve, m)?)?;
    m.add_function(wrap_pyfunction!(verify_theorem, m)?)?;
    m.add_function(wrap_pyfunction!(verify_batch, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("ESTIMATORS", Method::ALL.iter().map(|m| m.tag()).collect::<Vec<_>>())?;
    Ok(())
}
