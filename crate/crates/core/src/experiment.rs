//! Experiment pipeline: data per repetition, estimator fits, predicted
//! traces, metrics, and CSV output.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::baselines::{
    estimate_heuristic_expected, estimate_heuristic_individual, estimate_linear_regression, estimate_random,
    Method, ThresholdEstimate,
};
use crate::causal_tree::{self, CausalTreeParams};
use crate::config::{estimator_seed, stream, sub_seed, ExperimentConfig, Mode};
use crate::datasets::{build_training_table_with, load_activation_log, load_network, load_thresholds, Snapshot, TrainingTable};
use crate::error::{Error, Result};
use crate::ltm::{simulate, DiffusionTrace};
use crate::metrics::{avg_jaccard, reach_curve, snapshot_mse, ExperimentReport, JaccardRecord, MseRecord, ReachRecord};
use crate::network::{Graph, NodeId};
use crate::st_learner::{self, BaseLearner};
use crate::synthgen::{gen_attributes, gen_graph, gen_thresholds, seed_activations};

/// One observed diffusion: the network, its true thresholds when known, and
/// the full trace.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: Graph,
    pub thresholds: Option<Vec<f64>>,
    pub trace: DiffusionTrace,
}

/// Generates the synthetic instance of repetition `rep`.
pub fn synth_instance(cfg: &ExperimentConfig, rep: usize) -> Result<Instance> {
    let rep = rep as u64;
    let bare = gen_graph(cfg.graph, cfg.n, sub_seed(cfg.seed, rep, stream::GRAPH))?;
    let attrs = gen_attributes(cfg.n, cfg.m, sub_seed(cfg.seed, rep, stream::ATTRIBUTES))?;
    let theta = gen_thresholds(cfg.scheme, &attrs, sub_seed(cfg.seed, rep, stream::THRESHOLDS))?.thresholds;
    let graph = Graph::with_edges(cfg.n, bare.edges(), false, Some(attrs))?;
    let seeds = seed_activations(cfg.n, cfg.seeds, sub_seed(cfg.seed, rep, stream::SEEDS))?;
    let trace = simulate(&graph, &theta, &seeds, cfg.horizon)?;
    Ok(Instance { graph, thresholds: Some(theta), trace })
}

/// Loads the ingest-mode instance.
pub fn ingest_instance(cfg: &ExperimentConfig) -> Result<Instance> {
    let edges = cfg.ingest.edges.as_deref().ok_or_else(|| Error::config("edges", "required in ingest mode"))?;
    let log = cfg
        .ingest
        .activations
        .as_deref()
        .ok_or_else(|| Error::config("activations", "required in ingest mode"))?;
    let (graph, index) = load_network(edges, cfg.ingest.attributes.as_deref(), cfg.directed)?;
    let trace = load_activation_log(log, &index)?;
    let thresholds = cfg.ingest.thresholds.as_deref().map(|p| load_thresholds(p, &index)).transpose()?;
    Ok(Instance { graph, thresholds, trace })
}

/// An estimate plus whether a fallback replaced the requested method.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodOutput {
    pub estimate: ThresholdEstimate,
    pub fallback: bool,
}

/// Everything an estimator may look at for one snapshot.
pub struct SnapshotData<'a> {
    pub graph: &'a Graph,
    pub trace: &'a DiffusionTrace,
    pub t: usize,
    pub table: &'a TrainingTable,
    pub nodes: &'a [NodeId],
}

/// Fits `method` on the snapshot and estimates thresholds for `data.nodes`.
/// Estimators that cannot fit, and trigger learners given a table without
/// a single activation, fall back to Heuristic Expected.
pub fn run_estimator(
    method: Method,
    data: &SnapshotData<'_>,
    cfg: &ExperimentConfig,
    mode: Mode,
    seed: u64,
) -> Result<MethodOutput> {
    let no_activations = data.table.rows.iter().all(|r| !r.y);
    let fitted = match method {
        Method::CausalTree | Method::StLr | Method::StDt if no_activations => {
            Err(Error::Degenerate("training table has no activations".into()))
        }
        Method::Random => Ok(estimate_random(data.nodes, seed)),
        Method::HeuristicExpected => Ok(estimate_heuristic_expected(data.table, data.nodes)),
        Method::HeuristicIndividual => Ok(estimate_heuristic_individual(data.table, data.nodes, seed)),
        Method::LinearRegression => estimate_linear_regression(data.graph, data.trace, data.t, data.nodes),
        Method::CausalTree => {
            let params = CausalTreeParams { seed, ..cfg.causal_tree.clone() };
            causal_tree::fit(data.table, &params).and_then(|tree| {
                let values = predict_all(data, |x| tree.predict_threshold(x).map(|e| e.trigger))?;
                Ok(ThresholdEstimate { method, nodes: data.nodes.to_vec(), values })
            })
        }
        Method::StLr | Method::StDt => {
            let base = if method == Method::StLr {
                BaseLearner::Ols
            } else {
                BaseLearner::Cart { min_leaf: cfg.cart_min_leaf, max_depth: cfg.cart_max_depth }
            };
            st_learner::fit(data.table, base, cfg.st_grid_for(mode)).and_then(|model| {
                let values = predict_all(data, |x| model.predict_trigger(x).map(|e| e.trigger))?;
                Ok(ThresholdEstimate { method, nodes: data.nodes.to_vec(), values })
            })
        }
    };
    match fitted {
        Ok(estimate) => Ok(MethodOutput { estimate, fallback: false }),
        Err(Error::EstimatorUnavailable(_) | Error::Degenerate(_) | Error::Argument(_)) => {
            let mut estimate = estimate_heuristic_expected(data.table, data.nodes);
            estimate.method = method;
            Ok(MethodOutput { estimate, fallback: true })
        }
        Err(e) => Err(e),
    }
}

fn predict_all(data: &SnapshotData<'_>, f: impl Fn(&[f64]) -> Result<f64>) -> Result<Vec<f64>> {
    data.nodes
        .iter()
        .map(|&v| f(data.graph.features(v)?).map(|t| t.clamp(0.0, 1.0)))
        .collect()
}

/// Simulates forward from `D_t` with estimated thresholds over `t..=horizon`.
pub fn predicted_trace(g: &Graph, truth: &DiffusionTrace, t: usize, est: &ThresholdEstimate) -> Result<DiffusionTrace> {
    let start = truth.active_at(t)?;
    let theta = est.to_dense(g.node_count(), 0.0);
    simulate(g, &theta, start, truth.horizon() - t)
}

#[derive(Clone, Debug, Default)]
struct RepRows {
    mse: Vec<MseRecord>,
    jaccard: Vec<JaccardRecord>,
    reach: Vec<ReachRecord>,
}

fn run_repetition(cfg: &ExperimentConfig, rep: usize, inst: &Instance, mode: Mode) -> Result<RepRows> {
    let mut rows = RepRows::default();
    let horizon = inst.trace.horizon();
    for t in cfg.snapshot_times(horizon) {
        if t > horizon {
            return Err(Error::config("snapshots", format!("snapshot {t} exceeds horizon {horizon}")));
        }
        let table = build_training_table_with(&inst.graph, &inst.trace, t, cfg.rows)?;
        let nodes = Snapshot::new(&inst.trace, t)?.inactive();
        let data = SnapshotData { graph: &inst.graph, trace: &inst.trace, t, table: &table, nodes: &nodes };
        let truth_window = inst.trace.window(t, horizon)?;
        for &method in &cfg.estimators {
            let seed = estimator_seed(cfg.seed, rep as u64, method, t);
            let out = run_estimator(method, &data, cfg, mode, seed)?;
            if let Some(theta) = &inst.thresholds {
                rows.mse.push(MseRecord {
                    rep,
                    snapshot: t,
                    method,
                    mse: snapshot_mse(theta, &out.estimate)?,
                    n_nodes: nodes.len(),
                    fallback: out.fallback,
                });
            }
            let pred = predicted_trace(&inst.graph, &inst.trace, t, &out.estimate)?;
            rows.jaccard.push(JaccardRecord {
                rep,
                snapshot: t,
                method,
                jaccard: avg_jaccard(&truth_window, &pred)?,
                fallback: out.fallback,
            });
            for ((i, true_count), (_, pred_count)) in reach_curve(&truth_window).into_iter().zip(reach_curve(&pred)) {
                rows.reach.push(ReachRecord { rep, snapshot: t, method, t: t + i, true_count, pred_count });
            }
        }
    }
    Ok(rows)
}

/// Runs every repetition and collects the metric rows in repetition order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let ingested = match cfg.mode {
        Mode::Ingest => Some(ingest_instance(cfg)?),
        Mode::Synthetic => None,
    };
    let one = |rep: usize| -> Result<RepRows> {
        match &ingested {
            Some(inst) => run_repetition(cfg, rep, inst, Mode::Ingest),
            None => run_repetition(cfg, rep, &synth_instance(cfg, rep)?, Mode::Synthetic),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let per_rep: Vec<RepRows> = pool.install(|| (0..cfg.reps).into_par_iter().map(one).collect::<Result<_>>())?;

    let mut report = ExperimentReport {
        config_echo: cfg.to_pairs(),
        rep_seeds: (0..cfg.reps as u64).map(|r| sub_seed(cfg.seed, r, stream::GRAPH)).collect(),
        ..Default::default()
    };
    for r in per_rep {
        report.mse.extend(r.mse);
        report.jaccard.extend(r.jaccard);
        report.reach.extend(r.reach);
    }
    Ok(report)
}

fn create(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

/// Writes `mse.csv`, `jaccard.csv`, `reach.csv`, `summary.csv` and `run.json`
/// into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("mse.csv");
    let mut w = create(&path)?;
    let err = csv_err(&path);
    w.write_record(["rep", "snapshot", "method", "mse", "n_nodes", "fallback"]).map_err(&err)?;
    for r in &report.mse {
        w.write_record([
            r.rep.to_string(),
            r.snapshot.to_string(),
            r.method.to_string(),
            r.mse.to_string(),
            r.n_nodes.to_string(),
            r.fallback.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("jaccard.csv");
    let mut w = create(&path)?;
    let err = csv_err(&path);
    w.write_record(["rep", "snapshot", "method", "jaccard", "fallback"]).map_err(&err)?;
    for r in &report.jaccard {
        w.write_record([
            r.rep.to_string(),
            r.snapshot.to_string(),
            r.method.to_string(),
            r.jaccard.to_string(),
            r.fallback.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("reach.csv");
    let mut w = create(&path)?;
    let err = csv_err(&path);
    w.write_record(["rep", "snapshot", "t", "true_count", "pred_count", "method"]).map_err(&err)?;
    for r in &report.reach {
        w.write_record([
            r.rep.to_string(),
            r.snapshot.to_string(),
            r.t.to_string(),
            r.true_count.to_string(),
            r.pred_count.to_string(),
            r.method.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("summary.csv");
    let mut w = create(&path)?;
    let err = csv_err(&path);
    w.write_record(["method", "mean_mse", "mean_jaccard", "fallback_rows"]).map_err(&err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for m in report.methods() {
        let fallbacks = report.jaccard.iter().filter(|r| r.method == m && r.fallback).count();
        w.write_record([m.to_string(), opt(report.mean_mse(m)), opt(report.mean_jaccard(m)), fallbacks.to_string()])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("run.json");
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut text = String::new();
    for (k, v) in &report.config_echo {
        text.push_str(&format!("{k} = {v}\n"));
    }
    let seeds: Vec<String> = report.rep_seeds.iter().map(|s| s.to_string()).collect();
    text.push_str(&format!("rep_seeds = {}\n", seeds.join(",")));
    f.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
