use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ltm_thresholds::config::{parse_estimators, ExperimentConfig, Mode};
use ltm_thresholds::datasets::RowGranularity;
use ltm_thresholds::experiment::{run_experiment, write_report};
use ltm_thresholds::oracle::{verify_batch, MAX_NEIGHBORS};
use ltm_thresholds::Error;

#[derive(Parser)]
#[command(name = "ltm-thresholds", version, about = "Estimate node thresholds of the Linear Threshold Model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the synthetic benchmark.
    Synth(RunArgs),
    /// Evaluate estimators on an observed diffusion read from CSV files.
    Ingest {
        #[command(flatten)]
        run: RunArgs,
        /// Edge list CSV (`source,target`).
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Attribute CSV (`node,f0,f1,...`).
        #[arg(long)]
        attributes: Option<PathBuf>,
        /// Activation log CSV (`node,activation_time`).
        #[arg(long)]
        activations: Option<PathBuf>,
        /// True thresholds (`node,threshold`), enables the MSE task.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Treat edges as directed `source -> target`.
        #[arg(long)]
        directed: bool,
    },
    /// Check the threshold-recovery theorem on random small neighborhoods.
    VerifyTheorem {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 8)]
        max_neighbors: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated estimator tags, or `all`.
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = ["per-step", "final"])]
    rows: Option<String>,
    /// Extra key=value overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self, mode: Mode) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.mode = mode;
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(list) = &self.estimators {
            cfg.estimators = parse_estimators(list)?;
        }
        if let Some(reps) = self.reps {
            cfg.reps = reps;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(rows) = &self.rows {
            cfg.rows = rows.parse::<RowGranularity>()?;
        }
        for kv in &self.overrides {
            cfg.apply_override(kv)?;
        }
        Ok(cfg)
    }
}

fn run(cfg: ExperimentConfig) -> Result<(), Error> {
    let report = run_experiment(&cfg)?;
    write_report(&report, &cfg.out)?;
    println!("{:<22} {:>10} {:>10}", "method", "mse", "jaccard");
    for m in report.methods() {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!("{:<22} {:>10} {:>10}", m.tag(), fmt(report.mean_mse(m)), fmt(report.mean_jaccard(m)));
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => args.resolve(Mode::Synthetic).and_then(run),
        Command::Ingest { run: args, edges, attributes, activations, thresholds, directed } => {
            args.resolve(Mode::Ingest).and_then(|mut cfg| {
                cfg.ingest.edges = edges.or(cfg.ingest.edges);
                cfg.ingest.attributes = attributes.or(cfg.ingest.attributes);
                cfg.ingest.activations = activations.or(cfg.ingest.activations);
                cfg.ingest.thresholds = thresholds.or(cfg.ingest.thresholds);
                cfg.directed |= directed;
                run(cfg)
            })
        }
        Command::VerifyTheorem { trials, max_neighbors, seed } => {
            if max_neighbors == 0 || max_neighbors > MAX_NEIGHBORS {
                eprintln!("error: --max-neighbors must be in 1..={MAX_NEIGHBORS}");
                return ExitCode::from(2);
            }
            match verify_batch(trials, max_neighbors, seed) {
                Ok(s) => {
                    println!(
                        "trials={} conclusive={} inconclusive={} failed={}",
                        s.trials, s.conclusive, s.inconclusive, s.failed
                    );
                    return if s.failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE };
                }
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config { .. } | Error::Argument(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
