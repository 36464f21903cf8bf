//! `gridstab` command line: generate grids, estimate stability, build
//! datasets, train and evaluate surrogate models, and report statistics.
//!
//! Thin argument layer over [`gridstab::cli`]: flags override values from
//! `--config <file>`, which overrides defaults.

use clap::{Args, Parser, Subcommand};
use gridstab::cli::{self, EvalSource, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "gridstab",
    about = "Dynamic stability laboratory for power-grid topologies",
    version
)]
struct Cli {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: $GRIDSTAB_WORKERS or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed driving all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DynamicsFlags {
    /// Inertia constant M.
    #[arg(long)]
    inertia: Option<f64>,
    /// Droop parameter alpha.
    #[arg(long)]
    droop: Option<f64>,
    /// Line coupling K.
    #[arg(long)]
    coupling: Option<f64>,
    /// Integration horizon (seconds).
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Args)]
struct EstimationFlags {
    /// Basin-stability trials per node.
    #[arg(long)]
    trials: Option<u32>,
    /// Minimum troublemaker trials per node (supplementary floor).
    #[arg(long)]
    min_tm_trials: Option<u32>,
    /// Critical frequency threshold beta (rad/s).
    #[arg(long)]
    beta: Option<f64>,
    /// Troublemaker failure budget gamma.
    #[arg(long)]
    gamma: Option<f64>,
    /// Clopper-Pearson confidence parameter.
    #[arg(long)]
    alpha_cp: Option<f64>,
    #[command(flatten)]
    dynamics: DynamicsFlags,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic grids with balanced injections.
    Generate {
        /// Nodes per grid (must be even).
        #[arg(long)]
        n: Option<usize>,
        /// Number of grids.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        n0: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
    },
    /// Monte-Carlo stability estimation for grid files.
    Estimate {
        /// Grid JSON files.
        #[arg(long, required = true, num_args = 1..)]
        grids: Vec<PathBuf>,
        #[command(flatten)]
        estimation: EstimationFlags,
    },
    /// Generate grids, estimate targets, and assemble a dataset directory.
    BuildDataset {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        count: Option<usize>,
        /// Seed of the 70:15:15 split.
        #[arg(long)]
        split_seed: Option<u64>,
        #[command(flatten)]
        estimation: EstimationFlags,
    },
    /// Train a surrogate model on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// linreg | logreg | mlp | gcn
        #[arg(long)]
        model: Option<String>,
        /// snbs | mfd | tm
        #[arg(long)]
        target: Option<String>,
        /// Hidden sizes, comma separated (mlp/gcn).
        #[arg(long)]
        hidden: Option<String>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
        /// Positive-class weight for TM (0 = auto).
        #[arg(long)]
        class_weight: Option<f64>,
        #[arg(long)]
        train_seed: Option<u64>,
        /// Closed-form normal-equations fit (linreg only).
        #[arg(long)]
        exact: bool,
    },
    /// Evaluate a checkpoint on a dataset split or a single grid.
    Evaluate {
        /// Model checkpoint file.
        #[arg(long)]
        model_file: PathBuf,
        /// Dataset directory (with --split).
        #[arg(long, conflicts_with_all = ["grid", "targets"])]
        dataset: Option<PathBuf>,
        /// train | validation | test | all
        #[arg(long, default_value = "test")]
        split: String,
        /// External grid JSON (with --targets).
        #[arg(long, requires = "targets")]
        grid: Option<PathBuf>,
        /// Precomputed targets CSV for --grid.
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Threshold for regression-to-troublemaker classification.
        #[arg(long)]
        beta: Option<f64>,
        /// Probability cut of the classifier head.
        #[arg(long)]
        decision_threshold: Option<f64>,
    },
    /// Histogram and metrics reports for a dataset directory.
    Report {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory holding eval_*.json files to tabulate.
        #[arg(long)]
        eval_dir: Option<PathBuf>,
    },
}

fn apply<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn apply_dynamics(config: &mut RunConfig, flags: DynamicsFlags) {
    apply(&mut config.inertia, flags.inertia);
    apply(&mut config.droop, flags.droop);
    apply(&mut config.coupling, flags.coupling);
    apply(&mut config.t_end, flags.t_end);
    apply(&mut config.abs_tol, flags.abs_tol);
    apply(&mut config.rel_tol, flags.rel_tol);
}

fn apply_estimation(config: &mut RunConfig, flags: EstimationFlags) {
    apply(&mut config.trials, flags.trials);
    apply(&mut config.min_tm_trials, flags.min_tm_trials);
    apply(&mut config.beta, flags.beta);
    apply(&mut config.gamma, flags.gamma);
    apply(&mut config.alpha_cp, flags.alpha_cp);
    apply_dynamics(config, flags.dynamics);
}

fn run(cli: Cli) -> gridstab::Result<bool> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply(&mut config.workers, cli.workers);
    apply(&mut config.out_dir, cli.out);
    apply(&mut config.master_seed, cli.seed);
    config.force |= cli.force;
    config.split_seed = config.master_seed;

    match cli.command {
        Command::Generate { n, count, n0, p, q, r, s } => {
            apply(&mut config.n, n);
            apply(&mut config.count, count);
            apply(&mut config.n0, n0);
            apply(&mut config.p, p);
            apply(&mut config.q, q);
            apply(&mut config.r, r);
            apply(&mut config.s, s);
            let summary = cli::cmd_generate(&config)?;
            eprintln!(
                "wrote {} grids to {} (mean degree {:.3})",
                summary.files.len(),
                config.out_dir.display(),
                summary.mean_degree
            );
            Ok(true)
        }
        Command::Estimate { grids, estimation } => {
            apply_estimation(&mut config, estimation);
            let summary = cli::cmd_estimate(&config, &grids)?;
            eprintln!("estimated {} grids", summary.written.len());
            for (path, reason) in &summary.failed {
                eprintln!("failed: {} ({reason})", path.display());
            }
            Ok(summary.failed.is_empty())
        }
        Command::BuildDataset { n, count, split_seed, estimation } => {
            apply(&mut config.n, n);
            apply(&mut config.count, count);
            apply(&mut config.split_seed, split_seed);
            apply_estimation(&mut config, estimation);
            let manifest = cli::cmd_build_dataset(&config)?;
            eprintln!(
                "dataset ready: {} records, {} discards, splits {}/{}/{}",
                manifest.records.len(),
                manifest.discards.len(),
                manifest.splits.train.len(),
                manifest.splits.validation.len(),
                manifest.splits.test.len()
            );
            Ok(true)
        }
        Command::Train {
            dataset,
            model,
            target,
            hidden,
            learning_rate,
            batch_size,
            epochs,
            patience,
            class_weight,
            train_seed,
            exact,
        } => {
            apply(&mut config.model, model);
            apply(&mut config.target, target);
            apply(&mut config.hidden, hidden);
            apply(&mut config.learning_rate, learning_rate);
            apply(&mut config.batch_size, batch_size);
            apply(&mut config.epochs, epochs);
            apply(&mut config.patience, patience);
            apply(&mut config.class_weight, class_weight);
            apply(&mut config.train_seed, train_seed);
            let path = cli::cmd_train(&config, &dataset, exact)?;
            eprintln!("checkpoint: {}", path.display());
            Ok(true)
        }
        Command::Evaluate {
            model_file,
            dataset,
            split,
            grid,
            targets,
            beta,
            decision_threshold,
        } => {
            apply(&mut config.beta, beta);
            apply(&mut config.decision_threshold, decision_threshold);
            let report = match (&dataset, &grid, &targets) {
                (Some(dir), None, None) => cli::cmd_evaluate(
                    &config,
                    &model_file,
                    &EvalSource::Dataset { dir, split: &split },
                )?,
                (None, Some(grid), Some(targets)) => cli::cmd_evaluate(
                    &config,
                    &model_file,
                    &EvalSource::SingleGrid { grid, targets },
                )?,
                _ => {
                    return Err(gridstab::Error::Config(
                        "pass either --dataset or --grid with --targets".into(),
                    ))
                }
            };
            eprintln!(
                "evaluated {} on {}: r2 {:?} f2 {:?} recall {:?} precision {:?}",
                report.model, report.target, report.r2, report.f2, report.recall,
                report.precision
            );
            Ok(true)
        }
        Command::Report { dataset, eval_dir } => {
            let summary = cli::cmd_report(&config, &dataset, eval_dir.as_deref())?;
            eprintln!(
                "report written: {} grids, {} nodes, mean snbs {:.4}, tm share {:.4}",
                summary.n_grids, summary.n_nodes, summary.mean_snbs, summary.tm_share
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
