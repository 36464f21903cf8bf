//! Orchestration behind the `gridstab` binary.
//!
//! Every subcommand is a plain function over a [`RunConfig`], so pipelines
//! are scriptable and testable without spawning processes. Configuration is
//! a flat `key = value` text file; command-line flags override file values,
//! and every run dumps its resolved config next to its outputs
//! (`run_config.txt`) for provenance.
//!
//! Progress and timing go to stderr (via `log`); machine-readable results go
//! to files only.

use crate::dataset::{
    build_dataset, load_dataset, read_manifest, BuildConfig, DatasetRecord,
};
use crate::dynamics::{IntegratorConfig, SwingParams};
use crate::error::{Error, Result};
use crate::ml::{
    evaluate, fit, fit_linreg_exact, load_model, save_model, write_eval_report,
    write_predictions_csv, EvalReport, LossKind, ModelKind, TargetKind, TrainConfig,
};
use crate::stability::{estimate_grid, write_node_stats_csv, EstimationConfig, TmConfig};
use crate::topology::{assign_injections, generate_topology, write_grid, GrowthParams};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Resolved configuration of one run. Every field has a default; see
/// [`RunConfig::to_text`] for the flat-file serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Worker threads; 0 means the `GRIDSTAB_WORKERS` environment variable
    /// or, failing that, all cores.
    pub workers: usize,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    /// Overwrite existing outputs instead of refusing.
    pub force: bool,

    // topology generation
    pub n: usize,
    pub count: usize,
    pub n0: usize,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,

    // swing dynamics
    pub inertia: f64,
    pub droop: f64,
    pub coupling: f64,
    pub t_end: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,

    // stability estimation
    pub trials: u32,
    pub min_tm_trials: u32,
    pub beta: f64,
    pub gamma: f64,
    pub alpha_cp: f64,

    // dataset
    pub split_seed: u64,

    // training / evaluation
    pub model: String,
    pub target: String,
    pub hidden: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    /// 0 = derive #negatives/#positives from the training split.
    pub class_weight: f64,
    pub train_seed: u64,
    pub decision_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let growth = GrowthParams::new(20, 0);
        let swing = SwingParams::default();
        let integ = IntegratorConfig::default();
        let tm = TmConfig::default();
        Self {
            workers: 0,
            out_dir: PathBuf::from("out"),
            master_seed: 42,
            force: false,
            n: 20,
            count: 10,
            n0: growth.n0,
            p: growth.p,
            q: growth.q,
            r: growth.r,
            s: growth.s,
            inertia: swing.inertia,
            droop: swing.droop,
            coupling: swing.coupling,
            t_end: integ.t_end,
            abs_tol: integ.abs_tol,
            rel_tol: integ.rel_tol,
            max_steps: integ.max_steps,
            trials: 500,
            min_tm_trials: 135,
            beta: tm.beta,
            gamma: tm.gamma,
            alpha_cp: tm.alpha_cp,
            split_seed: 42,
            model: "gcn".into(),
            target: "snbs".into(),
            hidden: "32,32,32".into(),
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 500,
            patience: 50,
            class_weight: 0.0,
            train_seed: 1,
            decision_threshold: 0.5,
        }
    }
}

/// Display helper so paths serialize without quotes.
struct KeyValue<'a, T>(&'a T);

impl std::fmt::Display for KeyValue<'_, PathBuf> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0.display())
    }
}

macro_rules! keyvalue_display {
    ($($t:ty),*) => {$(
        impl std::fmt::Display for KeyValue<'_, $t> {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    )*};
}
keyvalue_display!(usize, u32, u64, f64, bool, String);

macro_rules! config_keys {
    ($($field:ident : $parse:ty),* $(,)?) => {
        /// Sets one `key = value` pair; unknown keys are configuration errors.
        pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
            match key {
                $(stringify!($field) => {
                    self.$field = value.parse::<$parse>().map_err(|_| {
                        Error::Config(format!("bad value {value:?} for key {key}"))
                    })?;
                })*
                _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
            }
            Ok(())
        }

        /// Flat `key = value` serialization; parses back via
        /// [`RunConfig::parse_text`].
        pub fn to_text(&self) -> String {
            let mut out = String::new();
            $(let _ = writeln!(out, "{} = {}", stringify!($field), KeyValue(&self.$field));)*
            out
        }
    };
}

impl RunConfig {
    config_keys! {
        workers: usize,
        out_dir: PathBuf,
        master_seed: u64,
        force: bool,
        n: usize,
        count: usize,
        n0: usize,
        p: f64,
        q: f64,
        r: f64,
        s: f64,
        inertia: f64,
        droop: f64,
        coupling: f64,
        t_end: f64,
        abs_tol: f64,
        rel_tol: f64,
        max_steps: usize,
        trials: u32,
        min_tm_trials: u32,
        beta: f64,
        gamma: f64,
        alpha_cp: f64,
        split_seed: u64,
        model: String,
        target: String,
        hidden: String,
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
        patience: usize,
        class_weight: f64,
        train_seed: u64,
        decision_threshold: f64,
    }

    /// Parses the flat `key = value` format (`#` starts a comment).
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_text(&std::fs::read_to_string(path)?)
    }

    pub fn growth_params(&self) -> GrowthParams {
        GrowthParams { n: self.n, n0: self.n0, p: self.p, q: self.q, r: self.r, s: self.s, seed: 0 }
    }

    pub fn swing_params(&self) -> SwingParams {
        SwingParams { inertia: self.inertia, droop: self.droop, coupling: self.coupling }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            t_end: self.t_end,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_steps: self.max_steps,
        }
    }

    pub fn tm_config(&self) -> TmConfig {
        TmConfig { beta: self.beta, gamma: self.gamma, alpha_cp: self.alpha_cp }
    }

    pub fn estimation_config(&self) -> EstimationConfig {
        EstimationConfig {
            trials: self.trials,
            min_tm_trials: self.min_tm_trials,
            master_seed: self.master_seed,
            swing: self.swing_params(),
            integrator: self.integrator_config(),
            tm: self.tm_config(),
        }
    }

    pub fn build_config(&self) -> BuildConfig {
        BuildConfig {
            count: self.count,
            growth: self.growth_params(),
            swing: self.swing_params(),
            integrator: self.integrator_config(),
            tm: self.tm_config(),
            trials: self.trials,
            min_tm_trials: self.min_tm_trials,
            master_seed: self.master_seed,
            split_seed: self.split_seed,
        }
    }

    pub fn train_config(&self) -> Result<(ModelKind, Vec<usize>, TargetKind, TrainConfig)> {
        let kind = ModelKind::parse(&self.model)
            .ok_or_else(|| Error::Config(format!("unknown model {:?}", self.model)))?;
        let target = TargetKind::parse(&self.target)
            .ok_or_else(|| Error::Config(format!("unknown target {:?}", self.target)))?;
        let hidden: Vec<usize> = if self.hidden.trim().is_empty()
            || matches!(kind, ModelKind::LinReg | ModelKind::LogReg)
        {
            vec![]
        } else {
            self.hidden
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad hidden sizes {:?}", self.hidden)))
                })
                .collect::<Result<_>>()?
        };
        let cfg = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            loss: match target {
                TargetKind::Tm => LossKind::WeightedBce,
                _ => LossKind::MeanSquaredError,
            },
            class_weight: (self.class_weight > 0.0).then_some(self.class_weight),
            patience: self.patience,
            seed: self.train_seed,
        };
        Ok((kind, hidden, target, cfg))
    }

    /// Dumps the resolved configuration next to the run's outputs.
    fn dump(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("run_config.txt"), self.to_text())?;
        Ok(())
    }
}

/// Runs `f` inside a worker pool of the configured size. `workers = 0`
/// falls back to `GRIDSTAB_WORKERS`, then to all cores. Results are
/// independent of the pool size by the determinism contracts of the
/// estimation and training layers.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let workers = if workers > 0 {
        workers
    } else {
        std::env::var("GRIDSTAB_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    };
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn refuse_existing(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

pub struct GenerateSummary {
    pub files: Vec<PathBuf>,
    pub mean_degree: f64,
}

/// Generates `count` grids with balanced injections into `out_dir`
/// (`grid_<i>.json`). Deterministic per master seed.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateSummary> {
    config.growth_params().validate()?;
    if config.n % 2 != 0 {
        return Err(Error::OddNodeCount(config.n));
    }
    config.dump(&config.out_dir)?;
    let mut files = Vec::with_capacity(config.count);
    let mut degree_sum = 0.0;
    for i in 0..config.count as u64 {
        let mut rng =
            crate::rng::derive_rng(config.master_seed, crate::rng::tag::GRID_CANDIDATE, i, 0);
        let topo_seed: u64 = rand::Rng::gen(&mut rng);
        let inj_seed: u64 = rand::Rng::gen(&mut rng);
        let growth = GrowthParams { seed: topo_seed, ..config.growth_params() };
        let topo = generate_topology(&growth)?;
        degree_sum += topo.mean_degree();
        let grid = assign_injections(topo, inj_seed)?;
        let path = config.out_dir.join(format!("grid_{i}.json"));
        refuse_existing(&path, config.force)?;
        write_grid(&path, &grid)?;
        files.push(path);
    }
    let mean_degree = degree_sum / config.count as f64;
    log::info!("generated {} grids (mean degree {mean_degree:.3})", config.count);
    Ok(GenerateSummary { files, mean_degree })
}

pub struct EstimateSummary {
    pub written: Vec<PathBuf>,
    /// `(grid file, reason)` for grids that had to be skipped.
    pub failed: Vec<(PathBuf, String)>,
}

/// Estimates per-node stability for each grid file, writing
/// `targets_<stem>.csv` into `out_dir`. Grid ids are assigned by position in
/// the sorted input list; grids without a stable sync state are reported and
/// skipped.
pub fn cmd_estimate(config: &RunConfig, grid_files: &[PathBuf]) -> Result<EstimateSummary> {
    if grid_files.is_empty() {
        return Err(Error::Config("no grid files given".into()));
    }
    let estimation = config.estimation_config();
    estimation.validate()?;
    config.dump(&config.out_dir)?;
    let mut files: Vec<PathBuf> = grid_files.to_vec();
    files.sort();

    let mut written = Vec::new();
    let mut failed = Vec::new();
    with_workers(config.workers, || -> Result<()> {
        for (grid_id, path) in files.iter().enumerate() {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_owned)
                .unwrap_or_else(|| format!("grid_{grid_id}"));
            let out_path = config.out_dir.join(format!("targets_{stem}.csv"));
            refuse_existing(&out_path, config.force)?;
            let grid = match crate::dataset::import_grid(path) {
                Ok(grid) => grid,
                Err(e) => {
                    failed.push((path.clone(), e.to_string()));
                    continue;
                }
            };
            let started = Instant::now();
            match estimate_grid(&grid, grid_id as u64, &estimation) {
                Ok(stats) => {
                    let elapsed = started.elapsed().as_secs_f64();
                    let n_trials: u64 =
                        stats.iter().map(|s| s.n_trials + s.n_tm_trials).sum();
                    log::info!(
                        "{}: {} nodes, {:.1} s wall, {:.4} s per trial (upper bound: \
                         troublemaker trials mostly reuse basin-stability runs)",
                        stem,
                        stats.len(),
                        elapsed,
                        elapsed / n_trials.max(1) as f64
                    );
                    write_node_stats_csv(&out_path, &stats)?;
                    written.push(out_path);
                }
                Err(Error::NoStableSyncState { residual }) => {
                    log::warn!("{stem}: no stable sync state (residual {residual:.2e}); skipped");
                    failed.push((path.clone(), "no stable sync state".into()));
                }
                Err(other) => return Err(other),
            }
        }
        Ok(())
    })??;
    Ok(EstimateSummary { written, failed })
}

/// Builds (or resumes) a dataset in `out_dir` from the configured build
/// parameters. `--force` replaces a dataset built with a different config.
pub fn cmd_build_dataset(config: &RunConfig) -> Result<crate::dataset::DatasetManifest> {
    let build = config.build_config();
    if config.force {
        let manifest = config.out_dir.join("manifest.json");
        if manifest.exists() && read_manifest(&config.out_dir)?.config != build {
            std::fs::remove_dir_all(&config.out_dir)?;
        }
    }
    config.dump(&config.out_dir)?;
    with_workers(config.workers, || build_dataset(&config.out_dir, &build))?
}

/// Trains the configured model on a dataset directory; writes
/// `model_<kind>_<target>.ckpt` and `history_<kind>_<target>.csv`.
/// `exact = true` selects the closed-form path (linreg only).
pub fn cmd_train(config: &RunConfig, dataset_dir: &Path, exact: bool) -> Result<PathBuf> {
    let (kind, hidden, target, train_cfg) = config.train_config()?;
    let (manifest, records) = load_dataset(dataset_dir)?;
    if manifest.splits.train.is_empty() {
        return Err(Error::Config(
            "dataset has no split assignment (fewer than 10 records?)".into(),
        ));
    }
    config.dump(&config.out_dir)?;
    let ckpt_path = config
        .out_dir
        .join(format!("model_{}_{}.ckpt", kind.name(), target.name()));
    refuse_existing(&ckpt_path, config.force)?;

    if exact {
        if kind != ModelKind::LinReg {
            return Err(Error::Config("--exact applies to linreg only".into()));
        }
        let trained = fit_linreg_exact(&records, &manifest.splits, target)?;
        save_model(&ckpt_path, &trained)?;
        return Ok(ckpt_path);
    }

    let (trained, history) = with_workers(config.workers, || {
        fit(kind, &hidden, &records, &manifest.splits, target, &train_cfg)
    })??;
    save_model(&ckpt_path, &trained)?;

    let hist_path = config
        .out_dir
        .join(format!("history_{}_{}.csv", kind.name(), target.name()));
    let mut text = String::from("epoch,train_loss,val_loss\n");
    for (epoch, (tr, va)) in history.train_loss.iter().zip(&history.val_loss).enumerate() {
        let _ = writeln!(text, "{epoch},{tr},{va}");
    }
    std::fs::write(&hist_path, text)?;
    log::info!(
        "trained {} on {} (best epoch {})",
        kind.name(),
        target.name(),
        history.best_epoch
    );
    Ok(ckpt_path)
}

/// Where the evaluation records come from.
pub enum EvalSource<'a> {
    /// A dataset directory and one of `train`/`validation`/`test`/`all`.
    Dataset { dir: &'a Path, split: &'a str },
    /// One external grid plus its precomputed targets CSV.
    SingleGrid { grid: &'a Path, targets: &'a Path },
}

/// Evaluates a checkpoint; writes `eval_<kind>_<target>.json` and
/// `predictions_<kind>_<target>.csv` into `out_dir`.
pub fn cmd_evaluate(
    config: &RunConfig,
    checkpoint: &Path,
    source: &EvalSource<'_>,
) -> Result<EvalReport> {
    let trained = load_model(checkpoint)?;
    config.dump(&config.out_dir)?;
    let report = match source {
        EvalSource::Dataset { dir, split } => {
            let (manifest, records) = load_dataset(dir)?;
            let ids: Option<Vec<u64>> = match *split {
                "train" => Some(manifest.splits.train.clone()),
                "validation" => Some(manifest.splits.validation.clone()),
                "test" => Some(manifest.splits.test.clone()),
                "all" => None,
                other => {
                    return Err(Error::Config(format!(
                        "unknown split {other:?} (train|validation|test|all)"
                    )))
                }
            };
            with_workers(config.workers, || {
                evaluate(
                    &trained,
                    &records,
                    ids.as_deref(),
                    config.beta,
                    config.decision_threshold,
                )
            })??
        }
        EvalSource::SingleGrid { grid, targets } => {
            let record = load_external_record(grid, targets)?;
            evaluate(
                &trained,
                std::slice::from_ref(&record),
                None,
                config.beta,
                config.decision_threshold,
            )?
        }
    };
    let stem = format!("{}_{}", report.model, report.target);
    write_eval_report(&config.out_dir.join(format!("eval_{stem}.json")), &report)?;
    write_predictions_csv(
        &config.out_dir.join(format!("predictions_{stem}.csv")),
        &report.predictions,
    )?;
    Ok(report)
}

/// Loads an external grid + targets pair as a pseudo-record (grid id 0).
pub fn load_external_record(grid_path: &Path, targets_path: &Path) -> Result<DatasetRecord> {
    let grid = crate::dataset::import_grid(grid_path)?;
    let stats = crate::stability::read_node_stats_csv(targets_path)?;
    if stats.len() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), got: stats.len() });
    }
    Ok(DatasetRecord { grid_id: 0, grid, stats })
}

pub struct ReportSummary {
    pub n_grids: usize,
    pub n_nodes: usize,
    pub tm_share: f64,
    pub mean_snbs: f64,
}

/// Writes plot-ready histogram CSVs (SNBS linear bins, MFD log bins, TM
/// share) and a summary for a dataset directory. When `eval_dir` is given,
/// every `eval_*.json` in it is collected into `metrics_table.csv`.
pub fn cmd_report(
    config: &RunConfig,
    dataset_dir: &Path,
    eval_dir: Option<&Path>,
) -> Result<ReportSummary> {
    let (_, records) = load_dataset(dataset_dir)?;
    if records.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    config.dump(&config.out_dir)?;

    let snbs: Vec<f64> = records.iter().flat_map(DatasetRecord::snbs).collect();
    let mfd: Vec<f64> = records.iter().flat_map(DatasetRecord::mfd).collect();
    let tm: Vec<f64> = records.iter().flat_map(DatasetRecord::tm).collect();

    // SNBS: 20 uniform bins over [0, 1].
    let bins = 20usize;
    let mut counts = vec![0u64; bins];
    for &v in &snbs {
        let idx = ((v * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let mut text = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(text, "{},{},{c}", i as f64 / bins as f64, (i + 1) as f64 / bins as f64);
    }
    std::fs::write(config.out_dir.join("snbs_hist.csv"), text)?;

    // MFD: 24 logarithmic bins from the smallest positive value.
    let positive_min = mfd.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let lo = if positive_min.is_finite() { positive_min.log10().floor() } else { -1.0 };
    let hi = mfd.iter().copied().fold(0.0f64, f64::max).max(1e-9).log10().ceil();
    let log_bins = 24usize;
    let width = ((hi - lo) / log_bins as f64).max(1e-9);
    let mut log_counts = vec![0u64; log_bins];
    for &v in &mfd {
        let x = v.max(10f64.powf(lo));
        let idx = (((x.log10() - lo) / width) as usize).min(log_bins - 1);
        log_counts[idx] += 1;
    }
    let mut text = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in log_counts.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{c}",
            10f64.powf(lo + i as f64 * width),
            10f64.powf(lo + (i + 1) as f64 * width)
        );
    }
    std::fs::write(config.out_dir.join("mfd_hist.csv"), text)?;

    let tm_count = tm.iter().filter(|&&t| t > 0.5).count();
    let tm_share = tm_count as f64 / tm.len() as f64;
    std::fs::write(
        config.out_dir.join("tm_share.csv"),
        format!("stable,troublemaker,share\n{},{tm_count},{tm_share}\n", tm.len() - tm_count),
    )?;

    let mean_snbs = snbs.iter().sum::<f64>() / snbs.len() as f64;
    let summary =
        ReportSummary { n_grids: records.len(), n_nodes: snbs.len(), tm_share, mean_snbs };
    std::fs::write(
        config.out_dir.join("summary.txt"),
        format!(
            "grids: {}\nnodes: {}\nmean snbs: {:.4}\ntroublemaker share: {:.4}\n",
            summary.n_grids, summary.n_nodes, summary.mean_snbs, summary.tm_share
        ),
    )?;

    if let Some(eval_dir) = eval_dir {
        let mut rows = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(eval_dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("eval_") && n.ends_with(".json"))
            })
            .collect();
        entries.sort();
        for path in entries {
            let value: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(&path)?)?;
            let field = |k: &str| {
                value
                    .get(k)
                    .and_then(|v| v.as_f64())
                    .map_or(String::new(), |x| format!("{x:.4}"))
            };
            rows.push(format!(
                "{},{},{},{},{},{}",
                value.get("model").and_then(|v| v.as_str()).unwrap_or("?"),
                value.get("target").and_then(|v| v.as_str()).unwrap_or("?"),
                field("r2"),
                field("f2"),
                field("recall"),
                field("precision"),
            ));
        }
        std::fs::write(
            config.out_dir.join("metrics_table.csv"),
            format!("model,target,r2,f2,recall,precision\n{}\n", rows.join("\n")),
        )?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_text() {
        let config = RunConfig {
            workers: 3,
            out_dir: PathBuf::from("/tmp/some where/out"),
            trials: 77,
            hidden: "16,8".into(),
            force: true,
            ..Default::default()
        };
        let text = config.to_text();
        let back = RunConfig::parse_text(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        assert!(RunConfig::parse_text("no_such_key = 3").is_err());
        assert!(RunConfig::parse_text("trials = banana").is_err());
        assert!(RunConfig::parse_text("trials").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let config = RunConfig::parse_text("# hello\n\ntrials = 9 # inline\n").unwrap();
        assert_eq!(config.trials, 9);
    }

    #[test]
    fn generate_rejects_odd_n() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            n: 21,
            out_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        assert!(matches!(cmd_generate(&config), Err(Error::OddNodeCount(21))));
    }

    #[test]
    fn generate_is_deterministic_and_refuses_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig {
            n: 10,
            count: 3,
            out_dir: dir.path().join("a"),
            ..Default::default()
        };
        let first = cmd_generate(&config).unwrap();
        let bytes: Vec<Vec<u8>> =
            first.files.iter().map(|p| std::fs::read(p).unwrap()).collect();

        // second run into a fresh dir produces identical bytes
        config.out_dir = dir.path().join("b");
        let second = cmd_generate(&config).unwrap();
        for (path, expected) in second.files.iter().zip(&bytes) {
            assert_eq!(&std::fs::read(path).unwrap(), expected);
        }

        // rerun into the same dir refuses without force, succeeds with it
        assert!(cmd_generate(&config).is_err());
        config.force = true;
        cmd_generate(&config).unwrap();
    }

    #[test]
    fn estimate_requires_positive_trials() {
        let config = RunConfig { trials: 0, ..Default::default() };
        let err = cmd_estimate(&config, &[PathBuf::from("nowhere.json")]);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
