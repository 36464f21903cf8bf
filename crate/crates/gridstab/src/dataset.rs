//! Dataset assembly, persistence, splitting, and grid import.
//!
//! A dataset is a directory:
//!
//! ```text
//! <dir>/manifest.json     - config, record index, discards, splits
//! <dir>/grid_<id>.json    - one grid per record (grid JSON format)
//! <dir>/targets_<id>.csv  - per-node stability results for that grid
//! ```
//!
//! Builds are deterministic and resumable per grid: candidate topologies are
//! drawn from counter-derived seeds; candidates without a stable synchronous
//! state are logged and replaced by the next candidate, and completed grids
//! are skipped on re-entry. Re-running a finished build touches nothing and
//! reproduces byte-identical artifacts.

use crate::dynamics::{IntegratorConfig, SwingParams};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, tag};
use crate::stability::{
    classify_tm, estimate_grid, read_node_stats_csv, write_node_stats_csv, EstimationConfig,
    NodeStats, TmConfig,
};
use crate::topology::{
    assign_injections, generate_topology, read_grid, write_grid, GrowthParams, PowerGrid,
};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Generator version recorded in provenance; bump on any change that alters
/// produced numbers.
pub const GENERATOR_VERSION: &str = concat!("gridstab-", env!("CARGO_PKG_VERSION"));

/// Full configuration of a dataset build. Everything needed to re-derive any
/// record lives here and is embedded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Number of grids in the dataset.
    pub count: usize,
    /// Growth parameters; the `seed` field is ignored (candidate seeds are
    /// derived from `master_seed`), the rest shape every topology.
    pub growth: GrowthParams,
    pub swing: SwingParams,
    pub integrator: IntegratorConfig,
    pub tm: TmConfig,
    /// SNBS trials per node.
    pub trials: u32,
    /// Minimum troublemaker trials per node (supplementary-sampling floor).
    pub min_tm_trials: u32,
    pub master_seed: u64,
    /// Seed of the train/validation/test split.
    pub split_seed: u64,
}

impl BuildConfig {
    pub fn new(count: usize, n_nodes: usize, trials: u32, master_seed: u64) -> Self {
        Self {
            count,
            growth: GrowthParams::new(n_nodes, 0),
            swing: SwingParams::default(),
            integrator: IntegratorConfig::default(),
            tm: TmConfig::default(),
            trials,
            min_tm_trials: 135,
            master_seed,
            split_seed: master_seed,
        }
    }

    fn estimation(&self) -> EstimationConfig {
        EstimationConfig {
            trials: self.trials,
            min_tm_trials: self.min_tm_trials,
            master_seed: self.master_seed,
            swing: self.swing,
            integrator: self.integrator,
            tm: self.tm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("dataset needs at least one grid".into()));
        }
        self.growth.validate()?;
        self.estimation().validate()
    }
}

/// Index entry of one completed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub grid_id: u64,
    /// Which candidate produced this record (candidates without a stable
    /// sync state are skipped).
    pub candidate: u64,
    pub topology_seed: u64,
    pub injection_seed: u64,
    pub n: usize,
}

/// Candidate grid discarded for lack of a stable synchronous state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discard {
    pub candidate: u64,
    pub topology_seed: u64,
    pub injection_seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Train/validation/test assignment, keyed by grid id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<u64>,
    pub validation: Vec<u64>,
    pub test: Vec<u64>,
}

impl SplitAssignment {
    pub fn of(&self, grid_id: u64) -> Option<Split> {
        if self.train.contains(&grid_id) {
            Some(Split::Train)
        } else if self.validation.contains(&grid_id) {
            Some(Split::Validation)
        } else if self.test.contains(&grid_id) {
            Some(Split::Test)
        } else {
            None
        }
    }
}

/// Dataset index: build config, record list, discard log, and splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator_version: String,
    pub config: BuildConfig,
    pub records: Vec<RecordMeta>,
    pub discards: Vec<Discard>,
    pub splits: SplitAssignment,
}

/// One grid with its nodal targets, fully loaded.
#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub grid_id: u64,
    pub grid: PowerGrid,
    pub stats: Vec<NodeStats>,
}

impl DatasetRecord {
    pub fn snbs(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.snbs).collect()
    }

    pub fn mfd(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.mfd_max).collect()
    }

    pub fn tm(&self) -> Vec<f64> {
        self.stats.iter().map(|s| f64::from(u8::from(s.tm))).collect()
    }

    /// Checks the record invariants: vector lengths, ranges, and consistency
    /// of the stored flag with the classification rule.
    pub fn validate(&self, tm_cfg: &TmConfig) -> Result<()> {
        if self.stats.len() != self.grid.n() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.n(),
                got: self.stats.len(),
            });
        }
        for s in &self.stats {
            if !(0.0..=1.0).contains(&s.snbs) {
                return Err(Error::InvalidGrid(format!("snbs {} out of [0,1]", s.snbs)));
            }
            if !(s.mfd_max.is_finite() && s.mfd_max >= 0.0) {
                return Err(Error::InvalidGrid(format!("mfd {} out of [0,inf)", s.mfd_max)));
            }
            if s.tm != classify_tm(s.n_tm_trials, s.n_within_bound, tm_cfg)? {
                return Err(Error::InvalidGrid(format!(
                    "node {}: stored tm flag inconsistent with counts {}/{}",
                    s.node, s.n_within_bound, s.n_tm_trials
                )));
            }
        }
        Ok(())
    }
}

fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

pub fn grid_path(dir: &Path, grid_id: u64) -> PathBuf {
    dir.join(format!("grid_{grid_id}.json"))
}

pub fn targets_path(dir: &Path, grid_id: u64) -> PathBuf {
    dir.join(format!("targets_{grid_id}.csv"))
}

fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(manifest_path(dir), text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(manifest_path(dir))?;
    Ok(serde_json::from_str(&text)?)
}

/// Derives the topology/injection seed pair of a build candidate.
fn candidate_seeds(master_seed: u64, candidate: u64) -> (u64, u64) {
    let mut rng = derive_rng(master_seed, tag::GRID_CANDIDATE, candidate, 0);
    (rng.gen(), rng.gen())
}

/// Builds (or resumes) a dataset in `dir`.
///
/// Candidate grids are generated from counter-derived seeds; those without a
/// stable synchronous state are logged in the manifest and replaced. Each
/// completed grid is written immediately (grid JSON + targets CSV + updated
/// manifest), so interrupted builds resume at the first missing grid. An
/// existing directory with a different config is refused.
pub fn build_dataset(dir: &Path, config: &BuildConfig) -> Result<DatasetManifest> {
    config.validate()?;
    std::fs::create_dir_all(dir)?;

    let mut manifest = if manifest_path(dir).exists() {
        let existing = read_manifest(dir)?;
        if existing.config != *config {
            return Err(Error::DatasetMismatch(format!(
                "{} holds a dataset built with a different config; \
                 choose another directory or remove it first",
                dir.display()
            )));
        }
        existing
    } else {
        DatasetManifest {
            generator_version: GENERATOR_VERSION.to_string(),
            config: config.clone(),
            records: Vec::new(),
            discards: Vec::new(),
            splits: SplitAssignment::default(),
        }
    };

    let estimation = config.estimation();
    let mut candidate = manifest
        .records
        .iter()
        .map(|r| r.candidate + 1)
        .chain(manifest.discards.iter().map(|d| d.candidate + 1))
        .max()
        .unwrap_or(0);

    while manifest.records.len() < config.count {
        let grid_id = manifest.records.len() as u64;
        let (topology_seed, injection_seed) = candidate_seeds(config.master_seed, candidate);
        let growth = GrowthParams { seed: topology_seed, ..config.growth };
        let topology = generate_topology(&growth)?;
        let grid = assign_injections(topology, injection_seed)?;

        match crate::dynamics::find_fixed_point(&grid, &config.swing) {
            Err(Error::NoStableSyncState { residual }) => {
                log::warn!(
                    "candidate {candidate} (topology seed {topology_seed}) has no stable \
                     sync state (residual {residual:.2e}); discarding"
                );
                manifest.discards.push(Discard {
                    candidate,
                    topology_seed,
                    injection_seed,
                    reason: format!("no stable sync state (residual {residual:.3e})"),
                });
                write_manifest(dir, &manifest)?;
                candidate += 1;
                continue;
            }
            Err(other) => return Err(other),
            Ok(_) => {}
        }

        let g_path = grid_path(dir, grid_id);
        let t_path = targets_path(dir, grid_id);
        if !(g_path.exists() && t_path.exists()) {
            let stats = estimate_grid(&grid, grid_id, &estimation)?;
            write_grid(&g_path, &grid)?;
            write_node_stats_csv(&t_path, &stats)?;
        }
        manifest.records.push(RecordMeta {
            grid_id,
            candidate,
            topology_seed,
            injection_seed,
            n: grid.n(),
        });
        write_manifest(dir, &manifest)?;
        candidate += 1;
        log::info!("grid {grid_id}/{} done", config.count);
    }

    // Splits need at least 10 records; smaller builds stay splitless.
    if manifest.splits.train.is_empty() && manifest.records.len() >= 10 {
        manifest.splits = split_dataset(&manifest, config.split_seed)?;
        write_manifest(dir, &manifest)?;
    }
    Ok(manifest)
}

/// 70:15:15 split by grid, deterministic in `(seed, grid ids)` and stable
/// under record re-ordering. Rounding: floor for train and validation,
/// remainder to test.
pub fn split_dataset(manifest: &DatasetManifest, seed: u64) -> Result<SplitAssignment> {
    let mut ids: Vec<u64> = manifest.records.iter().map(|r| r.grid_id).collect();
    if ids.len() < 10 {
        return Err(Error::Config(format!(
            "need at least 10 records to split, have {}",
            ids.len()
        )));
    }
    ids.sort_unstable();
    let mut rng = derive_rng(seed, tag::SPLIT, 0, 0);
    ids.shuffle(&mut rng);
    let n = ids.len();
    let n_train = (0.70 * n as f64).floor() as usize;
    let n_val = (0.15 * n as f64).floor() as usize;
    Ok(SplitAssignment {
        train: ids[..n_train].to_vec(),
        validation: ids[n_train..n_train + n_val].to_vec(),
        test: ids[n_train + n_val..].to_vec(),
    })
}

/// Imports and fully validates an external grid file (grid JSON format).
pub fn import_grid(path: &Path) -> Result<PowerGrid> {
    read_grid(path)
}

/// Loads one record of a dataset directory.
pub fn load_record(dir: &Path, grid_id: u64) -> Result<DatasetRecord> {
    let grid = read_grid(&grid_path(dir, grid_id))?;
    let stats = read_node_stats_csv(&targets_path(dir, grid_id))?;
    if stats.len() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), got: stats.len() });
    }
    Ok(DatasetRecord { grid_id, grid, stats })
}

/// Loads every record of a dataset directory (manifest order).
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<DatasetRecord>)> {
    let manifest = read_manifest(dir)?;
    let records = manifest
        .records
        .iter()
        .map(|m| load_record(dir, m.grid_id))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> BuildConfig {
        let mut config = BuildConfig::new(2, 6, 8, 99);
        config.min_tm_trials = 4;
        config
    }

    fn dummy_manifest(count: u64) -> DatasetManifest {
        DatasetManifest {
            generator_version: GENERATOR_VERSION.into(),
            config: tiny_config(),
            records: (0..count)
                .map(|i| RecordMeta {
                    grid_id: i,
                    candidate: i,
                    topology_seed: 0,
                    injection_seed: 0,
                    n: 6,
                })
                .collect(),
            discards: vec![],
            splits: SplitAssignment::default(),
        }
    }

    #[test]
    fn split_is_70_15_15_and_seed_stable() {
        let manifest = dummy_manifest(100);
        let split = split_dataset(&manifest, 7).unwrap();
        assert_eq!(split.train.len(), 70);
        assert_eq!(split.validation.len(), 15);
        assert_eq!(split.test.len(), 15);
        assert_eq!(split, split_dataset(&manifest, 7).unwrap());
        assert_ne!(split, split_dataset(&manifest, 8).unwrap());

        // disjoint and exhaustive
        let mut all: Vec<u64> = split
            .train
            .iter()
            .chain(&split.validation)
            .chain(&split.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_rounding_on_ten_records() {
        let manifest = dummy_manifest(10);
        let split = split_dataset(&manifest, 3).unwrap();
        assert_eq!(split.train.len(), 7);
        assert_eq!(split.validation.len(), 1);
        assert_eq!(split.test.len(), 2);

        assert!(split_dataset(&dummy_manifest(9), 3).is_err());
    }

    #[test]
    fn split_is_stable_under_record_reordering() {
        let a = split_dataset(&dummy_manifest(20), 5).unwrap();
        let mut reordered = dummy_manifest(20);
        reordered.records.reverse();
        let b = split_dataset(&reordered, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_export_import_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let topo = generate_topology(&GrowthParams::new(12, 5)).unwrap();
        let grid = assign_injections(topo, 6).unwrap();
        let path = dir.path().join("grid.json");
        write_grid(&path, &grid).unwrap();
        let back = import_grid(&path).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn import_rejects_unbalanced_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"n": 2, "edges": [[0, 1]], "injections": [1, 1]}"#).unwrap();
        assert!(matches!(import_grid(&path), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn config_mismatch_refused() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        build_dataset(dir.path(), &config).unwrap();
        let mut other = config;
        other.trials = 16;
        assert!(matches!(
            build_dataset(dir.path(), &other),
            Err(Error::DatasetMismatch(_))
        ));
    }
}
