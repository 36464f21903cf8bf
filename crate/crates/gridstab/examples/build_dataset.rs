//! Build a small dataset end to end: generate grids, estimate nodal
//! targets, persist everything with a 70:15:15 split. The build is
//! resumable — rerunning picks up where it left off (or does nothing).
//!
//! ```text
//! cargo run --release --example build_dataset
//! ```

use gridstab::dataset::{build_dataset, BuildConfig};
use std::path::Path;

/// Shared demo dataset config (also consumed by the training examples).
pub fn demo_config() -> BuildConfig {
    let mut config = BuildConfig::new(14, 10, 80, 4242);
    config.min_tm_trials = 12;
    config
}

fn main() {
    let dir = Path::new("target/example_out/demo_dataset");
    let started = std::time::Instant::now();
    let manifest = build_dataset(dir, &demo_config()).unwrap();
    println!(
        "dataset at {}: {} records ({} discards) in {:.1?}",
        dir.display(),
        manifest.records.len(),
        manifest.discards.len(),
        started.elapsed()
    );
    println!(
        "split sizes: train {}, validation {}, test {}",
        manifest.splits.train.len(),
        manifest.splits.validation.len(),
        manifest.splits.test.len()
    );

    let record = gridstab::dataset::load_record(dir, 0).unwrap();
    let snbs = record.snbs();
    println!(
        "grid 0: {} nodes, snbs range [{:.3}, {:.3}]",
        record.grid.n(),
        snbs.iter().cloned().fold(f64::MAX, f64::min),
        snbs.iter().cloned().fold(f64::MIN, f64::max),
    );
}
