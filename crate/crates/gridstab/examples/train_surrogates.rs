//! Train the baseline predictors on the demo dataset and compare test
//! metrics: closed-form linear regression vs. SGD vs. a small GCN.
//!
//! Builds the demo dataset first if it is missing (same config as the
//! `build_dataset` example, so the two share the cached directory).
//!
//! ```text
//! cargo run --release --example train_surrogates
//! ```

use gridstab::dataset::{build_dataset, load_dataset, BuildConfig};
use gridstab::ml::{evaluate, fit, fit_linreg_exact, ModelKind, TargetKind, TrainConfig};
use std::path::Path;

fn demo_config() -> BuildConfig {
    // must match examples/build_dataset.rs
    let mut config = BuildConfig::new(14, 10, 80, 4242);
    config.min_tm_trials = 12;
    config
}

fn main() {
    let dir = Path::new("target/example_out/demo_dataset");
    build_dataset(dir, &demo_config()).unwrap();
    let (manifest, records) = load_dataset(dir).unwrap();
    let splits = &manifest.splits;
    let beta = manifest.config.tm.beta;

    // Closed-form linear regression on the hand-crafted features.
    let linreg = fit_linreg_exact(&records, splits, TargetKind::Snbs).unwrap();
    let lin_report = evaluate(&linreg, &records, Some(&splits.test), beta, 0.5).unwrap();
    println!("linreg (normal equations): test R2 = {:+.3}", lin_report.r2.unwrap());

    // The same model by SGD.
    let cfg = TrainConfig {
        learning_rate: 0.1,
        epochs: 2000,
        patience: 2000,
        ..TrainConfig::new(TargetKind::Snbs, 1)
    };
    let (lin_sgd, history) =
        fit(ModelKind::LinReg, &[], &records, splits, TargetKind::Snbs, &cfg).unwrap();
    let sgd_report = evaluate(&lin_sgd, &records, Some(&splits.test), beta, 0.5).unwrap();
    println!(
        "linreg (SGD, best epoch {}): test R2 = {:+.3}",
        history.best_epoch,
        sgd_report.r2.unwrap()
    );

    // A small graph convolution network on the raw grid.
    let cfg = TrainConfig {
        learning_rate: 0.08,
        epochs: 1200,
        patience: 300,
        ..TrainConfig::new(TargetKind::Snbs, 2)
    };
    let (gcn, history) =
        fit(ModelKind::Gcn, &[16, 16], &records, splits, TargetKind::Snbs, &cfg).unwrap();
    let gcn_report = evaluate(&gcn, &records, Some(&splits.test), beta, 0.5).unwrap();
    println!(
        "gcn [2,16,16,1] (best epoch {}): test R2 = {:+.3}",
        history.best_epoch,
        gcn_report.r2.unwrap()
    );

    let out = Path::new("target/example_out");
    gridstab::ml::save_model(&out.join("gcn_snbs.ckpt"), &gcn).unwrap();
    gridstab::ml::write_predictions_csv(
        &out.join("gcn_snbs_predictions.csv"),
        &gcn_report.predictions,
    )
    .unwrap();
    println!("checkpoint and predictions written to {}", out.display());
    println!(
        "note: with {} tiny grids the test split has ~{} nodes, so these scores are \
         noise-dominated; meaningful R2 needs a few hundred grids",
        records.len(),
        lin_report.n_nodes
    );
}
