//! Training behavior on synthetic datasets with known structure.

mod common;

use gridstab::dataset::{split_dataset, DatasetManifest, DatasetRecord, RecordMeta, SplitAssignment};
use gridstab::ml::{
    evaluate, fit, fit_linreg_exact, LossKind, ModelKind, TargetKind, TrainConfig,
};
use gridstab::stability::NodeStats;
use gridstab::topology::{assign_injections, generate_topology, node_features, GrowthParams};

/// Fake records whose targets are a deterministic function of the grid.
fn synthetic_records(
    count: usize,
    n: usize,
    target_fn: impl Fn(&gridstab::topology::PowerGrid, usize) -> f64,
) -> Vec<DatasetRecord> {
    (0..count)
        .map(|i| {
            let topo = generate_topology(&GrowthParams::new(n, 1000 + i as u64)).unwrap();
            let grid = assign_injections(topo, 2000 + i as u64).unwrap();
            let stats = (0..n)
                .map(|node| {
                    let value = target_fn(&grid, node);
                    NodeStats {
                        node,
                        n_trials: 100,
                        n_stable: (value.clamp(0.0, 1.0) * 100.0).round() as u64,
                        snbs: value,
                        snbs_se: 0.0,
                        n_tm_trials: 50,
                        n_within_bound: 50,
                        mfd_max: value * 10.0,
                        cp_lower: 0.9,
                        tm: value > 0.8,
                    }
                })
                .collect();
            DatasetRecord { grid_id: i as u64, grid, stats }
        })
        .collect()
}

fn splits_for(records: &[DatasetRecord], seed: u64) -> SplitAssignment {
    let manifest = DatasetManifest {
        generator_version: "test".into(),
        config: gridstab::dataset::BuildConfig::new(records.len(), records[0].grid.n(), 1, 0),
        records: records
            .iter()
            .map(|r| RecordMeta {
                grid_id: r.grid_id,
                candidate: r.grid_id,
                topology_seed: 0,
                injection_seed: 0,
                n: r.grid.n(),
            })
            .collect(),
        discards: vec![],
        splits: SplitAssignment::default(),
    };
    split_dataset(&manifest, seed).unwrap()
}

/// Targets exactly linear in the features: the SGD path must match the
/// closed-form fit at the prediction level. (Coefficient-level agreement is
/// checked on a controlled synthetic problem in the unit suite; real grid
/// features are collinear enough that the linear system is ill-conditioned
/// and null-space components converge only asymptotically.)
#[test]
fn linreg_sgd_matches_normal_equations() {
    let coeffs = [0.3, -0.2, 0.15, 0.05, -0.4, 0.25];
    let records = synthetic_records(24, 12, |grid, node| {
        let f = node_features(grid).unwrap();
        let row = f.rows[node];
        0.5 + coeffs.iter().zip(row.iter()).map(|(c, v)| c * v).sum::<f64>() * 0.05
    });
    let splits = splits_for(&records, 3);

    let exact = fit_linreg_exact(&records, &splits, TargetKind::Snbs).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.25,
        batch_size: 64,
        epochs: 20_000,
        loss: LossKind::MeanSquaredError,
        class_weight: None,
        patience: 20_000,
        seed: 5,
    };
    let (sgd, history) =
        fit(ModelKind::LinReg, &[], &records, &splits, TargetKind::Snbs, &cfg).unwrap();
    // Per-node standardization makes a raw-feature-linear target only
    // approximately representable by shared coefficients, so the optimal
    // loss is small but nonzero; both fits must reach the same optimum.
    assert!(
        history.train_loss.last().unwrap() < &1e-3,
        "loss stalled at {}",
        history.train_loss.last().unwrap()
    );

    let report_exact = evaluate(&exact, &records, Some(&splits.test), 15.0, 0.5).unwrap();
    let report_sgd = evaluate(&sgd, &records, Some(&splits.test), 15.0, 0.5).unwrap();
    for (a, b) in report_exact.predictions.iter().zip(&report_sgd.predictions) {
        assert!(
            (a.prediction - b.prediction).abs() < 1e-3,
            "prediction gap {} vs {}",
            a.prediction,
            b.prediction
        );
    }
    assert!((report_exact.r2.unwrap() - report_sgd.r2.unwrap()).abs() < 1e-3);
}

/// Constant targets: the loss must converge to ~0 and predictions to the
/// constant.
#[test]
fn constant_targets_are_learned() {
    let records = synthetic_records(16, 10, |_, _| 0.4);
    let splits = splits_for(&records, 1);
    let cfg = TrainConfig {
        learning_rate: 0.7,
        batch_size: 16,
        epochs: 15_000,
        loss: LossKind::MeanSquaredError,
        class_weight: None,
        patience: 15_000,
        seed: 2,
    };
    let (trained, history) =
        fit(ModelKind::Mlp, &[8], &records, &splits, TargetKind::Snbs, &cfg).unwrap();
    assert!(
        history.train_loss.last().unwrap() < &1e-6,
        "final loss {}",
        history.train_loss.last().unwrap()
    );
    let report = evaluate(&trained, &records, Some(&splits.test), 15.0, 0.5).unwrap();
    for row in &report.predictions {
        assert!((row.prediction - 0.4).abs() < 5e-3, "prediction {}", row.prediction);
    }
}

/// A degree-driven target is expressible from the `[P, 1]` input through Ā;
/// a small GCN must explain most of its variance on held-out grids.
#[test]
fn gcn_learns_topological_signal() {
    let records = synthetic_records(30, 12, |grid, node| {
        let deg = grid.topology().degree(node) as f64;
        1.0 / (1.0 + (-0.8 * (deg - 2.5)).exp())
    });
    let splits = splits_for(&records, 7);
    let cfg = TrainConfig {
        learning_rate: 0.15,
        batch_size: 32,
        epochs: 1500,
        loss: LossKind::MeanSquaredError,
        class_weight: None,
        patience: 1500,
        seed: 4,
    };
    let (trained, _) =
        fit(ModelKind::Gcn, &[16, 16], &records, &splits, TargetKind::Snbs, &cfg).unwrap();
    let report = evaluate(&trained, &records, Some(&splits.test), 15.0, 0.5).unwrap();
    let r2 = report.r2.unwrap();
    assert!(r2 > 0.6, "test R2 {r2}");
}

// An absurd learning rate makes the least-squares iteration explode
// geometrically until the loss overflows. (A ReLU network would instead die
// to a finite plateau, which is why linreg is the clean probe here.)
#[test]
fn divergent_training_reports_nonfinite_loss() {
    let records = synthetic_records(12, 8, |_, node| 0.1 * node as f64);
    let splits = splits_for(&records, 9);
    let cfg = TrainConfig {
        learning_rate: 1e9,
        batch_size: 8,
        epochs: 200,
        loss: LossKind::MeanSquaredError,
        class_weight: None,
        patience: 200,
        seed: 6,
    };
    let err = fit(ModelKind::LinReg, &[], &records, &splits, TargetKind::Snbs, &cfg);
    assert!(matches!(err, Err(gridstab::Error::NonFiniteLoss { .. })));
}

/// Size transfer: a GCN trained on n=12 grids must produce finite outputs of
/// the right shape on n=40 grids without retraining.
#[test]
fn gcn_transfers_across_grid_sizes() {
    let records = synthetic_records(16, 12, |grid, node| {
        let deg = grid.topology().degree(node) as f64;
        (0.2 * deg).min(1.0)
    });
    let splits = splits_for(&records, 11);
    let cfg = TrainConfig {
        learning_rate: 0.1,
        batch_size: 16,
        epochs: 200,
        loss: LossKind::MeanSquaredError,
        class_weight: None,
        patience: 200,
        seed: 8,
    };
    let (trained, _) =
        fit(ModelKind::Gcn, &[8], &records, &splits, TargetKind::Snbs, &cfg).unwrap();

    let big = synthetic_records(3, 40, |grid, node| {
        let deg = grid.topology().degree(node) as f64;
        (0.2 * deg).min(1.0)
    });
    let report = evaluate(&trained, &big, None, 15.0, 0.5).unwrap();
    assert_eq!(report.n_nodes, 120);
    assert!(report.r2.unwrap().is_finite());
    for row in &report.predictions {
        assert!(row.prediction.is_finite());
    }
}
