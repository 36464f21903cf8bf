//! Size transfer: a GCN trained on small grids applied, unchanged, to a
//! much larger grid. GCN parameters are independent of the node count, so
//! the trained model evaluates on any topology.
//!
//! ```text
//! cargo run --release --example size_transfer
//! ```

use gridstab::dataset::{build_dataset, load_dataset, BuildConfig};
use gridstab::ml::{fit, gcn_forward, ModelKind, TargetKind, TrainConfig};
use gridstab::topology::{assign_injections, generate_topology, GrowthParams};
use nalgebra::DMatrix;
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

    let cfg = TrainConfig {
        learning_rate: 0.08,
        epochs: 800,
        patience: 200,
        ..TrainConfig::new(TargetKind::Snbs, 3)
    };
    let (trained, _) =
        fit(ModelKind::Gcn, &[16, 16], &records, &manifest.splits, TargetKind::Snbs, &cfg)
            .unwrap();
    println!(
        "trained a {}-parameter GCN on grids of {} nodes",
        trained.model.parameter_count(),
        records[0].grid.n()
    );

    for n in [100usize, 500] {
        let topo = generate_topology(&GrowthParams::new(n, 99)).unwrap();
        let grid = assign_injections(topo, 99).unwrap();
        let x = DMatrix::from_fn(n, 2, |i, c| if c == 0 { grid.injections()[i] } else { 1.0 });
        let started = std::time::Instant::now();
        let (_, predictions) = gcn_forward(grid.topology(), &x, &trained.model).unwrap();
        let mean = predictions.iter().sum::<f64>() / n as f64;
        let min = predictions.iter().cloned().fold(f64::MAX, f64::min);
        let max = predictions.iter().cloned().fold(f64::MIN, f64::max);
        println!(
            "n = {n:>4}: predicted snbs mean {mean:.3}, range [{min:.3}, {max:.3}] ({:.2?})",
            started.elapsed()
        );
    }
    println!("(scoring against ground truth at scale requires an estimate run per grid)");
}
