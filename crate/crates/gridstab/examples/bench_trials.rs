//! Rough per-trial timing for estimation planning.
//!
//! Run with `cargo run --release --example bench_trials [n] [trials]`.

use gridstab::rng::TrialKey;
use gridstab::stability::{sample_perturbation, PerturbationSpec};
use gridstab::topology::{assign_injections, generate_topology, GrowthParams};
use std::time::Instant;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let trials: u32 = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);

    let topo = generate_topology(&GrowthParams::new(n, 1)).unwrap();
    let grid = assign_injections(topo, 1).unwrap();
    let params = gridstab::dynamics::SwingParams::default();
    let cfg = gridstab::dynamics::IntegratorConfig::default();
    let fp = gridstab::dynamics::find_fixed_point(&grid, &params).unwrap();
    let spec = PerturbationSpec::snbs();

    let start = Instant::now();
    let mut stable = 0u32;
    let mut mfd_sum = 0.0;
    for trial in 0..trials {
        let key = TrialKey { master_seed: 123, grid_id: 0, node: trial % n as u32, trial };
        let initial = sample_perturbation(key.node as usize, &spec, &fp, &key);
        let result = gridstab::dynamics::integrate(&grid, &params, &initial, &cfg).unwrap();
        stable += u32::from(result.converged);
        mfd_sum += result.mfd;
    }
    let elapsed = start.elapsed();
    println!(
        "n = {n}: {trials} trials in {:.2?} ({:.1} ms/trial), {stable} stable, mean mfd {:.3}",
        elapsed,
        elapsed.as_secs_f64() * 1e3 / f64::from(trials),
        mfd_sum / f64::from(trials)
    );
}
