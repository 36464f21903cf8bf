//! Monte-Carlo stability estimation for one grid: SNBS with standard
//! errors, the maximum frequency deviation, and troublemaker flags with
//! their Clopper-Pearson bounds.
//!
//! ```text
//! cargo run --release --example estimate_stability
//! ```

use gridstab::stability::EstimationConfig;
use gridstab::topology::{assign_injections, generate_topology, GrowthParams};

fn main() {
    let topo = generate_topology(&GrowthParams::new(12, 11)).unwrap();
    let grid = assign_injections(topo, 11).unwrap();

    // Desk-scale trial count; production runs use thousands per node.
    let mut cfg = EstimationConfig::new(120, 2024);
    cfg.min_tm_trials = 20;

    let started = std::time::Instant::now();
    let stats = gridstab::stability::estimate_grid(&grid, 0, &cfg).unwrap();
    println!(
        "estimated {} nodes x {} trials in {:.1?}\n",
        grid.n(),
        cfg.trials,
        started.elapsed()
    );
    println!("node  snbs    +-se     mfd_max  cp_lower  tm");
    for s in &stats {
        println!(
            "{:>4}  {:.3}  {:.3}  {:>8.3}  {:.4}    {}",
            s.node,
            s.snbs,
            s.snbs_se,
            s.mfd_max,
            s.cp_lower,
            if s.tm { "yes" } else { "no" }
        );
    }

    let out = std::path::Path::new("target/example_out");
    std::fs::create_dir_all(out).unwrap();
    let csv = out.join("node_stats.csv");
    gridstab::stability::write_node_stats_csv(&csv, &stats).unwrap();
    println!("\nper-node results written to {}", csv.display());
}
