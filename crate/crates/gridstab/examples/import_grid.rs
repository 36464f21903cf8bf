//! Export a grid to the JSON grid format, import it back with full
//! validation, and compute the hand-crafted node features used by the
//! baseline models.
//!
//! ```text
//! cargo run --release --example import_grid
//! ```

use gridstab::topology::{
    assign_injections, generate_topology, node_features, GrowthParams, FEATURE_NAMES,
};
use std::path::Path;

fn main() {
    let out = Path::new("target/example_out");
    std::fs::create_dir_all(out).unwrap();
    let path = out.join("exported_grid.json");

    let topo = generate_topology(&GrowthParams::new(16, 21)).unwrap();
    let grid = assign_injections(topo, 21).unwrap();
    gridstab::topology::write_grid(&path, &grid).unwrap();
    println!("wrote {}", path.display());

    let imported = gridstab::dataset::import_grid(&path).unwrap();
    assert_eq!(imported, grid);
    println!("re-imported and validated (connected, simple, balanced)");

    let features = node_features(&imported).unwrap();
    println!("\nnode features ({}):", FEATURE_NAMES.join(", "));
    for (i, row) in features.rows.iter().enumerate().take(6) {
        println!(
            "  node {i}: {}",
            row.iter().map(|v| format!("{v:7.3}")).collect::<Vec<_>>().join(" ")
        );
    }
    println!("  ... ({} nodes total)", features.n());

    // A malformed file is rejected with a specific error.
    let bad = out.join("unbalanced_grid.json");
    std::fs::write(&bad, r#"{"n": 2, "edges": [[0, 1]], "injections": [1, 1]}"#).unwrap();
    match gridstab::dataset::import_grid(&bad) {
        Err(e) => println!("\nimport of unbalanced file rejected: {e}"),
        Ok(_) => unreachable!(),
    }
}
