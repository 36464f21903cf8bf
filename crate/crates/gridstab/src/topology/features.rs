//! Hand-crafted node features for the baseline predictors.
//!
//! Six features per node: degree, average neighbor degree, local clustering
//! coefficient, current-flow betweenness centrality, closeness centrality,
//! and the injected power. Current-flow betweenness is computed exactly from
//! the dense Laplacian pseudo-inverse; per-edge throughput sums over all
//! source/sink pairs reduce to a sort (`Σ_{s<t} |x_s − x_t|` of the edge's
//! potential profile), giving O(n³ + m·n log n) total.

use super::{GridTopology, PowerGrid};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const FEATURE_COUNT: usize = 6;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "degree",
    "avg_neighbor_degree",
    "clustering",
    "current_flow_betweenness",
    "closeness",
    "injection",
];

/// One feature row per node, columns ordered as [`FEATURE_NAMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub rows: Vec<[f64; FEATURE_COUNT]>,
}

impl NodeFeatures {
    pub fn n(&self) -> usize {
        self.rows.len()
    }
}

/// Computes all six features. Requires at least two nodes (centralities are
/// undefined on a single node); connectivity is guaranteed by construction
/// of [`GridTopology`].
pub fn node_features(grid: &PowerGrid) -> Result<NodeFeatures> {
    let topo = grid.topology();
    let n = topo.n();
    if n < 2 {
        return Err(Error::InvalidGrid(
            "node features are undefined for single-node grids".into(),
        ));
    }

    let degree: Vec<f64> = (0..n).map(|i| topo.degree(i) as f64).collect();

    let avg_neighbor_degree: Vec<f64> = (0..n)
        .map(|i| {
            let adj = topo.neighbors(i);
            adj.iter().map(|&j| degree[j]).sum::<f64>() / adj.len() as f64
        })
        .collect();

    let clustering: Vec<f64> = (0..n)
        .map(|i| {
            let adj = topo.neighbors(i);
            let k = adj.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (ai, &a) in adj.iter().enumerate() {
                for &b in &adj[ai + 1..] {
                    if topo.neighbors(a).binary_search(&b).is_ok() {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect();

    let cfb = current_flow_betweenness(topo);

    let closeness: Vec<f64> = (0..n)
        .map(|i| {
            let total: usize = topo.bfs_distances(i).iter().sum();
            (n - 1) as f64 / total as f64
        })
        .collect();

    let rows = (0..n)
        .map(|i| {
            [
                degree[i],
                avg_neighbor_degree[i],
                clustering[i],
                cfb[i],
                closeness[i],
                grid.injections()[i],
            ]
        })
        .collect();
    Ok(NodeFeatures { rows })
}

/// Exact current-flow betweenness, normalized by `(n−1)(n−2)/2` so that the
/// hub of a star scores 1. Unit resistance on every line.
///
/// For a unit current injected at `s` and drained at `t`, node potentials are
/// `x = L⁺(e_s − e_t)`, so the current on edge `(u, w)` is
/// `(L⁺_{u·} − L⁺_{w·})·(e_s − e_t)`. A node's throughput is half its summed
/// absolute edge currents, minus ½ when it is the source or the target.
pub fn current_flow_betweenness(topo: &GridTopology) -> Vec<f64> {
    let n = topo.n();
    if n < 3 {
        return vec![0.0; n];
    }
    let lplus = laplacian_pseudo_inverse(topo);

    let mut half_sums = vec![0.0; n];
    let mut profile = vec![0.0f64; n];
    for &(u, w) in topo.edges() {
        for v in 0..n {
            profile[v] = lplus[(u, v)] - lplus[(w, v)];
        }
        profile.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        // Σ_{s<t} |x_s − x_t| over the sorted profile.
        let mut pair_sum = 0.0;
        for (k, &x) in profile.iter().enumerate() {
            pair_sum += (2.0 * k as f64 - (n - 1) as f64) * x;
        }
        half_sums[u] += pair_sum;
        half_sums[w] += pair_sum;
    }

    let norm = ((n - 1) * (n - 2)) as f64;
    (0..n)
        .map(|v| ((half_sums[v] - (n - 1) as f64) / norm).max(0.0))
        .collect()
}

/// Moore-Penrose pseudo-inverse of the graph Laplacian via the connected-graph
/// identity `L⁺ = (L + J/n)⁻¹ − J/n`.
fn laplacian_pseudo_inverse(topo: &GridTopology) -> DMatrix<f64> {
    let n = topo.n();
    let jn = 1.0 / n as f64;
    let mut m = DMatrix::from_element(n, n, jn);
    for i in 0..n {
        m[(i, i)] += topo.degree(i) as f64;
    }
    for &(i, j) in topo.edges() {
        m[(i, j)] -= 1.0;
        m[(j, i)] -= 1.0;
    }
    let inv = nalgebra::Cholesky::new(m)
        .expect("L + J/n is positive definite on connected graphs")
        .inverse();
    inv.map(|x| x - jn)
}

/// Per-node-index, per-feature standardization statistics.
///
/// `PerNode` is fit on a collection of equally sized grids (the training
/// split); `Pooled` aggregates over all nodes and is the fallback when a
/// single grid must be standardized on its own.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FeatureScaler {
    PerNode { mean: Vec<[f64; FEATURE_COUNT]>, std: Vec<[f64; FEATURE_COUNT]> },
    Pooled { mean: [f64; FEATURE_COUNT], std: [f64; FEATURE_COUNT] },
}

/// Population standard deviation; zero-variance features keep std 1 so they
/// pass through unscaled.
fn finalize_std(sum_sq: f64, mean: f64, count: f64, context: &str) -> f64 {
    let var = (sum_sq / count - mean * mean).max(0.0);
    let std = var.sqrt();
    if std == 0.0 {
        log::warn!("constant feature ({context}); leaving unscaled");
        1.0
    } else {
        std
    }
}

impl FeatureScaler {
    /// Node-wise statistics over grids of equal size.
    pub fn fit_per_node(collection: &[NodeFeatures]) -> Result<Self> {
        let first = collection
            .first()
            .ok_or_else(|| Error::Config("cannot standardize an empty collection".into()))?;
        let n = first.n();
        if collection.iter().any(|f| f.n() != n) {
            return Err(Error::Config(
                "node-wise standardization requires grids of equal size".into(),
            ));
        }
        let count = collection.len() as f64;
        let mut mean = vec![[0.0; FEATURE_COUNT]; n];
        let mut sum_sq = vec![[0.0; FEATURE_COUNT]; n];
        for features in collection {
            for (i, row) in features.rows.iter().enumerate() {
                for (f, &x) in row.iter().enumerate() {
                    mean[i][f] += x;
                    sum_sq[i][f] += x * x;
                }
            }
        }
        let mut std = vec![[1.0; FEATURE_COUNT]; n];
        for i in 0..n {
            for f in 0..FEATURE_COUNT {
                mean[i][f] /= count;
                std[i][f] = finalize_std(
                    sum_sq[i][f],
                    mean[i][f],
                    count,
                    &format!("node {i}, {}", FEATURE_NAMES[f]),
                );
            }
        }
        Ok(FeatureScaler::PerNode { mean, std })
    }

    /// Statistics pooled over every node of every grid.
    pub fn fit_pooled(collection: &[NodeFeatures]) -> Result<Self> {
        let total: usize = collection.iter().map(NodeFeatures::n).sum();
        if total == 0 {
            return Err(Error::Config("cannot standardize an empty collection".into()));
        }
        let count = total as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        let mut sum_sq = [0.0; FEATURE_COUNT];
        for features in collection {
            for row in &features.rows {
                for (f, &x) in row.iter().enumerate() {
                    mean[f] += x;
                    sum_sq[f] += x * x;
                }
            }
        }
        let mut std = [1.0; FEATURE_COUNT];
        for f in 0..FEATURE_COUNT {
            mean[f] /= count;
            std[f] = finalize_std(sum_sq[f], mean[f], count, FEATURE_NAMES[f]);
        }
        Ok(FeatureScaler::Pooled { mean, std })
    }

    pub fn apply(&self, features: &NodeFeatures) -> Result<NodeFeatures> {
        let rows = match self {
            FeatureScaler::PerNode { mean, std } => {
                if features.n() != mean.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mean.len(),
                        got: features.n(),
                    });
                }
                features
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        std::array::from_fn(|f| (row[f] - mean[i][f]) / std[i][f])
                    })
                    .collect()
            }
            FeatureScaler::Pooled { mean, std } => features
                .rows
                .iter()
                .map(|row| std::array::from_fn(|f| (row[f] - mean[f]) / std[f]))
                .collect(),
        };
        Ok(NodeFeatures { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{GrowthParams, PowerGrid};
    use approx::assert_abs_diff_eq;

    fn grid(n: usize, edges: Vec<(usize, usize)>, inj: Vec<f64>) -> PowerGrid {
        PowerGrid::with_raw_injections(GridTopology::new(n, edges).unwrap(), inj).unwrap()
    }

    #[test]
    fn triangle_is_fully_symmetric() {
        let g = grid(3, vec![(0, 1), (1, 2), (0, 2)], vec![0.0; 3]);
        let f = node_features(&g).unwrap();
        for row in &f.rows {
            assert_eq!(row[0], 2.0); // degree
            assert_eq!(row[2], 1.0); // clustering
            assert_eq!(row[4], 1.0); // closeness
        }
    }

    #[test]
    fn path_of_three() {
        let g = grid(3, vec![(0, 1), (1, 2)], vec![0.0; 3]);
        let f = node_features(&g).unwrap();
        assert_eq!(f.rows[1][0], 2.0);
        assert_eq!(f.rows[1][2], 0.0);
        assert_eq!(f.rows[0][0], 1.0);
        assert_eq!(f.rows[2][0], 1.0);
    }

    /// Brute-force current-flow betweenness: solve the grounded Laplacian
    /// system pair by pair and accumulate node throughputs directly.
    fn cfb_bruteforce(topo: &GridTopology) -> Vec<f64> {
        let n = topo.n();
        let ground = n - 1;
        let mut reduced = DMatrix::zeros(n - 1, n - 1);
        for i in 0..n - 1 {
            reduced[(i, i)] = topo.degree(i) as f64;
        }
        for &(i, j) in topo.edges() {
            if i != ground && j != ground {
                reduced[(i, j)] = -1.0;
                reduced[(j, i)] = -1.0;
            }
        }
        let lu = reduced.lu();
        let mut betw = vec![0.0; n];
        for s in 0..n {
            for t in (s + 1)..n {
                let mut b = nalgebra::DVector::zeros(n - 1);
                if s != ground {
                    b[s] = 1.0;
                }
                if t != ground {
                    b[t] = -1.0;
                }
                let x = lu.solve(&b).unwrap();
                let potential = |v: usize| if v == ground { 0.0 } else { x[v] };
                for v in 0..n {
                    let mut through: f64 = topo
                        .neighbors(v)
                        .iter()
                        .map(|&w| (potential(v) - potential(w)).abs())
                        .sum();
                    if v == s || v == t {
                        through -= 1.0;
                    }
                    betw[v] += 0.5 * through;
                }
            }
        }
        let norm = ((n - 1) * (n - 2)) as f64 / 2.0;
        betw.iter().map(|&b| b / norm).collect()
    }

    /// Shortest-path betweenness by explicit path counting (trees only:
    /// the unique path makes counting trivial).
    fn tree_sp_betweenness(topo: &GridTopology) -> Vec<f64> {
        let n = topo.n();
        let mut betw = vec![0.0; n];
        for s in 0..n {
            // parent pointers from BFS
            let mut parent = vec![usize::MAX; n];
            let mut order = vec![s];
            let mut seen = vec![false; n];
            seen[s] = true;
            let mut head = 0;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &w in topo.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        parent[w] = v;
                        order.push(w);
                    }
                }
            }
            for t in (s + 1)..n {
                let mut v = parent[t];
                while v != s {
                    betw[v] += 1.0;
                    v = parent[v];
                }
            }
        }
        let norm = ((n - 1) * (n - 2)) as f64 / 2.0;
        betw.iter().map(|&b| b / norm).collect()
    }

    fn tree_from_pruefer(seq: &[usize]) -> GridTopology {
        let n = seq.len() + 2;
        let mut degree = vec![1usize; n];
        for &a in seq {
            degree[a] += 1;
        }
        let mut edges = Vec::with_capacity(n - 1);
        let mut seq = seq.to_vec();
        while !seq.is_empty() {
            let a = seq[0];
            let leaf = (0..n).find(|&v| degree[v] == 1 && !seq.contains(&v)).unwrap();
            edges.push((leaf, a));
            degree[leaf] -= 1;
            degree[a] -= 1;
            seq.remove(0);
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        edges.push((rest[0], rest[1]));
        GridTopology::new(n, edges).unwrap()
    }

    #[test]
    fn star_hub_current_flow_equals_shortest_path() {
        let topo = GridTopology::new(4, vec![(0, 1), (0, 2), (0, 3)]).unwrap();
        let cfb = current_flow_betweenness(&topo);
        let brute = cfb_bruteforce(&topo);
        let sp = tree_sp_betweenness(&topo);
        assert_abs_diff_eq!(cfb[0], sp[0], epsilon = 1e-10);
        assert_abs_diff_eq!(cfb[0], brute[0], epsilon = 1e-10);
        assert_abs_diff_eq!(cfb[0], 1.0, epsilon = 1e-10);
    }

    /// On every labeled tree with up to 7 nodes, current flow concentrates on
    /// the unique path, so current-flow betweenness must equal shortest-path
    /// betweenness. Checks the production path against both oracles.
    #[test]
    fn trees_up_to_seven_nodes_match_shortest_path_oracle() {
        for n in 3..=7usize {
            let seq_len = n - 2;
            let total = n.pow(seq_len as u32);
            for code in 0..total {
                let mut seq = Vec::with_capacity(seq_len);
                let mut c = code;
                for _ in 0..seq_len {
                    seq.push(c % n);
                    c /= n;
                }
                let topo = tree_from_pruefer(&seq);
                let cfb = current_flow_betweenness(&topo);
                let sp = tree_sp_betweenness(&topo);
                let brute = cfb_bruteforce(&topo);
                for v in 0..n {
                    assert_abs_diff_eq!(cfb[v], sp[v], epsilon = 1e-9);
                    assert_abs_diff_eq!(cfb[v], brute[v], epsilon = 1e-9);
                }
            }
        }
    }

    /// Non-tree sanity: production accumulation matches the pair-by-pair
    /// brute force on cyclic graphs too.
    #[test]
    fn cyclic_graphs_match_bruteforce() {
        for seed in 0..10 {
            let topo =
                crate::topology::generate_topology(&GrowthParams::new(12, seed)).unwrap();
            let fast = current_flow_betweenness(&topo);
            let brute = cfb_bruteforce(&topo);
            for v in 0..topo.n() {
                assert_abs_diff_eq!(fast[v], brute[v], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn features_commute_with_relabeling() {
        let topo = crate::topology::generate_topology(&GrowthParams::new(10, 77)).unwrap();
        let inj: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let grid = PowerGrid::with_raw_injections(topo.clone(), inj.clone()).unwrap();
        let f = node_features(&grid).unwrap();

        let perm: Vec<usize> = vec![3, 1, 4, 0, 9, 2, 8, 7, 5, 6];
        let mut inj_p = vec![0.0; 10];
        for (i, &pi) in perm.iter().enumerate() {
            inj_p[pi] = inj[i];
        }
        let grid_p =
            PowerGrid::with_raw_injections(topo.permuted(&perm).unwrap(), inj_p).unwrap();
        let f_p = node_features(&grid_p).unwrap();
        for i in 0..10 {
            for c in 0..FEATURE_COUNT {
                assert_abs_diff_eq!(f.rows[i][c], f_p.rows[perm[i]][c], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn standardize_two_values() {
        let a = NodeFeatures { rows: vec![[1.0; FEATURE_COUNT]] };
        let b = NodeFeatures { rows: vec![[3.0; FEATURE_COUNT]] };
        let scaler = FeatureScaler::fit_per_node(&[a.clone(), b]).unwrap();
        let za = scaler.apply(&a).unwrap();
        assert_abs_diff_eq!(za.rows[0][0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_feature_passes_through() {
        let a = NodeFeatures { rows: vec![[2.5; FEATURE_COUNT]] };
        let scaler = FeatureScaler::fit_per_node(&[a.clone(), a.clone()]).unwrap();
        match &scaler {
            FeatureScaler::PerNode { std, .. } => assert_eq!(std[0][0], 1.0),
            _ => unreachable!(),
        }
        let z = scaler.apply(&a).unwrap();
        assert_eq!(z.rows[0][0], 0.0);
    }

    #[test]
    fn training_split_means_vanish_after_scaling() {
        let collection: Vec<NodeFeatures> = (0..10)
            .map(|seed| {
                let topo =
                    crate::topology::generate_topology(&GrowthParams::new(8, seed)).unwrap();
                let grid = crate::topology::assign_injections(topo, seed).unwrap();
                node_features(&grid).unwrap()
            })
            .collect();
        let scaler = FeatureScaler::fit_per_node(&collection).unwrap();
        let scaled: Vec<NodeFeatures> =
            collection.iter().map(|f| scaler.apply(f).unwrap()).collect();
        for i in 0..8 {
            for f in 0..FEATURE_COUNT {
                let mean: f64 =
                    scaled.iter().map(|s| s.rows[i][f]).sum::<f64>() / scaled.len() as f64;
                assert!(mean.abs() < 1e-12, "residual mean {mean} at node {i} feature {f}");
            }
        }
    }
}
