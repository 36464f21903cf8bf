//! Synchronized fixed point of the power-flow equation.
//!
//! Two-stage solve: heavily damped relaxation integrates the swing equation
//! (droop temporarily ×10) from the flat state until frequencies die out,
//! which lands in the basin of the stable operating point; Newton iteration
//! on the algebraic power-flow equation then polishes the phases to a
//! residual below 1e-10. Newton alone could converge to an unstable
//! power-flow solution, so the relaxation stage is not optional.

use super::{IntegratorConfig, SwingParams, SwingSystem};
use crate::error::{Error, Result};
use crate::topology::PowerGrid;
use nalgebra::{DMatrix, DVector};

const RESIDUAL_TARGET: f64 = 1e-10;
const RELAX_FREQ_TOL: f64 = 1e-6;
const RELAX_CHUNK: f64 = 25.0;
const RELAX_MAX_TIME: f64 = 1000.0;
const NEWTON_MAX_ITERS: usize = 50;

/// Finds the stable synchronous phases `φ*`, gauge-fixed to `φ*₀ = 0`.
///
/// Requires balanced injections (`Σ Pᵢ = 0`); otherwise no zero-frequency
/// solution exists. Grids whose relaxation never settles (no stable sync
/// state reachable from flat start) are reported as
/// [`Error::NoStableSyncState`] and get discarded during dataset generation.
pub fn find_fixed_point(grid: &PowerGrid, params: &SwingParams) -> Result<Vec<f64>> {
    params.validate()?;
    let n = grid.n();
    let power_sum: f64 = grid.injections().iter().sum();
    if power_sum.abs() > 1e-9 * n as f64 {
        return Err(Error::Config(format!(
            "injections sum to {power_sum}; a synchronous state needs exact balance"
        )));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }

    // Stage 1: damped relaxation from the flat state.
    let damped = SwingParams { droop: params.droop * 10.0, ..*params };
    let sys_damped = SwingSystem::new(grid, &damped);
    let cfg = IntegratorConfig { t_end: RELAX_CHUNK, ..Default::default() };
    let mut solver = super::integrator::Dopri5::new(&sys_damped, cfg);
    let mut state = vec![0.0; 2 * n];
    let mut elapsed = 0.0;
    loop {
        let (next, _, outcome) = solver.run(&state, |_, _| {});
        state = next;
        elapsed += RELAX_CHUNK;
        let settled = state[n..].iter().all(|f| f.abs() < RELAX_FREQ_TOL);
        match outcome {
            super::integrator::Outcome::Diverged => {
                return Err(Error::NoStableSyncState { residual: f64::INFINITY })
            }
            super::integrator::Outcome::Completed if settled => break,
            super::integrator::Outcome::Completed => {
                if elapsed >= RELAX_MAX_TIME {
                    let sys = SwingSystem::new(grid, params);
                    let mut res = vec![0.0; n];
                    sys.flow_residual(&state[..n], &mut res);
                    let residual = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
                    return Err(Error::NoStableSyncState { residual });
                }
            }
        }
    }

    // Gauge fix before polishing.
    let mut phases: Vec<f64> = state[..n].to_vec();
    let offset = phases[0];
    for p in &mut phases {
        *p -= offset;
    }

    // Stage 2: Newton on the power-flow equation, node 0 grounded. The full
    // residual rows sum to zero for balanced injections, so dropping node 0
    // removes the gauge degeneracy without losing information.
    let sys = SwingSystem::new(grid, params);
    let mut residual = vec![0.0; n];
    for _ in 0..NEWTON_MAX_ITERS {
        sys.flow_residual(&phases, &mut residual);
        let max_res = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if max_res < RESIDUAL_TARGET {
            return Ok(phases);
        }
        let mut jac = DMatrix::<f64>::zeros(n - 1, n - 1);
        for &(a, b) in sys.edges() {
            let (a, b) = (a as usize, b as usize);
            let c = sys.coupling() * (phases[a] - phases[b]).cos();
            if a > 0 {
                jac[(a - 1, a - 1)] -= c;
            }
            if b > 0 {
                jac[(b - 1, b - 1)] -= c;
            }
            if a > 0 && b > 0 {
                jac[(a - 1, b - 1)] += c;
                jac[(b - 1, a - 1)] += c;
            }
        }
        let rhs = DVector::from_fn(n - 1, |i, _| -residual[i + 1]);
        let step = jac.lu().solve(&rhs).ok_or(Error::NoStableSyncState { residual: max_res })?;
        for i in 1..n {
            phases[i] += step[i - 1];
        }
    }
    sys.flow_residual(&phases, &mut residual);
    let max_res = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Err(Error::NoStableSyncState { residual: max_res })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::GridState;
    use crate::topology::{generate_topology, GridTopology, GrowthParams, PowerGrid};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_power_has_flat_fixed_point() {
        let topo = generate_topology(&GrowthParams::new(6, 2)).unwrap();
        let grid = PowerGrid::with_raw_injections(topo, vec![0.0; 6]).unwrap();
        let phases = find_fixed_point(&grid, &SwingParams::default()).unwrap();
        for p in phases {
            assert!(p.abs() < 1e-10);
        }
    }

    #[test]
    fn two_node_analytic_solution() {
        let topo = GridTopology::new(2, vec![(0, 1)]).unwrap();
        let grid = PowerGrid::new(topo, vec![1.0, -1.0]).unwrap();
        let phases = find_fixed_point(&grid, &SwingParams::default()).unwrap();
        assert_eq!(phases[0], 0.0);
        let delta = phases[0] - phases[1];
        assert_abs_diff_eq!(delta, (1.0f64 / 9.0).asin(), epsilon = 1e-10);
        assert_abs_diff_eq!(delta, 0.111341, epsilon = 1e-6);
    }

    /// Residual rechecked through the independent rhs evaluation.
    #[test]
    fn random_grid_residual_below_target() {
        let params = SwingParams::default();
        for seed in [0u64, 1, 2] {
            let topo = generate_topology(&GrowthParams::new(20, seed)).unwrap();
            let grid = crate::topology::assign_injections(topo, seed).unwrap();
            let phases = find_fixed_point(&grid, &params).unwrap();
            let state = GridState::at_fixed_point(phases);
            let (_, accel) = crate::dynamics::rhs(&state, &grid, &params).unwrap();
            let max_acc = accel.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            // φ̈ = residual / M with M = 1
            assert!(max_acc < 1e-10, "seed {seed}: residual {max_acc}");
        }
    }

    #[test]
    fn unbalanced_power_is_rejected() {
        let topo = GridTopology::new(2, vec![(0, 1)]).unwrap();
        let grid = PowerGrid::with_raw_injections(topo, vec![1.0, -0.5]).unwrap();
        assert!(find_fixed_point(&grid, &SwingParams::default()).is_err());
    }

    /// Coupling too weak to carry the flow: |P/K| > degree bound has no
    /// synchronous solution.
    #[test]
    fn infeasible_coupling_reports_no_sync_state() {
        let topo = GridTopology::new(2, vec![(0, 1)]).unwrap();
        let grid = PowerGrid::new(topo, vec![1.0, -1.0]).unwrap();
        let weak = SwingParams { coupling: 0.5, ..Default::default() };
        assert!(matches!(
            find_fixed_point(&grid, &weak),
            Err(Error::NoStableSyncState { .. })
        ));
    }
}
