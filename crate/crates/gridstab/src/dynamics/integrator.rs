//! Adaptive Dormand–Prince 5(4) integration of the swing equation.
//!
//! Classic explicit embedded Runge-Kutta pair: 7 stages, FSAL, 5th-order
//! propagation with a 4th-order error estimate, standard step-size controller
//! with safety factor 0.9. The per-component error scale is
//! `abs_tol + rel_tol·max(|y|, |y_new|)`.
//!
//! Alongside the solution the integrator maintains the trajectory's maximum
//! frequency deviation: the running maximum of `maxⱼ |φ̇ⱼ|` over the initial
//! state and, for every accepted step, the new state plus interior samples
//! of the 4th-order dense-output interpolant. Sub-sample maxima can still be
//! missed in principle; the step sizes enforced by the error control keep
//! that miss orders of magnitude below the thresholds that matter here.

use super::{classify_trial, GridState, SwingParams, SwingSystem, TrialResult};
use crate::error::{Error, Result};
use crate::topology::PowerGrid;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Integration horizon and error control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Simulated time span; trials run from t = 0 to t = t_end.
    pub t_end: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Accepted-step budget; exhaustion flags the trial as divergent.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { t_end: 500.0, abs_tol: 1e-7, rel_tol: 1e-7, max_steps: 10_000_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Config(format!("t_end = {} must be > 0", self.t_end)));
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Config("tolerances must be > 0".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be > 0".into()));
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau. Stage times are not needed: the swing
// equation is autonomous.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
// 5th-order weights; row 7 of A coincides with them (FSAL).
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// B minus the embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights of the 4th-order continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];
/// Interior dense-output samples per accepted step used for the running
/// frequency maximum.
const MFD_SAMPLES: usize = 7;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

pub(crate) struct Dopri5<'a> {
    sys: &'a SwingSystem,
    cfg: IntegratorConfig,
    dim: usize,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
}

pub(crate) enum Outcome {
    Completed,
    /// State left the finite range or the step budget ran out.
    Diverged,
}

impl<'a> Dopri5<'a> {
    pub fn new(sys: &'a SwingSystem, cfg: IntegratorConfig) -> Self {
        let dim = 2 * sys.n();
        Self {
            sys,
            cfg,
            dim,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            y_stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
        }
    }

    /// Max |φ̇| over the frequency half of a flat state.
    #[inline]
    fn freq_max(&self, y: &[f64]) -> f64 {
        y[self.sys.n()..].iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Max |φ̇| over interior dense-output samples of the step just taken
    /// (tableau state: `y` = step start, `y_new` and all `k` filled).
    /// Stage states are no use here: they sit off the trajectory by the
    /// local-error scale and would bias the running maximum upward.
    fn dense_freq_max(&self, y: &[f64], h: f64) -> f64 {
        let n = self.sys.n();
        let mut max = 0.0f64;
        for i in n..self.dim {
            let ydiff = self.y_new[i] - y[i];
            let bspl = h * self.k[0][i] - ydiff;
            let c3 = ydiff - h * self.k[6][i] - bspl;
            let mut c4 = 0.0;
            for j in 0..7 {
                if D[j] != 0.0 {
                    c4 += D[j] * self.k[j][i];
                }
            }
            c4 *= h;
            for step in 1..=MFD_SAMPLES {
                let theta = step as f64 / (MFD_SAMPLES + 1) as f64;
                let om = 1.0 - theta;
                let v = y[i] + theta * (ydiff + om * (bspl + theta * (c3 + om * c4)));
                max = max.max(v.abs());
            }
        }
        max
    }

    fn initial_step(&mut self, y: &[f64]) -> f64 {
        let sc = |yi: f64| self.cfg.abs_tol + self.cfg.rel_tol * yi.abs();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..self.dim {
            let s = sc(y[i]);
            d0 += (y[i] / s).powi(2);
            d1 += (self.k[0][i] / s).powi(2);
        }
        d0 = (d0 / self.dim as f64).sqrt();
        d1 = (d1 / self.dim as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };

        for i in 0..self.dim {
            self.y_stage[i] = y[i] + h0 * self.k[0][i];
        }
        self.sys.eval(&self.y_stage, &mut self.y_new);
        let mut d2 = 0.0;
        for i in 0..self.dim {
            let s = sc(y[i]);
            d2 += ((self.y_new[i] - self.k[0][i]) / s).powi(2);
        }
        d2 = (d2 / self.dim as f64).sqrt() / h0;

        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.cfg.t_end)
    }

    /// Runs the trajectory, calling `on_accept(t, y)` after every accepted
    /// step. Returns the final flat state and running frequency maximum.
    pub fn run(
        &mut self,
        initial: &[f64],
        mut on_accept: impl FnMut(f64, &[f64]),
    ) -> (Vec<f64>, f64, Outcome) {
        let mut y = initial.to_vec();
        let mut t = 0.0;
        let mut mfd = self.freq_max(&y);
        self.sys.eval(&y, &mut self.k[0]);
        let mut h = self.initial_step(&y);
        let mut steps = 0usize;
        let mut rejected = false;

        while t < self.cfg.t_end {
            if steps >= self.cfg.max_steps || h < 1e-14 * t.max(1.0) {
                return (y, f64::INFINITY, Outcome::Diverged);
            }
            h = h.min(self.cfg.t_end - t);

            // Stages 2..7; stage 7 lands on y_new (FSAL).
            for (stage, row) in [
                &A2[..], &A3[..], &A4[..], &A5[..], &A6[..], &B[..],
            ]
            .iter()
            .enumerate()
            {
                let dst = stage + 1;
                for i in 0..self.dim {
                    let mut acc = 0.0;
                    for (j, &a) in row.iter().enumerate() {
                        if a != 0.0 {
                            acc += a * self.k[j][i];
                        }
                    }
                    self.y_stage[i] = y[i] + h * acc;
                }
                if dst == 6 {
                    self.y_new.copy_from_slice(&self.y_stage);
                }
                let (_, tail) = self.k.split_at_mut(dst);
                self.sys.eval(&self.y_stage, &mut tail[0]);
            }

            // Embedded error estimate.
            let mut err = 0.0;
            for i in 0..self.dim {
                let mut e = 0.0;
                for j in 0..7 {
                    if E[j] != 0.0 {
                        e += E[j] * self.k[j][i];
                    }
                }
                e *= h;
                let scale =
                    self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(self.y_new[i].abs());
                err += (e / scale).powi(2);
            }
            err = (err / self.dim as f64).sqrt();

            if err.is_finite() && err <= 1.0 {
                mfd = mfd.max(self.dense_freq_max(&y, h)).max(self.freq_max(&self.y_new));
                t += h;
                steps += 1;
                std::mem::swap(&mut y, &mut self.y_new);
                self.k.swap(0, 6);
                if !y.iter().all(|v| v.is_finite()) {
                    return (y, f64::INFINITY, Outcome::Diverged);
                }
                on_accept(t, &y);
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // No growth directly after a rejection.
                h *= if rejected { factor.min(1.0) } else { factor };
                rejected = false;
            } else {
                let factor = if err.is_finite() {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    MIN_FACTOR
                };
                h *= factor;
                rejected = true;
            }
        }
        (y, mfd, Outcome::Completed)
    }
}

fn run_trial(
    grid: &PowerGrid,
    params: &SwingParams,
    initial: &GridState,
    cfg: &IntegratorConfig,
    on_accept: impl FnMut(f64, &[f64]),
) -> Result<TrialResult> {
    params.validate()?;
    cfg.validate()?;
    if initial.n() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), got: initial.n() });
    }
    if !initial.is_finite() {
        return Err(Error::Config("initial state contains nonfinite entries".into()));
    }
    let sys = SwingSystem::new(grid, params);
    let mut solver = Dopri5::new(&sys, *cfg);
    let (y, mfd, outcome) = solver.run(&initial.to_flat(), on_accept);
    let final_state = GridState::from_flat(&y);
    let converged = match outcome {
        Outcome::Completed => classify_trial(&final_state),
        Outcome::Diverged => false,
    };
    Ok(TrialResult { converged, mfd, final_state })
}

/// Integrates one trial from `initial` to `cfg.t_end`.
pub fn integrate(
    grid: &PowerGrid,
    params: &SwingParams,
    initial: &GridState,
    cfg: &IntegratorConfig,
) -> Result<TrialResult> {
    run_trial(grid, params, initial, cfg, |_, _| {})
}

/// Accepted-step trajectory of one trial, for debugging and plotting.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Flat states `[φ₀..φₙ₋₁, φ̇₀..φ̇ₙ₋₁]` per accepted step.
    pub states: Vec<Vec<f64>>,
    pub n: usize,
}

impl Trajectory {
    /// CSV dump with columns `t, phi_0..phi_{n-1}, dphi_0..dphi_{n-1}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "t")?;
        for i in 0..self.n {
            write!(out, ",phi_{i}")?;
        }
        for i in 0..self.n {
            write!(out, ",dphi_{i}")?;
        }
        writeln!(out)?;
        for (t, state) in self.times.iter().zip(&self.states) {
            write!(out, "{t}")?;
            for v in state {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Like [`integrate`], additionally recording the accepted-step trajectory
/// (including the initial state).
pub fn integrate_recorded(
    grid: &PowerGrid,
    params: &SwingParams,
    initial: &GridState,
    cfg: &IntegratorConfig,
) -> Result<(TrialResult, Trajectory)> {
    let mut traj = Trajectory { times: vec![0.0], states: vec![initial.to_flat()], n: grid.n() };
    let result = run_trial(grid, params, initial, cfg, |t, y| {
        traj.times.push(t);
        traj.states.push(y.to_vec());
    })?;
    Ok((result, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::find_fixed_point;
    use crate::topology::{GridTopology, PowerGrid};

    fn single_node() -> (PowerGrid, SwingParams) {
        let topo = GridTopology::new(1, vec![]).unwrap();
        let grid = PowerGrid::with_raw_injections(topo, vec![1.0]).unwrap();
        (grid, SwingParams::default())
    }

    /// Uncoupled node: M φ̈ = P − α φ̇ has the closed form
    /// φ̇(t) = (P/α)(1 − e^{−αt/M}).
    #[test]
    fn single_node_matches_closed_form() {
        let (grid, params) = single_node();
        for t_end in [1.0, 10.0, 50.0] {
            let cfg = IntegratorConfig { t_end, ..Default::default() };
            let initial = GridState::new(vec![0.0], vec![0.0]).unwrap();
            let result = integrate(&grid, &params, &initial, &cfg).unwrap();
            let expected = (1.0 / params.droop) * (1.0 - (-params.droop * t_end).exp());
            let got = result.final_state.freqs[0];
            assert!(
                (got - expected).abs() < 1e-6,
                "t = {t_end}: got {got}, expected {expected}"
            );
        }
    }

    /// An unperturbed start must stay at the fixed point. The reported mfd
    /// sits at the integration noise floor, which scales like ~100× the
    /// tolerance for this weakly damped system (stage states sampled for the
    /// running maximum carry local-error-sized excursions), so the sub-1e-8
    /// bound is checked at a tolerance of 1e-11.
    #[test]
    fn fixed_point_start_stays_put() {
        let topo = GridTopology::new(2, vec![(0, 1)]).unwrap();
        let grid = PowerGrid::new(topo, vec![1.0, -1.0]).unwrap();
        let params = SwingParams::default();
        let phases = find_fixed_point(&grid, &params).unwrap();
        let initial = GridState::at_fixed_point(phases);
        let cfg = IntegratorConfig { abs_tol: 1e-11, rel_tol: 1e-11, ..Default::default() };
        let result = integrate(&grid, &params, &initial, &cfg).unwrap();
        assert!(result.converged);
        assert!(result.mfd < 1e-8, "mfd = {}", result.mfd);

        // At default tolerances the trajectory still converges and the noise
        // floor stays far below the classification threshold.
        let loose = integrate(&grid, &params, &initial, &IntegratorConfig::default()).unwrap();
        assert!(loose.converged);
        assert!(loose.mfd < 1e-4, "mfd = {}", loose.mfd);
    }

    #[test]
    fn mfd_dominates_initial_kick() {
        let topo = GridTopology::new(2, vec![(0, 1)]).unwrap();
        let grid = PowerGrid::new(topo, vec![1.0, -1.0]).unwrap();
        let params = SwingParams::default();
        let phases = find_fixed_point(&grid, &params).unwrap();
        for kick in [0.5, 3.0, -7.5, 12.0] {
            let mut initial = GridState::at_fixed_point(phases.clone());
            initial.freqs[0] = kick;
            let result =
                integrate(&grid, &params, &initial, &IntegratorConfig::default()).unwrap();
            assert!(result.mfd >= f64::abs(kick), "mfd {} < |kick| {kick}", result.mfd);
        }
    }

    #[test]
    fn recorded_trajectory_starts_at_initial_state() {
        let (grid, params) = single_node();
        let cfg = IntegratorConfig { t_end: 1.0, ..Default::default() };
        let initial = GridState::new(vec![0.25], vec![0.0]).unwrap();
        let (_, traj) = integrate_recorded(&grid, &params, &initial, &cfg).unwrap();
        assert_eq!(traj.times[0], 0.0);
        assert_eq!(traj.states[0][0], 0.25);
        assert!(traj.times.len() > 2);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
    }

    #[test]
    fn step_budget_exhaustion_is_divergence_sentinel() {
        let (grid, params) = single_node();
        let cfg = IntegratorConfig { max_steps: 3, ..Default::default() };
        let initial = GridState::new(vec![0.0], vec![0.0]).unwrap();
        let result = integrate(&grid, &params, &initial, &cfg).unwrap();
        assert!(!result.converged);
        assert!(result.diverged());
        assert!(result.mfd.is_infinite());
    }

    #[test]
    fn invalid_config_rejected() {
        let (grid, params) = single_node();
        let initial = GridState::new(vec![0.0], vec![0.0]).unwrap();
        let cfg = IntegratorConfig { t_end: -1.0, ..Default::default() };
        assert!(integrate(&grid, &params, &initial, &cfg).is_err());
    }
}
