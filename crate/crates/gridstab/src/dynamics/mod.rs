//! Swing-equation dynamics (second-order Kuramoto model).
//!
//! Every node carries a rotator with phase `φᵢ` and frequency deviation `φ̇ᵢ`
//! governed by
//!
//! ```text
//! M φ̈ᵢ = Pᵢ − α φ̇ᵢ − K Σⱼ Aᵢⱼ sin(φᵢ − φⱼ)
//! ```
//!
//! with homogeneous inertia `M`, droop `α`, and line coupling `K`.
//! Synchronous operation is the fixed point `(φ*, 0)` solving the power-flow
//! equation `Pᵢ = K Σⱼ Aᵢⱼ sin(φ*ᵢ − φ*ⱼ)`.
//!
//! The integrator ([`integrate`]) is an adaptive Dormand–Prince 5(4) scheme
//! that also tracks the running maximum frequency deviation (mfd) of the
//! trajectory, sampled at the initial state, every accepted step, and
//! dense-output points inside each step — a documented approximation of the
//! continuous maximum.

mod fixed_point;
mod integrator;

pub use fixed_point::find_fixed_point;
pub use integrator::{integrate, integrate_recorded, IntegratorConfig, Trajectory};

use crate::error::{Error, Result};
use crate::topology::PowerGrid;
use serde::{Deserialize, Serialize};

/// Frequency threshold of the return-to-sync classification: a final state
/// counts as stable iff every `|φ̇ᵢ|` lies strictly below 0.1 rad/s. The
/// margin absorbs numerical noise and finite-horizon convergence tails.
pub const SYNC_FREQ_THRESHOLD: f64 = 0.1;

/// Homogeneous per-unit machine parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingParams {
    /// Inertia constant M.
    pub inertia: f64,
    /// Droop parameter α.
    pub droop: f64,
    /// Line coupling K.
    pub coupling: f64,
}

impl Default for SwingParams {
    /// Defaults M = 1, α = 0.1, K = 9 (per-unit). These are configuration,
    /// not physics; dataset provenance pins them per record.
    fn default() -> Self {
        Self { inertia: 1.0, droop: 0.1, coupling: 9.0 }
    }
}

impl SwingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("inertia", self.inertia),
            ("droop", self.droop),
            ("coupling", self.coupling),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} = {v} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

/// Dynamical state: phases and frequency deviations, one entry per node.
/// Phases stay unwrapped during integration; only frequencies enter the
/// return-to-sync classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub phases: Vec<f64>,
    pub freqs: Vec<f64>,
}

impl GridState {
    pub fn new(phases: Vec<f64>, freqs: Vec<f64>) -> Result<Self> {
        if phases.len() != freqs.len() {
            return Err(Error::DimensionMismatch { expected: phases.len(), got: freqs.len() });
        }
        Ok(Self { phases, freqs })
    }

    /// Synchronous state `(φ*, 0)`.
    pub fn at_fixed_point(phases: Vec<f64>) -> Self {
        let freqs = vec![0.0; phases.len()];
        Self { phases, freqs }
    }

    pub fn n(&self) -> usize {
        self.phases.len()
    }

    pub fn max_abs_freq(&self) -> f64 {
        self.freqs.iter().fold(0.0, |m, &f| m.max(f.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.phases.iter().chain(&self.freqs).all(|x| x.is_finite())
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.n());
        y.extend_from_slice(&self.phases);
        y.extend_from_slice(&self.freqs);
        y
    }

    fn from_flat(y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self { phases: y[..n].to_vec(), freqs: y[n..].to_vec() }
    }
}

/// Outcome of one perturbation trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Final state passed the return-to-sync classification.
    pub converged: bool,
    /// Running maximum of `maxⱼ |φ̇ⱼ|` along the trajectory. Divergent
    /// trials (nonfinite state or step-budget exhaustion) carry the
    /// sentinel `f64::INFINITY` so they can be excluded from MFD statistics.
    pub mfd: f64,
    pub final_state: GridState,
}

impl TrialResult {
    pub fn diverged(&self) -> bool {
        self.mfd.is_infinite()
    }
}

/// Precompiled right-hand side of the swing equation for one grid: edge list,
/// injections, and parameters flattened for tight evaluation. Immutable and
/// freely shared across threads.
#[derive(Debug, Clone)]
pub struct SwingSystem {
    n: usize,
    edges: Vec<(u32, u32)>,
    power: Vec<f64>,
    alpha: f64,
    coupling: f64,
    inertia_inv: f64,
}

impl SwingSystem {
    pub fn new(grid: &PowerGrid, params: &SwingParams) -> Self {
        Self {
            n: grid.n(),
            edges: grid
                .topology()
                .edges()
                .iter()
                .map(|&(i, j)| (i as u32, j as u32))
                .collect(),
            power: grid.injections().to_vec(),
            alpha: params.droop,
            coupling: params.coupling,
            inertia_inv: 1.0 / params.inertia,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn coupling(&self) -> f64 {
        self.coupling
    }

    pub(crate) fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Writes `d/dt [φ; φ̇]` into `dydt` for the flat state `y = [φ; φ̇]`.
    #[inline]
    pub fn eval(&self, y: &[f64], dydt: &mut [f64]) {
        let n = self.n;
        let (phases, freqs) = y.split_at(n);
        let (out_dphi, out_acc) = dydt.split_at_mut(n);
        out_dphi.copy_from_slice(freqs);
        for i in 0..n {
            out_acc[i] = self.power[i] - self.alpha * freqs[i];
        }
        for &(a, b) in &self.edges {
            let (a, b) = (a as usize, b as usize);
            let flow = self.coupling * (phases[a] - phases[b]).sin();
            out_acc[a] -= flow;
            out_acc[b] += flow;
        }
        if self.inertia_inv != 1.0 {
            for acc in out_acc.iter_mut() {
                *acc *= self.inertia_inv;
            }
        }
    }

    /// Power-flow residual `Pᵢ − K Σⱼ Aᵢⱼ sin(φᵢ − φⱼ)` at zero frequency.
    pub fn flow_residual(&self, phases: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.power);
        for &(a, b) in &self.edges {
            let (a, b) = (a as usize, b as usize);
            let flow = self.coupling * (phases[a] - phases[b]).sin();
            out[a] -= flow;
            out[b] += flow;
        }
    }
}

/// Time derivatives `(dφ/dt, dφ̇/dt)` of the swing equation at `state`.
pub fn rhs(
    state: &GridState,
    grid: &PowerGrid,
    params: &SwingParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    if state.n() != grid.n() {
        return Err(Error::DimensionMismatch { expected: grid.n(), got: state.n() });
    }
    let sys = SwingSystem::new(grid, params);
    let y = state.to_flat();
    let mut dydt = vec![0.0; 2 * grid.n()];
    sys.eval(&y, &mut dydt);
    let accel = dydt.split_off(grid.n());
    Ok((dydt, accel))
}

/// Return-to-sync classification of a final state: stable iff
/// `maxᵢ |φ̇ᵢ| < 0.1` (strict).
pub fn classify_trial(final_state: &GridState) -> bool {
    final_state.max_abs_freq() < SYNC_FREQ_THRESHOLD
}
