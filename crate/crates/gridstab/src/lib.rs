//! Dynamic stability laboratory for power-grid topologies.
//!
//! The crate covers the full pipeline from synthetic grids to trained
//! surrogate models:
//!
//! * [`topology`] — random-growth grid generation, source/sink assignment,
//!   and hand-crafted node features (degree, clustering, current-flow
//!   betweenness, closeness, ...).
//! * [`dynamics`] — the swing equation (second-order Kuramoto model)
//!   `M φ̈ᵢ = Pᵢ − α φ̇ᵢ − K Σⱼ Aᵢⱼ sin(φᵢ − φⱼ)`, its synchronized fixed
//!   point, and an adaptive Dormand–Prince integrator that tracks the
//!   maximum frequency deviation of each trajectory.
//! * [`stability`] — Monte-Carlo estimation of single-node basin stability
//!   (SNBS), maximum frequency deviation (MFD), and troublemaker (TM)
//!   classification with exact one-sided Clopper-Pearson bounds.
//! * [`dataset`] — resumable dataset builds pairing grids with nodal
//!   targets, deterministic 70:15:15 splits, and grid import/export.
//! * [`ml`] — linear/logistic regression, MLPs, and a graph convolution
//!   network with hand-written backpropagation, plus the evaluation
//!   metrics (R², F_β, recall, precision).
//! * [`cli`] — the orchestration layer behind the `gridstab` binary.
//!
//! Every stage is deterministic for a fixed master seed, independent of
//! worker count: all randomness flows through counter-based seed
//! derivation (see [`rng`]).
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod ml;
pub mod rng;
pub mod stability;
pub mod topology;

pub use error::{Error, Result};
