//! Surrogate predictors for nodal stability measures.
//!
//! Four model families share one layer/backprop core:
//!
//! * `linreg` — per-node linear regression on the six hand-crafted features
//!   (closed-form or SGD),
//! * `logreg` — logistic regression on the same features,
//! * `mlp` — multilayer perceptron on the same features,
//! * `gcn` — graph convolution network `H = σ(ĀXΘ + b)` on the raw grid,
//!   where `Ā = D̃^{−1/2}(A + I)D̃^{−1/2}` and the input `X` carries the
//!   nodal injection plus a constant channel. GCN parameters are independent
//!   of grid size, so a model trained on small grids evaluates on larger
//!   ones unchanged.
//!
//! Gradients are hand-written reverse mode, checked against central finite
//! differences in the test suites. Training is mini-batch SGD with
//! best-validation checkpointing; everything is deterministic for a fixed
//! seed (ordered gradient reduction, counter-derived shuffles).

mod checkpoint;
mod eval;
mod model;
mod train;

pub use checkpoint::{load_model, save_model};
pub use eval::{
    evaluate, evaluate_single_grid, f_beta, mse, precision_recall, r2, threshold_regression_to_tm,
    write_eval_report, write_predictions_csv, EvalReport, PredRow,
};
pub use model::{
    backward, forward, gcn_forward, head_derivatives, normalized_adjacency, Activation, Forward,
    Gradients, Layer, LayerKind, OutputHead, PredictorModel,
};
pub use train::{build_model, class_weight, fit, fit_linreg_exact, TrainHistory, TrainedModel};

use serde::{Deserialize, Serialize};

/// Which nodal target a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Snbs,
    Mfd,
    Tm,
}

impl TargetKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "snbs" => Some(Self::Snbs),
            "mfd" => Some(Self::Mfd),
            "tm" => Some(Self::Tm),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Snbs => "snbs",
            Self::Mfd => "mfd",
            Self::Tm => "tm",
        }
    }
}

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinReg,
    LogReg,
    Mlp,
    Gcn,
}

impl ModelKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linreg" => Some(Self::LinReg),
            "logreg" => Some(Self::LogReg),
            "mlp" => Some(Self::Mlp),
            "gcn" => Some(Self::Gcn),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LinReg => "linreg",
            Self::LogReg => "logreg",
            Self::Mlp => "mlp",
            Self::Gcn => "gcn",
        }
    }

    /// Feature-based models consume the standardized hand-crafted features;
    /// the GCN consumes the grid itself.
    pub fn uses_features(self) -> bool {
        !matches!(self, Self::Gcn)
    }
}

/// Loss function selection; the positive-class weight of the BCE variant is
/// resolved from the training split when left unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    MeanSquaredError,
    WeightedBce,
}

/// SGD training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Grids per SGD step.
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossKind,
    /// Positive-class weight for [`LossKind::WeightedBce`]; `None` means
    /// #negatives / #positives of the training split.
    pub class_weight: Option<f64>,
    /// Early stopping: epochs without validation improvement.
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(target: TargetKind, seed: u64) -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 500,
            loss: match target {
                TargetKind::Tm => LossKind::WeightedBce,
                _ => LossKind::MeanSquaredError,
            },
            class_weight: None,
            patience: 50,
            seed,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(crate::Error::Config("learning rate must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(crate::Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(crate::Error::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }
}
