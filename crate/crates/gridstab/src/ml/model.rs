//! Layers, forward pass, and hand-written backpropagation.

use crate::error::{Error, Result};
use crate::topology::GridTopology;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
            Self::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative at pre-activation `x`.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - x.tanh().powi(2),
            Self::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Transformation of the last layer's output into the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// Raw output (linear regression).
    Identity,
    /// Squash into (0, 1) — probability-valued regression targets.
    Sigmoid,
    /// Softplus — nonnegative regression targets.
    Softplus,
    /// Raw logit; sigmoid is applied for prediction, the BCE loss consumes
    /// the logit directly.
    Logit,
}

impl OutputHead {
    pub fn predict(self, raw: f64) -> f64 {
        match self {
            Self::Identity => raw,
            Self::Sigmoid | Self::Logit => sigmoid(raw),
            Self::Softplus => softplus(raw),
        }
    }

    fn derivative(self, raw: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Sigmoid | Self::Logit => {
                let s = sigmoid(raw);
                s * (1.0 - s)
            }
            Self::Softplus => sigmoid(raw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    /// Dense layer applied after propagation with the re-normalized
    /// adjacency: `Z = Ā X Θ + b`.
    GraphConv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    /// `in_dim × out_dim`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.ncols()
    }
}

/// A stack of layers plus the output head. The last layer must have one
/// output channel; its activation is conventionally `Identity`, with any
/// squashing delegated to the head.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub kind: ModelKind,
    pub layers: Vec<Layer>,
    pub head: OutputHead,
}

impl PredictorModel {
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Config(format!(
                    "layer shapes do not chain: {} -> {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        for layer in &self.layers {
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::Config("bias length must match layer output".into()));
            }
        }
        Ok(())
    }
}

/// Re-normalized adjacency with self-loops:
/// `Ā = D̃^{−1/2}(A + I)D̃^{−1/2}` where `D̃` is the degree matrix of `A + I`.
pub fn normalized_adjacency(topo: &GridTopology) -> DMatrix<f64> {
    let n = topo.n();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / ((topo.degree(i) + 1) as f64).sqrt()).collect();
    let mut abar = DMatrix::zeros(n, n);
    for i in 0..n {
        abar[(i, i)] = inv_sqrt[i] * inv_sqrt[i];
    }
    for &(i, j) in topo.edges() {
        let v = inv_sqrt[i] * inv_sqrt[j];
        abar[(i, j)] = v;
        abar[(j, i)] = v;
    }
    abar
}

/// Cached forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Post-activation output of each layer; `activations[0]` is the input.
    pub activations: Vec<DMatrix<f64>>,
    /// Propagated input of each layer (`Ā·input` for graph convolutions,
    /// the input itself for dense layers).
    propagated: Vec<DMatrix<f64>>,
    /// Pre-activation of each layer.
    pre_activations: Vec<DMatrix<f64>>,
    /// First output channel of the last layer, before the head. Trained
    /// predictors always end in a one-channel layer; wider stacks (layer
    /// inspection, tests) still expose their first channel here.
    pub raw: DVector<f64>,
    /// Head-transformed nodal predictions.
    pub predictions: DVector<f64>,
}

/// Runs the model on `x` (`n × input_dim`). Graph-convolution layers need
/// `abar`; pure feature models pass `None`.
pub fn forward(
    model: &PredictorModel,
    x: &DMatrix<f64>,
    abar: Option<&DMatrix<f64>>,
) -> Result<Forward> {
    model.validate()?;
    if x.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch { expected: model.input_dim(), got: x.ncols() });
    }
    let needs_abar = model.layers.iter().any(|l| l.kind == LayerKind::GraphConv);
    if needs_abar {
        match abar {
            None => {
                return Err(Error::Config(
                    "graph-convolution model needs the normalized adjacency".into(),
                ))
            }
            Some(a) if a.nrows() != x.nrows() => {
                return Err(Error::DimensionMismatch { expected: x.nrows(), got: a.nrows() })
            }
            _ => {}
        }
    }

    let mut activations = vec![x.clone()];
    let mut propagated = Vec::with_capacity(model.layers.len());
    let mut pre_activations = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let input = activations.last().unwrap();
        let prop = match layer.kind {
            LayerKind::Dense => input.clone(),
            LayerKind::GraphConv => abar.unwrap() * input,
        };
        let mut z = &prop * &layer.weights;
        for mut row in z.row_iter_mut() {
            row += layer.bias.transpose();
        }
        let h = z.map(|v| layer.activation.apply(v));
        propagated.push(prop);
        pre_activations.push(z);
        activations.push(h);
    }
    let raw = DVector::from_column_slice(activations.last().unwrap().column(0).as_slice());
    let predictions = raw.map(|v| model.head.predict(v));
    Ok(Forward { activations, propagated, pre_activations, raw, predictions })
}

/// Convenience wrapper for graph-convolution models: computes `Ā` from the
/// grid and returns per-layer outputs plus the nodal predictions.
pub fn gcn_forward(
    topo: &GridTopology,
    x: &DMatrix<f64>,
    model: &PredictorModel,
) -> Result<(Vec<DMatrix<f64>>, Vec<f64>)> {
    let abar = normalized_adjacency(topo);
    let fwd = forward(model, x, Some(&abar))?;
    Ok((fwd.activations[1..].to_vec(), fwd.predictions.as_slice().to_vec()))
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub bias: Vec<DVector<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &PredictorModel) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.in_dim(), l.out_dim()))
                .collect(),
            bias: model.layers.iter().map(|l| DVector::zeros(l.out_dim())).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.bias {
            *b *= factor;
        }
    }
}

/// Backpropagates `dloss_draw` (gradient of the loss w.r.t. the raw
/// one-channel output, `n × 1`) through the cached forward pass. The chain
/// through the output head, when the loss is defined on head output rather
/// than on the raw logit, must already be included by the caller (see
/// [`super::train`]).
pub fn backward(
    model: &PredictorModel,
    fwd: &Forward,
    abar: Option<&DMatrix<f64>>,
    dloss_draw: &DVector<f64>,
) -> Gradients {
    let mut grads = Gradients::zeros_like(model);
    // n×1 gradient flowing into the last layer's post-activation.
    let mut d_post: DMatrix<f64> =
        DMatrix::from_column_slice(dloss_draw.len(), 1, dloss_draw.as_slice());

    for (idx, layer) in model.layers.iter().enumerate().rev() {
        let z = &fwd.pre_activations[idx];
        let mut d_pre = d_post.clone();
        for (dp, zv) in d_pre.iter_mut().zip(z.iter()) {
            *dp *= layer.activation.derivative(*zv);
        }
        grads.weights[idx] = fwd.propagated[idx].transpose() * &d_pre;
        grads.bias[idx] = d_pre.row_sum().transpose();
        if idx > 0 {
            let d_prop = &d_pre * layer.weights.transpose();
            d_post = match layer.kind {
                LayerKind::Dense => d_prop,
                // Ā is symmetric, so propagation back through `Ā·input`
                // is another multiplication by Ā.
                LayerKind::GraphConv => abar.expect("validated in forward") * d_prop,
            };
        }
    }
    grads
}

/// Chain factor of the output head at the raw outputs: used by MSE-style
/// losses defined on the prediction.
pub fn head_derivatives(model: &PredictorModel, raw: &DVector<f64>) -> DVector<f64> {
    raw.map(|v| model.head.derivative(v))
}
