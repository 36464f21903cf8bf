//! SGD training with best-validation checkpointing, plus the closed-form
//! linear-regression path.

use super::model::{
    backward, forward, head_derivatives, normalized_adjacency, sigmoid, softplus, Activation,
    Forward, Gradients, Layer, LayerKind, OutputHead, PredictorModel,
};
use super::{LossKind, ModelKind, TargetKind, TrainConfig};
use crate::dataset::{DatasetRecord, SplitAssignment};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, tag};
use crate::topology::{node_features, FeatureScaler, NodeFeatures, FEATURE_COUNT};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

/// A trained predictor with everything evaluation needs: the parameters,
/// the training-split feature scaler (feature-based models), and the target
/// it was fit for.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: PredictorModel,
    pub scaler: Option<FeatureScaler>,
    pub target: TargetKind,
    /// Positive-class weight the loss was trained with (BCE only).
    pub class_weight: f64,
}

/// Per-epoch training and validation losses.
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

/// Positive-class weight `#negatives / #positives` over binary targets.
/// Degenerate splits (no positives) fall back to weight 1.
pub fn class_weight(targets: impl Iterator<Item = f64>) -> f64 {
    let mut pos = 0u64;
    let mut neg = 0u64;
    for t in targets {
        if t > 0.5 {
            pos += 1;
        } else {
            neg += 1;
        }
    }
    if pos == 0 {
        log::warn!("no positive examples in training split; class weight set to 1");
        1.0
    } else {
        neg as f64 / pos as f64
    }
}

pub(crate) fn target_vector(record: &DatasetRecord, target: TargetKind) -> Vec<f64> {
    match target {
        TargetKind::Snbs => record.snbs(),
        TargetKind::Mfd => record.mfd(),
        TargetKind::Tm => record.tm(),
    }
}

/// Inputs of one grid, ready for the forward pass.
pub(crate) struct GridInputs {
    pub grid_id: u64,
    pub x: DMatrix<f64>,
    pub abar: Option<DMatrix<f64>>,
    pub y: DVector<f64>,
}

/// GCN input: nodal injection plus a constant-one channel (the constant
/// channel lets the first layer pick up degree information through Ā).
pub(crate) fn gcn_input(record: &DatasetRecord) -> DMatrix<f64> {
    let n = record.grid.n();
    DMatrix::from_fn(n, 2, |i, c| if c == 0 { record.grid.injections()[i] } else { 1.0 })
}

fn features_matrix(features: &NodeFeatures) -> DMatrix<f64> {
    DMatrix::from_fn(features.n(), FEATURE_COUNT, |i, j| features.rows[i][j])
}

/// Prepares per-grid inputs. Feature-based models receive standardized
/// hand-crafted features; the GCN receives `[P, 1]` and the normalized
/// adjacency.
pub(crate) fn prepare_inputs(
    records: &[&DatasetRecord],
    kind: ModelKind,
    target: TargetKind,
    scaler: Option<&FeatureScaler>,
) -> Result<Vec<GridInputs>> {
    records
        .iter()
        .map(|record| {
            let y = DVector::from_vec(target_vector(record, target));
            let (x, abar) = if kind.uses_features() {
                let features = node_features(&record.grid)?;
                let scaled = match scaler {
                    Some(s) => s.apply(&features)?,
                    None => features,
                };
                (features_matrix(&scaled), None)
            } else {
                (gcn_input(record), Some(normalized_adjacency(record.grid.topology())))
            };
            Ok(GridInputs { grid_id: record.grid_id, x, abar, y })
        })
        .collect()
}

/// Fits the training-split scaler for feature-based models.
pub(crate) fn fit_train_scaler(train: &[&DatasetRecord]) -> Result<FeatureScaler> {
    let features = train
        .iter()
        .map(|r| node_features(&r.grid))
        .collect::<Result<Vec<_>>>()?;
    let same_n = features.windows(2).all(|w| w[0].n() == w[1].n());
    if same_n && features.len() > 1 {
        FeatureScaler::fit_per_node(&features)
    } else {
        FeatureScaler::fit_pooled(&features)
    }
}

/// Loss value and gradient w.r.t. the raw model output, both summed (not yet
/// averaged) over the nodes of one grid.
fn loss_terms(
    fwd: &Forward,
    y: &DVector<f64>,
    model: &PredictorModel,
    loss: LossKind,
    pos_weight: f64,
) -> (f64, DVector<f64>) {
    match loss {
        LossKind::MeanSquaredError => {
            let residual = &fwd.predictions - y;
            let value = residual.iter().map(|r| r * r).sum();
            let chain = head_derivatives(model, &fwd.raw);
            let grad = DVector::from_fn(y.len(), |i, _| 2.0 * residual[i] * chain[i]);
            (value, grad)
        }
        LossKind::WeightedBce => {
            // Loss on the raw logit z: w·y·softplus(−z) + (1−y)·softplus(z).
            let mut value = 0.0;
            let mut grad = DVector::zeros(y.len());
            for i in 0..y.len() {
                let z = fwd.raw[i];
                let yi = y[i];
                value += pos_weight * yi * softplus(-z) + (1.0 - yi) * softplus(z);
                let s = sigmoid(z);
                grad[i] = s * (1.0 - yi + pos_weight * yi) - pos_weight * yi;
            }
            (value, grad)
        }
    }
}

/// Mean loss over a set of grids (no gradients); used for validation.
fn mean_loss(
    model: &PredictorModel,
    inputs: &[GridInputs],
    loss: LossKind,
    pos_weight: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut nodes = 0usize;
    for gi in inputs {
        let fwd = forward(model, &gi.x, gi.abar.as_ref())?;
        total += loss_terms(&fwd, &gi.y, model, loss, pos_weight).0;
        nodes += gi.y.len();
    }
    Ok(total / nodes.max(1) as f64)
}

fn glorot_layer(
    kind: LayerKind,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    seed: u64,
    layer_idx: u64,
) -> Layer {
    let mut rng = derive_rng(seed, tag::MODEL_INIT, layer_idx, 0);
    let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let weights = DMatrix::from_fn(in_dim, out_dim, |_, _| rng.gen_range(-bound..bound));
    Layer { kind, weights, bias: DVector::zeros(out_dim), activation }
}

/// Assembles a freshly initialized model.
///
/// `hidden` lists hidden-layer widths (must be empty for `linreg`/`logreg`).
/// The output head defaults per model and target: linear regression stays
/// raw, classifiers emit logits, and nonlinear regressors squash SNBS into
/// (0, 1) via sigmoid and MFD into [0, ∞) via softplus.
pub fn build_model(
    kind: ModelKind,
    hidden: &[usize],
    target: TargetKind,
    seed: u64,
) -> Result<PredictorModel> {
    let (input_dim, layer_kind) = match kind {
        ModelKind::Gcn => (2, LayerKind::GraphConv),
        _ => (FEATURE_COUNT, LayerKind::Dense),
    };
    let head = match (kind, target) {
        (ModelKind::LinReg, _) => OutputHead::Identity,
        (ModelKind::LogReg, _) => OutputHead::Logit,
        (_, TargetKind::Snbs) => OutputHead::Sigmoid,
        (_, TargetKind::Mfd) => OutputHead::Softplus,
        (_, TargetKind::Tm) => OutputHead::Logit,
    };
    if matches!(kind, ModelKind::LinReg | ModelKind::LogReg) && !hidden.is_empty() {
        return Err(Error::Config(format!("{} takes no hidden layers", kind.name())));
    }
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(1);
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(idx, pair)| {
            let activation = if idx + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            glorot_layer(layer_kind, pair[0], pair[1], activation, seed, idx as u64)
        })
        .collect();
    let model = PredictorModel { kind, layers, head };
    model.validate()?;
    Ok(model)
}

fn select<'a>(records: &'a [DatasetRecord], ids: &[u64]) -> Vec<&'a DatasetRecord> {
    records.iter().filter(|r| ids.contains(&r.grid_id)).collect()
}

/// Trains a model with mini-batch SGD on the training split, tracking the
/// validation loss each epoch and returning the best-validation parameters.
/// Deterministic for a fixed `cfg.seed` (ordered gradient reduction,
/// counter-derived epoch shuffles).
pub fn fit(
    kind: ModelKind,
    hidden: &[usize],
    records: &[DatasetRecord],
    splits: &SplitAssignment,
    target: TargetKind,
    cfg: &TrainConfig,
) -> Result<(TrainedModel, TrainHistory)> {
    cfg.validate()?;
    let train = select(records, &splits.train);
    let val = select(records, &splits.validation);
    if train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }

    let scaler = if kind.uses_features() {
        Some(fit_train_scaler(&train)?)
    } else {
        None
    };
    let train_inputs = prepare_inputs(&train, kind, target, scaler.as_ref())?;
    let val_inputs = prepare_inputs(&val, kind, target, scaler.as_ref())?;

    let pos_weight = match (cfg.loss, cfg.class_weight) {
        (LossKind::WeightedBce, Some(w)) => w,
        (LossKind::WeightedBce, None) => {
            class_weight(train_inputs.iter().flat_map(|gi| gi.y.iter().copied()))
        }
        _ => 1.0,
    };

    let mut model = build_model(kind, hidden, target, cfg.seed)?;
    let mut history = TrainHistory::default();
    let mut best: (f64, PredictorModel, usize) = (f64::INFINITY, model.clone(), 0);
    let mut stale_epochs = 0usize;

    let mut order: Vec<usize> = (0..train_inputs.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = derive_rng(cfg.seed, tag::EPOCH_SHUFFLE, epoch as u64, 0);
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        let mut epoch_nodes = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let per_grid: Vec<(f64, Gradients, usize)> = batch
                .par_iter()
                .map(|&idx| {
                    let gi = &train_inputs[idx];
                    let fwd = forward(&model, &gi.x, gi.abar.as_ref())?;
                    let (value, dloss_draw) =
                        loss_terms(&fwd, &gi.y, &model, cfg.loss, pos_weight);
                    let grads = backward(&model, &fwd, gi.abar.as_ref(), &dloss_draw);
                    Ok((value, grads, gi.y.len()))
                })
                .collect::<Result<_>>()?;

            // Fixed-order reduction keeps training bit-reproducible.
            let mut grads = Gradients::zeros_like(&model);
            let mut batch_nodes = 0usize;
            for (value, g, nodes) in &per_grid {
                epoch_loss += value;
                grads.add(g);
                batch_nodes += nodes;
            }
            epoch_nodes += batch_nodes;
            grads.scale(1.0 / batch_nodes as f64);
            for (layer, (dw, db)) in model
                .layers
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.bias))
            {
                layer.weights -= dw * cfg.learning_rate;
                layer.bias -= db * cfg.learning_rate;
            }
        }

        let train_loss = epoch_loss / epoch_nodes.max(1) as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let val_loss = if val_inputs.is_empty() {
            train_loss
        } else {
            mean_loss(&model, &val_inputs, cfg.loss, pos_weight)?
        };
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);

        if val_loss < best.0 {
            best = (val_loss, model.clone(), epoch);
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    history.best_epoch = best.2;
    Ok((
        TrainedModel { model: best.1, scaler, target, class_weight: pos_weight },
        history,
    ))
}

/// Closed-form linear regression (normal equations with intercept) on the
/// standardized features of the training split.
pub fn fit_linreg_exact(
    records: &[DatasetRecord],
    splits: &SplitAssignment,
    target: TargetKind,
) -> Result<TrainedModel> {
    let train = select(records, &splits.train);
    if train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let scaler = fit_train_scaler(&train)?;
    let inputs = prepare_inputs(&train, ModelKind::LinReg, target, Some(&scaler))?;

    let dim = FEATURE_COUNT + 1;
    let mut xtx = DMatrix::<f64>::zeros(dim, dim);
    let mut xty = DVector::<f64>::zeros(dim);
    let mut row = vec![0.0; dim];
    for gi in &inputs {
        for i in 0..gi.y.len() {
            for f in 0..FEATURE_COUNT {
                row[f] = gi.x[(i, f)];
            }
            row[FEATURE_COUNT] = 1.0;
            for a in 0..dim {
                for b in 0..dim {
                    xtx[(a, b)] += row[a] * row[b];
                }
                xty[a] += row[a] * gi.y[i];
            }
        }
    }
    // Tiny ridge keeps the solve well-posed when a feature column is
    // degenerate (e.g. all clustering coefficients zero on sparse grids).
    for d in 0..dim {
        xtx[(d, d)] += 1e-9;
    }
    let theta = xtx
        .cholesky()
        .ok_or_else(|| Error::Config("normal equations are singular".into()))?
        .solve(&xty);

    let layer = Layer {
        kind: LayerKind::Dense,
        weights: DMatrix::from_fn(FEATURE_COUNT, 1, |i, _| theta[i]),
        bias: DVector::from_element(1, theta[FEATURE_COUNT]),
        activation: Activation::Identity,
    };
    Ok(TrainedModel {
        model: PredictorModel {
            kind: ModelKind::LinReg,
            layers: vec![layer],
            head: OutputHead::Identity,
        },
        scaler: Some(scaler),
        target,
        class_weight: 1.0,
    })
}
