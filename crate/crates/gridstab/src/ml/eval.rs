//! Evaluation metrics and report generation.

use super::model::forward;
use super::train::{prepare_inputs, fit_train_scaler, target_vector, TrainedModel};
use super::TargetKind;
use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::topology::FeatureScaler;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Mean squared error between predictions and targets.
pub fn mse(predictions: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(predictions.len(), targets.len());
    let n = predictions.len().max(1) as f64;
    predictions
        .iter()
        .zip(targets)
        .map(|(f, y)| (f - y).powi(2))
        .sum::<f64>()
        / n
}

/// Coefficient of determination relative to the evaluation-set mean:
/// `R² = 1 − mse(f, y) / mse(ȳ, y)`. The mean predictor scores exactly 0,
/// perfect prediction exactly 1. Constant targets degenerate: 1 when matched
/// exactly, −∞ otherwise.
pub fn r2(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let mse_model = mse(predictions, targets);
    let mse_mean = targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / targets.len() as f64;
    if mse_mean == 0.0 {
        return Ok(if mse_model == 0.0 { 1.0 } else { f64::NEG_INFINITY });
    }
    Ok(1.0 - mse_model / mse_mean)
}

/// `(precision, recall)` of a binary prediction. Empty denominators yield 0.
pub fn precision_recall(predicted: &[bool], truth: &[bool]) -> (f64, f64) {
    assert_eq!(predicted.len(), truth.len());
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    (precision, recall)
}

/// `F_β = (1 + β²) · P·R / (β²·P + R)`; β = 2 weighs recall higher, the
/// right bias when missing a vulnerable node costs more than a false alarm.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Thresholds a predicted-MFD vector into troublemaker flags:
/// flagged iff `prediction ≥ beta` (boundary values flag, conservatively).
pub fn threshold_regression_to_tm(predicted_mfd: &[f64], beta: f64) -> Vec<bool> {
    predicted_mfd.iter().map(|&m| m >= beta).collect()
}

/// One prediction row of the per-node dump.
#[derive(Debug, Clone, Serialize)]
pub struct PredRow {
    pub grid_id: u64,
    pub node: usize,
    pub target: f64,
    pub prediction: f64,
}

/// Metrics of one evaluation run. Regression fills `r2` (MFD additionally
/// fills the thresholded classification block); classification fills
/// `f2`/`recall`/`precision`.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub target: String,
    pub n_grids: usize,
    pub n_nodes: usize,
    pub r2: Option<f64>,
    pub f2: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    #[serde(skip)]
    pub predictions: Vec<PredRow>,
}

/// Evaluates a trained model on dataset records (`ids = None` means all).
///
/// Feature-based models reuse the stored training-split scaler when the
/// evaluation grids have the node count it was fit on; otherwise (cross-size
/// evaluation) the evaluation collection is standardized on its own.
/// `beta` drives the regression→TM thresholding, `decision_threshold` the
/// classifier's probability cut.
pub fn evaluate(
    trained: &TrainedModel,
    records: &[DatasetRecord],
    ids: Option<&[u64]>,
    beta: f64,
    decision_threshold: f64,
) -> Result<EvalReport> {
    let selected: Vec<&DatasetRecord> = match ids {
        Some(ids) => records.iter().filter(|r| ids.contains(&r.grid_id)).collect(),
        None => records.iter().collect(),
    };
    if selected.is_empty() {
        return Err(Error::EmptyEvalSet);
    }

    let scaler_storage;
    let scaler: Option<&FeatureScaler> = if trained.model.kind.uses_features() {
        let stored_fits = match &trained.scaler {
            Some(FeatureScaler::PerNode { mean, .. }) => {
                selected.iter().all(|r| r.grid.n() == mean.len())
            }
            Some(FeatureScaler::Pooled { .. }) => true,
            None => false,
        };
        if stored_fits {
            trained.scaler.as_ref()
        } else {
            scaler_storage = fit_train_scaler(&selected)?;
            Some(&scaler_storage)
        }
    } else {
        None
    };

    let inputs = prepare_inputs(&selected, trained.model.kind, trained.target, scaler)?;
    let mut predictions = Vec::new();
    for gi in &inputs {
        let fwd = forward(&trained.model, &gi.x, gi.abar.as_ref())?;
        if !fwd.predictions.iter().all(|p| p.is_finite()) {
            return Err(Error::Config(format!(
                "nonfinite prediction on grid {}",
                gi.grid_id
            )));
        }
        for node in 0..gi.y.len() {
            predictions.push(PredRow {
                grid_id: gi.grid_id,
                node,
                target: gi.y[node],
                prediction: fwd.predictions[node],
            });
        }
    }

    let pred: Vec<f64> = predictions.iter().map(|p| p.prediction).collect();
    let truth: Vec<f64> = predictions.iter().map(|p| p.target).collect();
    let mut report = EvalReport {
        model: trained.model.kind.name().to_string(),
        target: trained.target.name().to_string(),
        n_grids: selected.len(),
        n_nodes: predictions.len(),
        r2: None,
        f2: None,
        recall: None,
        precision: None,
        predictions,
    };

    match trained.target {
        TargetKind::Snbs => {
            report.r2 = Some(r2(&pred, &truth)?);
        }
        TargetKind::Mfd => {
            report.r2 = Some(r2(&pred, &truth)?);
            // Regression-to-classification path: threshold predicted MFD at
            // β and compare against the stored troublemaker flags.
            let tm_truth: Vec<bool> = selected
                .iter()
                .flat_map(|r| target_vector(r, TargetKind::Tm))
                .map(|t| t > 0.5)
                .collect();
            let tm_pred = threshold_regression_to_tm(&pred, beta);
            let (precision, recall) = precision_recall(&tm_pred, &tm_truth);
            report.precision = Some(precision);
            report.recall = Some(recall);
            report.f2 = Some(f_beta(precision, recall, 2.0));
        }
        TargetKind::Tm => {
            let tm_pred: Vec<bool> = pred.iter().map(|&p| p >= decision_threshold).collect();
            let tm_truth: Vec<bool> = truth.iter().map(|&t| t > 0.5).collect();
            let (precision, recall) = precision_recall(&tm_pred, &tm_truth);
            report.precision = Some(precision);
            report.recall = Some(recall);
            report.f2 = Some(f_beta(precision, recall, 2.0));
        }
    }
    Ok(report)
}

/// Evaluates on one externally supplied grid with precomputed targets.
pub fn evaluate_single_grid(
    trained: &TrainedModel,
    record: &DatasetRecord,
    beta: f64,
    decision_threshold: f64,
) -> Result<EvalReport> {
    evaluate(
        trained,
        std::slice::from_ref(record),
        None,
        beta,
        decision_threshold,
    )
}

/// Writes the metrics block as JSON.
pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

/// Writes the per-node prediction dump (`grid_id, node, target, prediction`).
pub fn write_predictions_csv(path: &Path, rows: &[PredRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "grid_id,node,target,prediction")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.grid_id, r.node, r.target, r.prediction)?;
    }
    Ok(())
}
