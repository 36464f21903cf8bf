//! Model checkpoints: JSON header + flat little-endian f64 payload.
//!
//! Layout: an 8-byte little-endian header length, the JSON header (model
//! kind, layer shapes, head, target, feature scaler), then every parameter
//! as little-endian f64 — per layer, weights in column-major order followed
//! by the bias.

use super::model::{Activation, Layer, LayerKind, OutputHead, PredictorModel};
use super::train::TrainedModel;
use super::{ModelKind, TargetKind};
use crate::error::{Error, Result};
use crate::topology::FeatureScaler;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const FORMAT: &str = "gridstab-model-v1";

#[derive(Debug, Serialize, Deserialize)]
struct LayerHeader {
    kind: LayerKind,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    kind: ModelKind,
    target: TargetKind,
    head: OutputHead,
    class_weight: f64,
    layers: Vec<LayerHeader>,
    scaler: Option<FeatureScaler>,
}

pub fn save_model(path: &Path, trained: &TrainedModel) -> Result<()> {
    let header = Header {
        format: FORMAT.to_string(),
        kind: trained.model.kind,
        target: trained.target,
        head: trained.model.head,
        class_weight: trained.class_weight,
        layers: trained
            .model
            .layers
            .iter()
            .map(|l| LayerHeader {
                kind: l.kind,
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                activation: l.activation,
            })
            .collect(),
        scaler: trained.scaler.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for layer in &trained.model.layers {
        for v in layer.weights.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
        for v in layer.bias.as_slice() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let malformed = |reason: &str| Error::MalformedFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes).map_err(|_| malformed("truncated header length"))?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    if header_len > 16 * 1024 * 1024 {
        return Err(malformed("implausible header length"));
    }
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes).map_err(|_| malformed("truncated header"))?;
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.format != FORMAT {
        return Err(malformed(&format!("unknown format {:?}", header.format)));
    }

    let mut payload = Vec::new();
    file.read_to_end(&mut payload)?;
    let expected: usize = header
        .layers
        .iter()
        .map(|l| l.in_dim * l.out_dim + l.out_dim)
        .sum();
    if payload.len() != expected * 8 {
        return Err(malformed(&format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            expected * 8
        )));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));

    let mut layers = Vec::with_capacity(header.layers.len());
    for lh in &header.layers {
        let w: Vec<f64> = values.by_ref().take(lh.in_dim * lh.out_dim).collect();
        let b: Vec<f64> = values.by_ref().take(lh.out_dim).collect();
        layers.push(Layer {
            kind: lh.kind,
            weights: DMatrix::from_column_slice(lh.in_dim, lh.out_dim, &w),
            bias: DVector::from_vec(b),
            activation: lh.activation,
        });
    }
    let model = PredictorModel { kind: header.kind, layers, head: header.head };
    model.validate()?;
    Ok(TrainedModel {
        model,
        scaler: header.scaler,
        target: header.target,
        class_weight: header.class_weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::train::build_model;

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = build_model(ModelKind::Gcn, &[8, 8], TargetKind::Snbs, 7).unwrap();
        let trained = TrainedModel {
            model,
            scaler: None,
            target: TargetKind::Snbs,
            class_weight: 1.0,
        };
        save_model(&path, &trained).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(trained.model, back.model);
        assert_eq!(back.target, TargetKind::Snbs);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = build_model(ModelKind::Mlp, &[4], TargetKind::Tm, 3).unwrap();
        let trained = TrainedModel {
            model,
            scaler: None,
            target: TargetKind::Tm,
            class_weight: 2.0,
        };
        save_model(&path, &trained).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::MalformedFile { .. })));
    }
}
