//! Model checkpoints: JSON with the architecture id, layer shapes, and each
//! parameter array as base64-encoded little-endian f64 bytes.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::arch::Activation;
use super::model::{Dense, Model};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "unlearn-bench/checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    arch_id: String,
    layers: Vec<LayerBlob>,
}

#[derive(Serialize, Deserialize)]
struct LayerBlob {
    kind: String,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: String,
    bias: String,
}

fn encode(values: impl Iterator<Item = f64>) -> String {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    STANDARD.encode(bytes)
}

fn decode(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::config(format!("checkpoint {what}: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::config(format!(
            "checkpoint {what}: expected {expected} values, found {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn to_json(model: &Model) -> Result<String> {
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        arch_id: model.arch_id(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerBlob {
                kind: "dense".into(),
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                activation: l.activation,
                weights: encode(l.weights.iter().copied()),
                bias: encode(l.bias.iter().copied()),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&ckpt)?)
}

pub fn from_json(text: &str) -> Result<Model> {
    let ckpt: Checkpoint = serde_json::from_str(text)?;
    if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::config(format!(
            "unsupported checkpoint {} v{}",
            ckpt.format, ckpt.version
        )));
    }
    let mut layers = Vec::with_capacity(ckpt.layers.len());
    for (i, blob) in ckpt.layers.iter().enumerate() {
        if blob.kind != "dense" {
            return Err(Error::config(format!(
                "layer {i}: unknown kind {}",
                blob.kind
            )));
        }
        let w = decode(&blob.weights, blob.in_dim * blob.out_dim, "weights")?;
        let b = decode(&blob.bias, blob.out_dim, "bias")?;
        layers.push(Dense {
            weights: Array2::from_shape_vec((blob.out_dim, blob.in_dim), w)
                .map_err(|e| Error::config(e.to_string()))?,
            bias: Array1::from(b),
            activation: blob.activation,
        });
    }
    let model = Model::from_layers(layers)?;
    if model.arch_id() != ckpt.arch_id {
        return Err(Error::config(format!(
            "checkpoint arch_id {} does not match its layers ({})",
            ckpt.arch_id,
            model.arch_id()
        )));
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(model)?).map_err(|e| Error::file(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    from_json(&text)
}
