//! Model file: a little-endian `u64` header length, a JSON header, then the
//! parameters as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ShapeError};

use super::net::{self, LayerShape, TinySegNet};
use super::TrainConfig;

pub const MODEL_FORMAT: &str = "tinysegnet-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub layers: Vec<LayerShape>,
    pub param_count: usize,
    pub seed: u64,
    /// Hex SHA-256 of the training config as JSON.
    pub config_hash: String,
}

pub fn config_hash(config: &TrainConfig) -> String {
    let json = serde_json::to_vec(config).expect("serialisable config");
    Sha256::digest(json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn bad(detail: impl Into<String>) -> ShapeError {
    ShapeError::Format {
        what: "model file",
        detail: detail.into(),
    }
}

pub fn write_model(net: &TinySegNet, config: &TrainConfig) -> Vec<u8> {
    let header = ModelHeader {
        format: MODEL_FORMAT.into(),
        layers: net::layer_shapes(),
        param_count: net.params().len(),
        seed: config.seed,
        config_hash: config_hash(config),
    };
    let json = serde_json::to_vec(&header).expect("serialisable header");
    let mut out = (json.len() as u64).to_le_bytes().to_vec();
    out.extend_from_slice(&json);
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn read_model(bytes: &[u8]) -> Result<(TinySegNet, ModelHeader)> {
    let len_bytes: [u8; 8] = bytes
        .get(..8)
        .ok_or_else(|| bad("truncated header length"))?
        .try_into()
        .expect("8 bytes");
    let len = usize::try_from(u64::from_le_bytes(len_bytes)).map_err(|_| bad("header too long"))?;
    let json = bytes
        .get(8..8usize.saturating_add(len))
        .ok_or_else(|| bad("truncated header"))?;
    let header: ModelHeader = serde_json::from_slice(json)?;
    if header.format != MODEL_FORMAT || header.layers != net::layer_shapes() {
        return Err(bad(format!("unsupported architecture `{}`", header.format)));
    }
    let body = &bytes[8 + len..];
    if body.len() != header.param_count * 8 || header.param_count != net::param_count() {
        return Err(bad(format!(
            "expected {} parameters, found {} bytes",
            header.param_count,
            body.len()
        )));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((TinySegNet::from_params(params)?, header))
}

pub fn save_model(path: impl AsRef<Path>, net: &TinySegNet, config: &TrainConfig) -> Result<()> {
    Ok(fs::write(path, write_model(net, config))?)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(TinySegNet, ModelHeader)> {
    read_model(&fs::read(path)?)
}
