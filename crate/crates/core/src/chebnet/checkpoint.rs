//! Checkpoint layout: the magic line `WDSGNN1\n`, a little-endian `u64`
//! header length, the JSON header, then every parameter as a little-endian
//! `f64` in [`ChebModel::params`] order.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ChebLayer, ChebModel, LayerShape, TrainConfig};
use crate::error::{Error, Result};
use crate::observe::ObservationMask;
use crate::scenegen::Scaler;
use crate::spectral::{ScaledLaplacian, WeightScheme};

const MAGIC: &[u8; 8] = b"WDSGNN1\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub layers: Vec<LayerShape>,
    /// Hidden `(K, F)` pairs as requested; `layers` adds the output layer.
    pub topology: Vec<(usize, usize)>,
    pub scheme: Option<WeightScheme>,
    pub lambda_max: f64,
    pub scaler: Scaler,
    pub mask: ObservationMask,
    pub train_config: TrainConfig,
    pub seed: u64,
    pub network_path: Option<String>,
    pub network_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: Vec<f64>,
}

impl Checkpoint {
    /// Rebuilds the model on `laplacian`, which must match the stored scheme
    /// and largest eigenvalue.
    pub fn into_model(self, laplacian: Arc<ScaledLaplacian>) -> Result<ChebModel> {
        if laplacian.scheme() != self.header.scheme
            || (laplacian.lambda_max() - self.header.lambda_max).abs() > 1e-9 * self.header.lambda_max
        {
            return Err(Error::Checkpoint(format!(
                "Laplacian ({:?}, lambda_max {}) does not match checkpoint ({:?}, {})",
                laplacian.scheme(),
                laplacian.lambda_max(),
                self.header.scheme,
                self.header.lambda_max
            )));
        }
        let layers = self
            .header
            .layers
            .iter()
            .map(|s| ChebLayer::zeros(s.k, s.f_in, s.f_out))
            .collect::<Result<Vec<_>>>()?;
        let mut model = ChebModel::from_layers(laplacian, layers)?;
        model
            .set_params(&self.params)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(model)
    }
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, model: &ChebModel) -> Result<()> {
    if header.layers != model.shapes() {
        return Err(Error::Checkpoint("header layers differ from the model".into()));
    }
    let json = serde_json::to_vec(header)?;
    let params = model.params();
    let mut bytes = Vec::with_capacity(16 + json.len() + 8 * params.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint(format!("{}: not a checkpoint", path.display())));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(16..16 + len)
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    let blob = &bytes[16 + len..];
    let expected: usize = header
        .layers
        .iter()
        .map(|s| s.k * s.f_in * s.f_out + s.f_out)
        .sum();
    if blob.len() != 8 * expected {
        return Err(Error::Checkpoint(format!(
            "expected {expected} parameters, found {} bytes",
            blob.len()
        )));
    }
    let params = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Checkpoint { header, params })
}
