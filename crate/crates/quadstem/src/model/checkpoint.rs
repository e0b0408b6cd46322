use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::Array2;

use crate::error::{QuadstemError, Result};
use crate::model::config::ModelConfig;
use crate::model::params::ModelParams;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct ArrayBlob {
    rows: usize,
    cols: usize,
    /// Little-endian f64 bytes, base64-encoded; bit-exact round trip.
    data: String,
}

/// Single-file checkpoint: versioned config plus named parameter arrays,
/// optionally carrying optimizer/trainer state for resumption.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct CheckpointFile {
    pub schema_version: u32,
    pub config: ModelConfig,
    params: BTreeMap<String, ArrayBlob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trainer_state: Option<serde_json::Value>,
}

fn encode_array(arr: &Array2<f64>) -> ArrayBlob {
    let mut bytes = Vec::with_capacity(arr.len() * 8);
    for v in arr.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    ArrayBlob { rows: arr.nrows(), cols: arr.ncols(), data: B64.encode(bytes) }
}

fn decode_array(name: &str, blob: &ArrayBlob) -> Result<Array2<f64>> {
    let bytes = B64
        .decode(&blob.data)
        .map_err(|e| QuadstemError::Checkpoint(format!("array '{name}': {e}")))?;
    if bytes.len() != blob.rows * blob.cols * 8 {
        return Err(QuadstemError::Checkpoint(format!(
            "array '{name}': {} bytes for shape ({}, {})",
            bytes.len(),
            blob.rows,
            blob.cols
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((blob.rows, blob.cols), values)
        .map_err(|e| QuadstemError::Checkpoint(format!("array '{name}': {e}")))
}

/// Encodes a named array map as a JSON value using the same bit-exact blob
/// format as model parameters (used for optimizer moments in trainer state).
pub fn arrays_to_json(arrays: &BTreeMap<String, Array2<f64>>) -> serde_json::Value {
    let blobs: BTreeMap<&String, ArrayBlob> =
        arrays.iter().map(|(k, v)| (k, encode_array(v))).collect();
    serde_json::to_value(blobs).expect("array blob serialization")
}

pub fn arrays_from_json(value: &serde_json::Value) -> Result<BTreeMap<String, Array2<f64>>> {
    let blobs: BTreeMap<String, ArrayBlob> = serde_json::from_value(value.clone())?;
    let mut out = BTreeMap::new();
    for (name, blob) in &blobs {
        out.insert(name.clone(), decode_array(name, blob)?);
    }
    Ok(out)
}

impl CheckpointFile {
    pub fn new(config: &ModelConfig, params: &ModelParams) -> Self {
        Self {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            config: config.clone(),
            params: params.arrays.iter().map(|(k, v)| (k.clone(), encode_array(v))).collect(),
            trainer_state: None,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        let mut arrays = BTreeMap::new();
        for (name, blob) in &self.params {
            arrays.insert(name.clone(), decode_array(name, blob)?);
        }
        Ok(ModelParams { arrays })
    }
}

/// Writes a checkpoint atomically (temp file + rename).
pub fn save_checkpoint(path: &Path, ckpt: &CheckpointFile) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, serde_json::to_vec(ckpt)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads and fully validates a checkpoint: schema version, config
/// consistency, and parameter shapes. Fails closed on any mismatch.
pub fn load_checkpoint(path: &Path) -> Result<(ModelConfig, ModelParams, CheckpointFile)> {
    let bytes = std::fs::read(path)?;
    let ckpt: CheckpointFile = serde_json::from_slice(&bytes)?;
    if ckpt.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(QuadstemError::Checkpoint(format!(
            "unsupported schema version {}",
            ckpt.schema_version
        )));
    }
    ckpt.config.validate()?;
    let params = ckpt.params()?;
    params.validate_against(&ckpt.config)?;
    Ok((ckpt.config.clone(), params, ckpt))
}
