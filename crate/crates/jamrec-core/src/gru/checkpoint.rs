//! Checkpoint container for trained parameters.
//!
//! Layout: 4-byte magic `JRCK`, u32 LE container version, u64 LE header
//! length, JSON header (shapes and hyperparameters), then every parameter
//! tensor as little-endian f64 in the fixed order documented on
//! [`GruParams::tensors`]. Round-trips are bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gru::{GruParams, Hyperparams};
use crate::io::write_atomic;
use crate::sim::POLICY_COUNT;

const MAGIC: &[u8; 4] = b"JRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    version: u32,
    input_dim: usize,
    hidden_dim: usize,
    n_classes: usize,
    hyper: Hyperparams,
}

/// Serialize parameters and hyperparameters to checkpoint bytes.
pub fn checkpoint_to_bytes(params: &GruParams, hyper: &Hyperparams) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        format: "jamrec-checkpoint".to_string(),
        version: CHECKPOINT_VERSION,
        input_dim: params.input_dim,
        hidden_dim: params.hidden_dim,
        n_classes: params.n_classes,
        hyper: hyper.clone(),
    };
    let header_json = serde_json::to_vec(&header)?;
    let mut bytes =
        Vec::with_capacity(16 + header_json.len() + 8 * params.n_params());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&header_json);
    for tensor in params.tensors() {
        for &v in tensor {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(bytes)
}

/// Parse checkpoint bytes back into parameters and hyperparameters.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(GruParams, Hyperparams)> {
    if bytes.len() < 16 {
        return Err(Error::Checkpoint("file too short for a checkpoint".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            &bytes[0..4],
            MAGIC
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (supported: {CHECKPOINT_VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let data_start = 16usize
        .checked_add(header_len)
        .filter(|&s| s <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated checkpoint header".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[16..data_start])
        .map_err(|e| Error::Checkpoint(format!("bad checkpoint header: {e}")))?;
    if header.n_classes != POLICY_COUNT {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} classes, expected {POLICY_COUNT}",
            header.n_classes
        )));
    }

    let mut params = GruParams::zeros(header.input_dim, header.hidden_dim);
    let expected = data_start + 8 * params.n_params();
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut offset = data_start;
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            *v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().expect("8 bytes"));
            offset += 8;
        }
    }
    Ok((params, header.hyper))
}

/// Write a checkpoint atomically.
pub fn save_checkpoint(params: &GruParams, hyper: &Hyperparams, path: &Path) -> Result<()> {
    write_atomic(path, &checkpoint_to_bytes(params, hyper)?)
}

pub fn load_checkpoint(path: &Path) -> Result<(GruParams, Hyperparams)> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}
