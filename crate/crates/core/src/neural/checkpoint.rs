//! Parameter checkpoints: a versioned JSON document holding every parameter by
//! name with its shape and row-major values, guarded by a SHA-256 checksum.
//!
//! Floats are written in shortest round-trip form and parsed back exactly, so
//! write -> read -> write reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Matrix, ParamStore};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "pinch-isac-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    checksum: String,
    params: Vec<NamedTensor>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

fn checksum(params: &[NamedTensor]) -> Result<String> {
    let bytes = serde_json::to_vec(params)?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

/// Flattens a store into named tensors, rejecting non-finite values.
pub fn export_params(store: &ParamStore) -> Result<Vec<NamedTensor>> {
    if let Some(name) = store.first_non_finite() {
        return Err(Error::contract(format!("parameter `{name}` is non-finite and cannot be saved")));
    }
    Ok(store
        .params()
        .iter()
        .map(|p| NamedTensor {
            name: p.name.clone(),
            shape: [p.value.rows(), p.value.cols()],
            values: p.value.data().to_vec(),
        })
        .collect())
}

pub fn encode(params: Vec<NamedTensor>) -> Result<String> {
    let doc = Document {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        checksum: checksum(&params)?,
        params,
    };
    let mut s = serde_json::to_string(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn decode(text: &str) -> Result<Vec<NamedTensor>> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| Error::CheckpointIntegrity(format!("unreadable document: {e}")))?;
    if probe.version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion { found: probe.version, expected: CHECKPOINT_VERSION });
    }
    let doc: Document =
        serde_json::from_str(text).map_err(|e| Error::CheckpointIntegrity(format!("malformed document: {e}")))?;
    if doc.format != CHECKPOINT_FORMAT {
        return Err(Error::CheckpointIntegrity(format!("unknown format `{}`", doc.format)));
    }
    let actual = checksum(&doc.params)?;
    if actual != doc.checksum {
        return Err(Error::CheckpointIntegrity(format!("checksum {actual} does not match recorded {}", doc.checksum)));
    }
    for t in &doc.params {
        if t.values.len() != t.shape[0] * t.shape[1] {
            return Err(Error::CheckpointIntegrity(format!("`{}` has the wrong number of values", t.name)));
        }
    }
    Ok(doc.params)
}

pub fn write_checkpoint(store: &ParamStore, path: &Path) -> Result<()> {
    std::fs::write(path, encode(export_params(store)?)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<NamedTensor>> {
    decode(&std::fs::read_to_string(path)?)
}

/// Reads a checkpoint into `store`; names and shapes must match exactly.
pub fn load_checkpoint(store: &mut ParamStore, path: &Path) -> Result<()> {
    let tensors = read_checkpoint(path)?;
    let values = tensors
        .into_iter()
        .map(|t| Ok((t.name, Matrix::from_vec(t.shape[0], t.shape[1], t.values)?)))
        .collect::<Result<Vec<_>>>()?;
    store.load(values)
}
