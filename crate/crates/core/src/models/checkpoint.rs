//! `.slrc` checkpoint container.
//!
//! Layout (little-endian): magic `SLRC`, u32 version, u32 header length,
//! a JSON header `{config, seed, meta, tensors: [{name, shape}]}`, every
//! tensor's values as f32 in header order, then the SHA-256 of all
//! preceding bytes. The checksum is verified before anything is parsed.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{shape_manifest, ModelConfig, ModelParams};
use crate::numerics::Tensor;

pub const SLRC_MAGIC: &[u8; 4] = b"SLRC";
pub const SLRC_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// Provenance recorded alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub dataset: String,
    pub fold: Option<usize>,
    pub seed: u64,
    /// Epoch (0-based) the weights were taken from.
    pub epoch: usize,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    seed: u64,
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn new(params: ModelParams<f32>, meta: CheckpointMeta) -> Self {
        Self { params, meta }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.params.config().clone(),
            seed: self.params.seed(),
            meta: self.meta.clone(),
            tensors: self
                .params
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let mut out = Vec::with_capacity(12 + json.len() + 4 * self.params.count() + DIGEST_LEN);
        out.extend_from_slice(SLRC_MAGIC);
        out.extend_from_slice(&SLRC_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in self.params.tensors() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 + DIGEST_LEN {
            return Err(Error::Format("checkpoint is truncated".into()));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Format("checkpoint checksum mismatch".into()));
        }
        if &body[..4] != SLRC_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes"));
        if version != SLRC_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes")) as usize;
        let json = body
            .get(12..12 + header_len)
            .ok_or_else(|| Error::Format("checkpoint header is truncated".into()))?;
        let header: Header =
            serde_json::from_slice(json).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        header.config.validate().map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;

        let expected = shape_manifest(&header.config);
        let listed: Vec<(String, Vec<usize>)> = header.tensors.into_iter().map(|e| (e.name, e.shape)).collect();
        if listed != expected {
            return Err(Error::Format("checkpoint tensors do not match the shapes its config implies".into()));
        }
        let mut payload = &body[12 + header_len..];
        let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        if payload.len() != 4 * total {
            return Err(Error::Format(format!(
                "checkpoint payload has {} bytes, expected {}",
                payload.len(),
                4 * total
            )));
        }
        let mut named = Vec::with_capacity(expected.len());
        for (name, shape) in expected {
            let n: usize = shape.iter().product();
            let (chunk, rest) = payload.split_at(4 * n);
            payload = rest;
            let values = chunk
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            let t = Tensor::new(shape, values).map_err(|e| Error::Format(format!("tensor {name}: {e}")))?;
            named.push((name, t));
        }
        let params = ModelParams::from_tensors(header.config, header.seed, named)?;
        Ok(Self { params, meta: header.meta })
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let bytes = checkpoint.to_bytes()?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing checkpoint {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
    Checkpoint::from_bytes(&bytes)
}
