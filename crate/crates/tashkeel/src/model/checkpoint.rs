//! Model checkpoints: a self-describing binary file holding the configuration,
//! training provenance, and every parameter tensor.
//!
//! Layout: 4-byte magic, u32 format version, u64 metadata length, JSON
//! metadata, then raw little-endian f32 tensor data concatenated in the fixed
//! [`Params::visit`] order. Weights round-trip bit for bit; a checkpoint
//! carries the vocabulary digest so a decoder can refuse a mismatched vocab.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::Params;
use super::ModelConfig;

const MAGIC: &[u8; 4] = b"TSHK";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("malformed checkpoint metadata: {0}")]
    BadMeta(#[from] serde_json::Error),
    #[error("tensor {name}: manifest shape {manifest:?} does not match config shape {expected:?}")]
    ShapeMismatch {
        name: String,
        manifest: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("checkpoint data ends early: wanted {want} weight bytes, found {got}")]
    Truncated { want: usize, got: usize },
}

/// Shape record for one tensor, in storage order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Everything about a checkpoint except the weights themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: ModelConfig,
    /// Digest of the vocabulary file the model was trained with.
    pub vocab_sha256: String,
    /// 1-based epoch the weights come from.
    pub epoch: usize,
    /// Dev word error rate at that epoch, if it was measured.
    pub dev_wer: Option<f64>,
    pub tensors: Vec<TensorInfo>,
}

fn manifest(params: &Params<f32>) -> Vec<TensorInfo> {
    let mut out = Vec::new();
    params.visit(&mut |name, shape, _| {
        out.push(TensorInfo {
            name: name.to_string(),
            shape: shape.to_vec(),
        });
    });
    out
}

/// Write `params` plus metadata to `path`. The tensor manifest is derived from
/// the parameters, so `meta.tensors` is ignored and rebuilt.
pub fn save(
    path: &Path,
    params: &Params<f32>,
    mut meta: CheckpointMeta,
) -> Result<(), CheckpointError> {
    meta.tensors = manifest(params);
    let meta_bytes = serde_json::to_vec(&meta)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(meta_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&meta_bytes)?;
    let mut err = None;
    params.visit(&mut |_, _, data| {
        if err.is_some() {
            return;
        }
        for &x in data {
            if let Err(e) = w.write_all(&x.to_le_bytes()) {
                err = Some(e);
                return;
            }
        }
    });
    if let Some(e) = err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

/// Read a checkpoint back. Validates magic, version, and that the stored
/// manifest matches the shapes implied by the stored configuration.
pub fn load(path: &Path) -> Result<(Params<f32>, CheckpointMeta), CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let meta_len = u64::from_le_bytes(buf8) as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)?;

    // Zero-init at the right shapes, then overwrite every element.
    let mut params = Params::<f32>::init(&meta.config, 0);
    let expected = manifest(&params);
    if meta.tensors.len() != expected.len() {
        return Err(CheckpointError::ShapeMismatch {
            name: format!("<count {} vs {}>", meta.tensors.len(), expected.len()),
            manifest: vec![meta.tensors.len()],
            expected: vec![expected.len()],
        });
    }
    for (got, want) in meta.tensors.iter().zip(&expected) {
        if got != want {
            return Err(CheckpointError::ShapeMismatch {
                name: want.name.clone(),
                manifest: got.shape.clone(),
                expected: want.shape.clone(),
            });
        }
    }

    let want_floats = params.param_count();
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() != want_floats * 4 {
        return Err(CheckpointError::Truncated {
            want: want_floats * 4,
            got: data.len(),
        });
    }
    let mut off = 0;
    for slice in params.flat_mut() {
        for x in slice {
            *x = f32::from_le_bytes(data[off..off + 4].try_into().unwrap());
            off += 4;
        }
    }
    Ok((params, meta))
}
