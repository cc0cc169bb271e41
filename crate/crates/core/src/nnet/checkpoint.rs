use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnetError, TcnConfig, TcnModel};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"IAECTCN\0";
const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with the training state needed to resume or audit it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: TcnModel,
    pub epoch: usize,
    pub dev_metric: f64,
    /// Master seed of the run; every later draw is derived from it and the
    /// epoch, so this is the full random state.
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: TcnConfig,
    epoch: usize,
    dev_metric_bits: u64,
    seed: u64,
    tensors: Vec<TensorMeta>,
}

/// Layout: magic, u32 version, u32 header length, JSON header, then every
/// tensor as row-major little-endian f64 in header order.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), NnetError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&to_bytes(ckpt))?;
    Ok(())
}

fn to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let p = ckpt.model.params();
    let tensors = (0..p.len())
        .map(|i| TensorMeta {
            name: p.names()[i].clone(),
            rows: p.value(i).nrows(),
            cols: p.value(i).ncols(),
            trainable: p.is_trainable(i),
        })
        .collect();
    let header = Header {
        config: ckpt.model.config().clone(),
        epoch: ckpt.epoch,
        dev_metric_bits: ckpt.dev_metric.to_bits(),
        seed: ckpt.seed,
        tensors,
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for v in p.values() {
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnetError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, NnetError> {
    let bad = |m: &str| NnetError::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(NnetError::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| NnetError::Checkpoint(format!("header: {e}")))?;
    let mut model = TcnModel::new(header.config, 0)?;
    let store = model.params_mut();
    if store.len() != header.tensors.len() {
        return Err(bad("tensor list does not match the configured architecture"));
    }
    let mut pos = 16 + hlen;
    for (i, meta) in header.tensors.iter().enumerate() {
        if store.names()[i] != meta.name
            || store.value(i).dim() != (meta.rows, meta.cols)
            || store.is_trainable(i) != meta.trainable
        {
            return Err(NnetError::Checkpoint(format!("tensor {} does not match", meta.name)));
        }
        let n = meta.rows * meta.cols;
        let raw = bytes
            .get(pos..pos + 8 * n)
            .ok_or_else(|| bad("truncated tensor data"))?;
        for (dst, chunk) in store.value_mut(i).iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        pos += 8 * n;
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after tensor data"));
    }
    Ok(Checkpoint {
        model,
        epoch: header.epoch,
        dev_metric: f64::from_bits(header.dev_metric_bits),
        seed: header.seed,
    })
}
