//! Binary checkpoint: `PHYSIDCK`, a little-endian u32 header length, a JSON
//! header, then every array as raw little-endian f64 in header order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LtcConfig, LtcModel};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"PHYSIDCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayEntry {
    pub key: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub config: LtcConfig,
    pub seed: u64,
    pub epoch: usize,
    #[serde(default)]
    pub system: Option<String>,
    pub arrays: Vec<ArrayEntry>,
}

/// A model plus any auxiliary arrays (e.g. normalization statistics).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: LtcModel,
    pub seed: u64,
    pub epoch: usize,
    pub system: Option<String>,
    pub extra: BTreeMap<String, Vec<f64>>,
}

fn ck(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn save_checkpoint(path: &Path, ck_: &Checkpoint) -> Result<()> {
    let model = &ck_.model;
    let cfg = model.config();
    let blocks = model.layout().blocks(cfg);
    let mut arrays: Vec<ArrayEntry> = blocks
        .iter()
        .map(|(k, _, shape)| ArrayEntry {
            key: k.to_string(),
            shape: shape.clone(),
        })
        .collect();
    for (k, v) in &ck_.extra {
        if blocks.iter().any(|(b, _, _)| b == k) {
            return Err(ck(format!("extra array '{k}' clashes with a model block")));
        }
        arrays.push(ArrayEntry {
            key: k.clone(),
            shape: vec![v.len()],
        });
    }
    let meta = CheckpointMeta {
        version: VERSION,
        config: cfg.clone(),
        seed: ck_.seed,
        epoch: ck_.epoch,
        system: ck_.system.clone(),
        arrays,
    };
    let header = serde_json::to_vec(&meta).map_err(|e| ck(e.to_string()))?;
    let n_values = model.num_weights() + ck_.extra.values().map(Vec::len).sum::<usize>();
    let mut buf = Vec::with_capacity(12 + header.len() + 8 * n_values);
    buf.extend_from_slice(MAGIC);
    let len = u32::try_from(header.len()).map_err(|_| ck("header too large"))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(&header);
    for (_, range, _) in &blocks {
        for v in &model.weights()[range.clone()] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in ck_.extra.values().flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.len() < 12 || &buf[..8] != MAGIC {
        return Err(ck(format!("{}: not a checkpoint file", path.display())));
    }
    let len = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let body = 12 + len;
    if buf.len() < body {
        return Err(ck("truncated header"));
    }
    let meta: CheckpointMeta =
        serde_json::from_slice(&buf[12..body]).map_err(|e| ck(format!("bad header: {e}")))?;
    if meta.version != VERSION {
        return Err(ck(format!("unsupported version {}", meta.version)));
    }
    let data = &buf[body..];
    if data.len() % 8 != 0 {
        return Err(ck("payload is not a whole number of f64 values"));
    }
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let mut arrays: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut at = 0;
    for e in &meta.arrays {
        let n: usize = e.shape.iter().product();
        if at + n > values.len() {
            return Err(ck(format!("array '{}' runs past end of file", e.key)));
        }
        arrays.insert(e.key.clone(), values[at..at + n].to_vec());
        at += n;
    }
    if at != values.len() {
        return Err(ck("trailing data after last array"));
    }

    let cfg = meta.config.clone();
    let probe = LtcModel::from_weights(cfg.clone(), vec![0.0; super::Layout::new(&cfg).total])?;
    let mut weights = vec![0.0; probe.num_weights()];
    for (key, range, shape) in probe.layout().blocks(&cfg) {
        let v = arrays
            .remove(key)
            .ok_or_else(|| ck(format!("missing array '{key}'")))?;
        if v.len() != range.len() {
            return Err(ck(format!("array '{key}' should have shape {shape:?}")));
        }
        weights[range].copy_from_slice(&v);
    }
    Ok(Checkpoint {
        model: LtcModel::from_weights(cfg, weights)?,
        seed: meta.seed,
        epoch: meta.epoch,
        system: meta.system,
        extra: arrays,
    })
}
