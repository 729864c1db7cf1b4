//! Byte-exact checkpoint format.
//!
//! Layout: magic `TRNK`, version u32 LE (=1), config-blob length u32 LE,
//! config JSON (UTF-8), tensor count u32 LE, then per tensor: name length
//! u16 LE, name UTF-8, rank u8, each dim u32 LE, dtype u8 (0 = f32 LE,
//! 1 = f64 LE), raw row-major data. The embedded config prevents
//! weight/architecture mismatches; loading validates magic, version, every
//! declared length, and the parameter shapes implied by the config.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{parameter_shapes, HeadSpec, Model, ModelConfig};
use crate::tensor::{Data, DType, Tensor};
use crate::training::TrainConfig;

pub const MAGIC: &[u8; 4] = b"TRNK";
pub const VERSION: u32 = 1;

const DTYPE_F32: u8 = 0;
const DTYPE_F64: u8 = 1;

/// Everything embedded in the config blob.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub heads: HeadSpec,
}

fn dtype_code(dtype: DType) -> u8 {
    match dtype {
        DType::F32 => DTYPE_F32,
        DType::F64 => DTYPE_F64,
    }
}

/// Serialize a model and its training config into the checkpoint format.
pub fn checkpoint_bytes(model: &Model, train: &TrainConfig) -> Result<Vec<u8>> {
    let config = CheckpointConfig {
        model: model.cfg.clone(),
        train: train.clone(),
        heads: model.heads.clone(),
    };
    let config_json = serde_json::to_vec(&config)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&config_json);
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for (name, tensor) in model.params.iter() {
        let name_bytes = name.as_bytes();
        out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(name_bytes);
        out.push(tensor.shape().len() as u8);
        for &dim in tensor.shape() {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        out.push(dtype_code(tensor.dtype()));
        match tensor.data() {
            Data::F32(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            Data::F64(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn save_checkpoint(model: &Model, train: &TrainConfig, path: &Path) -> Result<()> {
    let bytes = checkpoint_bytes(model, train)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format(format!(
                "truncated checkpoint: {what} needs {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

/// Parse checkpoint bytes back into a model and training config.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<(Model, TrainConfig)> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version}, expected {VERSION}"
        )));
    }
    let config_len = cur.u32("config length")? as usize;
    let config_raw = cur.take(config_len, "config blob")?;
    let config: CheckpointConfig = serde_json::from_slice(config_raw)
        .map_err(|e| Error::format(format!("config blob: {e}")))?;
    config.model.validate()?;

    let tensor_count = cur.u32("tensor count")? as usize;
    let mut loaded: Vec<(String, Tensor)> = Vec::with_capacity(tensor_count);
    for _ in 0..tensor_count {
        let name_len = cur.u16("name length")? as usize;
        let name = String::from_utf8(cur.take(name_len, "name")?.to_vec())
            .map_err(|_| Error::format("tensor name is not UTF-8"))?;
        let rank = cur.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32("dimension")? as usize);
        }
        let numel: usize = shape.iter().product();
        let dtype = cur.u8("dtype")?;
        let tensor = match dtype {
            DTYPE_F32 => {
                let raw = cur.take(numel * 4, "tensor data")?;
                let vals: Vec<f32> = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::new(shape, Data::F32(vals))?
            }
            DTYPE_F64 => {
                let raw = cur.take(numel * 8, "tensor data")?;
                let vals: Vec<f64> = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::new(shape, Data::F64(vals))?
            }
            other => return Err(Error::format(format!("unknown dtype code {other}"))),
        };
        loaded.push((name, tensor));
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - cur.pos
        )));
    }

    // shape/config consistency: exactly the parameter set the config implies
    let expected = parameter_shapes(&config.model, &config.heads);
    if expected.len() != loaded.len() {
        return Err(Error::format(format!(
            "checkpoint has {} tensors, config implies {}",
            loaded.len(),
            expected.len()
        )));
    }
    let expected_map: std::collections::BTreeMap<&str, &Vec<usize>> =
        expected.iter().map(|(n, s)| (n.as_str(), s)).collect();
    for (name, tensor) in &loaded {
        match expected_map.get(name.as_str()) {
            None => {
                return Err(Error::format(format!(
                    "unexpected tensor `{name}` for this config"
                )))
            }
            Some(shape) if tensor.shape() != shape.as_slice() => {
                return Err(Error::format(format!(
                    "tensor `{name}` has shape {:?}, config implies {shape:?}",
                    tensor.shape()
                )))
            }
            _ => {}
        }
    }
    let mut params = crate::model::init_params(
        &config.model,
        &config.heads,
        0,
        loaded[0].1.dtype(),
    )?;
    for (name, tensor) in loaded {
        params.insert(name, tensor);
    }

    Ok((
        Model {
            cfg: config.model,
            heads: config.heads,
            params,
        },
        config.train,
    ))
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, TrainConfig)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::format(format!("cannot open checkpoint {}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    parse_checkpoint(&bytes)
}
