//! Checkpoint file format: a JSON shape manifest followed by flat 64-bit
//! float blobs (parameters, then optional optimizer moments).
//!
//! Layout: magic `FGRPOCK1`, little-endian u32 header length, JSON header,
//! then `param_len` f64 LE values, then (if optimizer state is present)
//! two more `param_len`-sized blobs for the first and second moments.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::AdamState;
use crate::params::{BlockSpec, ParamSet};

const MAGIC: &[u8; 8] = b"FGRPOCK1";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    blocks: Vec<BlockSpec>,
    param_len: usize,
    opt_step: Option<u64>,
    config_echo: serde_json::Value,
    seed: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ParamSet,
    pub opt: Option<AdamState>,
    /// Echo of the run configuration that produced this checkpoint.
    pub config_echo: serde_json::Value,
    pub seed: u64,
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(opt) = &ckpt.opt {
        if opt.m.len() != ckpt.params.len() {
            return Err(Error::Data("optimizer state length mismatch".into()));
        }
    }
    let header = Header {
        version: VERSION,
        blocks: ckpt.params.blocks().to_vec(),
        param_len: ckpt.params.len(),
        opt_step: ckpt.opt.as_ref().map(|o| o.t),
        config_echo: ckpt.config_echo.clone(),
        seed: ckpt.seed,
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + header_bytes.len() + 8 * ckpt.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    let mut push_blob = |data: &[f64]| {
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    push_blob(ckpt.params.data());
    if let Some(opt) = &ckpt.opt {
        push_blob(&opt.m);
        push_blob(&opt.v);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let fail = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(fail("not a checkpoint file"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(fail("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])?;
    if header.version != VERSION {
        return Err(fail(&format!("unsupported checkpoint version {}", header.version)));
    }
    let mut cursor = 12 + header_len;
    let mut read_blob = |n: usize| -> Result<Vec<f64>> {
        let need = n * 8;
        if bytes.len() < cursor + need {
            return Err(fail("truncated payload"));
        }
        let blob = bytes[cursor..cursor + need]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        cursor += need;
        Ok(blob)
    };
    let data = read_blob(header.param_len)?;
    let params = ParamSet::from_parts(header.blocks, data)?;
    let opt = match header.opt_step {
        Some(t) => {
            let m = read_blob(header.param_len)?;
            let v = read_blob(header.param_len)?;
            Some(AdamState { m, v, t })
        }
        None => None,
    };
    Ok(Checkpoint { params, opt, config_echo: header.config_echo, seed: header.seed })
}
