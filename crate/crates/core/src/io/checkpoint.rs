//! Binary checkpoint container.
//!
//! ```text
//! "GRCK"  magic
//! u8      format version
//! u32 LE  header length, then a JSON header
//! f64 LE  value, first moment, second moment of every tensor, header order
//! 32 B    SHA-256 of everything above
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ModelSpec};
use crate::nn::{Parameter, Tensor};
use crate::train::{EpochLoss, Stage, TrainState};

pub const MAGIC: &[u8; 4] = b"GRCK";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Adam updates applied to this tensor.
    pub steps: u64,
}

/// Random-number state needed to continue training. Every stage draws from
/// its own ChaCha8 stream keyed by `seed`, so the seed and the number of
/// completed steps determine the state fully.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngInfo {
    pub algorithm: String,
    pub seed: u64,
    pub stage_steps: [u64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u8,
    /// Echo of the run configuration that produced the state.
    pub config: serde_json::Value,
    pub spec: ModelSpec,
    pub stage: Stage,
    pub history: Vec<EpochLoss>,
    pub rng: RngInfo,
    pub tensors: Vec<TensorEntry>,
}

/// A decoded checkpoint: training state plus the configuration echo.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub state: TrainState,
    pub config: serde_json::Value,
    pub seed: u64,
}

fn header_of(state: &TrainState, config: &serde_json::Value, seed: u64) -> CheckpointHeader {
    CheckpointHeader {
        version: FORMAT_VERSION,
        config: config.clone(),
        spec: state.params.spec.clone(),
        stage: state.stage,
        history: state.history.clone(),
        rng: RngInfo {
            algorithm: "chacha8".into(),
            seed,
            stage_steps: state.steps,
        },
        tensors: state
            .params
            .params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.shape().to_vec(),
                steps: p.steps,
            })
            .collect(),
    }
}

pub fn encode_checkpoint(state: &TrainState, config: &serde_json::Value, seed: u64) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&header_of(state, config, seed))?;
    let n_values: usize = state.params.params.iter().map(|p| p.value.len()).sum();
    let mut buf = Vec::with_capacity(9 + header.len() + 24 * n_values + 32);
    buf.extend_from_slice(MAGIC);
    buf.push(FORMAT_VERSION);
    let len = u32::try_from(header.len()).map_err(|_| Error::Checkpoint("header too large".into()))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(&header);
    for p in &state.params.params {
        for t in [&p.value, &p.adam_m, &p.adam_v] {
            for x in t.data() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

fn corrupt(m: impl Into<String>) -> Error {
    Error::Checkpoint(m.into())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 + 1 + 4 + 32 {
        return Err(corrupt(format!("file too short ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic, not a checkpoint file"));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: bytes[4],
            expected: FORMAT_VERSION,
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch, file is corrupt or truncated"));
    }
    let len = u32::from_le_bytes(body[5..9].try_into().expect("4 bytes")) as usize;
    let header_end = 9usize
        .checked_add(len)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| corrupt("header length exceeds file size"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(&body[9..header_end]).map_err(|e| corrupt(format!("header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            found: header.version,
            expected: FORMAT_VERSION,
        });
    }

    let mut data = body[header_end..].chunks_exact(8);
    if !data.remainder().is_empty() {
        return Err(corrupt("tensor payload is not a whole number of f64 values"));
    }
    let mut read = |shape: &[usize], name: &str| -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            let chunk = data
                .next()
                .ok_or_else(|| corrupt(format!("payload ends inside tensor `{name}`")))?;
            v.push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
        }
        Tensor::from_vec(shape, v)
    };
    let mut params = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let mut p = Parameter::new(entry.name.clone(), read(&entry.shape, &entry.name)?);
        p.adam_m = read(&entry.shape, &entry.name)?;
        p.adam_v = read(&entry.shape, &entry.name)?;
        p.steps = entry.steps;
        params.push(p);
    }
    if data.next().is_some() {
        return Err(corrupt("trailing bytes after the last tensor"));
    }
    let params = ModelParams::from_parts(header.spec, params)?;
    let state = TrainState {
        params,
        stage: header.stage,
        wall_secs: vec![0.0; header.history.len()],
        history: header.history,
        steps: header.rng.stage_steps,
    };
    Ok(Checkpoint {
        state,
        config: header.config,
        seed: header.rng.seed,
    })
}

pub fn save_checkpoint(path: &Path, state: &TrainState, config: &serde_json::Value, seed: u64) -> Result<()> {
    fs::write(path, encode_checkpoint(state, config, seed)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

/// Human-readable mirror of a checkpoint (header plus tensor values).
pub fn checkpoint_json(state: &TrainState, config: &serde_json::Value, seed: u64) -> Result<String> {
    #[derive(Serialize)]
    struct Mirror<'a> {
        header: CheckpointHeader,
        values: Vec<(&'a str, &'a [f64])>,
    }
    let mirror = Mirror {
        header: header_of(state, config, seed),
        values: state
            .params
            .params
            .iter()
            .map(|p| (p.name.as_str(), p.value.data()))
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&mirror)?)
}
