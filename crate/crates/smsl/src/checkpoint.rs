//! Checkpoints: the four encoder tensors as concatenated `SSL1` frames
//! (video weight, video bias, text weight, text bias) plus a JSON sidecar
//! with the training config and epoch history.
//!
//! Nothing time-dependent is written, so equal runs give equal bytes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use smsl_core::codec;
use smsl_core::train::{EncoderParams, EpochRecord, TrainConfig};

use crate::error::{CliError, Result};
use crate::io;

pub const FORMAT: &str = "smsl-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: String,
    pub video_shape: [usize; 4],
    pub train: TrainConfig,
    pub history: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: EncoderParams,
    pub sidecar: Sidecar,
}

/// `checkpoint.bin` → `checkpoint.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode_params(params: &EncoderParams) -> Vec<u8> {
    let mut out = Vec::new();
    for m in params.tensors() {
        codec::encode_into(m, &mut out);
    }
    out
}

pub fn decode_params(path: &Path, bytes: &[u8]) -> Result<EncoderParams> {
    let frames = codec::decode_all(bytes).map_err(|e| CliError::Parse {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    })?;
    let [vw, vb, tw, tb]: [_; 4] = frames.try_into().map_err(|f: Vec<_>| CliError::Parse {
        path: path.into(),
        line: 0,
        message: format!("expected 4 tensors, found {}", f.len()),
    })?;
    Ok(EncoderParams::from_parts(vw, vb, tw, tb)?)
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_bytes(path, &encode_params(&self.params))?;
        let mut json = serde_json::to_string_pretty(&self.sidecar).expect("sidecar serializes");
        json.push('\n');
        io::write_bytes(&sidecar_path(path), json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let params = decode_params(path, &io::read_bytes(path)?)?;
        let side = sidecar_path(path);
        let sidecar: Sidecar = serde_json::from_slice(&io::read_bytes(&side)?)
            .map_err(|e| CliError::json(&side, &e))?;
        if sidecar.format != FORMAT {
            return Err(CliError::Parse {
                path: side,
                line: 0,
                message: format!("unsupported checkpoint format {:?}", sidecar.format),
            });
        }
        Ok(Self { params, sidecar })
    }
}
