use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FdNetParams, NetConfig};
use crate::error::{Error, Result};

const BIN_FILE: &str = "params.bin";
const JSON_FILE: &str = "params.json";

/// Sidecar written next to `params.bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    #[serde(flatten)]
    pub config: NetConfig,
    pub param_count: usize,
    pub seed: u64,
    pub iteration: usize,
    pub dataset_fingerprint: String,
}

/// Parameters plus the metadata needed to reload them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: FdNetParams,
}

impl Checkpoint {
    pub fn new(
        params: FdNetParams,
        seed: u64,
        iteration: usize,
        dataset_fingerprint: &str,
    ) -> Self {
        Self {
            meta: CheckpointMeta {
                config: *params.config(),
                param_count: params.len(),
                seed,
                iteration,
                dataset_fingerprint: dataset_fingerprint.to_owned(),
            },
            params,
        }
    }

    /// Writes `<dir>/params.bin` (little-endian f64, flat layout order) and
    /// `<dir>/params.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let bin = dir.join(BIN_FILE);
        let bytes: Vec<u8> = self
            .params
            .as_slice()
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
        let json = dir.join(JSON_FILE);
        let text = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::json(&json, e))?;
        fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let json = dir.join(JSON_FILE);
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let meta: CheckpointMeta =
            serde_json::from_str(&text).map_err(|e| Error::json(&json, e))?;
        meta.config.validate()?;
        let expected = meta.config.param_count();
        if meta.param_count != expected {
            return Err(Error::Shape(format!(
                "{} records {} parameters, configuration needs {expected}",
                json.display(),
                meta.param_count
            )));
        }
        let bin = dir.join(BIN_FILE);
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        if bytes.len() != expected * 8 {
            return Err(Error::Shape(format!(
                "{} holds {} bytes, expected {} parameters",
                bin.display(),
                bytes.len(),
                expected
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        let params = FdNetParams::from_vec(meta.config, values)?;
        Ok(Self { meta, params })
    }
}
