// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::{IcnetError, Model, ModelConfig};
use crate::numerics::{Matrix, ParamStore};

pub const CHECKPOINT_FORMAT: &str = "deobtime-icnet";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Versioned, shape-tagged parameter dump with the model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            params: model
                .params
                .iter()
                .map(|(name, m)| NamedArray {
                    name: name.to_string(),
                    rows: m.rows(),
                    cols: m.cols(),
                    data: m.as_slice().to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<Model, IcnetError> {
        let err = |m: String| IcnetError::Checkpoint(m);
        if self.format != CHECKPOINT_FORMAT {
            return Err(err(format!("unknown format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(err(format!("unsupported version {}", self.version)));
        }
        self.config.validate()?;
        let expected = self.config.parameter_layout();
        if expected.len() != self.params.len() {
            return Err(err(format!(
                "expected {} parameter arrays, found {}",
                expected.len(),
                self.params.len()
            )));
        }
        let mut params = ParamStore::new();
        for ((name, rows, cols), arr) in expected.iter().zip(self.params) {
            if &arr.name != name || arr.rows != *rows || arr.cols != *cols {
                return Err(err(format!(
                    "parameter `{}` {}x{} does not match `{name}` {rows}x{cols}",
                    arr.name, arr.rows, arr.cols
                )));
            }
            let m = Matrix::from_vec(arr.rows, arr.cols, arr.data)?;
            if !m.is_finite() {
                return Err(err(format!("parameter `{name}` has non-finite entries")));
            }
            params.insert(arr.name, m);
        }
        Ok(Model {
            config: self.config,
            params,
        })
    }
}

impl Model {
    pub fn to_checkpoint_json(&self) -> String {
        serde_json::to_string_pretty(&Checkpoint::from_model(self)).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Model, IcnetError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| IcnetError::Checkpoint(e.to_string()))?;
        ck.into_model()
    }
}
