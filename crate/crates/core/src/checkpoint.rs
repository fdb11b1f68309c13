//! JSON checkpoints: the model config plus every parameter as a shaped array.
//!
//! ```json
//! {"format": "mannlab-checkpoint", "version": 1, "config": {...},
//!  "params": {"lstm.bias": {"shape": [1, 400], "data": [...]}, ...}}
//! ```
//!
//! Values are stored as 64-bit floats in row-major order and round-trip exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mann_tensor::{Array2, Scalar};
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::model::Model;
use crate::params::ParamStore;
use crate::{CoreError, Result};

pub const CHECKPOINT_FORMAT: &str = "mannlab-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArray {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub params: BTreeMap<String, ParamArray>,
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(model: &Model<T>) -> Self {
        let params = model
            .params
            .iter()
            .map(|(name, a)| {
                let array = ParamArray { shape: [a.nrows(), a.ncols()], data: a.iter().map(|x| x.as_f64()).collect() };
                (name.clone(), array)
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            params,
        }
    }

    pub fn to_model<T: Scalar>(&self) -> Result<Model<T>> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(CoreError::Checkpoint(format!("unsupported format {} v{}", self.format, self.version)));
        }
        let mut store = ParamStore::new();
        for (name, p) in &self.params {
            let values = p.data.iter().map(|&x| T::lit(x)).collect();
            let a = Array2::from_shape_vec((p.shape[0], p.shape[1]), values)
                .map_err(|e| CoreError::Checkpoint(format!("parameter `{name}`: {e}")))?;
            store.insert(name.clone(), a);
        }
        Model::from_params(self.config.clone(), store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}
