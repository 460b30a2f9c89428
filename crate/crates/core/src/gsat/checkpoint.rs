use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{GsatModel, Pooling, Task};
use crate::artifact::write_bytes;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// JSON model checkpoint. Floats are written with round-trip precision, so a
/// reloaded model predicts bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "")]
pub struct GsatCheckpoint<T: Scalar> {
    pub format_version: u32,
    pub task: Task,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "H")]
    pub heads: usize,
    pub p: usize,
    pub d_s: usize,
    pub d_in: usize,
    pub pooling: Pooling,
    pub seed: u64,
    pub epoch: usize,
    pub model: GsatModel<T>,
}

impl<T: Scalar> GsatCheckpoint<T> {
    pub fn new(model: GsatModel<T>, seed: u64, epoch: usize) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            task: model.task,
            layers: model.layers.len(),
            heads: model.heads(),
            p: model.hidden(),
            d_s: model.structural_dim(),
            d_in: model.input_dim(),
            pooling: model.pooling,
            seed,
            epoch,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(path, &serde_json::to_vec_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let ck: Self = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        if ck.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported model checkpoint version {}",
                ck.format_version
            )));
        }
        let m = &ck.model;
        let consistent = ck.task == m.task
            && ck.pooling == m.pooling
            && ck.layers == m.layers.len()
            && ck.heads == m.heads()
            && ck.p == m.hidden()
            && ck.d_s == m.structural_dim()
            && ck.d_in == m.input_dim()
            && m.layers.iter().all(|l| {
                l.heads.len() == ck.heads && l.hidden() == ck.p && l.structural_dim() == ck.d_s
            });
        if !consistent {
            return Err(Error::Artifact(format!(
                "{}: header does not match stored tensors",
                path.display()
            )));
        }
        Ok(ck)
    }
}
