use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::filters::{FilterConfig, FilterModel};
use super::mask::StructuralMask;
use crate::artifact::write_bytes;
use crate::error::{Error, Result};
use crate::nn::{Dense, Mlp};
use crate::scalar::Scalar;

pub const MASK_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DenseRecord {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

/// JSON form of learned masks, their readout head and the settings that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskCheckpoint {
    pub format_version: u32,
    pub m: usize,
    pub proto_size: Vec<usize>,
    #[serde(rename = "D")]
    pub alphabet: usize,
    pub edge_logits: Vec<Vec<f64>>,
    pub label_logits: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "H")]
    pub depth: usize,
    pub r: usize,
    #[serde(rename = "S")]
    pub samples: usize,
    pub tau: f64,
    pub seed: u64,
    head: Vec<DenseRecord>,
    z_mean: Vec<f64>,
    z_scale: Vec<f64>,
    y_mean: Vec<f64>,
    y_scale: Vec<f64>,
}

fn rows<T: Scalar>(a: &Array2<T>) -> Vec<Vec<f64>> {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.to_f64_lossy()).collect())
        .collect()
}

fn vec_of<T: Scalar>(a: &Array1<T>) -> Vec<f64> {
    a.iter().map(|x| x.to_f64_lossy()).collect()
}

fn matrix<T: Scalar>(rows: &[Vec<f64>], cols: usize, what: &str) -> Result<Array2<T>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Artifact(format!("{what}: ragged matrix")));
    }
    Ok(Array2::from_shape_vec(
        (rows.len(), cols),
        rows.iter().flatten().map(|&x| T::of(x)).collect(),
    )
    .expect("shape checked"))
}

impl MaskCheckpoint {
    pub fn from_model<T: Scalar>(model: &FilterModel<T>, config: &FilterConfig) -> Self {
        Self {
            format_version: MASK_FORMAT_VERSION,
            m: model.masks.len(),
            proto_size: model.masks.iter().map(|m| m.node_count).collect(),
            alphabet: model.masks.first().map_or(0, |m| m.alphabet),
            edge_logits: model.masks.iter().map(|m| vec_of(&m.edge_logits)).collect(),
            label_logits: model.masks.iter().map(|m| rows(&m.label_logits)).collect(),
            depth: config.depth,
            r: config.radius,
            samples: config.samples,
            tau: config.tau,
            seed: config.seed,
            head: model
                .head
                .layers
                .iter()
                .map(|l| DenseRecord {
                    w: rows(&l.w),
                    b: vec_of(&l.b),
                })
                .collect(),
            z_mean: vec_of(&model.z_mean),
            z_scale: vec_of(&model.z_scale),
            y_mean: model.y_mean.clone(),
            y_scale: model.y_scale.clone(),
        }
    }

    pub fn masks<T: Scalar>(&self) -> Result<Vec<StructuralMask<T>>> {
        if self.edge_logits.len() != self.m
            || self.label_logits.len() != self.m
            || self.proto_size.len() != self.m
        {
            return Err(Error::Artifact(format!(
                "mask checkpoint lists do not all have m = {} entries",
                self.m
            )));
        }
        (0..self.m)
            .map(|j| {
                let n = self.proto_size[j];
                if self.edge_logits[j].len() != n * n.saturating_sub(1) / 2
                    || self.label_logits[j].len() != n
                {
                    return Err(Error::Artifact(format!(
                        "mask {j} does not match its proto size {n}"
                    )));
                }
                Ok(StructuralMask {
                    node_count: n,
                    alphabet: self.alphabet,
                    edge_logits: self.edge_logits[j].iter().map(|&x| T::of(x)).collect(),
                    label_logits: matrix(&self.label_logits[j], self.alphabet, "label logits")?,
                })
            })
            .collect()
    }

    pub fn model<T: Scalar>(&self) -> Result<FilterModel<T>> {
        let head = Mlp {
            layers: self
                .head
                .iter()
                .map(|d| {
                    let cols = d.b.len();
                    Ok(Dense {
                        w: matrix(&d.w, cols, "head weights")?,
                        b: d.b.iter().map(|&x| T::of(x)).collect(),
                    })
                })
                .collect::<Result<_>>()?,
        };
        Ok(FilterModel {
            masks: self.masks()?,
            head,
            z_mean: self.z_mean.iter().map(|&x| T::of(x)).collect(),
            z_scale: self.z_scale.iter().map(|&x| T::of(x)).collect(),
            y_mean: self.y_mean.clone(),
            y_scale: self.y_scale.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_bytes(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let ck: Self = serde_json::from_slice(&text)
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        if ck.format_version != MASK_FORMAT_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported mask checkpoint version {}",
                ck.format_version
            )));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn round_trip_preserves_parameters() {
        let mut r = rng::stream(0, &[]);
        let model = FilterModel::<f64> {
            masks: vec![
                StructuralMask::init(3, 4, &mut r),
                StructuralMask::init(5, 4, &mut r),
            ],
            head: Mlp::init(&[2, 3, 1], &mut r),
            z_mean: Array1::from(vec![0.1, 0.2]),
            z_scale: Array1::from(vec![1.0, 3.0]),
            y_mean: vec![2.5],
            y_scale: vec![1.5],
        };
        let ck = MaskCheckpoint::from_model(&model, &FilterConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("masks.json");
        ck.save(&p).unwrap();
        let back = MaskCheckpoint::load(&p).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.model::<f64>().unwrap(), model);
    }
}
