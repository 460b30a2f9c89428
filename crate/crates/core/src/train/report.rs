use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::mean_std;
use crate::artifact::write_bytes;
use crate::error::{Error, Result};
use crate::walks::EmbeddingMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Mae,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Mae => "mae",
        }
    }

    /// Whether `a` beats `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Metric::Accuracy => a > b,
            Metric::Mae => a < b,
        }
    }
}

/// Short description of the structural embedding a run used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub method: EmbeddingMethod,
    pub d: usize,
    pub l: usize,
    pub r: usize,
    pub w: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub train_size: usize,
    pub valid_size: usize,
    pub test_size: usize,
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    pub valid_metric: Vec<f64>,
    pub best_epoch: usize,
    pub best_valid_metric: f64,
    pub train_metric: f64,
    pub test_metric: f64,
    /// Contraction stages applied to each graph under hierarchical pooling.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pool_stages: Vec<usize>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub metric: Metric,
    pub units: Option<String>,
    pub protocol: String,
    pub config: ExperimentConfig,
    pub embedding: EmbeddingSummary,
    pub seeds: Vec<SeedReport>,
    pub mean: f64,
    pub std: Option<f64>,
    pub wall_time_secs: f64,
}

impl RunReport {
    pub fn test_metrics(&self) -> Vec<f64> {
        self.seeds.iter().map(|s| s.test_metric).collect()
    }

    /// Recomputes the aggregate from the per-seed metrics.
    pub fn aggregate(&self) -> (f64, Option<f64>) {
        mean_std(&self.test_metrics())
    }

    /// `mean ± std`, or `mean ± n/a` for a single seed.
    pub fn summary(&self) -> String {
        let std = self.std.map_or("n/a".to_string(), |s| format!("{s:.4}"));
        let units = self
            .units
            .as_deref()
            .map(|u| format!(" {u}"))
            .unwrap_or_default();
        format!(
            "{} {:.4} ± {}{} over {} seeds",
            self.metric.name(),
            self.mean,
            std,
            units,
            self.seeds.len()
        )
    }

    /// Same report with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.wall_time_secs = 0.0;
        for s in &mut r.seeds {
            s.wall_time_secs = 0.0;
        }
        r
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "row",
            "seed",
            self.metric.name(),
            "std",
            "best_valid",
            "best_epoch",
            "final_train_loss",
        ])?;
        for s in &self.seeds {
            w.write_record([
                "seed".to_string(),
                s.seed.to_string(),
                s.test_metric.to_string(),
                String::new(),
                s.best_valid_metric.to_string(),
                s.best_epoch.to_string(),
                s.train_loss
                    .last()
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            ])?;
        }
        w.write_record([
            "aggregate".to_string(),
            String::new(),
            self.mean.to_string(),
            self.std.map_or("n/a".to_string(), |s| s.to_string()),
            String::new(),
            String::new(),
            String::new(),
        ])?;
        w.flush().map_err(|e| Error::io("writing report CSV", e))?;
        Ok(())
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        write_bytes(
            &dir.join(format!("{stem}.json")),
            &serde_json::to_vec_pretty(self)?,
        )?;
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        write_bytes(&dir.join(format!("{stem}.csv")), &buf)
    }
}
