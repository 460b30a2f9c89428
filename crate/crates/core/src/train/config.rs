use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SplitRatios;
use crate::gsat::GsatConfig;
use crate::walks::SkipGramConfig;

/// Anonymous-walk pretraining settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArwSettings {
    /// Structural embedding width.
    pub d: usize,
    /// Walk length in steps.
    pub l: usize,
    /// Walks sampled per node.
    pub r: usize,
    /// Skip-gram window.
    pub w: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for ArwSettings {
    fn default() -> Self {
        Self {
            d: 50,
            l: 10,
            r: 30,
            w: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
        }
    }
}

impl ArwSettings {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.l == 0 || self.r == 0 || self.w == 0 || self.epochs == 0 {
            return Err(Error::Config(format!(
                "embedding settings must be positive (d = {}, l = {}, r = {}, w = {}, epochs = {})",
                self.d, self.l, self.r, self.w, self.epochs
            )));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "skip-gram learning rate must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }

    pub fn skipgram(&self, seed: u64) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.d,
            window: self.w,
            negatives: self.negatives,
            epochs: self.epochs,
            lr: self.lr,
            seed,
        }
    }
}

/// Adam with a step-decay schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub lr: f64,
    /// Factor applied to the learning rate every `step_epochs` epochs.
    pub decay: f64,
    pub step_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            decay: 0.1,
            step_epochs: 20,
            epochs: 100,
            batch_size: 32,
        }
    }
}

impl OptimizerSettings {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.decay.powi((epoch / self.step_epochs) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 || self.step_epochs == 0 {
            return Err(Error::Config(
                "batch_size and step_epochs must be positive".into(),
            ));
        }
        if !(self.lr > 0.0) || !(self.decay > 0.0) {
            return Err(Error::Config(format!(
                "lr and decay must be positive, got {} and {}",
                self.lr, self.decay
            )));
        }
        Ok(())
    }
}

/// Everything needed to train and evaluate GSAT over a list of seeds once
/// structural embeddings exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: GsatConfig,
    pub optimizer: OptimizerSettings,
    pub seeds: Vec<u64>,
    pub split: SplitRatios,
    pub stratified: bool,
    /// Unit label of the regression metric, echoed in reports.
    pub units: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: GsatConfig::default(),
            optimizer: OptimizerSettings::default(),
            seeds: (0..10).collect(),
            split: SplitRatios::default(),
            stratified: true,
            units: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.optimizer.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn protocol(&self) -> String {
        format!(
            "{} {}/{}/{} split per seed, checkpoint with best validation metric",
            if self.stratified {
                "stratified"
            } else {
                "random"
            },
            self.split.train,
            self.split.valid,
            self.split.test
        )
    }
}
