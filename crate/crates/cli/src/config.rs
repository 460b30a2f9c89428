use std::path::{Path, PathBuf};

use gsat_core::artifact::ArtifactFormat;
use gsat_core::graph::SplitRatios;
use gsat_core::gsat::{AttentionActivation, GsatConfig, LayerOptions, Pooling};
use gsat_core::kernels::FilterConfig;
use gsat_core::nn::Activation;
use gsat_core::train::{ArwSettings, ExperimentConfig, OptimizerSettings};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub dataset: DatasetSection,
    pub embedding: EmbeddingSection,
    pub model: ModelSection,
    pub optimizer: OptimizerSettings,
    pub runs: RunsSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// TU benchmark text files in a directory.
    Tu,
    /// JSON list of molecule records.
    Molecules,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Directory of a TU dataset or a molecule JSON file. A bare name such as
    /// `MUTAG` is looked up under `data/`.
    pub path: Option<PathBuf>,
    /// Dataset name; defaults to the last path component.
    pub name: Option<String>,
    /// Inferred from the path when absent.
    pub format: Option<DatasetFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Arw,
    Gknn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingSection {
    pub method: MethodName,
    /// Where the structural embedding artifact lives; defaults to
    /// `<out>/<dataset>.<method>.gsatemb`.
    pub artifact: Option<PathBuf>,
    pub struct_size: usize,
    pub walk_length: usize,
    pub num_rw_per_node: usize,
    pub window: usize,
    pub negatives: usize,
    pub skipgram_epochs: usize,
    pub skipgram_lr: f64,
    pub masks: usize,
    pub proto_sizes: Vec<usize>,
    pub radius: usize,
    pub wl_depth: usize,
    pub samples: usize,
    pub tau: f64,
    pub filter_epochs: usize,
    pub filter_lr: f64,
    pub filter_batch_size: usize,
    pub filter_hidden: usize,
    pub jsd_weight: f64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let a = ArwSettings::default();
        let f = FilterConfig::default();
        Self {
            method: MethodName::Arw,
            artifact: None,
            struct_size: a.d,
            walk_length: a.l,
            num_rw_per_node: a.r,
            window: a.w,
            negatives: a.negatives,
            skipgram_epochs: a.epochs,
            skipgram_lr: a.lr,
            masks: f.masks,
            proto_sizes: f.proto_sizes,
            radius: f.radius,
            wl_depth: f.depth,
            samples: f.samples,
            tau: f.tau,
            filter_epochs: f.epochs,
            filter_lr: f.lr,
            filter_batch_size: f.batch_size,
            filter_hidden: f.hidden,
            jsd_weight: f.jsd_weight,
        }
    }
}

impl EmbeddingSection {
    pub fn arw(&self) -> ArwSettings {
        ArwSettings {
            d: self.struct_size,
            l: self.walk_length,
            r: self.num_rw_per_node,
            w: self.window,
            negatives: self.negatives,
            epochs: self.skipgram_epochs,
            lr: self.skipgram_lr,
        }
    }

    pub fn filters(&self, seed: u64) -> FilterConfig {
        FilterConfig {
            masks: self.masks,
            proto_sizes: self.proto_sizes.clone(),
            radius: self.radius,
            depth: self.wl_depth,
            samples: self.samples,
            tau: self.tau,
            epochs: self.filter_epochs,
            lr: self.filter_lr,
            batch_size: self.filter_batch_size,
            hidden: self.filter_hidden,
            jsd_weight: self.jsd_weight,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingName {
    Gp,
    Hp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionName {
    Relu,
    LeakyRelu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub pooling: PoolingName,
    pub max_pool_stages: usize,
    pub attention: AttentionName,
    pub message: Activation,
}

impl Default for ModelSection {
    fn default() -> Self {
        let g = GsatConfig::default();
        Self {
            layers: g.layers,
            heads: g.heads,
            hidden: g.hidden,
            pooling: PoolingName::Gp,
            max_pool_stages: 14,
            attention: AttentionName::Relu,
            message: Activation::Identity,
        }
    }
}

impl ModelSection {
    pub fn gsat(&self) -> GsatConfig {
        GsatConfig {
            layers: self.layers,
            heads: self.heads,
            hidden: self.hidden,
            pooling: match self.pooling {
                PoolingName::Gp => Pooling::Global,
                PoolingName::Hp => Pooling::Hierarchical { max_stages: self.max_pool_stages },
            },
            layer: LayerOptions {
                attention: match self.attention {
                    AttentionName::Relu => AttentionActivation::Relu,
                    AttentionName::LeakyRelu => AttentionActivation::LeakyRelu(0.2),
                },
                message: self.message,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunsSection {
    /// Root seed for embedding pretraining, filter learning and sampling.
    pub seed: u64,
    /// Training seeds; each gets its own split and initialisation.
    pub seeds: Vec<u64>,
    pub jobs: Option<usize>,
    pub stratified: bool,
    pub split: [f64; 3],
    pub units: Option<String>,
}

impl Default for RunsSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self { seed: 0, seeds: e.seeds, jobs: None, stratified: e.stratified, split: [0.8, 0.1, 0.1], units: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactName {
    Binary,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub artifact_format: ArtifactName,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), artifact_format: ArtifactName::Binary }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            model: self.model.gsat(),
            optimizer: self.optimizer,
            seeds: self.runs.seeds.clone(),
            split: SplitRatios { train: self.runs.split[0], valid: self.runs.split[1], test: self.runs.split[2] },
            stratified: self.runs.stratified,
            units: self.runs.units.clone(),
        }
    }

    pub fn dataset_name(&self) -> String {
        self.dataset
            .name
            .clone()
            .or_else(|| {
                self.dataset
                    .path
                    .as_ref()
                    .and_then(|p| p.file_stem())
                    .map(|s| s.to_string_lossy().into_owned())
            })
            .unwrap_or_else(|| "dataset".into())
    }

    pub fn artifact_format(&self) -> ArtifactFormat {
        match self.output.artifact_format {
            ArtifactName::Binary => ArtifactFormat::Binary,
            ArtifactName::Json => ArtifactFormat::Json,
        }
    }

    pub fn artifact_path(&self) -> PathBuf {
        self.embedding.artifact.clone().unwrap_or_else(|| {
            let method = match self.embedding.method {
                MethodName::Arw => "arw",
                MethodName::Gknn => "gknn",
            };
            let ext = match self.output.artifact_format {
                ArtifactName::Binary => "gsatemb",
                ArtifactName::Json => "json",
            };
            self.output.dir.join(format!("{}.{method}.{ext}", self.dataset_name()))
        })
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> anyhow::Result<()> {
        let bad = |msg: String| -> anyhow::Result<()> { Err(ConfigError(msg).into()) };
        if self.dataset.path.is_none() {
            return bad("dataset.path is required (set it in the config or pass --dataset)".into());
        }
        match self.embedding.method {
            MethodName::Arw => self.embedding.arw().validate().map_err(|e| ConfigError(e.to_string()))?,
            MethodName::Gknn => self.embedding.filters(self.runs.seed).validate().map_err(|e| ConfigError(e.to_string()))?,
        }
        self.experiment().validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.runs.jobs == Some(0) {
            return bad("runs.jobs must be at least 1".into());
        }
        if self.runs.split.iter().any(|&x| !(x >= 0.0)) || self.runs.split.iter().sum::<f64>() <= 0.0 {
            return bad(format!("runs.split must be non-negative with a positive sum, got {:?}", self.runs.split));
        }
        Ok(())
    }
}

/// Invalid configuration; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = toml::from_str::<CliConfig>("[model]\nheadz = 3\n").unwrap_err().to_string();
        assert!(err.contains("headz"), "{err}");
    }

    #[test]
    fn wrong_types_name_the_key() {
        let err = toml::from_str::<CliConfig>("[embedding]\nstruct_size = \"big\"\n").unwrap_err().to_string();
        assert!(err.contains("struct_size"), "{err}");
    }

    #[test]
    fn defaults_round_trip() {
        let c = CliConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<CliConfig>(&text).unwrap(), c);
    }

    #[test]
    fn artifact_path_follows_dataset_and_method() {
        let mut c = CliConfig::default();
        c.dataset.path = Some(PathBuf::from("data/MUTAG"));
        assert_eq!(c.artifact_path(), PathBuf::from("out/MUTAG.arw.gsatemb"));
        c.embedding.method = MethodName::Gknn;
        c.output.artifact_format = ArtifactName::Json;
        assert_eq!(c.artifact_path(), PathBuf::from("out/MUTAG.gknn.json"));
    }
}
