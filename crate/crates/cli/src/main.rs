//! `gsat`: structural pretraining, filter learning, GSAT training and sweeps.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "gsat", version, about = "Graph structure attention networks")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed for pretraining and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for seeds and sweep points.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Emit progress and results as line-delimited JSON on stdout.
    #[arg(long, global = true)]
    pub machine: bool,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct DatasetArgs {
    /// TU dataset directory, molecule JSON file, or a name under data/.
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    Gp,
    Hp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportArg {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train anonymous-walk structural embeddings and write the artifact.
    PretrainArw {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        struct_size: Option<usize>,
        #[arg(long)]
        walk_length: Option<usize>,
        #[arg(long)]
        num_rw_per_node: Option<usize>,
    },
    /// Learn structural masks on a regression dataset and write kernel embeddings.
    LearnFilters {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        masks: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train GSAT over the configured seeds and write the run report.
    Train {
        #[command(flatten)]
        data: DatasetArgs,
        /// Expected task; checked against the dataset targets.
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        #[arg(long, value_enum)]
        pooling: Option<PoolingArg>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Number of training seeds (0..n).
        #[arg(long)]
        seeds: Option<u64>,
        /// Structural embedding artifact to use.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Re-embed and retrain along one embedding axis.
    Sweep {
        #[command(flatten)]
        data: DatasetArgs,
        /// struct_size, walk_length or num_rw_per_node.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Write an embedding artifact as a flat CSV or JSON table.
    ExportEmbeddings {
        /// Artifact to export; defaults to the configured one.
        #[arg(long)]
        artifact: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportArg,
    },
}

/// Maps a failure to the documented exit status.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    if let Some(e) = err.downcast_ref::<gsat_core::Error>() {
        return match e {
            gsat_core::Error::Config(_) | gsat_core::Error::EnumerationTooLarge { .. } => 2,
            gsat_core::Error::Numeric(_) | gsat_core::Error::DegenerateWalk { .. } => 4,
            _ => 3,
        };
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
