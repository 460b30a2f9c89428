use std::path::{Path, PathBuf};

use anyhow::Context;
use gsat_core::artifact::{export_embedding, load_embedding, save_embedding, ExportFormat};
use gsat_core::graph::{load_json_molecules, load_tu_dataset, make_splits, Graph, SplitRatios};
use gsat_core::gsat::Task;
use gsat_core::kernels::MaskCheckpoint;
use gsat_core::train::{infer_task, learn_filters, pretrain_arw, run_experiment, sensitivity_sweep, RunReport, SweepAxis};
use gsat_core::walks::EmbeddingMethod;
use serde_json::{json, Value};

use crate::config::{CliConfig, ConfigError, DatasetFormat, MethodName, PoolingName};
use crate::{Cli, Command, DatasetArgs, ExportArg, PoolingArg, TaskArg};

struct Output {
    machine: bool,
}

impl Output {
    /// One NDJSON line in machine mode, a short human line otherwise.
    fn event(&self, kind: &str, fields: Value, human: impl FnOnce() -> String) {
        if self.machine {
            let mut obj = json!({ "event": kind });
            if let (Some(o), Value::Object(f)) = (obj.as_object_mut(), fields) {
                o.extend(f);
            }
            println!("{obj}");
        } else {
            println!("{}", human());
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.runs.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.runs.jobs = Some(j);
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    let out = Output { machine: cli.machine };

    match cli.command {
        Command::PretrainArw { data, struct_size, walk_length, num_rw_per_node } => {
            apply_dataset(&mut cfg, &data);
            cfg.embedding.method = MethodName::Arw;
            set(&mut cfg.embedding.struct_size, struct_size);
            set(&mut cfg.embedding.walk_length, walk_length);
            set(&mut cfg.embedding.num_rw_per_node, num_rw_per_node);
            prepare(&cfg)?;
            pretrain(&cfg, &out)
        }
        Command::LearnFilters { data, masks, epochs } => {
            apply_dataset(&mut cfg, &data);
            cfg.embedding.method = MethodName::Gknn;
            set(&mut cfg.embedding.masks, masks);
            set(&mut cfg.embedding.filter_epochs, epochs);
            prepare(&cfg)?;
            filters(&cfg, &out)
        }
        Command::Train { data, task, pooling, epochs, seeds, artifact } => {
            apply_dataset(&mut cfg, &data);
            if let Some(p) = pooling {
                cfg.model.pooling = match p {
                    PoolingArg::Gp => PoolingName::Gp,
                    PoolingArg::Hp => PoolingName::Hp,
                };
            }
            set(&mut cfg.optimizer.epochs, epochs);
            if let Some(n) = seeds {
                cfg.runs.seeds = (0..n).collect();
            }
            if artifact.is_some() {
                cfg.embedding.artifact = artifact;
            }
            prepare(&cfg)?;
            train(&cfg, task, &out)
        }
        Command::Sweep { data, axis, values, epochs, seeds } => {
            apply_dataset(&mut cfg, &data);
            set(&mut cfg.optimizer.epochs, epochs);
            if let Some(n) = seeds {
                cfg.runs.seeds = (0..n).collect();
            }
            let axis: SweepAxis = axis.parse().map_err(|e: gsat_core::Error| ConfigError(e.to_string()))?;
            if values.is_empty() {
                return Err(ConfigError(format!("--values needs at least one value for axis {axis}")).into());
            }
            prepare(&cfg)?;
            sweep(&cfg, axis, &values, &out)
        }
        Command::ExportEmbeddings { artifact, format } => {
            init_threads(&cfg)?;
            let path = artifact.unwrap_or_else(|| cfg.artifact_path());
            export(&cfg, &path, format, &out)
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_dataset(cfg: &mut CliConfig, data: &DatasetArgs) {
    if let Some(d) = &data.dataset {
        let p = PathBuf::from(d);
        let resolved = if p.exists() {
            p
        } else {
            let under = Path::new("data").join(d);
            if under.exists() {
                under
            } else {
                p
            }
        };
        cfg.dataset.path = Some(resolved);
        cfg.dataset.name = None;
    }
}

fn prepare(cfg: &CliConfig) -> anyhow::Result<()> {
    cfg.validate()?;
    init_threads(cfg)
}

fn init_threads(cfg: &CliConfig) -> anyhow::Result<()> {
    if let Some(j) = cfg.runs.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("starting worker threads")?;
    }
    Ok(())
}

fn load_graphs(cfg: &CliConfig) -> anyhow::Result<Vec<Graph>> {
    let path = cfg.dataset.path.as_ref().ok_or_else(|| ConfigError("dataset.path is required".into()))?;
    let format = cfg.dataset.format.unwrap_or(if path.is_dir() { DatasetFormat::Tu } else { DatasetFormat::Molecules });
    let graphs = match format {
        DatasetFormat::Tu => load_tu_dataset(path, &cfg.dataset_name())?,
        DatasetFormat::Molecules => load_json_molecules(path)?,
    };
    log::info!("loaded {} graphs from {}", graphs.len(), path.display());
    Ok(graphs)
}

fn pretrain(cfg: &CliConfig, out: &Output) -> anyhow::Result<()> {
    let graphs = load_graphs(cfg)?;
    let (emb, summary) = pretrain_arw::<f64>(&graphs, &cfg.embedding.arw(), cfg.runs.seed)?;
    let path = cfg.artifact_path();
    save_embedding(&emb, &path, cfg.artifact_format())?;
    let summary_path = cfg.output.dir.join(format!("{}.arw.summary.json", cfg.dataset_name()));
    write_json(&summary_path, &serde_json::to_value(&summary)?)?;
    out.event(
        "pretrain",
        json!({
            "artifact": path,
            "graphs": emb.graphs.len(),
            "nodes": summary.nodes,
            "vocab_size": summary.vocab_size,
            "epoch_losses": summary.epoch_losses,
            "degenerate": summary.degenerate,
        }),
        || {
            format!(
                "wrote {} ({} graphs, {} nodes, vocabulary {}, final skip-gram loss {:.4})",
                path.display(),
                emb.graphs.len(),
                summary.nodes,
                summary.vocab_size,
                summary.epoch_losses.last().copied().unwrap_or(f64::NAN)
            )
        },
    );
    Ok(())
}

fn split_ratios(cfg: &CliConfig) -> SplitRatios {
    SplitRatios { train: cfg.runs.split[0], valid: cfg.runs.split[1], test: cfg.runs.split[2] }
}

fn filters(cfg: &CliConfig, out: &Output) -> anyhow::Result<()> {
    let graphs = load_graphs(cfg)?;
    if let Task::Classification { .. } = infer_task(&graphs)? {
        return Err(ConfigError(
            "filter learning needs a regression dataset with real-valued targets; this dataset has class labels".into(),
        )
        .into());
    }
    let split = make_splits(&graphs, split_ratios(cfg), cfg.runs.seed, false)?;
    let config = cfg.embedding.filters(cfg.runs.seed);
    let (model, report, emb) = learn_filters::<f64>(&graphs, &split.train, &config)?;
    for (epoch, ((mse, jsd), total)) in
        report.epoch_mse.iter().zip(&report.epoch_jsd).zip(&report.epoch_total).enumerate()
    {
        out.event("filter_epoch", json!({ "epoch": epoch, "mse": mse, "jsd": jsd, "total": total }), || {
            format!("epoch {epoch}: mse {mse:.5} jsd {jsd:.5} total {total:.5}")
        });
    }
    let masks_path = cfg.output.dir.join(format!("{}.masks.json", cfg.dataset_name()));
    MaskCheckpoint::from_model(&model, &config).save(&masks_path)?;
    let path = cfg.artifact_path();
    save_embedding(&emb, &path, cfg.artifact_format())?;
    out.event("filters", json!({ "masks": masks_path, "artifact": path, "mask_count": model.masks.len() }), || {
        format!("wrote {} ({} masks) and {}", masks_path.display(), model.masks.len(), path.display())
    });
    Ok(())
}

fn load_artifact(cfg: &CliConfig, path: &Path) -> anyhow::Result<gsat_core::walks::StructuralEmbedding> {
    if !path.exists() {
        let cmd = match cfg.embedding.method {
            MethodName::Arw => "gsat pretrain-arw",
            MethodName::Gknn => "gsat learn-filters",
        };
        return Err(gsat_core::Error::MissingEmbedding(format!(
            "no structural embedding at {}; run `{cmd}` with the same config first",
            path.display()
        ))
        .into());
    }
    Ok(load_embedding(path)?)
}

fn train(cfg: &CliConfig, task: Option<TaskArg>, out: &Output) -> anyhow::Result<()> {
    let graphs = load_graphs(cfg)?;
    let found = infer_task(&graphs)?;
    match (task, found) {
        (Some(TaskArg::Classification), Task::Regression { .. }) | (Some(TaskArg::Regression), Task::Classification { .. }) => {
            return Err(ConfigError(format!("--task does not match the dataset targets ({found:?})")).into());
        }
        _ => {}
    }
    let path = cfg.artifact_path();
    let emb = load_artifact(cfg, &path)?;
    if emb.meta.method == EmbeddingMethod::Gknn && cfg.embedding.method == MethodName::Arw && cfg.embedding.artifact.is_none() {
        log::warn!("artifact {} holds kernel embeddings", path.display());
    }
    let report = run_experiment::<f64>(&graphs, &emb, &cfg.experiment())?;
    for s in &report.seeds {
        out.event(
            "seed",
            json!({ "seed": s.seed, "test": s.test_metric, "best_valid": s.best_valid_metric, "best_epoch": s.best_epoch }),
            || format!("seed {}: test {} {:.4} (best epoch {})", s.seed, report.metric.name(), s.test_metric, s.best_epoch),
        );
    }
    if cfg.model.pooling == PoolingName::Hp {
        report_stage_counts(&graphs, &report, out);
    }
    let pooling = match cfg.model.pooling {
        PoolingName::Gp => "gp",
        PoolingName::Hp => "hp",
    };
    let stem = format!("{}_{pooling}_report", cfg.dataset_name());
    report.save(&cfg.output.dir, &stem)?;
    out.event(
        "report",
        json!({ "metric": report.metric.name(), "mean": report.mean, "std": report.std, "units": report.units,
                "seeds": report.seeds.len(), "path": cfg.output.dir.join(format!("{stem}.json")) }),
        || format!("{} ({})", report.summary(), cfg.output.dir.join(format!("{stem}.json")).display()),
    );
    Ok(())
}

fn report_stage_counts(graphs: &[Graph], report: &RunReport, out: &Output) {
    let Some(first) = report.seeds.first() else { return };
    let bound = |n: usize| (n.max(1) as f64).log2().ceil() as usize + 1;
    let over: Vec<usize> =
        (0..graphs.len()).filter(|&i| first.pool_stages.get(i).is_some_and(|&s| s > bound(graphs[i].node_count()))).collect();
    let max = first.pool_stages.iter().copied().max().unwrap_or(0);
    out.event("pool_stages", json!({ "max": max, "over_log_bound": over.len(), "per_graph": first.pool_stages }), || {
        format!("pooling stages: max {max}, {} graphs above ceil(log2 n)+1", over.len())
    });
}

fn sweep(cfg: &CliConfig, axis: SweepAxis, values: &[usize], out: &Output) -> anyhow::Result<()> {
    let graphs = load_graphs(cfg)?;
    let table = sensitivity_sweep::<f64>(&graphs, &cfg.embedding.arw(), &cfg.experiment(), axis, values, cfg.runs.seed)?;
    for row in &table.rows {
        out.event(
            "sweep_point",
            json!({ "axis": axis.name(), "settings": row.settings, "mean": row.report.mean, "std": row.report.std }),
            || format!("{axis}: d={} l={} r={} -> {}", row.settings.d, row.settings.l, row.settings.r, row.report.summary()),
        );
    }
    let stem = format!("{}_sweep_{}", cfg.dataset_name(), axis.name());
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    std::fs::create_dir_all(&cfg.output.dir).map_err(|e| gsat_core::Error::io(cfg.output.dir.display().to_string(), e))?;
    let csv_path = cfg.output.dir.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, csv).map_err(|e| gsat_core::Error::io(csv_path.display().to_string(), e))?;
    write_json(&cfg.output.dir.join(format!("{stem}.json")), &serde_json::to_value(&table)?)?;
    out.event("sweep", json!({ "path": csv_path, "rows": table.rows.len() }), || {
        format!("wrote {} ({} rows)", csv_path.display(), table.rows.len())
    });
    Ok(())
}

fn export(cfg: &CliConfig, path: &Path, format: ExportArg, out: &Output) -> anyhow::Result<()> {
    let emb = load_embedding(path)?;
    let (fmt, ext) = match format {
        ExportArg::Csv => (ExportFormat::Csv, "csv"),
        ExportArg::Json => (ExportFormat::Json, "json"),
    };
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "embedding".into());
    let target = cfg.output.dir.join(format!("{stem}.export.{ext}"));
    let mut buf = Vec::new();
    export_embedding(&emb, &mut buf, fmt)?;
    std::fs::create_dir_all(&cfg.output.dir).map_err(|e| gsat_core::Error::io(cfg.output.dir.display().to_string(), e))?;
    std::fs::write(&target, buf).map_err(|e| gsat_core::Error::io(target.display().to_string(), e))?;
    out.event("export", json!({ "path": target, "graphs": emb.graphs.len(), "d": emb.dim() }), || {
        format!("wrote {}", target.display())
    });
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| gsat_core::Error::io(dir.display().to_string(), e))?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(value)?).map_err(|e| gsat_core::Error::io(path.display().to_string(), e))?;
    Ok(())
}
