use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::{accuracy, mae, mean_std};
use super::report::{EmbeddingSummary, Metric, RunReport, SeedReport};
use crate::error::{Error, Result};
use crate::graph::{make_splits, DatasetSplit, Graph, Target};
use crate::gsat::{GraphInput, GsatModel, Pooling, Task};
use crate::nn::{Adam, AdamConfig, Parameters};
use crate::rng;
use crate::scalar::Scalar;
use crate::walks::StructuralEmbedding;

/// Gradient partial sums per mini-batch.
const GRAD_CHUNKS: usize = 4;

/// Infers the task from the graph targets.
pub fn infer_task(graphs: &[Graph]) -> Result<Task> {
    let mut classes = 0usize;
    let mut dims: Option<usize> = None;
    for (i, g) in graphs.iter().enumerate() {
        match g.target() {
            Some(Target::Class(c)) => classes = classes.max(c + 1),
            Some(Target::Values(v)) => {
                if dims.is_some_and(|d| d != v.len()) || v.is_empty() {
                    return Err(Error::Schema(format!(
                        "graph {i} has {} target values, expected {:?}",
                        v.len(),
                        dims
                    )));
                }
                dims = Some(v.len());
            }
            None => return Err(Error::Schema(format!("graph {i} has no target"))),
        }
    }
    match (classes, dims) {
        (c, None) if c >= 2 => Ok(Task::Classification { classes: c }),
        (0, Some(d)) => Ok(Task::Regression { targets: d }),
        (1, None) => Err(Error::Schema(
            "classification needs at least two classes".into(),
        )),
        _ => Err(Error::Schema(
            "dataset mixes class labels and regression targets".into(),
        )),
    }
}

/// Size of the one-hot node-label alphabet used as original features.
pub fn label_alphabet(graphs: &[Graph]) -> usize {
    graphs
        .iter()
        .flat_map(|g| g.node_labels().iter())
        .map(|&l| l as usize + 1)
        .max()
        .unwrap_or(1)
}

/// Graphs paired with their frozen structural rows and derived features.
pub struct PreparedData<'a> {
    pub graphs: &'a [Graph],
    pub features: Vec<Array2<f64>>,
    pub structural: Vec<&'a Array2<f64>>,
    pub task: Task,
    pub embedding: EmbeddingSummary,
}

impl<'a> PreparedData<'a> {
    pub fn new(graphs: &'a [Graph], embedding: &'a StructuralEmbedding) -> Result<Self> {
        if embedding.graphs.len() != graphs.len() {
            return Err(Error::MissingEmbedding(format!(
                "embedding covers {} graphs but the dataset has {}; re-run the pretraining step on this dataset",
                embedding.graphs.len(),
                graphs.len()
            )));
        }
        let task = infer_task(graphs)?;
        let alphabet = label_alphabet(graphs);
        let features = graphs.iter().map(|g| g.feature_matrix(alphabet)).collect();
        let structural = graphs
            .iter()
            .enumerate()
            .map(|(i, g)| embedding.check_graph(i, g.node_count()))
            .collect::<Result<_>>()?;
        let m = &embedding.meta;
        Ok(Self {
            graphs,
            features,
            structural,
            task,
            embedding: EmbeddingSummary {
                method: m.method,
                d: m.d,
                l: m.l,
                r: m.r,
                w: m.w,
                seed: m.seed,
            },
        })
    }

    pub fn metric(&self) -> Metric {
        match self.task {
            Task::Classification { .. } => Metric::Accuracy,
            Task::Regression { .. } => Metric::Mae,
        }
    }

    fn feature_dim(&self) -> usize {
        self.features.first().map_or(1, |x| x.ncols())
    }

    fn structural_dim(&self) -> usize {
        self.structural.first().map_or(0, |x| x.ncols())
    }
}

/// Metric and mean loss of `model` over `idx`.
pub fn evaluate<T: Scalar>(
    model: &GsatModel<T>,
    data: &PreparedData,
    inputs: &[GraphInput<T>],
    idx: &[usize],
) -> Result<(f64, f64)> {
    let outs: Vec<(Vec<f64>, f64)> = idx
        .par_iter()
        .map(|&i| {
            let g = &data.graphs[i];
            let target = g.target().expect("checked at load");
            let fwd = model.forward(g, &inputs[i])?;
            let pred = model.output_to_prediction(&fwd.output);
            let loss = model.loss(g, &inputs[i], target)?.to_f64_lossy();
            Ok((pred, loss))
        })
        .collect::<Result<_>>()?;
    let loss = outs.iter().map(|o| o.1).sum::<f64>() / outs.len().max(1) as f64;
    let preds: Vec<Vec<f64>> = outs.into_iter().map(|o| o.0).collect();
    let metric = match model.task {
        Task::Classification { .. } => {
            let classes: Vec<usize> = idx
                .iter()
                .map(|&i| data.graphs[i].class().expect("class target"))
                .collect();
            accuracy(&preds, &classes)?
        }
        Task::Regression { .. } => {
            let ys: Vec<Vec<f64>> = idx
                .iter()
                .map(|&i| match data.graphs[i].target() {
                    Some(Target::Values(v)) => v.clone(),
                    _ => unreachable!("regression targets checked at load"),
                })
                .collect();
            mae(&preds, &ys)?
        }
    };
    Ok((metric, loss))
}

fn refresh_readout_stats<T: Scalar>(
    model: &mut GsatModel<T>,
    data: &PreparedData,
    inputs: &[GraphInput<T>],
    idx: &[usize],
) -> Result<()> {
    let readouts: Vec<Array1<f64>> = idx
        .par_iter()
        .map(|&i| {
            model
                .forward(&data.graphs[i], &inputs[i])
                .map(|f| f.readout.mapv(|v| v.to_f64_lossy()))
        })
        .collect::<Result<_>>()?;
    model.fit_readout_stats(&readouts);
    Ok(())
}

/// Trains one model on `split` and reports its best-validation checkpoint.
pub fn train_seed<T: Scalar>(
    data: &PreparedData,
    config: &ExperimentConfig,
    seed: u64,
    split: &DatasetSplit,
) -> Result<(GsatModel<T>, SeedReport)> {
    let start = Instant::now();
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let mut model = GsatModel::<T>::new(
        data.task,
        &config.model,
        data.structural_dim(),
        data.feature_dim(),
        &mut rng::stream(seed, &[0x65a7, 0]),
    )?;
    model.fit_structural_stats(split.train.iter().map(|&i| data.structural[i]));
    let train_targets: Vec<&[f64]> = split
        .train
        .iter()
        .filter_map(|&i| match data.graphs[i].target() {
            Some(Target::Values(v)) => Some(v.as_slice()),
            _ => None,
        })
        .collect();
    model.fit_target_stats(train_targets);
    let inputs: Vec<GraphInput<T>> = (0..data.graphs.len())
        .map(|i| model.prepare(&data.graphs[i], &data.features[i], data.structural[i]))
        .collect::<Result<_>>()?;

    let metric = data.metric();
    let opt = &config.optimizer;
    let mut adam = Adam::<T>::new(
        AdamConfig {
            lr: opt.lr,
            ..Default::default()
        },
        model.param_count(),
    );
    let eval_idx = if split.valid.is_empty() {
        &split.train
    } else {
        &split.valid
    };
    let mut order = split.train.clone();
    let mut train_loss = Vec::with_capacity(opt.epochs);
    let mut valid_metric = Vec::with_capacity(opt.epochs);
    let mut best: Option<(f64, f64, usize, GsatModel<T>)> = None;
    for epoch in 0..opt.epochs {
        order.shuffle(&mut rng::stream(seed, &[0x65a7, 1, epoch as u64]));
        refresh_readout_stats(&mut model, data, &inputs, &split.train)?;
        let lr = opt.lr_at(epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(opt.batch_size) {
            // Fixed chunking keeps the summation order independent of the
            // number of worker threads.
            let chunk = batch.len().div_ceil(GRAD_CHUNKS);
            let parts: Vec<(f64, GsatModel<T>)> = batch
                .par_chunks(chunk)
                .map(|graphs| {
                    let mut grad = model.zeros_like();
                    let mut loss = 0.0;
                    for &i in graphs {
                        let g = &data.graphs[i];
                        let target = g.target().expect("checked at load");
                        loss += model
                            .loss_grad(g, &inputs[i], target, &mut grad)?
                            .to_f64_lossy();
                    }
                    Ok((loss, grad))
                })
                .collect::<Result<_>>()?;
            let mut parts = parts.into_iter();
            let (first_loss, mut grad) = parts.next().expect("non-empty batch");
            epoch_loss += first_loss;
            for (loss, g) in parts {
                epoch_loss += loss;
                grad.accumulate(&g, T::one());
            }
            grad.scale(T::of(1.0 / batch.len() as f64));
            if !grad.all_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at epoch {epoch}, seed {seed}"
                )));
            }
            adam.step(&mut model, &grad, lr);
            if !model.all_finite() {
                return Err(Error::Numeric(format!(
                    "parameters became non-finite at epoch {epoch}, seed {seed}"
                )));
            }
        }
        train_loss.push(epoch_loss / order.len() as f64);
        let (m, vloss) = evaluate(&model, data, &inputs, eval_idx)?;
        valid_metric.push(m);
        log::debug!(
            "seed {seed} epoch {epoch}: loss {:.5} valid {} {:.4}",
            train_loss[epoch],
            metric.name(),
            m
        );
        let improves = match &best {
            None => true,
            Some((bm, bl, _, _)) => metric.better(m, *bm) || (m == *bm && vloss < *bl),
        };
        if improves {
            best = Some((m, vloss, epoch, model.clone()));
        }
    }
    let (best_valid_metric, _, best_epoch, model) = best.expect("at least one epoch");
    let (train_metric, _) = evaluate(&model, data, &inputs, &split.train)?;
    let test_metric = if split.test.is_empty() {
        f64::NAN
    } else {
        evaluate(&model, data, &inputs, &split.test)?.0
    };
    let pool_stages = match model.pooling {
        Pooling::Global => Vec::new(),
        Pooling::Hierarchical { .. } => data
            .graphs
            .iter()
            .zip(&inputs)
            .map(|(g, x)| model.forward(g, x).map(|f| f.pool_stages))
            .collect::<Result<_>>()?,
    };
    let report = SeedReport {
        seed,
        train_size: split.train.len(),
        valid_size: split.valid.len(),
        test_size: split.test.len(),
        train_loss,
        valid_metric,
        best_epoch,
        best_valid_metric,
        train_metric,
        test_metric,
        pool_stages,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Trains one model per configured seed, each on its own split, and
/// aggregates the test metric. Seeds run in parallel; results are identical
/// to a sequential run.
pub fn run_experiment<T: Scalar>(
    graphs: &[Graph],
    embedding: &StructuralEmbedding,
    config: &ExperimentConfig,
) -> Result<RunReport> {
    let start = Instant::now();
    config.validate()?;
    let data = PreparedData::new(graphs, embedding)?;
    let stratified = config.stratified && matches!(data.task, Task::Classification { .. });
    let seeds: Vec<SeedReport> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let split = make_splits(graphs, config.split, seed, stratified)?;
            let (_, report) = train_seed::<T>(&data, config, seed, &split)?;
            log::info!(
                "seed {seed}: test {} {:.4}",
                data.metric().name(),
                report.test_metric
            );
            Ok(report)
        })
        .collect::<Result<_>>()?;
    let (mean, std) = mean_std(&seeds.iter().map(|s| s.test_metric).collect::<Vec<_>>());
    Ok(RunReport {
        task: match data.task {
            Task::Classification { .. } => "classification".into(),
            Task::Regression { .. } => "regression".into(),
        },
        metric: data.metric(),
        units: config.units.clone(),
        protocol: config.protocol(),
        config: config.clone(),
        embedding: data.embedding.clone(),
        seeds,
        mean,
        std,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn train_classification<T: Scalar>(
    graphs: &[Graph],
    embedding: &StructuralEmbedding,
    config: &ExperimentConfig,
) -> Result<RunReport> {
    match infer_task(graphs)? {
        Task::Classification { .. } => run_experiment::<T>(graphs, embedding, config),
        Task::Regression { .. } => Err(Error::Config(
            "dataset has regression targets, not class labels".into(),
        )),
    }
}

pub fn train_regression<T: Scalar>(
    graphs: &[Graph],
    embedding: &StructuralEmbedding,
    config: &ExperimentConfig,
) -> Result<RunReport> {
    match infer_task(graphs)? {
        Task::Regression { .. } => run_experiment::<T>(graphs, embedding, config),
        Task::Classification { .. } => Err(Error::Config(
            "dataset has class labels, not regression targets".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::{EmbeddingMeta, EmbeddingMethod, EMBEDDING_FORMAT_VERSION};
    use rand::Rng;

    fn ring(n: usize, label: u32, target: Target) -> Graph {
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)), vec![label; n])
            .unwrap()
            .with_target(target)
    }

    fn random_embedding(graphs: &[Graph], d: usize) -> StructuralEmbedding {
        let mut r = rng::stream(11, &[]);
        StructuralEmbedding {
            meta: EmbeddingMeta {
                format_version: EMBEDDING_FORMAT_VERSION,
                method: EmbeddingMethod::Arw,
                l: 4,
                r: 1,
                w: 1,
                d,
                seed: 11,
                vocab: Vec::new(),
                kernel: None,
            },
            graphs: graphs
                .iter()
                .map(|g| Array2::from_shape_fn((g.node_count(), d), |_| r.random_range(-1.0..1.0)))
                .collect(),
        }
    }

    fn small_config(epochs: usize, lr: f64) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.model.hidden = 8;
        c.model.heads = 2;
        c.optimizer.epochs = epochs;
        c.optimizer.lr = lr;
        c.optimizer.batch_size = 8;
        c.seeds = vec![0, 1];
        c
    }

    fn labelled_rings(count: usize) -> Vec<Graph> {
        (0..count)
            .map(|i| ring(4 + i % 5, (i % 2) as u32, Target::Class(i % 2)))
            .collect()
    }

    #[test]
    fn task_inference() {
        assert_eq!(
            infer_task(&labelled_rings(4)).unwrap(),
            Task::Classification { classes: 2 }
        );
        let reg = vec![ring(3, 0, Target::Values(vec![1.0, 2.0]))];
        assert_eq!(infer_task(&reg).unwrap(), Task::Regression { targets: 2 });
        let mixed = vec![
            ring(3, 0, Target::Class(1)),
            ring(3, 0, Target::Values(vec![1.0])),
        ];
        assert!(infer_task(&mixed).is_err());
    }

    #[test]
    fn reruns_are_identical() {
        let graphs = labelled_rings(30);
        let emb = random_embedding(&graphs, 4);
        let cfg = small_config(3, 1e-2);
        let a = run_experiment::<f64>(&graphs, &emb, &cfg).unwrap();
        let b = run_experiment::<f64>(&graphs, &emb, &cfg).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
    }

    #[test]
    fn overfits_a_small_separable_set() {
        let graphs = labelled_rings(20);
        let emb = random_embedding(&graphs, 4);
        let cfg = small_config(100, 1e-2);
        let data = PreparedData::new(&graphs, &emb).unwrap();
        let all: Vec<usize> = (0..20).collect();
        let split = DatasetSplit {
            train: all.clone(),
            valid: all,
            test: Vec::new(),
            seed: 0,
            stratified: false,
        };
        let (_, report) = train_seed::<f64>(&data, &cfg, 0, &split).unwrap();
        assert!(
            report.train_metric >= 0.95,
            "train accuracy {}",
            report.train_metric
        );
        assert!(report.train_loss.last().unwrap() < &report.train_loss[0]);
    }

    #[test]
    fn constant_target_is_recovered() {
        let graphs: Vec<Graph> = (0..30)
            .map(|i| ring(3 + i % 4, 0, Target::Values(vec![2.5])))
            .collect();
        let emb = random_embedding(&graphs, 3);
        let report = run_experiment::<f64>(&graphs, &emb, &small_config(5, 1e-2)).unwrap();
        assert_eq!(report.metric, Metric::Mae);
        assert!(report.mean < 0.05, "MAE {}", report.mean);
    }

    #[test]
    fn untrained_classifier_is_near_uniform() {
        let graphs = labelled_rings(20);
        let emb = random_embedding(&graphs, 4);
        let data = PreparedData::new(&graphs, &emb).unwrap();
        let model = GsatModel::<f64>::new(
            data.task,
            &small_config(1, 1e-3).model,
            4,
            2,
            &mut rng::stream(0, &[]),
        )
        .unwrap();
        let inputs: Vec<_> = (0..20)
            .map(|i| {
                model
                    .prepare(&graphs[i], &data.features[i], data.structural[i])
                    .unwrap()
            })
            .collect();
        let (_, loss) = evaluate(&model, &data, &inputs, &(0..20).collect::<Vec<_>>()).unwrap();
        assert!((loss - 2f64.ln()).abs() < 0.5, "initial loss {loss}");
    }

    #[test]
    fn aggregate_matches_seed_metrics() {
        let graphs = labelled_rings(30);
        let emb = random_embedding(&graphs, 4);
        let mut cfg = small_config(2, 1e-2);
        cfg.seeds = vec![3, 4, 5];
        let r = run_experiment::<f64>(&graphs, &emb, &cfg).unwrap();
        let t = r.test_metrics();
        let mean = t.iter().sum::<f64>() / 3.0;
        let std = (t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!((r.mean - mean).abs() < 1e-12);
        assert!((r.std.unwrap() - std).abs() < 1e-12);
    }

    #[test]
    fn wrong_task_is_rejected() {
        let graphs = labelled_rings(12);
        let emb = random_embedding(&graphs, 2);
        assert!(
            train_regression::<f64>(&graphs, &emb, &small_config(1, 1e-3))
                .unwrap_err()
                .is_config()
        );
    }
}
