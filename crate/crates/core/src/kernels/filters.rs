use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jsd::jsd_loss_grad;
use super::mask::{relax, relax_backward, sample_noise, MaskNoise, RelaxedMask, StructuralMask};
use super::relaxed::{RelaxedForward, RelaxedWlPlan};
use super::response::{neighborhood_histograms, responses, responses_backward, NeighborhoodIndex};
use super::wl::WlDictionary;
use crate::error::{Error, Result};
use crate::graph::{Graph, Target};
use crate::nn::{Adam, AdamConfig, Mlp, Parameters};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub masks: usize,
    /// Node counts of the masks, assigned round-robin.
    pub proto_sizes: Vec<usize>,
    pub radius: usize,
    pub depth: usize,
    pub samples: usize,
    pub tau: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub hidden: usize,
    /// Weight of the divergence term relative to the squared error.
    pub jsd_weight: f64,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            masks: 16,
            proto_sizes: vec![5, 6, 7, 8],
            radius: 2,
            depth: 2,
            samples: 8,
            tau: 1.0,
            epochs: 30,
            lr: 0.01,
            batch_size: 32,
            hidden: 32,
            jsd_weight: 1.0,
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.masks == 0 {
            return bad("filter learning needs at least one mask");
        }
        if self.proto_sizes.is_empty() || self.proto_sizes.contains(&0) {
            return bad("proto sizes must be a non-empty list of positive node counts");
        }
        if self.samples == 0 || self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return bad("samples, epochs, batch size and hidden width must be positive");
        }
        if !(self.tau > 0.0) || !(self.lr > 0.0) || !(self.jsd_weight >= 0.0) {
            return bad("tau and lr must be positive and the divergence weight non-negative");
        }
        Ok(())
    }
}

/// Learned masks and the per-node readout used to supervise them.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel<T: Scalar> {
    pub masks: Vec<StructuralMask<T>>,
    pub head: Mlp<T>,
    /// Per-mask response centring and scaling fed to the head.
    pub z_mean: Array1<T>,
    pub z_scale: Array1<T>,
    pub y_mean: Vec<f64>,
    pub y_scale: Vec<f64>,
}

impl<T: Scalar> Parameters<T> for FilterModel<T> {
    fn visit(&self, f: &mut dyn FnMut(&[T])) {
        for m in &self.masks {
            m.visit(f);
        }
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        for m in &mut self.masks {
            m.visit_mut(f);
        }
        self.head.visit_mut(f);
    }
}

impl<T: Scalar> FilterModel<T> {
    fn zeros_like(&self) -> Self {
        Self {
            masks: self.masks.iter().map(StructuralMask::zeros_like).collect(),
            head: self.head.zeros_like(),
            z_mean: self.z_mean.clone(),
            z_scale: self.z_scale.clone(),
            y_mean: self.y_mean.clone(),
            y_scale: self.y_scale.clone(),
        }
    }

    /// Graph-level prediction in target units from a graph's raw responses.
    pub fn predict_from_responses(&self, z: &Array2<T>) -> Vec<f64> {
        let zs = (z - &self.z_mean) / &self.z_scale;
        let out = self.head.forward(zs.view()).mean_axis(Axis(0)).unwrap();
        out.iter()
            .zip(self.y_mean.iter().zip(&self.y_scale))
            .map(|(o, (m, s))| o.to_f64_lossy() * s + m)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub epoch_mse: Vec<f64>,
    pub epoch_jsd: Vec<f64>,
    pub epoch_total: Vec<f64>,
}

/// Everything fixed across the steps of a training run.
pub struct FilterProblem<'a> {
    pub plan: RelaxedWlPlan,
    pub index: NeighborhoodIndex,
    pub targets: Vec<Vec<f64>>,
    pub graphs: &'a [Graph],
}

impl<'a> FilterProblem<'a> {
    pub fn new(graphs: &'a [Graph], radius: usize, depth: usize) -> Result<(Self, WlDictionary)> {
        let targets = graphs
            .iter()
            .enumerate()
            .map(|(i, g)| match g.target() {
                Some(Target::Values(v)) if !v.is_empty() => Ok(v.clone()),
                _ => Err(Error::Config(format!(
                    "graph {i} has no regression target; filter learning needs real-valued targets"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let dims = targets.first().map_or(0, Vec::len);
        if targets.iter().any(|t| t.len() != dims) {
            return Err(Error::Schema("regression targets differ in length".into()));
        }
        let alphabet = graphs
            .iter()
            .flat_map(|g| g.node_labels().iter().copied())
            .max()
            .map_or(1, |m| m as usize + 1);
        let mut dict = WlDictionary::new();
        let index = neighborhood_histograms(&mut dict, graphs, radius, depth);
        let plan = RelaxedWlPlan::new(&dict, depth, alphabet);
        Ok((
            Self {
                plan,
                index,
                targets,
                graphs,
            },
            dict,
        ))
    }

    pub fn alphabet(&self) -> usize {
        self.plan.alphabet()
    }

    pub fn target_dims(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }
}

/// Loss terms of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterLoss {
    pub mse: f64,
    pub jsd: f64,
    pub total: f64,
}

struct MaskPass<T: Scalar> {
    relaxed: Vec<RelaxedMask<T>>,
    forward: Vec<RelaxedForward<T>>,
}

fn mask_passes<T: Scalar>(
    problem: &FilterProblem,
    masks: &[StructuralMask<T>],
    noise: &[Vec<MaskNoise<T>>],
    tau: T,
) -> (Vec<MaskPass<T>>, Array2<T>) {
    let passes: Vec<MaskPass<T>> = masks
        .par_iter()
        .zip(noise)
        .map(|(mask, draws)| {
            let relaxed: Vec<_> = draws.iter().map(|n| relax(mask, n, tau)).collect();
            let forward = relaxed.iter().map(|r| problem.plan.forward(r)).collect();
            MaskPass { relaxed, forward }
        })
        .collect();
    let mut hist = Array2::zeros((problem.plan.label_count(), masks.len()));
    for (j, p) in passes.iter().enumerate() {
        let s = T::of(p.forward.len() as f64);
        for f in &p.forward {
            hist.column_mut(j).scaled_add(T::one() / s, &f.mu);
        }
    }
    (passes, hist)
}

/// Mean loss over `batch` and its gradient with respect to every mask logit
/// and head weight, with the mask noise held fixed.
pub fn filter_loss_grad<T: Scalar>(
    model: &FilterModel<T>,
    problem: &FilterProblem,
    batch: &[usize],
    noise: &[Vec<MaskNoise<T>>],
    tau: T,
    jsd_weight: f64,
) -> Result<(FilterLoss, FilterModel<T>)> {
    let (passes, hist) = mask_passes(problem, &model.masks, noise, tau);
    let b = T::of(batch.len() as f64);
    let lam = T::of(jsd_weight);
    let mut grad = model.zeros_like();
    let mut d_hist = Array2::zeros(hist.raw_dim());
    let (mut mse_sum, mut jsd_sum) = (0.0, 0.0);
    for &gi in batch {
        let nodes = &problem.index.graphs[gi];
        let z = responses(nodes, hist.view());
        let zs = (&z - &model.z_mean) / &model.z_scale;
        let (out, cache) = model.head.forward_cached(zs.view());
        let n = T::of(out.nrows() as f64);
        let pooled = out.mean_axis(Axis(0)).unwrap();
        let t = pooled.len();
        let mut d_pooled = Array1::zeros(t);
        let mut mse = T::zero();
        for k in 0..t {
            let y = T::of((problem.targets[gi][k] - model.y_mean[k]) / model.y_scale[k]);
            let e = pooled[k] - y;
            mse += e * e / T::of(t as f64);
            d_pooled[k] = T::of(2.0) * e / (T::of(t as f64) * b);
        }
        let d_out = Array2::from_shape_fn(out.raw_dim(), |(_, k)| d_pooled[k] / n);
        let d_zs = model.head.backward(&cache, d_out.view(), &mut grad.head);
        let (jsd, d_jsd) = jsd_loss_grad(z.view())?;
        let d_z = d_zs / &model.z_scale + d_jsd * (lam / b);
        responses_backward(nodes, d_z.view(), &mut d_hist);
        mse_sum += mse.to_f64_lossy();
        jsd_sum += jsd.to_f64_lossy();
    }
    let mask_grads: Vec<StructuralMask<T>> = model
        .masks
        .par_iter()
        .enumerate()
        .map(|(j, mask)| {
            let mut g = mask.zeros_like();
            let pass = &passes[j];
            let s = T::of(pass.forward.len() as f64);
            let d_mu = d_hist.column(j).mapv(|x| x / s);
            for (r, f) in pass.relaxed.iter().zip(&pass.forward) {
                let (d_omega, d_y) = problem.plan.backward(r, f, d_mu.view());
                relax_backward(r, &d_omega, &d_y, tau, &mut g);
            }
            g
        })
        .collect();
    grad.masks = mask_grads;
    let bf = batch.len() as f64;
    let loss = FilterLoss {
        mse: mse_sum / bf,
        jsd: jsd_sum / bf,
        total: (mse_sum + jsd_weight * jsd_sum) / bf,
    };
    Ok((loss, grad))
}

/// Per-mask noise draws for one step: `noise[j][s]` from stream `(seed, tag..., j, s)`.
pub fn draw_noise<T: Scalar>(
    masks: &[StructuralMask<T>],
    samples: usize,
    seed: u64,
    tag: &[u64],
) -> Vec<Vec<MaskNoise<T>>> {
    masks
        .iter()
        .enumerate()
        .map(|(j, m)| {
            (0..samples)
                .map(|s| {
                    let mut parts = tag.to_vec();
                    parts.extend([j as u64, s as u64]);
                    sample_noise(m, &mut rng::stream(seed, &parts))
                })
                .collect()
        })
        .collect()
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count().max(1) as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-8 { std } else { 1.0 })
}

fn refresh_response_scaling<T: Scalar>(
    model: &mut FilterModel<T>,
    problem: &FilterProblem,
    train: &[usize],
    noise: &[Vec<MaskNoise<T>>],
    tau: T,
) {
    let (_, hist) = mask_passes(problem, &model.masks, noise, tau);
    let rows: Vec<Array2<T>> = train
        .iter()
        .map(|&g| responses(&problem.index.graphs[g], hist.view()))
        .collect();
    for j in 0..model.masks.len() {
        let vals = rows
            .iter()
            .flat_map(|z| z.column(j).to_vec())
            .map(|x| x.to_f64_lossy());
        let (m, s) = mean_std(vals);
        model.z_mean[j] = T::of(m);
        model.z_scale[j] = T::of(s);
    }
}

/// Learns structural masks against regression targets of the `train` graphs.
///
/// Each step relaxes `samples` noise draws per mask, computes every node's
/// soft kernel response, reads the graph out through a per-node MLP and mean
/// pooling, and descends squared error plus the weighted divergence term.
/// Targets are standardised on the training graphs; mask responses are
/// standardised per mask with statistics refreshed at the start of each epoch.
pub fn train_filters<T: Scalar>(
    problem: &FilterProblem,
    train: &[usize],
    config: &FilterConfig,
) -> Result<(FilterModel<T>, FilterReport)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config(
            "filter learning needs training graphs".into(),
        ));
    }
    let dims = problem.target_dims();
    let mut init = rng::stream(config.seed, &[0xf117]);
    let masks: Vec<StructuralMask<T>> = (0..config.masks)
        .map(|j| {
            let size = config.proto_sizes[j % config.proto_sizes.len()];
            StructuralMask::init(size, problem.alphabet(), &mut init)
        })
        .collect();
    let head = Mlp::init(&[config.masks, config.hidden, dims], &mut init);
    let (y_mean, y_scale): (Vec<f64>, Vec<f64>) = (0..dims)
        .map(|k| mean_std(train.iter().map(|&g| problem.targets[g][k])))
        .unzip();
    let mut model = FilterModel {
        masks,
        head,
        z_mean: Array1::zeros(config.masks),
        z_scale: Array1::ones(config.masks),
        y_mean,
        y_scale,
    };
    let tau = T::of(config.tau);
    let mut adam = Adam::new(
        AdamConfig {
            lr: config.lr,
            ..Default::default()
        },
        model.param_count(),
    );
    let mut report = FilterReport::default();
    let mut order = train.to_vec();

    for epoch in 0..config.epochs {
        let scale_noise = draw_noise(
            &model.masks,
            config.samples,
            config.seed,
            &[epoch as u64, u64::MAX],
        );
        refresh_response_scaling(&mut model, problem, train, &scale_noise, tau);
        order.shuffle(&mut rng::stream(config.seed, &[0xf117, epoch as u64]));
        let (mut mse, mut jsd, mut total, mut seen) = (0.0, 0.0, 0.0, 0.0);
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let noise = draw_noise(
                &model.masks,
                config.samples,
                config.seed,
                &[epoch as u64, step as u64],
            );
            let (loss, grad) =
                filter_loss_grad(&model, problem, batch, &noise, tau, config.jsd_weight)?;
            if !loss.total.is_finite() || !grad.all_finite() {
                return Err(Error::Numeric(format!(
                    "filter loss {} (mse {}, jsd {}) at epoch {epoch} step {step}; lower the learning rate",
                    loss.total, loss.mse, loss.jsd
                )));
            }
            adam.step(&mut model, &grad, config.lr);
            let w = batch.len() as f64;
            mse += loss.mse * w;
            jsd += loss.jsd * w;
            total += loss.total * w;
            seen += w;
        }
        log::info!(
            "filters epoch {epoch}: mse {:.5} jsd {:.5} total {:.5}",
            mse / seen,
            jsd / seen,
            total / seen
        );
        report.epoch_mse.push(mse / seen);
        report.epoch_jsd.push(jsd / seen);
        report.epoch_total.push(total / seen);
    }
    let scale_noise = draw_noise(
        &model.masks,
        config.samples,
        config.seed,
        &[config.epochs as u64, u64::MAX],
    );
    refresh_response_scaling(&mut model, problem, train, &scale_noise, tau);
    Ok((model, report))
}

/// Soft responses of every graph under fixed noise, for evaluating the
/// supervised readout.
pub fn relaxed_responses<T: Scalar>(
    model: &FilterModel<T>,
    problem: &FilterProblem,
    samples: usize,
    tau: T,
    seed: u64,
) -> Vec<Array2<T>> {
    let noise = draw_noise(&model.masks, samples, seed, &[u64::MAX]);
    let (_, hist) = mask_passes(problem, &model.masks, &noise, tau);
    problem
        .index
        .graphs
        .iter()
        .map(|nodes| responses(nodes, hist.view()))
        .collect()
}
