use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{
    gsat_layer_backward, gsat_layer_forward, GsatLayerParams, LayerCache, LayerOptions,
};
use super::pool::{
    cluster_mean, edge_pool_backward, edge_pool_stage, global_mean_pool, EdgePoolParams, PoolStage,
};
use crate::error::{Error, Result};
use crate::graph::{Graph, Target};
use crate::nn::{Mlp, MlpCache, Parameters};
use crate::scalar::Scalar;

/// Probability floor inside the cross-entropy logarithm.
pub const CE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Classification { classes: usize },
    Regression { targets: usize },
}

impl Task {
    pub fn output_dim(self) -> usize {
        match self {
            Task::Classification { classes } => classes,
            Task::Regression { targets } => targets,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Pooling {
    /// Mean over nodes after the last layer.
    Global,
    /// Alternating layer and edge contraction, reading out the node mean
    /// after every stage.
    Hierarchical { max_stages: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GsatConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub pooling: Pooling,
    pub layer: LayerOptions,
}

impl Default for GsatConfig {
    fn default() -> Self {
        Self {
            layers: 1,
            heads: 5,
            hidden: 64,
            pooling: Pooling::Global,
            layer: LayerOptions::default(),
        }
    }
}

impl GsatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "layers, heads and hidden width must be positive".into(),
            ));
        }
        if let Pooling::Hierarchical { max_stages: 0 } = self.pooling {
            return Err(Error::Config(
                "hierarchical pooling needs at least one stage".into(),
            ));
        }
        Ok(())
    }
}

/// Per-graph model input: original features and standardised structural
/// vectors, both already in the model's scalar type.
#[derive(Debug, Clone)]
pub struct GraphInput<T: Scalar> {
    pub x: Array2<T>,
    pub hs: Array2<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GsatModel<T: Scalar> {
    pub task: Task,
    pub pooling: Pooling,
    pub options: LayerOptions,
    pub layers: Vec<GsatLayerParams<T>>,
    pub pools: Vec<EdgePoolParams<T>>,
    pub head: Mlp<T>,
    pub hs_mean: Vec<f64>,
    pub hs_scale: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_scale: Vec<f64>,
    /// Centring and scaling of the pooled readout before the head, refreshed
    /// from training graphs during fitting and held constant in gradients.
    #[serde(default)]
    pub readout_mean: Vec<f64>,
    #[serde(default)]
    pub readout_scale: Vec<f64>,
}

impl<T: Scalar> Parameters<T> for GsatModel<T> {
    fn visit(&self, f: &mut dyn FnMut(&[T])) {
        for l in &self.layers {
            l.visit(f);
        }
        for p in &self.pools {
            p.visit(f);
        }
        self.head.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        for l in &mut self.layers {
            l.visit_mut(f);
        }
        for p in &mut self.pools {
            p.visit_mut(f);
        }
        self.head.visit_mut(f);
    }
}

struct StageCache<T: Scalar> {
    graph: Graph,
    h_in: Array2<T>,
    layer: LayerCache<T>,
    h_out: Array2<T>,
    pool: Option<PoolStage<T>>,
}

pub struct Forward<T: Scalar> {
    /// Head output: logits or standardised regression values.
    pub output: Array1<T>,
    pub readout: Array1<T>,
    /// Contraction stages applied (zero under global pooling).
    pub pool_stages: usize,
    stages: Vec<StageCache<T>>,
    head: MlpCache<T>,
}

impl<T: Scalar> GsatModel<T> {
    pub fn new(
        task: Task,
        config: &GsatConfig,
        d_s: usize,
        d_in: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        if task.output_dim() == 0 || d_s == 0 || d_in == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        let p = config.hidden;
        let depth = match config.pooling {
            Pooling::Global => config.layers,
            Pooling::Hierarchical { max_stages } => max_stages,
        };
        let layers = (0..depth)
            .map(|k| {
                GsatLayerParams::init(d_s, if k == 0 { d_in } else { p }, p, config.heads, rng)
            })
            .collect();
        let pools = match config.pooling {
            Pooling::Global => Vec::new(),
            Pooling::Hierarchical { max_stages } => (1..max_stages)
                .map(|_| EdgePoolParams::init(p, rng))
                .collect(),
        };
        let head = Mlp::init(&[p, p, task.output_dim()], rng);
        let y_dim = match task {
            Task::Classification { .. } => 0,
            Task::Regression { targets } => targets,
        };
        Ok(Self {
            task,
            pooling: config.pooling,
            options: config.layer,
            layers,
            pools,
            head,
            hs_mean: vec![0.0; d_s],
            hs_scale: vec![1.0; d_s],
            y_mean: vec![0.0; y_dim],
            y_scale: vec![1.0; y_dim],
            readout_mean: vec![0.0; p],
            readout_scale: vec![1.0; p],
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| l.zeros_like()).collect(),
            pools: self.pools.iter().map(|p| p.zeros_like()).collect(),
            head: self.head.zeros_like(),
            ..self.clone_config()
        }
    }

    fn clone_config(&self) -> Self {
        Self {
            task: self.task,
            pooling: self.pooling,
            options: self.options,
            layers: Vec::new(),
            pools: Vec::new(),
            head: Mlp { layers: Vec::new() },
            hs_mean: self.hs_mean.clone(),
            hs_scale: self.hs_scale.clone(),
            y_mean: self.y_mean.clone(),
            y_scale: self.y_scale.clone(),
            readout_mean: self.readout_mean.clone(),
            readout_scale: self.readout_scale.clone(),
        }
    }

    /// `self += scale * other` over all trainable tensors.
    pub fn accumulate(&mut self, other: &Self, scale: T) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (ha, hb) in a.heads.iter_mut().zip(&b.heads) {
                ha.w_s.scaled_add(scale, &hb.w_s);
                ha.w_o.scaled_add(scale, &hb.w_o);
                ha.a.scaled_add(scale, &hb.a);
            }
            a.v.scaled_add(scale, &b.v);
            a.b.scaled_add(scale, &b.b);
        }
        for (a, b) in self.pools.iter_mut().zip(&other.pools) {
            a.w.scaled_add(scale, &b.w);
            a.b.scaled_add(scale, &b.b);
        }
        for (a, b) in self.head.layers.iter_mut().zip(&other.head.layers) {
            a.w.scaled_add(scale, &b.w);
            a.b.scaled_add(scale, &b.b);
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.visit_mut(&mut |s| s.iter_mut().for_each(|x| *x *= factor));
    }

    pub fn structural_dim(&self) -> usize {
        self.layers[0].structural_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden()
    }

    pub fn heads(&self) -> usize {
        self.layers[0].heads.len()
    }

    /// Sets per-dimension structural centring and scaling from training rows.
    pub fn fit_structural_stats<'a>(&mut self, rows: impl IntoIterator<Item = &'a Array2<f64>>) {
        let (mean, scale) = column_stats(
            rows.into_iter().flat_map(|m| m.rows().into_iter()),
            self.structural_dim(),
        );
        self.hs_mean = mean;
        self.hs_scale = scale;
    }

    /// Sets regression target centring and scaling; no-op for classification.
    pub fn fit_target_stats<'a>(&mut self, targets: impl IntoIterator<Item = &'a [f64]>) {
        if let Task::Regression { targets: d } = self.task {
            let rows: Vec<Array1<f64>> = targets
                .into_iter()
                .map(|t| Array1::from(t.to_vec()))
                .collect();
            let (mean, scale) = column_stats(rows.iter().map(|r| r.view()), d);
            self.y_mean = mean;
            self.y_scale = scale;
        }
    }

    /// Sets the readout centring and scaling from a set of pooled readouts.
    pub fn fit_readout_stats<'a>(&mut self, readouts: impl IntoIterator<Item = &'a Array1<f64>>) {
        let (mean, scale) = column_stats(readouts.into_iter().map(|r| r.view()), self.hidden());
        self.readout_mean = mean;
        self.readout_scale = scale;
    }

    /// Converts raw features and structural rows into model input, checking
    /// that every node has a structural vector.
    pub fn prepare(&self, g: &Graph, x: &Array2<f64>, hs: &Array2<f64>) -> Result<GraphInput<T>> {
        let n = g.node_count();
        if hs.nrows() < n {
            return Err(Error::MissingEmbedding(format!(
                "node {} has no structural embedding ({} rows for {} nodes)",
                hs.nrows(),
                hs.nrows(),
                n
            )));
        }
        if hs.nrows() != n || x.nrows() != n {
            return Err(Error::Config(format!(
                "graph has {n} nodes but {} feature rows and {} structural rows",
                x.nrows(),
                hs.nrows()
            )));
        }
        if hs.ncols() != self.structural_dim() || x.ncols() != self.input_dim() {
            return Err(Error::Config(format!(
                "model expects structural width {} and feature width {}, got {} and {}",
                self.structural_dim(),
                self.input_dim(),
                hs.ncols(),
                x.ncols()
            )));
        }
        let hs = Array2::from_shape_fn(hs.raw_dim(), |(i, j)| {
            T::of((hs[[i, j]] - self.hs_mean[j]) / self.hs_scale[j])
        });
        Ok(GraphInput {
            x: x.mapv(T::of),
            hs,
        })
    }

    pub fn forward(&self, g: &Graph, input: &GraphInput<T>) -> Result<Forward<T>> {
        if g.node_count() == 0 {
            return Err(Error::Config(
                "cannot run the model on an empty graph".into(),
            ));
        }
        let mut stages = Vec::new();
        let mut graph = g.clone();
        let mut h = input.x.clone();
        let mut hs = input.hs.clone();
        let mut readout = Array1::zeros(self.hidden());
        let mut pool_stages = 0;
        match self.pooling {
            Pooling::Global => {
                for layer in &self.layers {
                    let (out, cache) =
                        gsat_layer_forward(h.view(), hs.view(), layer, &graph, &self.options)?;
                    stages.push(StageCache {
                        graph: graph.clone(),
                        h_in: h,
                        layer: cache,
                        h_out: out.clone(),
                        pool: None,
                    });
                    h = out;
                }
                readout = global_mean_pool(h.view())?;
            }
            Pooling::Hierarchical { .. } => {
                for (k, layer) in self.layers.iter().enumerate() {
                    let (out, cache) =
                        gsat_layer_forward(h.view(), hs.view(), layer, &graph, &self.options)?;
                    readout += &global_mean_pool(out.view())?;
                    let last = k + 1 == self.layers.len();
                    if last || graph.node_count() <= 2 || graph.edge_count() == 0 {
                        stages.push(StageCache {
                            graph,
                            h_in: h,
                            layer: cache,
                            h_out: out,
                            pool: None,
                        });
                        break;
                    }
                    let st = edge_pool_stage(out.view(), &graph, &self.pools[k])?;
                    pool_stages += 1;
                    let next_graph = st.graph.clone();
                    let next_h = st.features.clone();
                    hs = cluster_mean(hs.view(), &st);
                    stages.push(StageCache {
                        graph,
                        h_in: h,
                        layer: cache,
                        h_out: out,
                        pool: Some(st),
                    });
                    graph = next_graph;
                    h = next_h;
                }
            }
        }
        let head_in = Array1::from_shape_fn(readout.len(), |j| {
            (readout[j] - T::of(self.readout_mean[j])) / T::of(self.readout_scale[j])
        });
        let (out, head) = self
            .head
            .forward_cached(head_in.view().insert_axis(Axis(0)));
        let output = out.row(0).to_owned();
        if !output.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite model output".into()));
        }
        Ok(Forward {
            output,
            readout,
            pool_stages,
            stages,
            head,
        })
    }

    /// Class probabilities, or regression values on the original target scale.
    pub fn predict(&self, g: &Graph, input: &GraphInput<T>) -> Result<Vec<f64>> {
        let fwd = self.forward(g, input)?;
        Ok(self.output_to_prediction(&fwd.output))
    }

    pub fn output_to_prediction(&self, output: &Array1<T>) -> Vec<f64> {
        match self.task {
            Task::Classification { .. } => {
                softmax(output).iter().map(|p| p.to_f64_lossy()).collect()
            }
            Task::Regression { .. } => output
                .iter()
                .enumerate()
                .map(|(j, v)| v.to_f64_lossy() * self.y_scale[j] + self.y_mean[j])
                .collect(),
        }
    }

    /// Loss and its gradient with respect to the head output.
    fn loss_and_output_grad(&self, output: &Array1<T>, target: &Target) -> Result<(T, Array1<T>)> {
        match (self.task, target) {
            (Task::Classification { classes }, Target::Class(c)) => {
                if *c >= classes {
                    return Err(Error::Config(format!(
                        "class {c} out of range for {classes} classes"
                    )));
                }
                let p = softmax(output);
                let floor = T::of(CE_EPS);
                let loss = -p[*c].max(floor).ln();
                let mut d = p.clone();
                if p[*c] > floor {
                    d[*c] -= T::one();
                } else {
                    d.fill(T::zero());
                }
                Ok((loss, d))
            }
            (Task::Regression { targets }, Target::Values(y)) => {
                if y.len() != targets {
                    return Err(Error::Config(format!(
                        "expected {targets} target values, got {}",
                        y.len()
                    )));
                }
                let ys = Array1::from_shape_fn(targets, |j| {
                    T::of((y[j] - self.y_mean[j]) / self.y_scale[j])
                });
                let diff = output - &ys;
                let dim = T::of(targets as f64);
                let loss = diff.mapv(|v| v * v).sum() / dim;
                Ok((loss, diff * (T::of(2.0) / dim)))
            }
            _ => Err(Error::Config(
                "target kind does not match the model task".into(),
            )),
        }
    }

    pub fn loss(&self, g: &Graph, input: &GraphInput<T>, target: &Target) -> Result<T> {
        let fwd = self.forward(g, input)?;
        Ok(self.loss_and_output_grad(&fwd.output, target)?.0)
    }

    /// Adds this graph's parameter gradients into `grad` and returns the loss.
    /// Structural inputs are constants and receive nothing.
    pub fn loss_grad(
        &self,
        g: &Graph,
        input: &GraphInput<T>,
        target: &Target,
        grad: &mut Self,
    ) -> Result<T> {
        let fwd = self.forward(g, input)?;
        let (loss, d_out) = self.loss_and_output_grad(&fwd.output, target)?;
        let d_readout =
            self.head
                .backward(&fwd.head, d_out.view().insert_axis(Axis(0)), &mut grad.head);
        let d_readout = Array1::from_shape_fn(self.hidden(), |j| {
            d_readout[[0, j]] / T::of(self.readout_scale[j])
        });
        let mut d_next: Option<Array2<T>> = None;
        for (k, st) in fwd.stages.iter().enumerate().rev() {
            let n = T::of(st.h_out.nrows() as f64);
            let mut d_h = match (&self.pooling, k + 1 == fwd.stages.len()) {
                (Pooling::Global, false) => d_next.take().expect("downstream gradient"),
                _ => Array2::from_shape_fn(st.h_out.raw_dim(), |(_, j)| d_readout[j] / n),
            };
            if let (Some(pool), Some(d)) = (&st.pool, d_next.take()) {
                d_h += &edge_pool_backward(
                    st.h_out.view(),
                    &self.pools[k],
                    pool,
                    d.view(),
                    &mut grad.pools[k],
                );
            }
            let d_in = gsat_layer_backward(
                &self.layers[k],
                &st.layer,
                &st.graph,
                &self.options,
                d_h.view(),
                &mut grad.layers[k],
            );
            debug_assert_eq!(d_in.dim(), st.h_in.dim());
            d_next = Some(d_in);
        }
        if !loss.is_finite() {
            return Err(Error::Numeric("non-finite loss".into()));
        }
        Ok(loss)
    }
}

pub fn softmax<T: Scalar>(x: &Array1<T>) -> Array1<T> {
    let max = x.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let e = x.mapv(|v| (v - max).exp());
    let s = e.sum();
    e / s
}

/// Natural-log cross-entropy of a probability vector against a class.
pub fn cross_entropy(probs: &[f64], class: usize) -> Result<f64> {
    probs
        .get(class)
        .map(|p| -p.max(CE_EPS).ln())
        .ok_or_else(|| {
            Error::Config(format!(
                "class {class} out of range for {} classes",
                probs.len()
            ))
        })
}

pub fn mean_squared_error(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Config("prediction and target lengths differ".into()));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Per-column mean and standard deviation. Columns that are constant up to
/// rounding get scale 1.
fn column_stats<'a>(
    rows: impl Iterator<Item = ndarray::ArrayView1<'a, f64>>,
    dim: usize,
) -> (Vec<f64>, Vec<f64>) {
    let rows: Vec<_> = rows.collect();
    if rows.is_empty() {
        return (vec![0.0; dim], vec![1.0; dim]);
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let scale = (0..dim)
        .map(|j| {
            let std = (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            if std > 1e-8 * mean[j].abs().max(1.0) {
                std
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsat::GsatCheckpoint;
    use crate::rng;

    fn fixture() -> Graph {
        Graph::new(
            5,
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)],
            vec![0, 1, 0, 2, 1],
        )
        .unwrap()
    }

    fn random_input(g: &Graph, d_s: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        let mut r = rng::stream(seed, &[77]);
        let x = Array2::from_shape_simple_fn((g.node_count(), 3), || r.random_range(-1.0..1.0));
        let hs = Array2::from_shape_simple_fn((g.node_count(), d_s), || r.random_range(-2.0..2.0));
        (x, hs)
    }

    fn model(task: Task, pooling: Pooling, seed: u64) -> GsatModel<f64> {
        let config = GsatConfig {
            layers: 2,
            heads: 2,
            hidden: 4,
            pooling,
            ..Default::default()
        };
        GsatModel::new(task, &config, 3, 3, &mut rng::stream(seed, &[])).unwrap()
    }

    #[test]
    fn classification_output_is_a_distribution_and_deterministic() {
        let g = fixture();
        let m = model(Task::Classification { classes: 3 }, Pooling::Global, 1);
        let (x, hs) = random_input(&g, 3, 1);
        let input = m.prepare(&g, &x, &hs).unwrap();
        let p = m.predict(&g, &input).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert_eq!(p, m.predict(&g, &input).unwrap());
    }

    #[test]
    fn zero_head_gives_uniform_probabilities() {
        let g = fixture();
        let mut m = model(Task::Classification { classes: 4 }, Pooling::Global, 2);
        m.head.fill_zero();
        let (x, hs) = random_input(&g, 3, 2);
        let p = m.predict(&g, &m.prepare(&g, &x, &hs).unwrap()).unwrap();
        assert!(p.iter().all(|&q| (q - 0.25).abs() < 1e-15));
    }

    #[test]
    fn losses() {
        assert!(cross_entropy(&[1.0, 0.0], 0).unwrap() <= 1e-6);
        assert!((cross_entropy(&[0.5, 0.5], 1).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[0.5, 0.5], 2).is_err());
        assert_eq!(mean_squared_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let g = fixture();
        let m = model(Task::Classification { classes: 2 }, Pooling::Global, 3);
        let (x, hs) = random_input(&g, 3, 3);
        let input = m.prepare(&g, &x, &hs).unwrap();
        assert!(m.loss(&g, &input, &Target::Class(2)).is_err());
        assert!(m.loss(&g, &input, &Target::Values(vec![1.0])).is_err());
    }

    #[test]
    fn missing_structural_rows_name_the_node() {
        let g = fixture();
        let m = model(Task::Classification { classes: 2 }, Pooling::Global, 4);
        let (x, hs) = random_input(&g, 3, 4);
        let short = hs.slice(ndarray::s![..3, ..]).to_owned();
        match m.prepare(&g, &x, &short) {
            Err(Error::MissingEmbedding(msg)) => assert!(msg.contains("node 3"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn check_gradients(task: Task, pooling: Pooling, target: Target) {
        let g = fixture();
        for point in 0..10u64 {
            let mut m = model(task, pooling, 10 + point);
            // Random biases keep every ReLU away from its kink.
            let mut r = rng::stream(point, &[91]);
            let jitter: Vec<f64> = m
                .to_flat()
                .iter()
                .map(|v| v + r.random_range(-0.3..0.3))
                .collect();
            m.set_flat(&jitter);
            if let Task::Regression { .. } = task {
                m.y_mean = vec![0.3, -0.1];
                m.y_scale = vec![2.0, 0.5];
            }
            let (x, hs) = random_input(&g, 3, 10 + point);
            let input = m.prepare(&g, &x, &hs).unwrap();
            let hs_before = input.hs.clone();
            let mut grad = m.zeros_like();
            m.loss_grad(&g, &input, &target, &mut grad).unwrap();
            assert_eq!(input.hs, hs_before);
            let flat = m.to_flat();
            let gf = grad.to_flat();
            let eps = 1e-6;
            let mut probe = m.clone();
            for i in 0..flat.len() {
                let mut f = flat.clone();
                f[i] += eps;
                probe.set_flat(&f);
                let up = probe.loss(&g, &input, &target).unwrap();
                f[i] -= 2.0 * eps;
                probe.set_flat(&f);
                let down = probe.loss(&g, &input, &target).unwrap();
                let fd = (up - down) / (2.0 * eps);
                let err = (fd - gf[i]).abs() / fd.abs().max(gf[i].abs()).max(1e-3);
                assert!(
                    err <= 1e-4,
                    "point {point} param {i}: fd {fd} analytic {}",
                    gf[i]
                );
            }
        }
    }

    #[test]
    fn classification_gradients_match_finite_differences() {
        check_gradients(
            Task::Classification { classes: 3 },
            Pooling::Global,
            Target::Class(1),
        );
    }

    #[test]
    fn hierarchical_gradients_match_finite_differences() {
        check_gradients(
            Task::Classification { classes: 2 },
            Pooling::Hierarchical { max_stages: 4 },
            Target::Class(0),
        );
    }

    #[test]
    fn regression_gradients_match_finite_differences() {
        check_gradients(
            Task::Regression { targets: 2 },
            Pooling::Global,
            Target::Values(vec![0.7, -1.2]),
        );
    }

    #[test]
    fn exact_regression_fit_has_zero_gradient() {
        let g = fixture();
        let m = model(Task::Regression { targets: 2 }, Pooling::Global, 5);
        let (x, hs) = random_input(&g, 3, 5);
        let input = m.prepare(&g, &x, &hs).unwrap();
        let y = m.predict(&g, &input).unwrap();
        let mut grad = m.zeros_like();
        let loss = m
            .loss_grad(&g, &input, &Target::Values(y), &mut grad)
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.to_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pooled_prediction_is_permutation_invariant() {
        let g = fixture();
        let m = model(Task::Regression { targets: 2 }, Pooling::Global, 6);
        let (x, hs) = random_input(&g, 3, 6);
        let base = m.predict(&g, &m.prepare(&g, &x, &hs).unwrap()).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let gp = g.permuted(&perm).unwrap();
        let mut xp = Array2::zeros(x.raw_dim());
        let mut hp = Array2::zeros(hs.raw_dim());
        for (v, &p) in perm.iter().enumerate() {
            xp.row_mut(p).assign(&x.row(v));
            hp.row_mut(p).assign(&hs.row(v));
        }
        let moved = m.predict(&gp, &m.prepare(&gp, &xp, &hp).unwrap()).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn hierarchical_stops_when_graph_is_small() {
        let g = Graph::unlabeled(8, (0..7).map(|i| (i, i + 1))).unwrap();
        let config = GsatConfig {
            heads: 1,
            hidden: 4,
            pooling: Pooling::Hierarchical { max_stages: 14 },
            ..Default::default()
        };
        let m = GsatModel::<f64>::new(
            Task::Classification { classes: 2 },
            &config,
            2,
            1,
            &mut rng::stream(7, &[]),
        )
        .unwrap();
        let input = m
            .prepare(
                &g,
                &Array2::from_elem((8, 1), 1.0),
                &Array2::from_shape_fn((8, 2), |(i, j)| (i + j) as f64),
            )
            .unwrap();
        let fwd = m.forward(&g, &input).unwrap();
        assert!(
            fwd.pool_stages >= 2 && fwd.pool_stages <= 4,
            "{}",
            fwd.pool_stages
        );
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let g = fixture();
        let mut m = model(
            Task::Regression { targets: 2 },
            Pooling::Hierarchical { max_stages: 3 },
            8,
        );
        let (x, hs) = random_input(&g, 3, 8);
        m.fit_structural_stats([&hs]);
        m.fit_target_stats([&[1.0, 2.0][..], &[0.5, -3.0][..]]);
        let input = m.prepare(&g, &x, &hs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        GsatCheckpoint::new(m.clone(), 8, 3).save(&path).unwrap();
        let back = GsatCheckpoint::<f64>::load(&path).unwrap();
        assert_eq!(back.model, m);
        assert_eq!(back.epoch, 3);
        let again = back.model.prepare(&g, &x, &hs).unwrap();
        assert_eq!(
            m.predict(&g, &input).unwrap(),
            back.model.predict(&g, &again).unwrap()
        );
    }

    #[test]
    fn single_precision_model_runs() {
        let g = fixture();
        let config = GsatConfig {
            heads: 2,
            hidden: 4,
            ..Default::default()
        };
        let m = GsatModel::<f32>::new(
            Task::Classification { classes: 2 },
            &config,
            3,
            3,
            &mut rng::stream(9, &[]),
        )
        .unwrap();
        let (x, hs) = random_input(&g, 3, 9);
        let p = m.predict(&g, &m.prepare(&g, &x, &hs).unwrap()).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}
