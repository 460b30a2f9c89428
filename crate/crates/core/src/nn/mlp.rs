use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{slice, slice_mut, Parameters};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative expressed through the pre-activation.
    #[inline]
    pub fn grad<T: Scalar>(self, pre: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if pre > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Affine map `x W + b` on row vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dense<T: Scalar> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Self {
            w: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                T::of(rng.random_range(-bound..bound))
            }),
            b: Array1::zeros(fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        x.dot(&self.w) + &self.b
    }
}

impl<T: Scalar> Parameters<T> for Dense<T> {
    fn visit(&self, f: &mut dyn FnMut(&[T])) {
        f(slice(&self.w));
        f(slice(&self.b));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        f(slice_mut(&mut self.w));
        f(slice_mut(&mut self.b));
    }
}

/// Stack of dense layers with ReLU between them and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Mlp<T: Scalar> {
    pub layers: Vec<Dense<T>>,
}

pub struct MlpCache<T: Scalar> {
    inputs: Vec<Array2<T>>,
    pre: Vec<Array2<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// `sizes = [input, hidden..., output]`.
    pub fn init(sizes: &[usize], rng: &mut impl Rng) -> Self {
        Self {
            layers: sizes
                .windows(2)
                .map(|s| Dense::init(s[0], s[1], rng))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.w.nrows(), l.w.ncols()))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.ncols()
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: ArrayView2<T>) -> (Array2<T>, MlpCache<T>) {
        let mut cache = MlpCache {
            inputs: Vec::new(),
            pre: Vec::new(),
        };
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(h.view());
            cache.inputs.push(h);
            h = if k < last {
                z.mapv(|v| Activation::Relu.apply(v))
            } else {
                z.clone()
            };
            cache.pre.push(z);
        }
        (h, cache)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, cache: &MlpCache<T>, dout: ArrayView2<T>, grad: &mut Self) -> Array2<T> {
        let mut d = dout.to_owned();
        for k in (0..self.layers.len()).rev() {
            if k + 1 < self.layers.len() {
                d.zip_mut_with(&cache.pre[k], |g, &p| *g = *g * Activation::Relu.grad(p));
            }
            let g = &mut grad.layers[k];
            g.w += &cache.inputs[k].t().dot(&d);
            g.b += &d.sum_axis(Axis(0));
            d = d.dot(&self.layers[k].w.t());
        }
        d
    }
}

impl<T: Scalar> Parameters<T> for Mlp<T> {
    fn visit(&self, f: &mut dyn FnMut(&[T])) {
        for l in &self.layers {
            l.visit(f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        for l in &mut self.layers {
            l.visit_mut(f);
        }
    }
}
