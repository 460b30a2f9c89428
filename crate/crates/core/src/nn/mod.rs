//! Small dense building blocks with hand-written gradients.

mod adam;
mod mlp;

pub use adam::{Adam, AdamConfig};
pub use mlp::{Activation, Dense, Mlp, MlpCache};

use crate::scalar::Scalar;

/// A bundle of parameter tensors visited in a fixed order.
///
/// Gradients use the same type as the parameters, so flattening either one
/// yields matching positions.
pub trait Parameters<T: Scalar> {
    fn visit(&self, f: &mut dyn FnMut(&[T]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [T]));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.len());
        n
    }

    fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |s| out.extend_from_slice(s));
        out
    }

    fn set_flat(&mut self, flat: &[T]) {
        let mut pos = 0;
        self.visit_mut(&mut |s| {
            s.copy_from_slice(&flat[pos..pos + s.len()]);
            pos += s.len();
        });
        assert_eq!(pos, flat.len(), "flat parameter length mismatch");
    }

    fn fill_zero(&mut self) {
        self.visit_mut(&mut |s| s.fill(T::zero()));
    }

    /// `self += scale * other`, for accumulating gradients.
    fn add_scaled(&mut self, other: &Self, scale: T)
    where
        Self: Sized,
    {
        let flat = other.to_flat();
        let mut pos = 0;
        self.visit_mut(&mut |s| {
            for x in s.iter_mut() {
                *x += scale * flat[pos];
                pos += 1;
            }
        });
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |s| ok &= s.iter().all(|x| x.is_finite()));
        ok
    }
}

pub(crate) fn slice_mut<T, D: ndarray::Dimension>(a: &mut ndarray::Array<T, D>) -> &mut [T] {
    a.as_slice_mut()
        .expect("parameters are stored contiguously")
}

pub(crate) fn slice<T, D: ndarray::Dimension>(a: &ndarray::Array<T, D>) -> &[T] {
    a.as_slice().expect("parameters are stored contiguously")
}
