use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smoothing added to every response before normalising.
pub const JSD_EPS: f64 = 1e-8;

fn entropy<T: Scalar>(p: impl Iterator<Item = T>) -> T {
    p.fold(T::zero(), |acc, x| {
        if x > T::zero() {
            acc - x * x.ln()
        } else {
            acc
        }
    })
}

fn normalised<T: Scalar>(z: ArrayView2<T>) -> (Array2<T>, Vec<T>) {
    let eps = T::of(JSD_EPS);
    let shifted = z.mapv(|x| x + eps);
    let sums: Vec<T> = shifted.columns().into_iter().map(|c| c.sum()).collect();
    let mut p = shifted;
    for (j, mut col) in p.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|x| x / sums[j]);
    }
    (p, sums)
}

/// Negative generalised Jensen-Shannon divergence between the per-mask node
/// distributions `P_j(v) ∝ z[v, j] + ε`, equal weights over masks.
///
/// `z` is `nodes × masks`. The value lies in `[-ln m, 0]`.
pub fn jsd_loss<T: Scalar>(z: ArrayView2<T>) -> Result<T> {
    Ok(jsd_loss_grad(z)?.0)
}

/// [`jsd_loss`] together with its gradient with respect to `z`.
pub fn jsd_loss_grad<T: Scalar>(z: ArrayView2<T>) -> Result<(T, Array2<T>)> {
    let (n, m) = z.dim();
    if n == 0 {
        return Err(Error::Numeric("JSD of a graph without nodes".into()));
    }
    if m == 0 {
        return Err(Error::Config("JSD needs at least one mask".into()));
    }
    let mf = T::of(m as f64);
    let (p, sums) = normalised(z);
    let mix: Vec<T> = p.rows().into_iter().map(|r| r.sum() / mf).collect();
    let mut loss = -entropy(mix.iter().copied());
    for col in p.columns() {
        loss += entropy(col.iter().copied()) / mf;
    }
    // dL/dP_j(v) = (ln P̄(v) - ln P_j(v)) / m, then through the normalisation.
    let mut grad = Array2::zeros((n, m));
    for j in 0..m {
        let g: Vec<T> = (0..n)
            .map(|v| (mix[v].ln() - p[[v, j]].ln()) / mf)
            .collect();
        let inner = (0..n).fold(T::zero(), |acc, v| acc + g[v] * p[[v, j]]);
        for v in 0..n {
            grad[[v, j]] = (g[v] - inner) / sums[j];
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_columns_give_zero() {
        let z: Array2<f64> = array![[1.0, 1.0], [3.0, 3.0], [0.5, 0.5]];
        assert!(jsd_loss(z.view()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn disjoint_supports_give_minus_ln2() {
        let z: Array2<f64> = array![[1.0, 0.0], [0.0, 2.0]];
        assert!((jsd_loss(z.view()).unwrap() + 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn empty_graph_is_an_error() {
        assert!(jsd_loss(Array2::<f64>::zeros((0, 2)).view()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let z: Array2<f64> = array![
            [0.3, 1.2, 0.05],
            [2.0, 0.1, 0.7],
            [0.9, 0.9, 1.5],
            [0.2, 0.02, 0.4]
        ];
        let (_, g) = jsd_loss_grad(z.view()).unwrap();
        let h = 1e-6;
        for v in 0..4 {
            for j in 0..3 {
                let mut a = z.clone();
                a[[v, j]] += h;
                let up = jsd_loss(a.view()).unwrap();
                a[[v, j]] -= 2.0 * h;
                let fd = (up - jsd_loss(a.view()).unwrap()) / (2.0 * h);
                assert!(
                    (fd - g[[v, j]]).abs() < 1e-7,
                    "{v},{j}: {fd} vs {}",
                    g[[v, j]]
                );
            }
        }
    }
}
