use crate::error::{Error, Result};

/// Fraction of probability rows whose argmax is the true class.
pub fn accuracy(probs: &[Vec<f64>], classes: &[usize]) -> Result<f64> {
    if probs.is_empty() || probs.len() != classes.len() {
        return Err(Error::Config(format!(
            "accuracy needs matching non-empty inputs, got {} predictions and {} labels",
            probs.len(),
            classes.len()
        )));
    }
    let hits = probs
        .iter()
        .zip(classes)
        .filter(|(p, &c)| argmax(p) == Some(c))
        .count();
    Ok(hits as f64 / probs.len() as f64)
}

/// Mean absolute error per target dimension.
pub fn mae_per_dim(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Vec<f64>> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::Config(format!(
            "MAE needs matching non-empty inputs, got {} predictions and {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let dims = targets[0].len();
    let mut acc = vec![0.0; dims];
    for (p, t) in preds.iter().zip(targets) {
        if p.len() != dims || t.len() != dims {
            return Err(Error::Config("prediction and target widths differ".into()));
        }
        for j in 0..dims {
            acc[j] += (p[j] - t[j]).abs();
        }
    }
    Ok(acc.into_iter().map(|s| s / preds.len() as f64).collect())
}

/// MAE averaged over target dimensions.
pub fn mae(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let per = mae_per_dim(preds, targets)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// First index of the largest entry.
pub fn argmax(p: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in p.iter().enumerate() {
        if best.is_none_or(|b| v > p[b]) {
            best = Some(i);
        }
    }
    best
}

/// Mean and sample standard deviation; the deviation is absent for fewer
/// than two values.
pub fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    if values.is_empty() {
        return (f64::NAN, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}
