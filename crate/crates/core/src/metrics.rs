//! Out-of-sample prediction and evaluation metrics.

use crate::error::{Result, SmtlError};
use crate::linalg::Mat;
use crate::solver::ModelState;

/// `Z = k(X_new, X_train) C`.
pub fn predict(model: &ModelState, x_new: &Mat) -> Result<Mat> {
    let cross = model.gram().cross(x_new)?;
    let z = cross * &model.c;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(SmtlError::NonFinite);
    }
    Ok(z)
}

/// Mean over tasks of `MSE_t / Var_t(Y_true)`.
pub fn nmse(y_true: &Mat, z: &Mat) -> Result<f64> {
    nmse_masked(y_true, z, None)
}

/// As [`nmse`], restricted per task to rows with positive `mask` entries.
pub fn nmse_masked(y_true: &Mat, z: &Mat, mask: Option<&Mat>) -> Result<f64> {
    if y_true.shape() != z.shape() || mask.is_some_and(|m| m.shape() != z.shape()) {
        return Err(SmtlError::dims(format!(
            "truth is {:?}, predictions are {:?}",
            y_true.shape(),
            z.shape()
        )));
    }
    let t = y_true.ncols();
    let mut total = 0.0;
    for j in 0..t {
        let rows: Vec<usize> = (0..y_true.nrows())
            .filter(|&i| mask.map_or(true, |m| m[(i, j)] > 0.0))
            .collect();
        if rows.is_empty() {
            return Err(SmtlError::ZeroVariance(j));
        }
        let m = rows.len() as f64;
        let mean = rows.iter().map(|&i| y_true[(i, j)]).sum::<f64>() / m;
        let var = rows.iter().map(|&i| (y_true[(i, j)] - mean).powi(2)).sum::<f64>() / m;
        if !(var > 0.0) {
            return Err(SmtlError::ZeroVariance(j));
        }
        let mse = rows.iter().map(|&i| (y_true[(i, j)] - z[(i, j)]).powi(2)).sum::<f64>() / m;
        total += mse / var;
    }
    Ok(total / t as f64)
}

/// Index of the largest score, ties toward the smallest index.
pub fn argmax_row(z: &Mat, i: usize) -> usize {
    let mut best = 0;
    for j in 1..z.ncols() {
        if z[(i, j)] > z[(i, best)] {
            best = j;
        }
    }
    best
}

/// One-vs-all decoding accuracy.
pub fn accuracy(labels: &[i64], z: &Mat) -> Result<f64> {
    if labels.len() != z.nrows() {
        return Err(SmtlError::LengthMismatch(labels.len(), z.nrows()));
    }
    if labels.is_empty() {
        return Err(SmtlError::Invalid("no rows to score".into()));
    }
    let t = z.ncols();
    let mut hits = 0usize;
    for (row, &label) in labels.iter().enumerate() {
        if label < 0 || label as usize >= t {
            return Err(SmtlError::BadLabel { row, label, tasks: t });
        }
        if argmax_row(z, row) == label as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// Mean of `(s_i - m_i) / sqrt(s_i m_i)` over experiments.
pub fn normalized_improvement(nmse_stl: &[f64], nmse_mtl: &[f64]) -> Result<f64> {
    if nmse_stl.len() != nmse_mtl.len() {
        return Err(SmtlError::LengthMismatch(nmse_stl.len(), nmse_mtl.len()));
    }
    if nmse_stl.is_empty() {
        return Err(SmtlError::Invalid("no experiments".into()));
    }
    let mut sum = 0.0;
    for (&s, &m) in nmse_stl.iter().zip(nmse_mtl) {
        for v in [s, m] {
            if !(v > 0.0) {
                return Err(SmtlError::NonPositiveNmse(v));
            }
        }
        sum += (s - m) / (s * m).sqrt();
    }
    Ok(sum / nmse_stl.len() as f64)
}
