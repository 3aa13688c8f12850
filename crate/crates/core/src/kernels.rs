//! Scalar kernels and Gram matrices.

use std::fmt;
use std::ops::Deref;

use crate::error::{Result, SmtlError};
use crate::linalg::{psd_clip, symmetrize, Mat, PsdMatrix, DEFAULT_RANK_TOL};

/// Scalar reproducing kernel `k(x, x')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `exp(-gamma ‖x - x'‖²)`
    Gaussian { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            KernelSpec::Gaussian { gamma } => Err(SmtlError::BadKernelParam(format!(
                "gaussian gamma must be positive, got {gamma}"
            ))),
        }
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => x.iter().zip(z).map(|(a, b)| a * b).sum(),
            KernelSpec::Gaussian { gamma } => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Gaussian { gamma } => write!(f, "gaussian(gamma={gamma})"),
        }
    }
}

fn rows(x: &Mat) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Cross-kernel matrix with entry `(i, j) = k(x1_i, x2_j)`.
pub fn gram(spec: &KernelSpec, x1: &Mat, x2: &Mat) -> Result<Mat> {
    spec.validate()?;
    if x1.ncols() != x2.ncols() {
        return Err(SmtlError::dims(format!(
            "kernel inputs have {} and {} features",
            x1.ncols(),
            x2.ncols()
        )));
    }
    if let KernelSpec::Linear = spec {
        return Ok(x1 * x2.transpose());
    }
    let r1 = rows(x1);
    let r2 = rows(x2);
    Ok(Mat::from_fn(r1.len(), r2.len(), |i, j| spec.eval(&r1[i], &r2[j])))
}

/// The training Gram matrix `K`, PSD-repaired, with the inputs it came from.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    k: PsdMatrix,
    /// `V diag(sqrt w)` over the eigenvalues above the rank cutoff, so `K ≈ root root'`.
    root: Mat,
    spec: KernelSpec,
    x_train: Mat,
}

fn kernel_root(k: &PsdMatrix) -> Mat {
    let eig = k.eig();
    let keep: Vec<usize> = (0..eig.dim()).filter(|&j| eig.values[j] > k.cutoff() && eig.values[j] > 0.0).collect();
    Mat::from_fn(k.dim(), keep.len(), |i, j| eig.vectors[(i, keep[j])] * eig.values[keep[j]].sqrt())
}

impl GramMatrix {
    pub fn new(spec: KernelSpec, x_train: Mat) -> Result<Self> {
        let raw = gram(&spec, &x_train, &x_train)?;
        let k = psd_clip(&symmetrize(&raw), DEFAULT_RANK_TOL)?;
        let root = kernel_root(&k);
        Ok(GramMatrix { k, root, spec, x_train })
    }

    /// Wraps an explicit kernel matrix (e.g. a precomputed or synthetic one).
    /// `x_train` is only needed for out-of-sample prediction.
    pub fn from_matrix(k: &Mat, spec: KernelSpec, x_train: Mat) -> Result<Self> {
        let k = psd_clip(k, DEFAULT_RANK_TOL)?;
        let root = kernel_root(&k);
        Ok(GramMatrix { k, root, spec, x_train })
    }

    pub fn psd(&self) -> &PsdMatrix {
        &self.k
    }

    /// Factor `R` with `K ≈ R R'`, truncated at the rank cutoff.
    pub fn root(&self) -> &Mat {
        &self.root
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn x_train(&self) -> &Mat {
        &self.x_train
    }

    pub fn n(&self) -> usize {
        self.k.dim()
    }

    /// Kernel between new points and the training inputs.
    pub fn cross(&self, x_new: &Mat) -> Result<Mat> {
        if x_new.ncols() != self.x_train.ncols() {
            return Err(SmtlError::dims(format!(
                "expected {} features, got {}",
                self.x_train.ncols(),
                x_new.ncols()
            )));
        }
        gram(&self.spec, x_new, &self.x_train)
    }
}

impl Deref for GramMatrix {
    type Target = PsdMatrix;
    fn deref(&self) -> &PsdMatrix {
        &self.k
    }
}
