//! Dense symmetric and PSD linear algebra.
//!
//! Everything here works on small-to-medium dense matrices through a cached
//! spectral decomposition. Eigenvalues are always kept in descending order
//! and each eigenvector is signed so that its largest-magnitude entry is
//! positive, which makes decompositions reproducible across calls.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SmtlError};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative eigenvalue threshold used for pseudoinverses and singularity checks.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Spectral decomposition `A = V diag(w) V'` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Eigenvalues, non-increasing.
    pub values: Vector,
    /// Orthonormal eigenvectors, column `i` pairs with `values[i]`.
    pub vectors: Mat,
}

impl SymEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `V diag(f(w)) V'`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let mapped = self.values.map(f);
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= mapped[j];
        }
        let out = scaled * self.vectors.transpose();
        symmetrize(&out)
    }

    pub fn reconstruct(&self) -> Mat {
        self.map(|w| w)
    }
}

pub fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn frob(a: &Mat) -> f64 {
    a.norm()
}

pub fn is_finite(a: &Mat) -> bool {
    a.iter().all(|v| v.is_finite())
}

fn check_square(a: &Mat, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(SmtlError::dims(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Symmetric eigendecomposition with descending eigenvalues.
pub fn sym_eig(a: &Mat) -> Result<SymEig> {
    check_square(a, "sym_eig input")?;
    if !is_finite(a) {
        return Err(SmtlError::NonFinite);
    }
    let m = a.nrows();
    if m == 0 {
        return Ok(SymEig {
            values: Vector::zeros(0),
            vectors: Mat::zeros(0, 0),
        });
    }
    let sym = symmetrize(a);
    let eig = nalgebra::SymmetricEigen::new(sym.clone());
    let (raw_values, raw_vectors) = {
        let recon = &eig.eigenvectors * Mat::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
        let tol = 64.0 * f64::EPSILON * m as f64 * sym.norm().max(f64::MIN_POSITIVE);
        if (recon - &sym).norm() <= tol {
            (eig.eigenvalues, eig.eigenvectors)
        } else {
            jacobi_polish(&sym, eig.eigenvectors)
        }
    };
    let mut order: Vec<usize> = (0..m).collect();
    // stable sort keeps index order on exact ties
    order.sort_by(|&i, &j| raw_values[j].total_cmp(&raw_values[i]));

    let mut values = Vector::zeros(m);
    let mut vectors = Mat::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = raw_values[src];
        let mut col = raw_vectors.column(src).into_owned();
        let mut pivot = 0;
        for i in 1..m {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(SymEig { values, vectors })
}

/// Cyclic Jacobi sweeps on `V' A V`, starting from an approximate basis `V`.
/// Used when the QR-based decomposition leaves a visible residual.
fn jacobi_polish(a: &Mat, mut v: Mat) -> (Vector, Mat) {
    let m = a.nrows();
    let mut d = v.transpose() * a * &v;
    d = symmetrize(&d);
    for _ in 0..50 {
        let mut off = 0.0;
        for p in 0..m {
            for q in p + 1..m {
                off += d[(p, q)] * d[(p, q)];
            }
        }
        if off.sqrt() <= f64::EPSILON * d.norm() {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = d[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (d[(q, q)] - d[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (dkp, dkq) = (d[(k, p)], d[(k, q)]);
                    d[(k, p)] = c * dkp - s * dkq;
                    d[(k, q)] = s * dkp + c * dkq;
                }
                for k in 0..m {
                    let (dpk, dqk) = (d[(p, k)], d[(q, k)]);
                    d[(p, k)] = c * dpk - s * dqk;
                    d[(q, k)] = s * dpk + c * dqk;
                }
                for k in 0..m {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (d.diagonal(), v)
}

/// A symmetric positive semidefinite matrix together with its spectral form.
#[derive(Debug, Clone)]
pub struct PsdMatrix {
    data: Mat,
    eig: SymEig,
    rank_tol: f64,
}

/// The learned (or fixed) task-structure matrix.
pub type StructureMatrix = PsdMatrix;

impl PsdMatrix {
    /// Validates and clips with the default tolerance.
    pub fn new(a: &Mat) -> Result<Self> {
        psd_clip(a, DEFAULT_RANK_TOL)
    }

    pub fn identity(m: usize) -> Self {
        Self::from_spectrum(Mat::identity(m, m), Vector::from_element(m, 1.0))
    }

    /// Builds `V diag(w) V'` from an orthonormal basis and nonnegative spectrum.
    ///
    /// The spectrum is re-sorted, so `w` may come in any order.
    pub fn from_spectrum(vectors: Mat, values: Vector) -> Self {
        let tmp = SymEig { values, vectors };
        let data = tmp.reconstruct();
        let m = tmp.dim();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| tmp.values[j].total_cmp(&tmp.values[i]));
        let values = Vector::from_iterator(m, order.iter().map(|&i| tmp.values[i].max(0.0)));
        let mut vectors = Mat::zeros(m, m);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &tmp.vectors.column(src));
        }
        let eig = SymEig { values, vectors };
        let data = if m > 0 { data } else { Mat::zeros(0, 0) };
        PsdMatrix {
            data,
            eig,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn with_rank_tol(mut self, rank_tol: f64) -> Self {
        self.rank_tol = rank_tol;
        self
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn eig(&self) -> &SymEig {
        &self.eig
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    /// Eigenvalue cutoff below which the matrix is treated as rank-deficient.
    pub fn cutoff(&self) -> f64 {
        self.rank_tol * self.eig.max_value().max(0.0)
    }

    pub fn is_strictly_pd(&self) -> bool {
        self.dim() > 0 && self.eig.min_value() > self.cutoff() && self.eig.min_value() > 0.0
    }

    pub fn into_data(self) -> Mat {
        self.data
    }
}

/// Clip tiny negative eigenvalues to zero.
///
/// Fails with `NotPsd` when the most negative eigenvalue is below
/// `-tol * max(1, largest eigenvalue)`.
pub fn psd_clip(a: &Mat, tol: f64) -> Result<PsdMatrix> {
    let eig = sym_eig(a)?;
    let max = eig.max_value();
    let min = eig.min_value();
    if eig.dim() > 0 && min < -tol * max.max(1.0) {
        return Err(SmtlError::NotPsd {
            min_eig: min,
            max_eig: max,
        });
    }
    let values = eig.values.map(|w| w.max(0.0));
    let clipped = SymEig {
        values,
        vectors: eig.vectors,
    };
    let data = if min < 0.0 {
        clipped.reconstruct()
    } else {
        symmetrize(a)
    };
    Ok(PsdMatrix {
        data,
        eig: clipped,
        rank_tol: DEFAULT_RANK_TOL,
    })
}

/// Moore-Penrose pseudoinverse through the spectral form.
pub fn pinv_psd(a: &PsdMatrix) -> PsdMatrix {
    let cut = a.cutoff();
    let values = a
        .eig
        .values
        .map(|w| if w <= cut || w <= 0.0 { 0.0 } else { 1.0 / w });
    PsdMatrix::from_spectrum(a.eig.vectors.clone(), values).with_rank_tol(a.rank_tol)
}

/// `A^q` via the spectral form. Zero eigenvalues stay zero for `q > 0`.
pub fn psd_power(a: &PsdMatrix, q: f64) -> Result<PsdMatrix> {
    if !q.is_finite() {
        return Err(SmtlError::Invalid(format!("exponent {q} is not finite")));
    }
    if q < 0.0 && !a.is_strictly_pd() {
        return Err(SmtlError::SingularMatrix);
    }
    let values = a.eig.values.map(|w| {
        if w <= 0.0 {
            if q == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            w.powf(q)
        }
    });
    Ok(PsdMatrix::from_spectrum(a.eig.vectors.clone(), values).with_rank_tol(a.rank_tol))
}

/// p-Schatten norm; for a PSD matrix the singular values are its eigenvalues.
pub fn schatten(a: &PsdMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(SmtlError::BadExponent(p));
    }
    if p == 1.0 {
        return Ok(a.eig.values.iter().map(|w| w.max(0.0)).sum());
    }
    let s: f64 = a.eig.values.iter().map(|w| w.max(0.0).powf(p)).sum();
    Ok(s.powf(1.0 / p))
}

/// `‖(I - A A†) B‖_F <= tol (1 + ‖B‖_F)`.
pub fn range_contained(b: &Mat, a: &PsdMatrix, tol: f64) -> Result<bool> {
    if b.nrows() != a.dim() {
        return Err(SmtlError::dims(format!(
            "range test: B has {} rows, A is {}x{}",
            b.nrows(),
            a.dim(),
            a.dim()
        )));
    }
    let cut = a.cutoff();
    let v = &a.eig.vectors;
    // projector onto Ran(A)
    let mut basis = Vec::new();
    for (j, &w) in a.eig.values.iter().enumerate() {
        if w > cut && w > 0.0 {
            basis.push(v.column(j).into_owned());
        }
    }
    let mut residual = b.clone();
    for u in &basis {
        let coef = u.transpose() * b;
        residual -= u * coef;
    }
    Ok(frob(&residual) <= tol * (1.0 + frob(b)))
}

/// Solves `K C + C G = Y` for symmetric `K` (PSD) and symmetric `G`, given
/// their decompositions, requiring `s_i + g_j > 0` for every eigenpair.
pub fn solve_sym_sylvester(k: &SymEig, g: &SymEig, y: &Mat) -> Result<Mat> {
    if y.nrows() != k.dim() || y.ncols() != g.dim() {
        return Err(SmtlError::dims(format!(
            "Sylvester right-hand side is {}x{}, expected {}x{}",
            y.nrows(),
            y.ncols(),
            k.dim(),
            g.dim()
        )));
    }
    let mut yt = k.vectors.transpose() * y * &g.vectors;
    for j in 0..g.dim() {
        let gj = g.values[j];
        for i in 0..k.dim() {
            let denom = k.values[i].max(0.0) + gj;
            if !(denom > 0.0) {
                return Err(SmtlError::SingularMatrix);
            }
            yt[(i, j)] /= denom;
        }
    }
    Ok(&k.vectors * yt * g.vectors.transpose())
}

fn require_pd_structure(a: &PsdMatrix) -> Result<()> {
    if !a.is_strictly_pd() {
        return Err(SmtlError::SingularA {
            min_eig: a.eig.min_value(),
            max_eig: a.eig.max_value(),
        });
    }
    Ok(())
}

/// Solves `K C + lam C A^{-1} = Y` by simultaneous diagonalisation.
pub fn sylvester_ls_solve(k: &PsdMatrix, a: &PsdMatrix, lam: f64, y: &Mat) -> Result<Mat> {
    require_pd_structure(a)?;
    if !(lam > 0.0) {
        return Err(SmtlError::Invalid(format!("lambda must be positive, got {lam}")));
    }
    let coupling = SymEig {
        values: a.eig.values.map(|d| lam / d),
        vectors: a.eig.vectors.clone(),
    };
    solve_sym_sylvester(&k.eig, &coupling, y)
}

/// Same system as [`sylvester_ls_solve`], formed as a dense `nT x nT`
/// Kronecker system and solved by LU. Reference path only.
pub fn kron_ls_solve(k: &PsdMatrix, a: &PsdMatrix, lam: f64, y: &Mat) -> Result<Mat> {
    require_pd_structure(a)?;
    if !(lam > 0.0) {
        return Err(SmtlError::Invalid(format!("lambda must be positive, got {lam}")));
    }
    let n = k.dim();
    let t = a.dim();
    if y.nrows() != n || y.ncols() != t {
        return Err(SmtlError::dims("Kronecker solve right-hand side"));
    }
    let a_inv = pinv_psd(a);
    let mut sys = Mat::zeros(n * t, n * t);
    for s in 0..t {
        for r in 0..t {
            let coef = lam * a_inv.data()[(s, r)];
            for i in 0..n {
                for j in 0..n {
                    let mut v = if s == r { k.data()[(i, j)] } else { 0.0 };
                    if i == j {
                        v += coef;
                    }
                    sys[(s * n + i, r * n + j)] = v;
                }
            }
        }
    }
    let rhs = Vector::from_column_slice(y.as_slice());
    let sol = sys.lu().solve(&rhs).ok_or(SmtlError::SingularMatrix)?;
    Ok(Mat::from_column_slice(n, t, sol.as_slice()))
}
