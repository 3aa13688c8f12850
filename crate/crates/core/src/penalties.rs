//! Structure penalties `F(A)` and the exact A-update of alternating minimization.
//!
//! Four penalty families are supported: weighted Schatten powers
//! `mu ‖A‖_p^p`, the trace-one indicator, the relaxed cluster indicator
//! (structure matrices `A(M)` with `M` in the capped spectral set) and a
//! fixed a-priori structure.

use std::fmt;

use crate::error::{Result, SmtlError};
use crate::linalg::{
    frob, pinv_psd, psd_clip, psd_power, schatten, sym_eig, symmetrize, Mat, PsdMatrix,
    StructureMatrix, SymEig, Vector, DEFAULT_RANK_TOL,
};

pub const TRACE_ONE_TOL: f64 = 1e-8;
pub const CLUSTER_TOL: f64 = 1e-6;
pub const FIXED_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum PenaltySpec {
    /// `mu ‖A‖_p^p`
    Schatten { p: f64, mu: f64 },
    /// Indicator of `{A ⪰ 0, tr(A) = 1}`.
    TraceOne,
    /// Indicator of `{A(M) : 0 ⪯ M ⪯ I, tr(M) = r}` with
    /// `A(M)^{-1} = eps_m U + eps_b (M - U) + eps_w (I - M)`, `U = 11'/T`.
    Cluster {
        r: usize,
        eps_m: f64,
        eps_b: f64,
        eps_w: f64,
    },
    /// Indicator of a single matrix.
    Fixed(StructureMatrix),
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltySpec::Schatten { p, mu } => write!(f, "schatten(p={p}, mu={mu})"),
            PenaltySpec::TraceOne => write!(f, "trace_one"),
            PenaltySpec::Cluster { r, .. } => write!(f, "cluster(r={r})"),
            PenaltySpec::Fixed(a) => write!(f, "fixed({}x{})", a.dim(), a.dim()),
        }
    }
}

impl PenaltySpec {
    pub fn is_indicator(&self) -> bool {
        !matches!(self, PenaltySpec::Schatten { .. })
    }

    /// Checks parameter ranges for a problem with `n_tasks` tasks.
    pub fn validate(&self, n_tasks: usize) -> Result<()> {
        match self {
            PenaltySpec::Schatten { p, mu } => {
                if !(*p >= 1.0 && p.is_finite()) {
                    return Err(SmtlError::BadPenaltyParam(format!("p must be >= 1, got {p}")));
                }
                if !(*mu > 0.0 && mu.is_finite()) {
                    return Err(SmtlError::BadPenaltyParam(format!("mu must be > 0, got {mu}")));
                }
            }
            PenaltySpec::TraceOne => {}
            PenaltySpec::Cluster { r, eps_m, eps_b, eps_w } => {
                if *r < 1 || *r > n_tasks {
                    return Err(SmtlError::BadPenaltyParam(format!(
                        "cluster count r={r} outside 1..={n_tasks}"
                    )));
                }
                for (name, v) in [("eps_m", eps_m), ("eps_b", eps_b), ("eps_w", eps_w)] {
                    if !(*v > 0.0 && v.is_finite()) {
                        return Err(SmtlError::BadPenaltyParam(format!("{name} must be > 0")));
                    }
                }
                // A(M)^{-1} ⪰ (min(eps_w, eps_b) + min(0, eps_m - eps_b)) I on the whole set
                if eps_w.min(*eps_b) + (eps_m - eps_b).min(0.0) <= 0.0 {
                    return Err(SmtlError::BadPenaltyParam(
                        "eps values allow a singular A(M)^{-1}".into(),
                    ));
                }
            }
            PenaltySpec::Fixed(a) => {
                if a.dim() != n_tasks {
                    return Err(SmtlError::dims(format!(
                        "fixed structure is {0}x{0}, problem has {n_tasks} tasks",
                        a.dim()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn eig_map(eig: &SymEig, f: impl Fn(f64) -> f64) -> Mat {
    eig.map(f)
}

/// `A(M)^{-1}` of the cluster relaxation.
pub fn cluster_precision(m: &Mat, eps_m: f64, eps_b: f64, eps_w: f64) -> Mat {
    let t = m.nrows();
    let u = Mat::from_element(t, t, 1.0 / t as f64);
    &u * (eps_m - eps_b) + Mat::identity(t, t) * eps_w + m * (eps_b - eps_w)
}

/// `A(M)`, the structure matrix for a cluster-relaxation parameter `M`.
pub fn cluster_structure(m: &Mat, eps_m: f64, eps_b: f64, eps_w: f64) -> Result<StructureMatrix> {
    let prec = PsdMatrix::new(&cluster_precision(m, eps_m, eps_b, eps_w))?;
    if !prec.is_strictly_pd() {
        return Err(SmtlError::NotStrictlyPd(prec.eig().min_value()));
    }
    Ok(pinv_psd(&prec))
}

/// A strictly positive definite point in the domain of `F`: `I` for the
/// Schatten family, `I/T` for the trace constraint, `A((r/T) I)` for the
/// cluster set and the matrix itself for a fixed structure.
pub fn feasible_start(spec: &PenaltySpec, t: usize) -> Result<StructureMatrix> {
    spec.validate(t)?;
    match *spec {
        PenaltySpec::Schatten { .. } => Ok(PsdMatrix::identity(t)),
        PenaltySpec::TraceOne => PsdMatrix::new(&(Mat::identity(t, t) / t as f64)),
        PenaltySpec::Cluster { r, eps_m, eps_b, eps_w } => {
            cluster_structure(&(Mat::identity(t, t) * (r as f64 / t as f64)), eps_m, eps_b, eps_w)
        }
        PenaltySpec::Fixed(ref a0) => Ok(a0.clone()),
    }
}

/// Inverts the affine map `M -> A(M)^{-1}`; `None` when `eps_b == eps_w`.
fn cluster_parameter(a_inv: &Mat, eps_m: f64, eps_b: f64, eps_w: f64) -> Option<Mat> {
    if eps_b == eps_w {
        return None;
    }
    let t = a_inv.nrows();
    let u = Mat::from_element(t, t, 1.0 / t as f64);
    Some((a_inv - &u * (eps_m - eps_b) - Mat::identity(t, t) * eps_w) / (eps_b - eps_w))
}

/// Inverse of a symmetric (not necessarily PSD) matrix through its spectrum.
fn sym_inverse(a: &Mat) -> Result<Mat> {
    let eig = sym_eig(a)?;
    let scale = eig.values.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if eig.values.iter().any(|w| w.abs() <= DEFAULT_RANK_TOL * scale || *w == 0.0) {
        return Err(SmtlError::NotStrictlyPd(eig.min_value()));
    }
    Ok(eig_map(&eig, |w| 1.0 / w))
}

fn check_dim(spec: &PenaltySpec, t: usize) -> Result<()> {
    if let PenaltySpec::Fixed(a0) = spec {
        if a0.dim() != t {
            return Err(SmtlError::dims(format!(
                "fixed structure is {0}x{0}, argument is {t}x{t}",
                a0.dim()
            )));
        }
    }
    Ok(())
}

/// `F(A)`; indicator penalties return `0` or `+inf`.
pub fn penalty_value(spec: &PenaltySpec, a: &StructureMatrix) -> Result<f64> {
    check_dim(spec, a.dim())?;
    Ok(match spec {
        PenaltySpec::Schatten { p, mu } => {
            let norm = schatten(a, *p)?;
            mu * norm.powf(*p)
        }
        PenaltySpec::TraceOne => {
            if (a.trace() - 1.0).abs() <= TRACE_ONE_TOL {
                0.0
            } else {
                f64::INFINITY
            }
        }
        PenaltySpec::Cluster { r, eps_m, eps_b, eps_w } => {
            if !a.is_strictly_pd() {
                return Ok(f64::INFINITY);
            }
            let a_inv = pinv_psd(a);
            let t = a.dim();
            let feasible = match cluster_parameter(a_inv.data(), *eps_m, *eps_b, *eps_w) {
                Some(m) => {
                    let e = sym_eig(&m)?;
                    e.min_value() >= -CLUSTER_TOL
                        && e.max_value() <= 1.0 + CLUSTER_TOL
                        && (m.trace() - *r as f64).abs() <= CLUSTER_TOL
                }
                None => {
                    let target = cluster_precision(&Mat::zeros(t, t), *eps_m, *eps_b, *eps_w);
                    frob(&(a_inv.data() - &target)) <= CLUSTER_TOL * (1.0 + frob(&target))
                }
            };
            if feasible {
                0.0
            } else {
                f64::INFINITY
            }
        }
        PenaltySpec::Fixed(a0) => {
            if frob(&(a.data() - a0.data())) <= FIXED_TOL {
                0.0
            } else {
                f64::INFINITY
            }
        }
    })
}

/// Minimizes `lam tr(A^{-1} B) + F(A)` over `A ≻ 0` for `B ≻ 0`.
pub fn unsupervised_min(spec: &PenaltySpec, b: &PsdMatrix, lam: f64) -> Result<StructureMatrix> {
    if !(lam > 0.0) {
        return Err(SmtlError::BadPenaltyParam(format!("lambda must be > 0, got {lam}")));
    }
    check_dim(spec, b.dim())?;
    if !b.is_strictly_pd() {
        return Err(SmtlError::NotStrictlyPd(b.eig().min_value()));
    }
    spec.validate(b.dim())?;
    match spec {
        PenaltySpec::Schatten { p, mu } => {
            // per eigenvalue: lam s / g + mu g^p is minimized at g^{p+1} = lam s / (mu p)
            let scaled = PsdMatrix::from_spectrum(
                b.eig().vectors.clone(),
                b.eig().values.map(|s| s * lam / (mu * p)),
            );
            psd_power(&scaled, 1.0 / (p + 1.0))
        }
        PenaltySpec::TraceOne => {
            let root = psd_power(b, 0.5)?;
            let tr = root.trace();
            Ok(PsdMatrix::from_spectrum(
                root.eig().vectors.clone(),
                root.eig().values.map(|w| w / tr),
            ))
        }
        PenaltySpec::Cluster { r, eps_m, eps_b, eps_w } => {
            let t = b.dim();
            let m = if eps_b == eps_w {
                Mat::identity(t, t) * (*r as f64 / t as f64)
            } else {
                let eig = b.eig();
                // eigenvalues are descending: the tail holds the smallest ones
                let picks: Vec<usize> = if eps_b > eps_w {
                    (t - r..t).collect()
                } else {
                    (0..*r).collect()
                };
                let mut m = Mat::zeros(t, t);
                for j in picks {
                    let v = eig.vectors.column(j);
                    m += &v * v.transpose();
                }
                m
            };
            cluster_structure(&m, *eps_m, *eps_b, *eps_w)
        }
        PenaltySpec::Fixed(a0) => Ok(a0.clone()),
    }
}

/// Euclidean projection of `v` onto `{x ∈ [0,1]^T : Σx = r}`.
pub fn project_capped_simplex(v: &[f64], r: f64) -> Result<Vec<f64>> {
    let t = v.len();
    if !(r > 0.0) || r > t as f64 {
        return Err(SmtlError::BadRank { r, dim: t });
    }
    let shifted = |tau: f64| -> Vec<f64> { v.iter().map(|x| (x - tau).clamp(0.0, 1.0)).collect() };
    let total = |tau: f64| -> f64 { v.iter().map(|x| (x - tau).clamp(0.0, 1.0)).sum() };
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // total(lo) = T >= r, total(hi) = 0 <= r; total is non-increasing in tau
    let (mut lo, mut hi) = (vmin - 1.0, vmax);
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..200 {
        tau = 0.5 * (lo + hi);
        let s = total(tau);
        if (s - r).abs() <= 1e-12 {
            break;
        }
        if s > r {
            lo = tau;
        } else {
            hi = tau;
        }
        if hi - lo <= f64::EPSILON * (1.0 + tau.abs()) {
            break;
        }
    }
    // exact shift on the final active pattern: free entries are v_i - tau
    let x = shifted(tau);
    let free: Vec<usize> = (0..t).filter(|&i| x[i] > 0.0 && x[i] < 1.0).collect();
    if !free.is_empty() {
        let ones = x.iter().filter(|&&e| e >= 1.0).count() as f64;
        let exact = (free.iter().map(|&i| v[i]).sum::<f64>() - (r - ones)) / free.len() as f64;
        let y = shifted(exact);
        // any shift meeting the sum constraint gives the projection
        let err = |z: &[f64]| (z.iter().sum::<f64>() - r).abs();
        if err(&y) <= err(&x) {
            return Ok(y);
        }
    }
    Ok(x)
}

/// Euclidean projection onto the feasible set of an indicator penalty.
pub fn project_structure(spec: &PenaltySpec, a: &Mat) -> Result<StructureMatrix> {
    if a.nrows() != a.ncols() {
        return Err(SmtlError::dims("structure matrix must be square"));
    }
    check_dim(spec, a.nrows())?;
    let t = a.nrows();
    match spec {
        PenaltySpec::Schatten { .. } => Err(SmtlError::UnsupportedPenalty(spec.to_string())),
        PenaltySpec::TraceOne => {
            let eig = sym_eig(&symmetrize(a))?;
            let w = project_capped_simplex(eig.values.as_slice(), 1.0)?;
            Ok(PsdMatrix::from_spectrum(eig.vectors, Vector::from_vec(w)))
        }
        PenaltySpec::Cluster { r, eps_m, eps_b, eps_w } => {
            spec.validate(t)?;
            let m = match cluster_parameter(&sym_inverse(&symmetrize(a))?, *eps_m, *eps_b, *eps_w) {
                Some(m) => {
                    let eig = sym_eig(&symmetrize(&m))?;
                    let w = project_capped_simplex(eig.values.as_slice(), *r as f64)?;
                    PsdMatrix::from_spectrum(eig.vectors, Vector::from_vec(w)).into_data()
                }
                None => Mat::identity(t, t) * (*r as f64 / t as f64),
            };
            cluster_structure(&m, *eps_m, *eps_b, *eps_w)
        }
        PenaltySpec::Fixed(a0) => Ok(a0.clone()),
    }
}

/// Where a fixed a-priori structure comes from.
#[derive(Debug, Clone)]
pub enum Provenance {
    /// `A† = Lap(W_g) + gamma I`
    Graph { adjacency: Mat, gamma: f64 },
    /// `A† = I + gamma 11'/T`
    MeanVariance { tasks: usize, gamma: f64 },
    /// Output metric `Θ`, used directly.
    Metric { theta: Mat },
    /// Linear output code `L_embed` (`l x T`), `A = L'L`.
    Coding { embed: Mat },
}

#[derive(Debug, Clone)]
pub struct FixedStructure {
    pub a: StructureMatrix,
    pub provenance: Provenance,
}

impl FixedStructure {
    pub fn penalty(&self) -> PenaltySpec {
        PenaltySpec::Fixed(self.a.clone())
    }
}

pub fn graph_laplacian(adjacency: &Mat) -> Mat {
    let degrees = adjacency.column_sum();
    Mat::from_diagonal(&degrees) - adjacency
}

pub fn build_fixed_structure(provenance: Provenance) -> Result<FixedStructure> {
    let a = match &provenance {
        Provenance::Graph { adjacency, gamma } => {
            let t = adjacency.nrows();
            if adjacency.ncols() != t
                || adjacency.iter().any(|&v| v < 0.0 || !v.is_finite())
                || frob(&(adjacency - adjacency.transpose())) > 1e-12 * (1.0 + frob(adjacency))
            {
                return Err(SmtlError::AsymmetricAdjacency);
            }
            if !(*gamma > 0.0) {
                return Err(SmtlError::BadPenaltyParam(format!("gamma must be > 0, got {gamma}")));
            }
            let prec = graph_laplacian(adjacency) + Mat::identity(t, t) * *gamma;
            pinv_psd(&PsdMatrix::new(&prec)?)
        }
        Provenance::MeanVariance { tasks, gamma } => {
            let t = *tasks;
            if !(*gamma >= 0.0) {
                return Err(SmtlError::BadPenaltyParam(format!("gamma must be >= 0, got {gamma}")));
            }
            let prec = Mat::identity(t, t) + Mat::from_element(t, t, *gamma / t as f64);
            pinv_psd(&PsdMatrix::new(&prec)?)
        }
        Provenance::Metric { theta } => {
            let p = psd_clip(theta, DEFAULT_RANK_TOL)
                .map_err(|_| SmtlError::NotPd("output metric".into()))?;
            if !p.is_strictly_pd() {
                return Err(SmtlError::NotPd("output metric".into()));
            }
            p
        }
        Provenance::Coding { embed } => psd_clip(&(embed.transpose() * embed), DEFAULT_RANK_TOL)?,
    };
    Ok(FixedStructure { a, provenance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testing::{randn, random_pd};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> Mat {
        Mat::from_diagonal(&Vector::from_vec(v.to_vec()))
    }

    fn psd(m: &Mat) -> PsdMatrix {
        PsdMatrix::new(m).unwrap()
    }

    /// `lam tr(A^{-1} B) + F(A)`, straight from the definition.
    fn step_objective(spec: &PenaltySpec, a: &Mat, b: &Mat, lam: f64) -> f64 {
        let inv = a.clone().try_inverse().unwrap();
        lam * (inv * b).trace() + penalty_value(spec, &psd(a)).unwrap()
    }

    #[test]
    fn penalty_examples() {
        let s1 = PenaltySpec::Schatten { p: 1.0, mu: 1.0 };
        assert!((penalty_value(&s1, &psd(&diag(&[2.0, 3.0]))).unwrap() - 5.0).abs() < 1e-14);
        let s2 = PenaltySpec::Schatten { p: 2.0, mu: 2.0 };
        assert!((penalty_value(&s2, &PsdMatrix::identity(2)).unwrap() - 4.0).abs() < 1e-14);
        let tr1 = PenaltySpec::TraceOne;
        assert_eq!(penalty_value(&tr1, &psd(&diag(&[0.5, 0.5]))).unwrap(), 0.0);
        assert_eq!(penalty_value(&tr1, &psd(&diag(&[1.0, 1.0]))).unwrap(), f64::INFINITY);
        let fixed = PenaltySpec::Fixed(PsdMatrix::identity(2));
        assert_eq!(penalty_value(&fixed, &PsdMatrix::identity(2)).unwrap(), 0.0);
        assert_eq!(penalty_value(&fixed, &psd(&diag(&[1.0, 2.0]))).unwrap(), f64::INFINITY);
        assert!(matches!(
            penalty_value(&fixed, &PsdMatrix::identity(3)),
            Err(SmtlError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cluster_membership() {
        let spec = PenaltySpec::Cluster { r: 1, eps_m: 1.0, eps_b: 2.0, eps_w: 1.5 };
        let a = cluster_structure(&diag(&[0.9, 0.1, 0.0]), 1.0, 2.0, 1.5).unwrap();
        assert_eq!(penalty_value(&spec, &a).unwrap(), 0.0);
        let off = cluster_structure(&diag(&[0.9, 0.5, 0.0]), 1.0, 2.0, 1.5).unwrap();
        assert_eq!(penalty_value(&spec, &off).unwrap(), f64::INFINITY);
        let bad = PenaltySpec::Cluster { r: 4, eps_m: 1.0, eps_b: 2.0, eps_w: 1.5 };
        assert!(bad.validate(3).is_err());
        let singular = PenaltySpec::Cluster { r: 1, eps_m: 0.5, eps_b: 2.0, eps_w: 1.0 };
        assert!(matches!(singular.validate(3), Err(SmtlError::BadPenaltyParam(_))));
    }

    #[test]
    fn schatten_step_diagonal() {
        let spec = PenaltySpec::Schatten { p: 1.0, mu: 1.0 };
        let a = unsupervised_min(&spec, &psd(&diag(&[4.0, 1.0])), 1.0).unwrap();
        assert!((a.data() - diag(&[2.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn trace_one_step_against_grid() {
        let b = diag(&[4.0, 1.0]);
        let a = unsupervised_min(&PenaltySpec::TraceOne, &psd(&b), 1.0).unwrap();
        assert!((a.data() - diag(&[2.0 / 3.0, 1.0 / 3.0])).norm() < 1e-14);
        // brute force over diag(x, 1 - x)
        let (mut best_x, mut best) = (0.0, f64::INFINITY);
        for i in 1..100_000 {
            let x = i as f64 / 100_000.0;
            let v = 4.0 / x + 1.0 / (1.0 - x);
            if v < best {
                best = v;
                best_x = x;
            }
        }
        assert!((best_x - 2.0 / 3.0).abs() < 1e-4);
        assert!((step_objective(&PenaltySpec::TraceOne, a.data(), &b, 1.0) - best).abs() < 1e-6);
    }

    #[test]
    fn schatten_step_beats_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = PenaltySpec::Schatten { p: 2.0, mu: 1.0 };
        let b = random_pd(&mut rng, 3);
        let a = unsupervised_min(&spec, &psd(&b), 1.0).unwrap();
        let best = step_objective(&spec, a.data(), &b, 1.0);
        for k in 0..10_000 {
            let scale = 10f64.powf(-(k % 4) as f64);
            let e = symmetrize(&randn(&mut rng, 3, 3)) * scale;
            let cand = a.data() + e;
            let Ok(c) = PsdMatrix::new(&cand) else { continue };
            if !c.is_strictly_pd() {
                continue;
            }
            assert!(step_objective(&spec, c.data(), &b, 1.0) >= best - 1e-8);
        }
    }

    #[test]
    fn cluster_step_is_extreme_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let b = random_pd(&mut rng, 4);
        for (eb, ew) in [(2.0, 1.5), (1.5, 2.0), (1.5, 1.5)] {
            let spec = PenaltySpec::Cluster { r: 2, eps_m: 1.0, eps_b: eb, eps_w: ew };
            let a = unsupervised_min(&spec, &psd(&b), 1.0).unwrap();
            assert_eq!(penalty_value(&spec, &a).unwrap(), 0.0);
            let best = step_objective(&spec, a.data(), &b, 1.0);
            // random feasible M: rotated capped-simplex spectra
            for _ in 0..500 {
                let q = randn(&mut rng, 4, 4).qr().q();
                let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                let w = project_capped_simplex(&raw, 2.0).unwrap();
                let m = PsdMatrix::from_spectrum(q, Vector::from_vec(w)).into_data();
                let c = cluster_structure(&m, 1.0, eb, ew).unwrap();
                assert!(step_objective(&spec, c.data(), &b, 1.0) >= best - 1e-9);
            }
        }
    }

    #[test]
    fn capped_simplex_examples() {
        let x = project_capped_simplex(&[0.9, 0.5, 0.2], 1.0).unwrap();
        for (a, b) in x.iter().zip([0.7, 0.3, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let feasible = [0.25, 0.5, 0.25];
        let y = project_capped_simplex(&feasible, 1.0).unwrap();
        for (a, b) in y.iter().zip(feasible) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(project_capped_simplex(&[5.0, 5.0], 2.0).unwrap(), vec![1.0, 1.0]);
        assert!(matches!(project_capped_simplex(&[1.0, 2.0], 3.0), Err(SmtlError::BadRank { .. })));
    }

    #[test]
    fn projection_examples() {
        let a = project_structure(&PenaltySpec::TraceOne, &diag(&[2.0, 2.0])).unwrap();
        assert!((a.data() - diag(&[0.5, 0.5])).norm() < 1e-12);
        let a0 = psd(&diag(&[1.0, 3.0]));
        let fixed = PenaltySpec::Fixed(a0.clone());
        assert_eq!(project_structure(&fixed, &diag(&[7.0, 7.0])).unwrap().data(), a0.data());
        assert!(matches!(
            project_structure(&PenaltySpec::Schatten { p: 1.0, mu: 1.0 }, &diag(&[1.0, 1.0])),
            Err(SmtlError::UnsupportedPenalty(_))
        ));

        let (em, eb, ew) = (1.0, 2.0, 1.5);
        let spec = PenaltySpec::Cluster { r: 1, eps_m: em, eps_b: eb, eps_w: ew };
        let start = cluster_structure(&diag(&[0.9, 0.5, 0.2]), em, eb, ew).unwrap();
        let projected = project_structure(&spec, start.data()).unwrap();
        let expected = cluster_structure(&diag(&[0.7, 0.3, 0.0]), em, eb, ew).unwrap();
        assert!((projected.data() - expected.data()).norm() < 1e-9);
        assert_eq!(penalty_value(&spec, &projected).unwrap(), 0.0);
    }

    #[test]
    fn fixed_structure_builders() {
        let mv = build_fixed_structure(Provenance::MeanVariance { tasks: 2, gamma: 0.0 }).unwrap();
        assert!((mv.a.data() - Mat::identity(2, 2)).norm() < 1e-14);
        let g = build_fixed_structure(Provenance::Graph { adjacency: Mat::zeros(3, 3), gamma: 2.0 }).unwrap();
        assert!((g.a.data() - Mat::identity(3, 3) * 0.5).norm() < 1e-14);
        let c = build_fixed_structure(Provenance::Coding { embed: Mat::identity(4, 4) }).unwrap();
        assert!((c.a.data() - Mat::identity(4, 4)).norm() < 1e-14);

        let mut asym = Mat::zeros(2, 2);
        asym[(0, 1)] = 1.0;
        assert!(matches!(
            build_fixed_structure(Provenance::Graph { adjacency: asym, gamma: 1.0 }),
            Err(SmtlError::AsymmetricAdjacency)
        ));
        assert!(matches!(
            build_fixed_structure(Provenance::Metric { theta: diag(&[1.0, 0.0]) }),
            Err(SmtlError::NotPd(_))
        ));

        // A† of the mean/variance coupling is I + gamma 11'/T
        let mv = build_fixed_structure(Provenance::MeanVariance { tasks: 3, gamma: 1.5 }).unwrap();
        let prec = Mat::identity(3, 3) + Mat::from_element(3, 3, 0.5);
        assert!((mv.a.data() * &prec - Mat::identity(3, 3)).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn step_commutes_with_b(seed in 0u64..100_000, p in 1.0f64..3.0, lam in 0.1f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = psd(&random_pd(&mut rng, 4));
            for spec in [PenaltySpec::Schatten { p, mu: 0.7 }, PenaltySpec::TraceOne] {
                let a = unsupervised_min(&spec, &b, lam).unwrap();
                let comm = a.data() * b.data() - b.data() * a.data();
                prop_assert!(comm.norm() <= 1e-8 * b.data().norm() * a.data().norm());
                prop_assert!(a.is_strictly_pd());
            }
            let a = unsupervised_min(&PenaltySpec::TraceOne, &b, lam).unwrap();
            prop_assert!((a.trace() - 1.0).abs() <= 1e-10);
            let base = Mat::identity(4, 4) * 0.25;
            prop_assert!(step_objective(&PenaltySpec::TraceOne, a.data(), b.data(), lam)
                <= step_objective(&PenaltySpec::TraceOne, &base, b.data(), lam) + 1e-12);
        }

        #[test]
        fn rotated_spectrum_never_has_smaller_norm(seed in 0u64..100_000, p in 1.0f64..3.0) {
            // Any A' with the same trace term tr(A'^{-1}B) has ‖A'‖_p >= ‖A‖_p.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = psd(&random_pd(&mut rng, 3));
            let a = unsupervised_min(&PenaltySpec::Schatten { p, mu: 1.0 }, &b, 1.0).unwrap();
            let target = (pinv_psd(&a).data() * b.data()).trace();
            let norm_a = schatten(&a, p).unwrap();
            for _ in 0..20 {
                let q = randn(&mut rng, 3, 3).qr().q();
                let rotated = PsdMatrix::from_spectrum(q, a.eig().values.clone());
                let tr = (pinv_psd(&rotated).data() * b.data()).trace();
                // rescale so the trace terms match
                let scaled = PsdMatrix::from_spectrum(
                    rotated.eig().vectors.clone(),
                    rotated.eig().values.map(|w| w * tr / target),
                );
                prop_assert!(schatten(&scaled, p).unwrap() >= norm_a - 1e-10);
            }
        }

        #[test]
        fn capped_simplex_is_optimal(seed in 0u64..100_000, r in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 3.0 - 1.0).collect();
            let x = project_capped_simplex(&v, r as f64).unwrap();
            prop_assert!((x.iter().sum::<f64>() - r as f64).abs() <= 1e-10);
            prop_assert!(x.iter().all(|&e| (0.0..=1.0).contains(&e)));
            let dist = |y: &[f64]| v.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let dx = dist(&x);
            for _ in 0..1000 {
                let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                let y = project_capped_simplex(&raw, r as f64).unwrap();
                prop_assert!(dist(&y) >= dx - 1e-10);
            }
        }
    }
}
