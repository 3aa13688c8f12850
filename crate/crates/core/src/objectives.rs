//! The three objective functionals and the maps between parameterizations.
//!
//! * `Q(C, A) = V(Y, KCA) + lam tr(A C'KC) + F(A)`
//! * `R(C, A) = V(Y, KC) + lam tr(A† C'KC) + F(A)`, `+inf` unless `Ran(C'KC) ⊆ Ran(A)`
//! * `S(C, A) = V(Y, KC) + lam tr(A^{-1}(C'KC + delta² I)) + F(A)` on `A ≻ 0`
//!
//! An optional ridge term `ridge tr(C'KC)` is added to `R` and `S` (and its
//! image `ridge tr(A C'KC A)` to `Q`).

use std::sync::Arc;

use crate::data::{loss_value, loss_value_grad, Loss, TaskDataset};
use crate::error::{Result, SmtlError};
use crate::kernels::GramMatrix;
use crate::linalg::{pinv_psd, psd_power, range_contained, Mat, PsdMatrix, StructureMatrix};
use crate::penalties::{penalty_value, PenaltySpec};

/// Tolerance of the range-inclusion test that defines the domain of `R`.
pub const RANGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub gram: Arc<GramMatrix>,
    pub y: Mat,
    pub w: Mat,
    pub lam: f64,
    pub ridge: f64,
    pub penalty: PenaltySpec,
    pub delta: f64,
    pub loss: Loss,
}

impl ProblemInstance {
    pub fn new(
        gram: Arc<GramMatrix>,
        y: Mat,
        w: Mat,
        lam: f64,
        penalty: PenaltySpec,
        delta: f64,
    ) -> Result<Self> {
        let inst = ProblemInstance {
            gram,
            y,
            w,
            lam,
            ridge: 0.0,
            penalty,
            delta,
            loss: Loss::Squared,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_dataset(
        gram: Arc<GramMatrix>,
        data: &TaskDataset,
        lam: f64,
        penalty: PenaltySpec,
        delta: f64,
    ) -> Result<Self> {
        Self::new(gram, data.y.clone(), data.w.clone(), lam, penalty, delta)
    }

    pub fn with_ridge(mut self, ridge: f64) -> Result<Self> {
        self.ridge = ridge;
        self.validate()?;
        Ok(self)
    }

    pub fn with_loss(mut self, loss: Loss) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.delta = delta;
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gram.n();
        if self.y.nrows() != n || self.w.shape() != self.y.shape() {
            return Err(SmtlError::dims(format!(
                "K is {n}x{n}, Y is {:?}, W is {:?}",
                self.y.shape(),
                self.w.shape()
            )));
        }
        if !(self.lam > 0.0 && self.lam.is_finite()) {
            return Err(SmtlError::Invalid(format!("lambda must be > 0, got {}", self.lam)));
        }
        if !(self.ridge >= 0.0) || !(self.delta >= 0.0) {
            return Err(SmtlError::Invalid("ridge and delta must be >= 0".into()));
        }
        if self.w.iter().any(|&v| !(v >= 0.0)) {
            return Err(SmtlError::Invalid("loss weights must be nonnegative".into()));
        }
        self.penalty.validate(self.n_tasks())
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_tasks(&self) -> usize {
        self.y.ncols()
    }

    pub fn k(&self) -> &Mat {
        self.gram.data()
    }

    fn check_shapes(&self, c: &Mat, a: &StructureMatrix) -> Result<()> {
        if c.shape() != self.y.shape() || a.dim() != self.n_tasks() {
            return Err(SmtlError::dims(format!(
                "C is {:?} and A is {}x{}, expected {:?} and {t}x{t}",
                c.shape(),
                a.dim(),
                a.dim(),
                self.y.shape(),
                t = self.n_tasks()
            )));
        }
        Ok(())
    }

    /// `C'KC`, formed as `(R'C)'(R'C)` so it stays PSD when `C` is large.
    pub fn ckc(&self, c: &Mat) -> Mat {
        let rc = self.gram.root().transpose() * c;
        rc.transpose() * rc
    }

    pub fn loss_at(&self, z: &Mat) -> Result<f64> {
        loss_value(self.loss, &self.y, z, &self.w)
    }

    pub fn eval_q(&self, c: &Mat, a: &StructureMatrix) -> Result<f64> {
        self.check_shapes(c, a)?;
        let z = self.k() * c * a.data();
        let ckc = self.ckc(c);
        let mut v = self.loss_at(&z)? + self.lam * (a.data() * &ckc).trace();
        if self.ridge > 0.0 {
            v += self.ridge * (a.data() * &ckc * a.data()).trace();
        }
        Ok(v + penalty_value(&self.penalty, a)?)
    }

    pub fn eval_r(&self, c: &Mat, a: &StructureMatrix) -> Result<f64> {
        self.check_shapes(c, a)?;
        let ckc = self.ckc(c);
        if !range_contained(&ckc, a, RANGE_TOL)? {
            return Ok(f64::INFINITY);
        }
        let pen = penalty_value(&self.penalty, a)?;
        if pen.is_infinite() {
            return Ok(f64::INFINITY);
        }
        // tr(A† B) in A's eigenbasis, skipping the null space
        let eig = a.eig();
        let cut = a.cutoff();
        let mut coupling = 0.0;
        for (j, &d) in eig.values.iter().enumerate() {
            if d > cut && d > 0.0 {
                let v = eig.vectors.column(j);
                coupling += (v.transpose() * &ckc * v)[(0, 0)] / d;
            }
        }
        let z = self.k() * c;
        let mut v = self.loss_at(&z)? + self.lam * coupling + pen;
        if self.ridge > 0.0 {
            v += self.ridge * ckc.trace();
        }
        Ok(v)
    }

    fn require_pd(a: &StructureMatrix) -> Result<()> {
        if !a.is_strictly_pd() {
            return Err(SmtlError::NotStrictlyPd(a.eig().min_value()));
        }
        Ok(())
    }

    /// `C'KC + delta² I`.
    pub fn barrier_target(&self, c: &Mat) -> Mat {
        let t = self.n_tasks();
        self.ckc(c) + Mat::identity(t, t) * (self.delta * self.delta)
    }

    pub fn eval_s(&self, c: &Mat, a: &StructureMatrix) -> Result<f64> {
        self.check_shapes(c, a)?;
        Self::require_pd(a)?;
        let a_inv = pinv_psd(a);
        let b = self.barrier_target(c);
        let z = self.k() * c;
        let mut v = self.loss_at(&z)? + self.lam * (a_inv.data() * &b).trace();
        if self.ridge > 0.0 {
            v += self.ridge * self.ckc(c).trace();
        }
        Ok(v + penalty_value(&self.penalty, a)?)
    }

    pub fn grad_s_c(&self, c: &Mat, a: &StructureMatrix) -> Result<Mat> {
        self.check_shapes(c, a)?;
        Self::require_pd(a)?;
        let k = self.k();
        let kc = k * c;
        let (_, gz) = loss_value_grad(self.loss, &self.y, &kc, &self.w)?;
        let a_inv = pinv_psd(a);
        let mut g = k * gz + &kc * a_inv.data() * (2.0 * self.lam);
        if self.ridge > 0.0 {
            g += &kc * (2.0 * self.ridge);
        }
        Ok(g)
    }

    /// Gradient in `A` of the smooth part of `S` (indicator penalties contribute nothing).
    pub fn grad_s_a(&self, c: &Mat, a: &StructureMatrix) -> Result<Mat> {
        self.check_shapes(c, a)?;
        Self::require_pd(a)?;
        let a_inv = pinv_psd(a);
        let b = self.barrier_target(c);
        let mut g = -(a_inv.data() * b * a_inv.data()) * self.lam;
        if let PenaltySpec::Schatten { p, mu } = self.penalty {
            g += psd_power(a, p - 1.0)?.data() * (mu * p);
        }
        Ok((&g + g.transpose()) * 0.5)
    }

    /// `(C_R A_R†, A_R)`, a Q-form pair with the same objective value.
    pub fn map_r_to_q(&self, c_r: &Mat, a_r: &StructureMatrix) -> Result<(Mat, StructureMatrix)> {
        self.check_shapes(c_r, a_r)?;
        if !range_contained(&self.ckc(c_r), a_r, RANGE_TOL)? {
            return Err(SmtlError::InfeasiblePair);
        }
        Ok((c_r * pinv_psd(a_r).data(), a_r.clone()))
    }

    /// `(C_Q A_Q, A_Q)`, always feasible for `R`.
    pub fn map_q_to_r(&self, c_q: &Mat, a_q: &StructureMatrix) -> Result<(Mat, StructureMatrix)> {
        self.check_shapes(c_q, a_q)?;
        Ok((c_q * a_q.data(), a_q.clone()))
    }
}

/// Convenience for building structure matrices in tests and oracles.
pub fn structure(a: &Mat) -> Result<StructureMatrix> {
    PsdMatrix::new(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::linalg::testing::{randn, random_pd, random_psd};
    use crate::linalg::{sylvester_ls_solve, symmetrize, Vector};
    use crate::penalties::unsupervised_min;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ckc_stays_psd_for_huge_null_space_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = randn(&mut rng, 30, 2);
        let gram = Arc::new(GramMatrix::new(KernelSpec::Linear, x.clone()).unwrap());
        let inst = ProblemInstance::new(gram, Mat::zeros(30, 3), Mat::from_element(30, 3, 1.0), 1.0, PenaltySpec::Schatten { p: 1.0, mu: 1.0 }, 0.0).unwrap();
        // columns orthogonal to the inputs lie in the null space of K
        let g = randn(&mut rng, 30, 3);
        let proj = &x * (x.transpose() * &x).try_inverse().unwrap() * x.transpose();
        let c = (&g - &proj * &g) * 1e8 + randn(&mut rng, 30, 3);
        let b = inst.ckc(&c);
        let eig = crate::linalg::sym_eig(&b).unwrap();
        assert!(eig.min_value() >= -1e-9 * eig.max_value());
        let direct = c.transpose() * &x * x.transpose() * &c;
        assert!((b - &direct).norm() <= 1e-6 * direct.norm().max(1.0) + 1e-4);
    }

    fn instance(rng: &mut ChaCha8Rng, n: usize, t: usize, penalty: PenaltySpec, delta: f64) -> ProblemInstance {
        let x = randn(rng, n, 3);
        let gram = Arc::new(GramMatrix::new(KernelSpec::Gaussian { gamma: 0.3 }, x).unwrap());
        let y = randn(rng, n, t);
        let w = Mat::from_fn(n, t, |_, _| 0.5 + rng.gen::<f64>());
        ProblemInstance::new(gram, y, w, 0.7, penalty, delta).unwrap()
    }

    fn identity_instance(y: Mat, penalty: PenaltySpec, delta: f64) -> ProblemInstance {
        let n = y.nrows();
        let gram = Arc::new(GramMatrix::from_matrix(&Mat::identity(n, n), KernelSpec::Linear, Mat::identity(n, n)).unwrap());
        let w = Mat::from_element(n, y.ncols(), 1.0);
        ProblemInstance::new(gram, y, w, 1.0, penalty, delta).unwrap()
    }

    fn trace1() -> PenaltySpec {
        PenaltySpec::Schatten { p: 1.0, mu: 1.0 }
    }

    #[test]
    fn q_at_zero_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = instance(&mut rng, 5, 3, trace1(), 0.1);
        let inst = ProblemInstance { lam: 1.0, ..inst };
        let q = inst.eval_q(&Mat::zeros(5, 3), &PsdMatrix::identity(3)).unwrap();
        let expected: f64 = inst.y.iter().zip(inst.w.iter()).map(|(y, w)| w * y * y).sum::<f64>() + 3.0;
        assert!((q - expected).abs() < 1e-12);
    }

    #[test]
    fn identity_structure_collapses_q_and_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = identity_instance(randn(&mut rng, 4, 2), trace1(), 0.0);
        let id = PsdMatrix::identity(2);
        for _ in 0..5 {
            let c = randn(&mut rng, 4, 2);
            let (q, r) = (inst.eval_q(&c, &id).unwrap(), inst.eval_r(&c, &id).unwrap());
            assert!((q - r).abs() <= 1e-12 * q.abs());
        }
    }

    #[test]
    fn q_equals_r_at_mapped_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for penalty in [trace1(), PenaltySpec::Schatten { p: 2.5, mu: 0.3 }] {
            let inst = instance(&mut rng, 6, 3, penalty, 0.0).with_ridge(0.2).unwrap();
            for rank in [1, 3] {
                let a = PsdMatrix::new(&random_psd(&mut rng, 3, rank)).unwrap();
                let c = randn(&mut rng, 6, 3);
                let q = inst.eval_q(&c, &a).unwrap();
                let r = inst.eval_r(&(&c * a.data()), &a).unwrap();
                assert!((q - r).abs() <= 1e-10 * (1.0 + q.abs()), "q={q} r={r}");
            }
        }
    }

    #[test]
    fn r_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = identity_instance(randn(&mut rng, 3, 2), trace1(), 0.0);
        let a = PsdMatrix::new(&Mat::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]))).unwrap();
        let v0 = inst.eval_r(&Mat::zeros(3, 2), &a).unwrap();
        assert!((v0 - (inst.y.norm_squared() + 1.0)).abs() < 1e-12);
        let mut c = Mat::zeros(3, 2);
        c[(0, 1)] = 0.3;
        assert_eq!(inst.eval_r(&c, &a).unwrap(), f64::INFINITY);
        assert!(matches!(inst.map_r_to_q(&c, &a), Err(SmtlError::InfeasiblePair)));
    }

    #[test]
    fn s_all_identity_arithmetic() {
        let inst = identity_instance(Mat::identity(2, 2), trace1(), 1.0);
        let s = inst.eval_s(&Mat::zeros(2, 2), &PsdMatrix::identity(2)).unwrap();
        assert!((s - 6.0).abs() < 1e-14);
        let sing = PsdMatrix::new(&Mat::from_diagonal(&Vector::from_vec(vec![1.0, 0.0]))).unwrap();
        assert!(matches!(inst.eval_s(&Mat::zeros(2, 2), &sing), Err(SmtlError::NotStrictlyPd(_))));
    }

    #[test]
    fn s_dominates_r_and_grows_with_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = instance(&mut rng, 5, 3, trace1(), 0.0);
        for _ in 0..20 {
            let c = randn(&mut rng, 5, 3);
            let a = PsdMatrix::new(&random_pd(&mut rng, 3)).unwrap();
            let r = base.eval_r(&c, &a).unwrap();
            let mut prev = base.eval_s(&c, &a).unwrap();
            assert!((prev - r).abs() <= 1e-12 * (1.0 + r.abs()));
            for delta in [1e-6, 1e-3, 0.1, 1.0, 3.0] {
                let s = base.with_delta(delta).eval_s(&c, &a).unwrap();
                assert!(s >= r && s >= prev);
                prev = s;
            }
            let tiny = base.with_delta(1e-9).eval_s(&c, &a).unwrap();
            assert!((tiny - r).abs() <= 1e-9 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn gradient_c_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = instance(&mut rng, 6, 2, trace1(), 0.1);
        let inst = ProblemInstance { w: Mat::from_element(6, 2, 1.0), ..inst };
        let g0 = inst.grad_s_c(&Mat::zeros(6, 2), &PsdMatrix::identity(2)).unwrap();
        let expected = -(inst.k() * &inst.y) * 2.0;
        assert!((g0 - &expected).norm() <= 1e-12 * expected.norm());

        let a = PsdMatrix::new(&random_pd(&mut rng, 2)).unwrap();
        let c = sylvester_ls_solve(inst.gram.psd(), &a, inst.lam, &inst.y).unwrap();
        let g = inst.grad_s_c(&c, &a).unwrap();
        assert!(g.norm() <= 1e-6 * (1.0 + inst.y.norm()));
    }

    #[test]
    fn gradient_a_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inst = instance(&mut rng, 6, 3, PenaltySpec::Schatten { p: 2.0, mu: 0.5 }, 0.1);
        let c = randn(&mut rng, 6, 3);
        let b = PsdMatrix::new(&inst.barrier_target(&c)).unwrap();
        let a = unsupervised_min(&inst.penalty, &b, inst.lam).unwrap();
        assert!(inst.grad_s_a(&c, &a).unwrap().norm() <= 1e-6);

        // p = 1: the penalty gradient is mu I
        let inst1 = ProblemInstance { penalty: PenaltySpec::Schatten { p: 1.0, mu: 0.8 }, ..inst.clone() };
        let a = PsdMatrix::new(&random_pd(&mut rng, 3)).unwrap();
        let diff = inst1.grad_s_a(&c, &a).unwrap() - inst.with_delta(0.1).grad_s_a(&c, &a).unwrap();
        let expected = Mat::identity(3, 3) * 0.8 - psd_power(&a, 1.0).unwrap().data() * 1.0;
        assert!((diff - expected).norm() < 1e-10);
    }

    /// Central differences of `S` in `C` (entrywise) and along random symmetric directions in `A`.
    pub(crate) fn fd_errors(inst: &ProblemInstance, c: &Mat, a: &StructureMatrix, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let h = 1e-5;
        let gc = inst.grad_s_c(c, a).unwrap();
        let mut fd = Mat::zeros(c.nrows(), c.ncols());
        for i in 0..c.nrows() {
            for j in 0..c.ncols() {
                let mut cp = c.clone();
                cp[(i, j)] += h;
                let mut cm = c.clone();
                cm[(i, j)] -= h;
                fd[(i, j)] = (inst.eval_s(&cp, a).unwrap() - inst.eval_s(&cm, a).unwrap()) / (2.0 * h);
            }
        }
        let err_c = (&fd - &gc).norm() / gc.norm().max(1e-12);
        let ga = inst.grad_s_a(c, a).unwrap();
        let t = a.dim();
        let mut num = 0.0;
        let mut den = 0.0;
        for _ in 0..10 {
            let e = symmetrize(&randn(rng, t, t));
            let ap = PsdMatrix::new(&(a.data() + &e * h)).unwrap();
            let am = PsdMatrix::new(&(a.data() - &e * h)).unwrap();
            let fd = (inst.eval_s(c, &ap).unwrap() - inst.eval_s(c, &am).unwrap()) / (2.0 * h);
            let an = ga.dot(&e);
            num += (fd - an).powi(2);
            den += an.powi(2);
        }
        (err_c, (num / den.max(1e-24)).sqrt())
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for penalty in [trace1(), PenaltySpec::Schatten { p: 2.0, mu: 0.4 }, PenaltySpec::Schatten { p: 1.5, mu: 1.0 }] {
            let inst = instance(&mut rng, 5, 3, penalty, 0.3).with_ridge(0.1).unwrap();
            let c = randn(&mut rng, 5, 3);
            let a = PsdMatrix::new(&random_pd(&mut rng, 3)).unwrap();
            let (ec, ea) = fd_errors(&inst, &c, &a, &mut rng);
            assert!(ec < 1e-5 && ea < 1e-5, "{ec} {ea}");
        }
    }

    #[test]
    fn maps_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inst = instance(&mut rng, 4, 2, trace1(), 0.0);
        let c = randn(&mut rng, 4, 2);
        let id = PsdMatrix::identity(2);
        let (cq, _) = inst.map_r_to_q(&c, &id).unwrap();
        assert!((cq - &c).norm() < 1e-14);
        let (cr, _) = inst.map_q_to_r(&c, &id).unwrap();
        assert!((cr - &c).norm() < 1e-14);

        let one = Arc::new(GramMatrix::from_matrix(&Mat::identity(1, 1), KernelSpec::Linear, Mat::identity(1, 1)).unwrap());
        let tiny = ProblemInstance::new(one, Mat::zeros(1, 2), Mat::from_element(1, 2, 1.0), 1.0, trace1(), 0.0).unwrap();
        let a = PsdMatrix::new(&Mat::from_diagonal(&Vector::from_vec(vec![2.0, 0.0]))).unwrap();
        let (cq, _) = tiny.map_r_to_q(&Mat::from_row_slice(1, 2, &[2.0, 0.0]), &a).unwrap();
        assert!((&cq - Mat::from_row_slice(1, 2, &[1.0, 0.0])).norm() < 1e-14);
        let (cr, _) = tiny.map_q_to_r(&cq, &a).unwrap();
        assert!((cr - Mat::from_row_slice(1, 2, &[2.0, 0.0])).norm() < 1e-14);
    }

    fn feasible_pair(rng: &mut ChaCha8Rng, n: usize, t: usize) -> (Mat, StructureMatrix) {
        let rank = rng.gen_range(1..=t);
        let a = PsdMatrix::new(&random_psd(rng, t, rank)).unwrap();
        let c = randn(rng, n, t) * a.data();
        (c, a)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn theorem_one_round_trip(seed in 0u64..100_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = instance(&mut rng, 5, 3, trace1(), 0.0);
            let (c, a) = feasible_pair(&mut rng, 5, 3);
            let r = inst.eval_r(&c, &a).unwrap();
            prop_assert!(r.is_finite());
            let (cq, aq) = inst.map_r_to_q(&c, &a).unwrap();
            let q = inst.eval_q(&cq, &aq).unwrap();
            prop_assert!((q - r).abs() <= 1e-9 * (1.0 + r.abs()));
            let (cr, ar) = inst.map_q_to_r(&cq, &aq).unwrap();
            let r2 = inst.eval_r(&cr, &ar).unwrap();
            prop_assert!((r2 - r).abs() <= 1e-9 * (1.0 + r.abs()));
        }

        #[test]
        fn r_and_s_are_jointly_convex(seed in 0u64..100_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = instance(&mut rng, 5, 2, PenaltySpec::Schatten { p: 2.0, mu: 0.5 }, 0.2);
            let (c1, a1) = feasible_pair(&mut rng, 5, 2);
            let (c2, a2) = feasible_pair(&mut rng, 5, 2);
            let cm = (&c1 + &c2) * 0.5;
            let am = PsdMatrix::new(&((a1.data() + a2.data()) * 0.5)).unwrap();
            let r0 = inst.with_delta(0.0);
            let mid = r0.eval_r(&cm, &am).unwrap();
            let avg = 0.5 * (r0.eval_r(&c1, &a1).unwrap() + r0.eval_r(&c2, &a2).unwrap());
            prop_assert!(mid <= avg + 1e-9 * (1.0 + avg.abs()));

            let p1 = PsdMatrix::new(&random_pd(&mut rng, 2)).unwrap();
            let p2 = PsdMatrix::new(&random_pd(&mut rng, 2)).unwrap();
            let pm = PsdMatrix::new(&((p1.data() + p2.data()) * 0.5)).unwrap();
            let d1 = randn(&mut rng, 5, 2);
            let d2 = randn(&mut rng, 5, 2);
            let dm = (&d1 + &d2) * 0.5;
            let smid = inst.eval_s(&dm, &pm).unwrap();
            let savg = 0.5 * (inst.eval_s(&d1, &p1).unwrap() + inst.eval_s(&d2, &p2).unwrap());
            prop_assert!(smid <= savg + 1e-9 * (1.0 + savg.abs()));
        }
    }
}
