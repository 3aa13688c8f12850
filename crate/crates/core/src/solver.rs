//! Block-coordinate solvers for the barrier problem `S^delta`.
//!
//! `altmin` alternates exact minimization over `C` (supervised step) and
//! over `A` (unsupervised step); `bcd` takes one guarded first-order step per
//! block instead. Both start from `C = 0` and a strictly positive definite
//! `A_0` and optionally anneal `delta` geometrically with warm starts.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::Cholesky;

use crate::data::{Loss, TaskDataset};
use crate::error::{Result, SmtlError};
use crate::kernels::{GramMatrix, KernelSpec};
use crate::linalg::{
    frob, pinv_psd, psd_power, solve_sym_sylvester, Mat, PsdMatrix, StructureMatrix, SymEig,
};
use crate::objectives::ProblemInstance;
use crate::penalties::{feasible_start, project_structure, unsupervised_min, PenaltySpec};

/// Smallest eigenvalue kept by the projected `A` steps of `bcd`.
pub const MIN_EIG: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    AltMin,
    Bcd,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DeltaSchedule {
    #[default]
    Fixed,
    Geometric { factor: f64, floor: f64 },
}

#[derive(Debug, Clone, Default)]
pub enum InitStructure {
    /// `I`, or the nearest natural feasible point for indicator penalties
    /// (see [`feasible_start`]).
    #[default]
    Identity,
    Custom(StructureMatrix),
}

/// Linear solver used by the exact supervised step when some loss weights
/// differ within a task column (missing outputs, long-format data).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskedSolver {
    /// Direct solve when the number of observed entries is at most
    /// [`DIRECT_LIMIT`], conjugate gradient otherwise.
    #[default]
    Auto,
    Direct,
    Cg,
}

pub const DIRECT_LIMIT: usize = 4000;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: Mode,
    pub epsilon: f64,
    /// Stop on `|ΔS| / (1 + |S|) < epsilon` instead of the absolute decrease.
    pub relative_stop: bool,
    pub max_iter: usize,
    pub delta: f64,
    pub delta_schedule: DeltaSchedule,
    pub step_c: f64,
    pub step_a: f64,
    pub a0: InitStructure,
    pub masked_solver: MaskedSolver,
    pub cg_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::AltMin,
            epsilon: 1e-8,
            relative_stop: false,
            max_iter: 1000,
            delta: 1e-3,
            delta_schedule: DeltaSchedule::Fixed,
            step_c: 1e-2,
            step_a: 1e-2,
            a0: InitStructure::Identity,
            masked_solver: MaskedSolver::Auto,
            cg_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SmtlError::Invalid(m.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if let DeltaSchedule::Geometric { factor, floor } = self.delta_schedule {
            if !(factor > 0.0 && factor < 1.0) {
                return bad("delta factor must lie in (0, 1)");
            }
            if !(floor > 0.0) {
                return bad("delta floor must be > 0");
            }
        }
        if self.mode == Mode::Bcd && !(self.step_c > 0.0 && self.step_a > 0.0) {
            return bad("bcd step sizes must be > 0");
        }
        if !(self.cg_tol > 0.0) {
            return bad("cg tolerance must be > 0");
        }
        Ok(())
    }
}

/// Loss, regularization weights and penalty of a fit, independent of data.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    pub lam: f64,
    pub ridge: f64,
    pub penalty: PenaltySpec,
    pub loss: Loss,
}

impl ProblemParams {
    pub fn new(lam: f64, penalty: PenaltySpec) -> Self {
        ProblemParams {
            lam,
            ridge: 0.0,
            penalty,
            loss: Loss::Squared,
        }
    }

    pub fn instance(&self, gram: Arc<GramMatrix>, data: &TaskDataset, delta: f64) -> Result<ProblemInstance> {
        Ok(ProblemInstance::from_dataset(gram, data, self.lam, self.penalty.clone(), delta)?
            .with_ridge(self.ridge)?
            .with_loss(self.loss))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, Default)]
pub struct WallTimes {
    pub supervised: f64,
    pub unsupervised: f64,
    pub objective: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    /// `S` at the start of each phase and after every outer iteration.
    pub objective_trajectory: Vec<f64>,
    /// `S(C_{t+1}, A_t)` aligned with the trajectory; NaN at phase starts.
    pub half_steps: Vec<f64>,
    /// Index into the trajectory where each `delta` phase starts, with its delta.
    pub phases: Vec<(usize, f64)>,
    pub iters: usize,
    pub termination: Termination,
    pub wall_times: WallTimes,
    pub final_delta: f64,
    pub threads: usize,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trajectory.last().unwrap_or(&f64::NAN)
    }

    /// Largest relative increase between consecutive values inside any phase,
    /// including the intermediate value after each supervised step.
    pub fn worst_increase(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 1..self.objective_trajectory.len() {
            let mid = self.half_steps[k];
            if mid.is_nan() {
                continue;
            }
            let prev = self.objective_trajectory[k - 1];
            let cur = self.objective_trajectory[k];
            let scale = 1.0 + prev.abs();
            worst = worst.max((mid - prev) / scale).max((cur - mid) / scale);
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct ModelState {
    pub c: Mat,
    pub a: StructureMatrix,
    pub inst: ProblemInstance,
}

impl ModelState {
    pub fn gram(&self) -> &GramMatrix {
        &self.inst.gram
    }

    /// Training predictions `KC`.
    pub fn fitted(&self) -> Mat {
        self.inst.k() * &self.c
    }
}

fn column_weights(w: &Mat) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(w.ncols());
    for col in w.column_iter() {
        let first = col[0];
        if !(first > 0.0) || col.iter().any(|&v| v != first) {
            return None;
        }
        out.push(first);
    }
    Some(out)
}

/// Spectral form of the coupling `P = lam A^{-1} + ridge I`.
fn coupling(inst: &ProblemInstance, a: &StructureMatrix) -> Result<SymEig> {
    if !a.is_strictly_pd() {
        return Err(SmtlError::SingularA {
            min_eig: a.eig().min_value(),
            max_eig: a.eig().max_value(),
        });
    }
    Ok(SymEig {
        values: a.eig().values.map(|d| inst.lam / d + inst.ridge),
        vectors: a.eig().vectors.clone(),
    })
}

/// Exact minimizer in `C` when every task column has one constant weight.
fn supervised_full(inst: &ProblemInstance, a: &StructureMatrix, weights: &[f64]) -> Result<Mat> {
    // (KC - Y) D + C P = 0  <=>  K C' + C' D^{-1/2} P D^{-1/2} = Y D^{1/2},  C = C' D^{-1/2}
    let p = coupling(inst, a)?.map(|v| v);
    let t = weights.len();
    let g = Mat::from_fn(t, t, |i, j| p[(i, j)] / (weights[i] * weights[j]).sqrt());
    let g_eig = crate::linalg::sym_eig(&g)?;
    let mut rhs = inst.y.clone();
    for (j, mut col) in rhs.column_iter_mut().enumerate() {
        col *= weights[j].sqrt();
    }
    let mut c = solve_sym_sylvester(&inst.gram.eig(), &g_eig, &rhs)?;
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col /= weights[j].sqrt();
    }
    Ok(c)
}

/// Direct solve over the observed entries: with `Σ = P^{-1}` and
/// `G_{(i,s),(j,u)} = K_ij Σ_su`, the coefficients are `α = (G + W^{-1})^{-1} y`
/// and `C = C_α Σ`.
fn supervised_direct(inst: &ProblemInstance, a: &StructureMatrix) -> Result<Mat> {
    let p = coupling(inst, a)?;
    let sigma = p.map(|v| 1.0 / v);
    let (n, t) = inst.y.shape();
    let support: Vec<(usize, usize)> = (0..t)
        .flat_map(|s| (0..n).map(move |i| (i, s)))
        .filter(|&(i, s)| inst.w[(i, s)] > 0.0)
        .collect();
    let m = support.len();
    let k = inst.k();
    let mut sys = Mat::zeros(m, m);
    for (col, &(j, u)) in support.iter().enumerate() {
        for (row, &(i, s)) in support.iter().enumerate().skip(col) {
            let v = k[(i, j)] * sigma[(s, u)];
            sys[(row, col)] = v;
            sys[(col, row)] = v;
        }
        sys[(col, col)] += 1.0 / inst.w[(j, u)];
    }
    let rhs = nalgebra::DVector::from_iterator(m, support.iter().map(|&(i, s)| inst.y[(i, s)]));
    let chol = Cholesky::new(sys).ok_or(SmtlError::SingularMatrix)?;
    let alpha = chol.solve(&rhs);
    let mut cq = Mat::zeros(n, t);
    for (idx, &(i, s)) in support.iter().enumerate() {
        cq[(i, s)] = alpha[idx];
    }
    Ok(cq * sigma)
}

/// Preconditioned CG on `K^{1/2}(W ⊙ K^{1/2}U) + U P = K^{1/2}(W ⊙ Y)` with
/// `U = K^{1/2} C`, the normal equations of the masked problem after the
/// substitution; the operator is SPD because `P ≻ 0`.
fn supervised_cg(inst: &ProblemInstance, a: &StructureMatrix, c_prev: &Mat, tol: f64) -> Result<Mat> {
    let p = coupling(inst, a)?.map(|v| v);
    let k_eig = inst.gram.eig();
    let root = k_eig.map(|s| s.max(0.0).sqrt());
    let cut = inst.gram.cutoff();
    let root_pinv = k_eig.map(|s| if s > cut && s > 0.0 { 1.0 / s.sqrt() } else { 0.0 });
    let w = &inst.w;
    let apply = |u: &Mat| -> Mat {
        let inner = (&root * u).component_mul(w);
        &root * inner + u * &p
    };
    let rhs = &root * inst.y.component_mul(w);
    let (n, t) = inst.y.shape();
    let root_sq = root.component_mul(&root);
    let precond = Mat::from_fn(n, t, |i, s| {
        let mut d = p[(s, s)];
        for j in 0..n {
            d += root_sq[(i, j)] * w[(j, s)];
        }
        1.0 / d
    });

    let rhs_norm = frob(&rhs);
    if rhs_norm == 0.0 {
        return Ok(Mat::zeros(n, t));
    }
    let mut u = &root * c_prev;
    let mut r = &rhs - apply(&u);
    let mut z = r.component_mul(&precond);
    let mut dir = z.clone();
    let mut rz = r.dot(&z);
    let max_iter = 10 * n * t;
    let mut rel = frob(&r) / rhs_norm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        let ad = apply(&dir);
        let alpha = rz / dir.dot(&ad);
        u += &dir * alpha;
        r -= &ad * alpha;
        rel = frob(&r) / rhs_norm;
        if rel <= tol {
            break;
        }
        z = r.component_mul(&precond);
        let rz_new = r.dot(&z);
        dir = &z + &dir * (rz_new / rz);
        rz = rz_new;
        it += 1;
    }
    if !(rel <= 1e-6) {
        return Err(SmtlError::CgStall(rel));
    }
    Ok(&root_pinv * u)
}

fn eval_or_inf(inst: &ProblemInstance, c: &Mat, a: &StructureMatrix) -> f64 {
    match inst.eval_s(c, a) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

/// Exact minimizer of `S` in `C` for squared loss, used by `altmin`.
pub fn exact_supervised(inst: &ProblemInstance, a: &StructureMatrix, c_prev: &Mat, config: &SolverConfig) -> Result<Mat> {
    if inst.loss != Loss::Squared {
        return Err(SmtlError::Invalid(
            "the exact supervised step needs the squared loss; use mode = bcd".into(),
        ));
    }
    if let Some(weights) = column_weights(&inst.w) {
        return supervised_full(inst, a, &weights);
    }
    let nnz = inst.w.iter().filter(|&&v| v > 0.0).count();
    match config.masked_solver {
        MaskedSolver::Direct => supervised_direct(inst, a),
        MaskedSolver::Cg => supervised_cg(inst, a, c_prev, config.cg_tol),
        MaskedSolver::Auto if nnz <= DIRECT_LIMIT => supervised_direct(inst, a),
        MaskedSolver::Auto => supervised_cg(inst, a, c_prev, config.cg_tol),
    }
}

/// Conjugate-gradient supervised step regardless of the weight pattern.
pub fn supervised_cg_step(inst: &ProblemInstance, a: &StructureMatrix, c_prev: &Mat, tol: f64) -> Result<Mat> {
    supervised_cg(inst, a, c_prev, tol)
}

/// Halves the step until `S` does not increase; keeps the old point otherwise.
fn backtrack<T: Clone>(
    start: T,
    current: f64,
    step: f64,
    mut propose: impl FnMut(f64) -> Option<(T, f64)>,
) -> T {
    let mut eta = step;
    for _ in 0..40 {
        if let Some((cand, value)) = propose(eta) {
            if value <= current {
                return cand;
            }
        }
        eta *= 0.5;
    }
    start
}

pub fn supervised_step(inst: &ProblemInstance, a: &StructureMatrix, c_prev: &Mat, config: &SolverConfig) -> Result<Mat> {
    match config.mode {
        Mode::AltMin => exact_supervised(inst, a, c_prev, config),
        Mode::Bcd => {
            let grad = inst.grad_s_c(c_prev, a)?;
            let current = inst.eval_s(c_prev, a)?;
            Ok(backtrack(c_prev.clone(), current, config.step_c, |eta| {
                let cand = c_prev - &grad * eta;
                let v = eval_or_inf(inst, &cand, a);
                Some((cand, v))
            }))
        }
    }
}

pub fn unsupervised_step(inst: &ProblemInstance, c: &Mat, a_prev: &StructureMatrix, config: &SolverConfig) -> Result<StructureMatrix> {
    if !(inst.delta > 0.0) {
        return Err(SmtlError::Invalid("the unsupervised step needs delta > 0".into()));
    }
    match config.mode {
        Mode::AltMin => {
            // delta² I keeps the target positive definite however small delta is
            let b = PsdMatrix::new(&inst.barrier_target(c))?.with_rank_tol(0.0);
            unsupervised_min(&inst.penalty, &b, inst.lam)
        }
        Mode::Bcd => {
            let grad = inst.grad_s_a(c, a_prev)?;
            let current = inst.eval_s(c, a_prev)?;
            let indicator = inst.penalty.is_indicator();
            Ok(backtrack(a_prev.clone(), current, config.step_a, |eta| {
                let moved = a_prev.data() - &grad * eta;
                let cand = if indicator {
                    project_structure(&inst.penalty, &moved).ok()?
                } else {
                    let eig = crate::linalg::sym_eig(&moved).ok()?;
                    PsdMatrix::from_spectrum(eig.vectors, eig.values.map(|w| w.max(MIN_EIG)))
                };
                let v = eval_or_inf(inst, c, &cand);
                Some((cand, v))
            }))
        }
    }
}

fn initial_structure(config: &SolverConfig, penalty: &PenaltySpec, t: usize) -> Result<StructureMatrix> {
    match &config.a0 {
        InitStructure::Identity => feasible_start(penalty, t),
        InitStructure::Custom(a) => {
            if a.dim() != t {
                return Err(SmtlError::dims(format!("A0 is {0}x{0}, expected {t}x{t}", a.dim())));
            }
            if !a.is_strictly_pd() {
                return Err(SmtlError::NotStrictlyPd(a.eig().min_value()));
            }
            Ok(a.clone())
        }
    }
}

fn next_delta(delta: f64, schedule: DeltaSchedule) -> Option<f64> {
    match schedule {
        DeltaSchedule::Fixed => None,
        DeltaSchedule::Geometric { factor, floor } => {
            if delta <= floor * (1.0 + 1e-9) {
                None
            } else {
                Some((delta * factor).max(floor))
            }
        }
    }
}

/// Runs the block-coordinate iteration on a prepared instance.
/// `inst.delta` is overridden by `config.delta` and the schedule.
pub fn solve(inst: &ProblemInstance, config: &SolverConfig, c0: Option<Mat>) -> Result<(ModelState, FitReport)> {
    config.validate()?;
    inst.validate()?;
    let start = Instant::now();
    let mut times = WallTimes::default();
    let mut a = initial_structure(config, &inst.penalty, inst.n_tasks())?;
    let mut c = c0.unwrap_or_else(|| Mat::zeros(inst.n(), inst.n_tasks()));
    let mut delta = config.delta;
    let mut trajectory = Vec::new();
    let mut half_steps = Vec::new();
    let mut phases = Vec::new();
    let mut iters = 0;
    let mut termination;
    loop {
        let phase = inst.with_delta(delta);
        phases.push((trajectory.len(), delta));
        let mut prev = phase.eval_s(&c, &a)?;
        trajectory.push(prev);
        half_steps.push(f64::NAN);
        termination = Termination::MaxIter;
        for _ in 0..config.max_iter {
            iters += 1;
            let t0 = Instant::now();
            c = supervised_step(&phase, &a, &c, config)?;
            let t1 = Instant::now();
            let mid = phase.eval_s(&c, &a)?;
            let t2 = Instant::now();
            a = unsupervised_step(&phase, &c, &a, config)?;
            let t3 = Instant::now();
            let cur = phase.eval_s(&c, &a)?;
            let t4 = Instant::now();
            times.supervised += (t1 - t0).as_secs_f64();
            times.unsupervised += (t3 - t2).as_secs_f64();
            times.objective += (t2 - t1).as_secs_f64() + (t4 - t3).as_secs_f64();
            if !cur.is_finite() {
                return Err(SmtlError::NonFiniteObjective(iters));
            }
            half_steps.push(mid);
            trajectory.push(cur);
            let change = (cur - prev).abs();
            let scaled = if config.relative_stop { change / (1.0 + prev.abs()) } else { change };
            prev = cur;
            if scaled < config.epsilon {
                termination = Termination::Converged;
                break;
            }
        }
        match next_delta(delta, config.delta_schedule) {
            Some(d) => delta = d,
            None => break,
        }
    }
    times.total = start.elapsed().as_secs_f64();
    let report = FitReport {
        objective_trajectory: trajectory,
        half_steps,
        phases,
        iters,
        termination,
        wall_times: times,
        final_delta: delta,
        threads: 1,
    };
    let inst = inst.with_delta(delta);
    Ok((ModelState { c, a, inst }, report))
}

/// Fits on a dataset with a precomputed Gram matrix.
pub fn fit_with_gram(
    gram: Arc<GramMatrix>,
    data: &TaskDataset,
    params: &ProblemParams,
    config: &SolverConfig,
) -> Result<(ModelState, FitReport)> {
    if data.n() == 0 {
        return Err(SmtlError::Invalid("empty dataset".into()));
    }
    if let Some(t) = data.task_sizes.iter().position(|&s| s == 0) {
        return Err(SmtlError::EmptyTask(t));
    }
    let inst = params.instance(gram, data, config.delta)?;
    solve(&inst, config, None)
}

pub fn fit(
    data: &TaskDataset,
    kernel: KernelSpec,
    params: &ProblemParams,
    config: &SolverConfig,
) -> Result<(ModelState, FitReport)> {
    let gram = Arc::new(GramMatrix::new(kernel, data.x.clone())?);
    fit_with_gram(gram, data, params, config)
}

/// Re-solves the supervised step for a new `lambda` with `A` frozen.
pub fn refit_supervised(model: &ModelState, new_lambda: f64, config: &SolverConfig) -> Result<ModelState> {
    let mut inst = model.inst.clone();
    inst.lam = new_lambda;
    inst.validate()?;
    let mut exact = config.clone();
    exact.mode = Mode::AltMin;
    let c = exact_supervised(&inst, &model.a, &model.c, &exact)?;
    Ok(ModelState {
        c,
        a: model.a.clone(),
        inst,
    })
}

/// `A^{p}` helper kept public for alignment checks in tests and oracles.
pub fn structure_power(a: &StructureMatrix, q: f64) -> Result<StructureMatrix> {
    psd_power(a, q)
}

/// Inverse of a strictly positive definite structure matrix.
pub fn structure_inverse(a: &StructureMatrix) -> Result<StructureMatrix> {
    if !a.is_strictly_pd() {
        return Err(SmtlError::NotStrictlyPd(a.eig().min_value()));
    }
    Ok(pinv_psd(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testing::{randn, random_pd};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize, t: usize, penalty: PenaltySpec) -> ProblemInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = randn(&mut rng, n, 3);
        let gram = Arc::new(GramMatrix::new(KernelSpec::Gaussian { gamma: 0.3 }, x).unwrap());
        let y = randn(&mut rng, n, t);
        let w = Mat::from_element(n, t, 1.0 / n as f64);
        ProblemInstance::new(gram, y, w, 0.1, penalty, 1e-3).unwrap()
    }

    fn schatten(p: f64) -> PenaltySpec {
        PenaltySpec::Schatten { p, mu: 0.5 }
    }

    #[test]
    fn exact_step_is_stationary() {
        let inst = instance(1, 12, 3, schatten(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = PsdMatrix::new(&random_pd(&mut rng, 3)).unwrap();
        let c = exact_supervised(&inst, &a, &Mat::zeros(12, 3), &SolverConfig::default()).unwrap();
        let g = inst.grad_s_c(&c, &a).unwrap();
        assert!(frob(&g) < 1e-9, "gradient {}", frob(&g));
    }

    #[test]
    fn masked_solvers_agree_with_full_solve() {
        let inst = instance(3, 10, 3, schatten(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = PsdMatrix::new(&random_pd(&mut rng, 3)).unwrap();
        let full = supervised_full(&inst, &a, &[0.1, 0.1, 0.1]).unwrap();
        let direct = supervised_direct(&inst, &a).unwrap();
        let cg = supervised_cg(&inst, &a, &Mat::zeros(10, 3), 1e-10).unwrap();
        let k = inst.k();
        // predictions are unique even when K is singular
        let scale = frob(&(k * &full));
        assert!(frob(&(k * (&direct - &full))) <= 1e-7 * scale);
        assert!(frob(&(k * (&cg - &full))) <= 1e-7 * scale);
    }

    #[test]
    fn masked_direct_and_cg_agree_with_missing_entries() {
        let mut inst = instance(5, 14, 3, schatten(2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for v in inst.w.iter_mut() {
            if rng.gen::<f64>() < 0.4 {
                *v = 0.0;
            }
        }
        let a = PsdMatrix::new(&random_pd(&mut rng, 3)).unwrap();
        let direct = supervised_direct(&inst, &a).unwrap();
        let cg = supervised_cg(&inst, &a, &Mat::zeros(14, 3), 1e-11).unwrap();
        let k = inst.k();
        assert!(frob(&(k * (&direct - &cg))) <= 1e-7 * frob(&(k * &direct)));
        let g = inst.grad_s_c(&direct, &a).unwrap();
        assert!(frob(&(k * &g)) < 1e-8);
    }

    #[test]
    fn altmin_descends_and_converges() {
        for penalty in [schatten(1.0), schatten(2.0), PenaltySpec::TraceOne] {
            let inst = instance(7, 15, 3, penalty);
            let config = SolverConfig {
                epsilon: 1e-12,
                max_iter: 5000,
                ..SolverConfig::default()
            };
            let (_, report) = solve(&inst, &config, None).unwrap();
            assert_eq!(report.termination, Termination::Converged);
            assert!(report.worst_increase() <= 1e-12, "{}", report.worst_increase());
        }
    }

    #[test]
    fn altmin_start_independence() {
        let inst = instance(8, 12, 3, schatten(1.0));
        let base = SolverConfig {
            epsilon: 1e-13,
            max_iter: 20000,
            ..SolverConfig::default()
        };
        let (_, r1) = solve(&inst, &base, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let custom = SolverConfig {
            a0: InitStructure::Custom(PsdMatrix::new(&random_pd(&mut rng, 3)).unwrap()),
            ..base
        };
        let (_, r2) = solve(&inst, &custom, Some(randn(&mut rng, 12, 3))).unwrap();
        let (s1, s2) = (r1.final_objective(), r2.final_objective());
        assert!((s1 - s2).abs() <= 1e-6 * s1.abs(), "{s1} vs {s2}");
    }

    #[test]
    fn bcd_is_monotone() {
        for penalty in [schatten(1.5), PenaltySpec::TraceOne] {
            let inst = instance(10, 10, 3, penalty);
            let config = SolverConfig {
                mode: Mode::Bcd,
                step_c: 1.0,
                step_a: 1.0,
                max_iter: 200,
                ..SolverConfig::default()
            };
            let (_, report) = solve(&inst, &config, None).unwrap();
            assert!(report.worst_increase() <= 0.0);
            let traj = &report.objective_trajectory;
            assert!(traj.last().unwrap() < &traj[0]);
        }
    }

    #[test]
    fn bcd_handles_logistic_loss() {
        let mut inst = instance(11, 10, 2, schatten(2.0)).with_loss(Loss::Logistic);
        inst.y = inst.y.map(|v| if v > 0.0 { 1.0 } else { -1.0 });
        let config = SolverConfig {
            mode: Mode::Bcd,
            step_c: 1.0,
            step_a: 1.0,
            max_iter: 50,
            ..SolverConfig::default()
        };
        let (_, report) = solve(&inst, &config, None).unwrap();
        assert!(report.worst_increase() <= 0.0);
        assert!(matches!(
            solve(&inst, &SolverConfig::default(), None),
            Err(SmtlError::Invalid(_))
        ));
    }

    #[test]
    fn geometric_schedule_phases() {
        let inst = instance(12, 8, 2, schatten(1.0));
        let config = SolverConfig {
            delta_schedule: DeltaSchedule::Geometric { factor: 0.1, floor: 1e-6 },
            ..SolverConfig::default()
        };
        let (model, report) = solve(&inst, &config, None).unwrap();
        let deltas: Vec<f64> = report.phases.iter().map(|p| p.1).collect();
        assert_eq!(deltas.len(), 4);
        assert!((report.final_delta - 1e-6).abs() < 1e-18);
        assert_eq!(model.inst.delta, report.final_delta);
        assert!(report.worst_increase() <= 1e-12);
    }

    #[test]
    fn refit_changes_only_c() {
        let inst = instance(13, 9, 2, schatten(2.0));
        let (model, _) = solve(&inst, &SolverConfig::default(), None).unwrap();
        let refit = refit_supervised(&model, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(refit.a.data(), model.a.data());
        assert_eq!(refit.inst.lam, 1.0);
        assert!(frob(&refit.c) < frob(&model.c));
        let g = refit.inst.grad_s_c(&refit.c, &refit.a).unwrap();
        assert!(frob(&g) < 1e-9);
    }

    #[test]
    fn config_and_data_errors() {
        let inst = instance(14, 6, 2, schatten(1.0));
        let bad = SolverConfig {
            epsilon: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve(&inst, &bad, None).is_err());
        let singular = SolverConfig {
            a0: InitStructure::Custom(PsdMatrix::new(&Mat::from_diagonal_element(2, 2, 0.0)).unwrap()),
            ..SolverConfig::default()
        };
        assert!(matches!(solve(&inst, &singular, None), Err(SmtlError::NotStrictlyPd(_))));

        let x = Mat::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let data = TaskDataset::from_long(x, &[0, 0, 2], &[1.0, 2.0, 3.0], 3, Default::default());
        assert!(matches!(data, Err(SmtlError::EmptyTask(1))));
    }
}
