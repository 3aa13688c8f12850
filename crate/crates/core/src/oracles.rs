//! Independent checks of the equivalence results on tiny instances.
//!
//! Every check is deterministic given its seed and returns an
//! [`OracleReport`] instead of failing. The brute-force minimizers search the
//! cone of 2x2 positive definite matrices `[[a, b], [b, c]]` with
//! `b = rho sqrt(ac)` on a 40-point-per-axis grid over
//! `log10 a, log10 c in [-6, 2]`, `rho in (-1, 1)`, then refine around the
//! best point with windows of four grid spacings (spacing shrinks about 10x
//! per round, three rounds, extended while the best point sits on a window
//! edge). The inner minimization over coefficients is closed form.

use std::sync::Arc;

use nalgebra::SVD;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Loss;
use crate::error::{Result, SmtlError};
use crate::kernels::{GramMatrix, KernelSpec};
use crate::linalg::{
    frob, kron_ls_solve, pinv_psd, psd_power, sym_eig, sylvester_ls_solve, Mat, PsdMatrix, StructureMatrix,
};
use crate::objectives::ProblemInstance;
use crate::penalties::{build_fixed_structure, unsupervised_min, PenaltySpec, Provenance};
use crate::solver::{solve, supervised_cg_step, DeltaSchedule, InitStructure, MaskedSolver, Mode, SolverConfig};
use crate::synth::substream;

pub const GRID_POINTS: usize = 40;
pub const REFINE_ROUNDS: usize = 3;
pub const LOG_MIN: f64 = -6.0;
pub const LOG_MAX: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub detail: String,
    /// Set when a failure is expected and explained; such reports do not
    /// count as suite failures.
    pub known_issue: Option<String>,
}

impl OracleReport {
    fn within(name: &str, observed: f64, expected: f64, tolerance: f64, detail: String) -> Self {
        OracleReport {
            name: name.to_string(),
            passed: (observed - expected).abs() <= tolerance,
            observed,
            expected,
            tolerance,
            detail,
            known_issue: None,
        }
    }

    fn error(name: &str, err: SmtlError, detail: String) -> Self {
        OracleReport {
            name: name.to_string(),
            passed: false,
            observed: f64::NAN,
            expected: 0.0,
            tolerance: 0.0,
            detail: format!("{detail}; error: {err}"),
            known_issue: None,
        }
    }

    pub fn status(&self) -> &'static str {
        match (self.passed, &self.known_issue) {
            (true, _) => "PASS",
            (false, Some(_)) => "KNOWN-FAIL",
            (false, None) => "FAIL",
        }
    }

    pub fn counts_as_failure(&self) -> bool {
        !self.passed && self.known_issue.is_none()
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "{:<10} {:<32} observed={:.3e} expected={:.3e} tol={:.1e}  {}",
            self.status(),
            self.name,
            self.observed,
            self.expected,
            self.tolerance,
            self.detail
        );
        if let (false, Some(why)) = (self.passed, &self.known_issue) {
            s.push_str(&format!(" [{why}]"));
        }
        s
    }
}

pub fn reports_to_csv(reports: &[OracleReport]) -> String {
    let mut out = String::from("name,status,observed,expected,tolerance,detail\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{:e},{:e},{:e},\"{}\"\n",
            r.name,
            r.status(),
            r.observed,
            r.expected,
            r.tolerance,
            r.detail.replace('"', "'")
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// random instances

pub fn randn<R: Rng>(rng: &mut R, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `G G' / c + shift I` with Gaussian `G`.
pub fn random_pd<R: Rng>(rng: &mut R, m: usize, shift: f64) -> Mat {
    let g = randn(rng, m, m);
    &g * g.transpose() / m as f64 + Mat::identity(m, m) * shift
}

fn random_sym<R: Rng>(rng: &mut R, m: usize) -> Mat {
    let g = randn(rng, m, m);
    (&g + g.transpose()) * 0.5
}

/// Random `n x 2` problem with a Gaussian kernel and full per-task weights.
pub fn random_two_task_instance<R: Rng>(rng: &mut R, n: usize, penalty: PenaltySpec) -> Result<ProblemInstance> {
    random_instance(rng, n, 2, penalty)
}

pub fn random_instance<R: Rng>(rng: &mut R, n: usize, t: usize, penalty: PenaltySpec) -> Result<ProblemInstance> {
    let x = randn(rng, n, 2);
    let gram = Arc::new(GramMatrix::new(KernelSpec::Gaussian { gamma: 0.5 }, x)?);
    // distinct smooth signals plus a little noise
    let y = gram.data() * randn(rng, n, t) + randn(rng, n, t) * 0.1;
    let w = Mat::from_element(n, t, 1.0 / n as f64);
    let lam = rng.gen_range(0.05..0.5);
    ProblemInstance::new(gram, y, w, lam, penalty, 1e-3)
}

fn tight_config() -> SolverConfig {
    SolverConfig {
        epsilon: 1e-14,
        relative_stop: true,
        max_iter: 200_000,
        ..SolverConfig::default()
    }
}

/// Tight tolerances with delta lowered 10x per phase from 0.1 to `floor`.
/// Warm-started phases let the range of `A` settle while the barrier is still
/// large; a direct start at tiny delta freezes it when the optimum is singular.
fn continuation_config(floor: f64) -> SolverConfig {
    SolverConfig {
        delta: 1e-1,
        delta_schedule: DeltaSchedule::Geometric { factor: 0.1, floor },
        ..tight_config()
    }
}

// ---------------------------------------------------------------------------
// grid search

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    open: bool,
}

fn grid_search(axes: &[Axis], mut f: impl FnMut(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let dims = axes.len();
    let n = GRID_POINTS;
    let mut windows: Vec<(f64, f64)> = axes
        .iter()
        .map(|ax| {
            if ax.open {
                let h = (ax.hi - ax.lo) / n as f64;
                (ax.lo + 0.5 * h, ax.hi - 0.5 * h)
            } else {
                (ax.lo, ax.hi)
            }
        })
        .collect();
    let mut best_x = vec![0.0; dims];
    let mut best = f64::INFINITY;
    let mut point = vec![0.0; dims];
    let mut round = 0;
    loop {
        let spacing: Vec<f64> = windows.iter().map(|w| (w.1 - w.0) / (n - 1) as f64).collect();
        let mut edge = false;
        let mut best_idx = vec![0usize; dims];
        for flat in 0..n.pow(dims as u32) {
            let mut rem = flat;
            let mut idx = vec![0usize; dims];
            for k in 0..dims {
                idx[k] = rem % n;
                rem /= n;
                point[k] = windows[k].0 + spacing[k] * idx[k] as f64;
            }
            let v = f(&point);
            if v < best {
                best = v;
                best_x.copy_from_slice(&point);
                best_idx = idx;
            }
        }
        for k in 0..dims {
            let at_edge = best_idx[k] == 0 || best_idx[k] == n - 1;
            let inner = if best_idx[k] == 0 {
                windows[k].0 > axes[k].lo + 1e-9 * (axes[k].hi - axes[k].lo)
            } else {
                windows[k].1 < axes[k].hi - 1e-9 * (axes[k].hi - axes[k].lo)
            };
            edge |= round > 0 && at_edge && inner;
        }
        round += 1;
        if round > REFINE_ROUNDS && (!edge || round > 4 * REFINE_ROUNDS) {
            break;
        }
        for k in 0..dims {
            let margin = if axes[k].open { 1e-12 * (axes[k].hi - axes[k].lo) } else { 0.0 };
            let lo = (best_x[k] - 2.0 * spacing[k]).max(axes[k].lo + margin);
            let hi = (best_x[k] + 2.0 * spacing[k]).min(axes[k].hi - margin);
            windows[k] = (lo, hi);
        }
    }
    (best_x, best)
}

// ---------------------------------------------------------------------------
// two-task closed-form profile

/// A `T = 2` squared-loss problem with constant weights per task, written in
/// the eigenbasis of `K` so that the best `C` for a given `A` is a 2x2 solve
/// per eigenvalue.
pub struct TwoTask {
    s: Vec<f64>,
    yt: Vec<[f64; 2]>,
    w: [f64; 2],
    lam: f64,
    ridge: f64,
    delta: f64,
    vectors: Mat,
}

#[derive(Debug, Clone)]
pub struct BruteForce {
    pub value: f64,
    pub c: Mat,
    pub a: Mat,
}

fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mid + rad, mid - rad)
}

impl TwoTask {
    pub fn new(inst: &ProblemInstance) -> Result<Self> {
        if inst.n_tasks() != 2 || inst.loss != Loss::Squared {
            return Err(SmtlError::Invalid("brute force needs two tasks and squared loss".into()));
        }
        let mut w = [0.0; 2];
        for (t, wt) in w.iter_mut().enumerate() {
            let col = inst.w.column(t);
            *wt = col[0];
            if !(col[0] > 0.0) || col.iter().any(|&v| v != col[0]) {
                return Err(SmtlError::Invalid("brute force needs constant weights per task".into()));
            }
        }
        let eig = inst.gram.eig();
        let yt = eig.vectors.transpose() * &inst.y;
        Ok(TwoTask {
            s: eig.values.iter().map(|v| v.max(0.0)).collect(),
            yt: (0..yt.nrows()).map(|i| [yt[(i, 0)], yt[(i, 1)]]).collect(),
            w,
            lam: inst.lam,
            ridge: inst.ridge,
            delta: inst.delta,
            vectors: eig.vectors.clone(),
        })
    }

    /// `min_C` of everything but `F(A)`, and the minimizer in the eigenbasis
    /// when `keep` is set. Rows are written as `c_i = g_i A` with
    /// `(s_i D A + lam I + ridge A) g_i = D y_i`, which stays well conditioned
    /// as `A` approaches the boundary of the cone.
    fn profile(&self, a: f64, b: f64, c: f64, mut keep: Option<&mut Vec<[f64; 2]>>) -> f64 {
        let det = a * c - b * b;
        if !(det > 0.0) || !(a > 0.0) {
            return f64::INFINITY;
        }
        let [w0, w1] = self.w;
        let (lam, ridge) = (self.lam, self.ridge);
        let mut value = if self.delta > 0.0 {
            lam * self.delta * self.delta * (a + c) / det
        } else {
            0.0
        };
        for (s, y) in self.s.iter().zip(&self.yt) {
            let m00 = s * w0 * a + lam + ridge * a;
            let m01 = s * w0 * b + ridge * b;
            let m10 = s * w1 * b + ridge * b;
            let m11 = s * w1 * c + lam + ridge * c;
            let md = m00 * m11 - m01 * m10;
            let (r0, r1) = (w0 * y[0], w1 * y[1]);
            let g0 = (m11 * r0 - m01 * r1) / md;
            let g1 = (m00 * r1 - m10 * r0) / md;
            // c = A g, fit = s c
            let (c0, c1) = (a * g0 + b * g1, b * g0 + c * g1);
            let (e0, e1) = (y[0] - s * c0, y[1] - s * c1);
            let ag_norm = g0 * c0 + g1 * c1;
            let a2_norm = c0 * c0 + c1 * c1;
            value += w0 * e0 * e0 + w1 * e1 * e1 + s * (lam * ag_norm + ridge * a2_norm);
            if let Some(out) = keep.as_deref_mut() {
                out.push([c0, c1]);
            }
        }
        value
    }

    fn result(&self, a: f64, b: f64, c: f64, value: f64) -> BruteForce {
        let mut rows = Vec::new();
        self.profile(a, b, c, Some(&mut rows));
        let ct = Mat::from_fn(rows.len(), 2, |i, j| rows[i][j]);
        BruteForce {
            value,
            c: &self.vectors * ct,
            a: Mat::from_row_slice(2, 2, &[a, b, b, c]),
        }
    }

    /// Brute-force minimum over `A ≻ 0` of the profile plus `penalty(e1, e2)`
    /// evaluated on the eigenvalues of `A`.
    pub fn minimize(&self, penalty: impl Fn(f64, f64) -> f64) -> BruteForce {
        let axes = [
            Axis { lo: LOG_MIN, hi: LOG_MAX, open: false },
            Axis { lo: LOG_MIN, hi: LOG_MAX, open: false },
            Axis { lo: -1.0, hi: 1.0, open: true },
        ];
        let abc = |x: &[f64]| {
            let (a, c) = (10f64.powf(x[0]), 10f64.powf(x[1]));
            (a, x[2] * (a * c).sqrt(), c)
        };
        let (x, value) = grid_search(&axes, |x| {
            let (a, b, c) = abc(x);
            let (e1, e2) = eig2(a, b, c);
            self.profile(a, b, c, None) + penalty(e1, e2)
        });
        let (a, b, c) = abc(&x);
        self.result(a, b, c, value)
    }

    fn minimize_trace_one(&self) -> BruteForce {
        let axes = [Axis { lo: 0.0, hi: 1.0, open: true }, Axis { lo: -1.0, hi: 1.0, open: true }];
        let abc = |x: &[f64]| (x[0], x[1] * (x[0] * (1.0 - x[0])).sqrt(), 1.0 - x[0]);
        let (x, value) = grid_search(&axes, |x| {
            let (a, b, c) = abc(x);
            self.profile(a, b, c, None)
        });
        let (a, b, c) = abc(&x);
        self.result(a, b, c, value)
    }
}

/// Global minimum of `S^delta` (or of `R` when `delta = 0`) for a two-task
/// squared-loss instance.
pub fn brute_force_min_s(inst: &ProblemInstance) -> Result<BruteForce> {
    let two = TwoTask::new(inst)?;
    match &inst.penalty {
        PenaltySpec::Schatten { p, mu } => {
            let (p, mu) = (*p, *mu);
            Ok(two.minimize(|e1, e2| mu * (e1.max(0.0).powf(p) + e2.max(0.0).powf(p))))
        }
        PenaltySpec::TraceOne => Ok(two.minimize_trace_one()),
        PenaltySpec::Fixed(a0) => {
            let m = a0.data();
            let value = two.profile(m[(0, 0)], m[(0, 1)], m[(1, 1)], None);
            Ok(two.result(m[(0, 0)], m[(0, 1)], m[(1, 1)], value))
        }
        other => Err(SmtlError::UnsupportedPenalty(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Theorem 1 and barrier convergence

pub fn check_theorem1(seed: u64, trials: usize) -> OracleReport {
    const NAME: &str = "theorem1_q_equals_r";
    let mut worst_gap: f64 = 0.0;
    let mut worst_map: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = substream(seed, trial as u64);
        let mut run = || -> Result<(f64, f64)> {
            let n = rng.gen_range(4..=8);
            let mu = rng.gen_range(0.5..2.0);
            let inst = random_two_task_instance(&mut rng, n, PenaltySpec::Schatten { p: 1.0, mu })?;
            let min_r = brute_force_min_s(&inst.with_delta(0.0))?.value;
            let config = continuation_config(1e-6);
            let (model, _) = solve(&inst, &config, None)?;
            let (cq, aq) = inst.map_r_to_q(&model.c, &model.a)?;
            let min_q = inst.eval_q(&cq, &aq)?;
            let mut map_gap = (min_q - inst.eval_r(&model.c, &model.a)?).abs();
            let cq2 = randn(&mut rng, n, 2);
            let aq2 = PsdMatrix::new(&random_pd(&mut rng, 2, 0.1))?;
            let (cr2, ar2) = inst.map_q_to_r(&cq2, &aq2)?;
            map_gap = map_gap.max((inst.eval_r(&cr2, &ar2)? - inst.eval_q(&cq2, &aq2)?).abs());
            Ok(((min_q - min_r).abs(), map_gap))
        };
        match run() {
            Ok((gap, map_gap)) => {
                worst_gap = worst_gap.max(gap);
                worst_map = worst_map.max(map_gap);
            }
            Err(e) => return OracleReport::error(NAME, e, format!("seed={seed} trial={trial}")),
        }
    }
    let mut report = OracleReport::within(
        NAME,
        worst_gap,
        0.0,
        1e-4,
        format!("seed={seed} trials={trials} max map gap={worst_map:.2e} (tol 1e-6)"),
    );
    report.passed &= worst_map <= 1e-6;
    report
}

pub const BARRIER_DELTAS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

/// R-values of the warm-started barrier solutions for each delta.
pub fn barrier_path(inst: &ProblemInstance, deltas: &[f64]) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    let mut warm: Option<(Mat, StructureMatrix)> = None;
    for &delta in deltas {
        let mut config = tight_config();
        config.delta = delta;
        let c0 = warm.as_ref().map(|w| w.0.clone());
        if let Some((_, a)) = &warm {
            config.a0 = InitStructure::Custom(a.clone());
        }
        let (model, report) = solve(&inst.with_delta(delta), &config, c0)?;
        if report.worst_increase() > 1e-10 {
            return Err(SmtlError::Invalid(format!(
                "objective increased by {:.2e} at delta {delta}",
                report.worst_increase()
            )));
        }
        values.push(inst.eval_r(&model.c, &model.a)?);
        warm = Some((model.c, model.a));
    }
    Ok(values)
}

pub fn check_barrier_convergence(inst: &ProblemInstance) -> OracleReport {
    const NAME: &str = "barrier_convergence";
    let run = || -> Result<(Vec<f64>, f64)> {
        let values = barrier_path(inst, &BARRIER_DELTAS)?;
        let min_r = brute_force_min_s(&inst.with_delta(0.0))?.value;
        Ok((values, min_r))
    };
    match run() {
        Err(e) => OracleReport::error(NAME, e, String::new()),
        Ok((values, min_r)) => {
            let worst_rise = values
                .windows(2)
                .map(|w| (w[1] - w[0]) / (1.0 + w[0].abs()))
                .fold(f64::NEG_INFINITY, f64::max);
            let last = *values.last().unwrap();
            let mut report = OracleReport::within(
                NAME,
                last - min_r,
                0.0,
                1e-3,
                format!(
                    "R along delta=1e-1..1e-5: {}; brute-force min R={min_r:.8}; worst rise={worst_rise:.2e}",
                    values.iter().map(|v| format!("{v:.8}")).collect::<Vec<_>>().join(" ")
                ),
            );
            report.passed &= worst_rise <= 1e-9;
            report
        }
    }
}

pub fn check_barrier_convergence_seeded(seed: u64) -> OracleReport {
    let mut rng = substream(seed, 0);
    let n = rng.gen_range(4..=8);
    let mu = rng.gen_range(0.5..2.0);
    match random_two_task_instance(&mut rng, n, PenaltySpec::Schatten { p: 1.0, mu }) {
        Ok(inst) => {
            let mut r = check_barrier_convergence(&inst);
            r.detail = format!("seed={seed} {}", r.detail);
            r
        }
        Err(e) => OracleReport::error("barrier_convergence", e, format!("seed={seed}")),
    }
}

// ---------------------------------------------------------------------------
// appendix results

fn schatten_norm(a: &Mat, p: f64) -> f64 {
    let eig = sym_eig(a).expect("finite symmetric matrix");
    eig.values.iter().map(|v| v.max(0.0).powf(p)).sum::<f64>().powf(1.0 / p)
}

pub fn check_alignment(seed: u64, trials: usize) -> OracleReport {
    const NAME: &str = "alignment";
    let mut trace_gap: f64 = 0.0;
    let mut norm_excess: f64 = f64::NEG_INFINITY;
    for trial in 0..trials {
        let mut rng = substream(seed, trial as u64);
        let t = rng.gen_range(3..=5);
        let rank_a = rng.gen_range(t - 1..=t);
        let g = randn(&mut rng, t, rank_a);
        let a = &g * g.transpose();
        let rank_m = rng.gen_range(1..=rank_a);
        let h = randn(&mut rng, t, rank_m);
        let root = psd_power(&PsdMatrix::new(&a).unwrap(), 0.5).unwrap();
        let m = root.data() * (&h * h.transpose()) * root.data();
        let m = (&m + m.transpose()) * 0.5;

        // recipe: Gamma_ii = u_i' A† u_i on the range of M, zero elsewhere
        let theta = pinv_psd(&PsdMatrix::new(&a).unwrap()).into_data();
        let me = sym_eig(&m).unwrap();
        let r = me.values.iter().filter(|&&v| v > 1e-10 * me.values[0]).count();
        let mut gamma = vec![0.0; t];
        for (i, gi) in gamma.iter_mut().enumerate().take(r) {
            let u = me.vectors.column(i);
            *gi = (u.transpose() * &theta * u)[(0, 0)];
        }
        let theta_star = Mat::from_fn(t, t, |i, j| (0..r).map(|k| me.vectors[(i, k)] * gamma[k] * me.vectors[(j, k)]).sum());
        let a_star = Mat::from_fn(t, t, |i, j| {
            (0..r).map(|k| me.vectors[(i, k)] * me.vectors[(j, k)] / gamma[k]).sum()
        });
        let lhs = (&theta_star * &m).trace();
        let rhs = (&theta * &m).trace();
        trace_gap = trace_gap.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        for p in [1.0, 2.0, 3.0] {
            norm_excess = norm_excess.max(schatten_norm(&a_star, p) - schatten_norm(&a, p));
        }
    }
    let mut report = OracleReport::within(
        NAME,
        trace_gap,
        0.0,
        1e-8,
        format!("seed={seed} trials={trials} worst norm excess={norm_excess:.2e} (tol 1e-10, p=1,2,3)"),
    );
    report.passed &= norm_excess <= 1e-10;
    report
}

/// `Σ_i log(1 + exp(-<y_i, z_i>))` over rows.
fn inner_product_loss(y: &Mat, z: &Mat) -> f64 {
    (0..y.nrows())
        .map(|i| {
            let m: f64 = (0..y.ncols()).map(|j| y[(i, j)] * z[(i, j)]).sum();
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        })
        .sum()
}

pub fn check_coding_equivalence(seed: u64, trials: usize) -> OracleReport {
    const NAME: &str = "coding_equivalence";
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let mut rng = substream(seed, trial as u64);
        let (n, t, l) = (rng.gen_range(3..9), rng.gen_range(2..5), rng.gen_range(1..6));
        let x = randn(&mut rng, n, 3);
        let k = crate::kernels::gram(&KernelSpec::Gaussian { gamma: 0.7 }, &x, &x).unwrap();
        let y = randn(&mut rng, n, t).map(|v| v.signum());
        let embed = randn(&mut rng, l, t);
        let c = randn(&mut rng, n, t);
        let lam = rng.gen_range(0.01..1.0);

        // coded problem with kernel k I_l, coefficients C L', targets Y L'
        let yc = &y * embed.transpose();
        let cc = &c * embed.transpose();
        let zc = &k * &cc;
        let coded = inner_product_loss(&yc, &zc) + lam * (cc.transpose() * &k * &cc).trace();

        // original problem with A = L'L
        let a = embed.transpose() * &embed;
        let direct = inner_product_loss(&y, &(&k * &c * &a)) + lam * (&a * c.transpose() * &k * &c).trace();
        worst = worst.max((coded - direct).abs() / (1.0 + direct.abs()));
    }
    OracleReport::within(
        NAME,
        worst,
        0.0,
        1e-9,
        format!("seed={seed} trials={trials} logistic loss of <y, f(x)>"),
    )
}

pub fn check_metric_equivalence(seed: u64, trials: usize) -> OracleReport {
    const NAME: &str = "metric_equivalence";
    let mut worst: f64 = 0.0;
    let mut identity_gap = 0.0;
    for trial in 0..trials {
        let mut rng = substream(seed, trial as u64);
        let (n, t) = (rng.gen_range(3..9), rng.gen_range(2..5));
        let x = randn(&mut rng, n, 2);
        let gram = Arc::new(GramMatrix::new(KernelSpec::Gaussian { gamma: 0.4 }, x).unwrap());
        let k = gram.data().clone();
        let y = randn(&mut rng, n, t);
        let c = randn(&mut rng, n, t);
        let lam = rng.gen_range(0.01..1.0);
        let theta = if trial == 0 { Mat::identity(t, t) } else { random_pd(&mut rng, t, 0.1) };
        let metric = build_fixed_structure(Provenance::Metric { theta: theta.clone() }).unwrap();

        // deformed metric, evaluated entry by entry
        let mut pred = Mat::zeros(n, t);
        let mut norm = 0.0;
        for i in 0..n {
            for j in 0..n {
                for s in 0..t {
                    for u in 0..t {
                        pred[(i, s)] += k[(i, j)] * theta[(s, u)] * c[(j, u)];
                        norm += k[(i, j)] * c[(i, s)] * theta[(s, u)] * c[(j, u)];
                    }
                }
            }
        }
        let loss: f64 = y.iter().zip(pred.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let deformed = loss + lam * norm;

        let w = Mat::from_element(n, t, 1.0);
        let inst = ProblemInstance::new(gram, y.clone(), w, lam, metric.penalty(), 0.0).unwrap();
        let standard = inst.eval_q(&c, &metric.a).unwrap();
        let gap = (deformed - standard).abs() / (1.0 + standard.abs());
        if trial == 0 {
            identity_gap = gap;
        }
        worst = worst.max(gap);

        // inner-product loss under <y, f>_Theta versus kernel k Theta
        let f = &k * &c;
        let in_metric: f64 = (0..n)
            .map(|i| {
                let m: f64 = (0..t).flat_map(|s| (0..t).map(move |u| (s, u))).map(|(s, u)| y[(i, s)] * theta[(s, u)] * f[(i, u)]).sum();
                (-m).exp().ln_1p()
            })
            .sum();
        let via_kernel = inner_product_loss(&y, &(&k * &c * &theta));
        worst = worst.max((in_metric - via_kernel).abs() / (1.0 + via_kernel.abs()));
    }
    OracleReport::within(
        NAME,
        worst,
        0.0,
        1e-9,
        format!("seed={seed} trials={trials} identity-metric gap={identity_gap:.2e}"),
    )
}

pub fn check_nuclear_variational(seed: u64, trials: usize) -> OracleReport {
    const NAME: &str = "nuclear_variational";
    let mut worst: f64 = 0.0;
    let mut diag_value = f64::NAN;
    for trial in 0..trials {
        let mut rng = substream(seed, trial as u64);
        let w = if trial == 0 {
            Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0])
        } else {
            let (d, t) = (rng.gen_range(2..6), rng.gen_range(1..=3));
            randn(&mut rng, d, t)
        };
        let t = w.ncols();
        let nuclear: f64 = SVD::new(w.clone(), false, false).singular_values.iter().sum();
        let root = psd_power(&PsdMatrix::new(&(w.transpose() * &w)).unwrap(), 0.5).unwrap();
        let a = root.data() + Mat::identity(t, t) * 1e-9;
        let a_inv = a.clone().try_inverse().expect("regularized root is invertible");
        let value = 0.5 * ((&w * a_inv * w.transpose()).trace() + a.trace());
        if trial == 0 {
            diag_value = value;
        }
        worst = worst.max((value - nuclear).abs());
    }
    OracleReport::within(
        NAME,
        worst,
        0.0,
        1e-6,
        format!("seed={seed} trials={trials} W=diag(3,4) gives {diag_value:.9}"),
    )
}

/// Feature-space problem `min_{B, D} V(Y, K~B) + g tr(B' D^{-1} B) + pen(D)`
/// for `l = 2` features, with the inner minimization over `B` in closed form.
struct FeatureSpace {
    sig: [f64; 2],
    z: [[f64; 2]; 2],
    yy: [f64; 2],
    w: [f64; 2],
}

impl FeatureSpace {
    fn new(ktilde: &Mat, y: &Mat, w: [f64; 2]) -> Self {
        let ktk = ktilde.transpose() * ktilde;
        let z = ktilde.transpose() * y;
        FeatureSpace {
            sig: [ktk[(0, 0)], ktk[(1, 1)]],
            z: [[z[(0, 0)], z[(1, 0)]], [z[(0, 1)], z[(1, 1)]]],
            yy: [y.column(0).norm_squared(), y.column(1).norm_squared()],
            w,
        }
    }

    fn profile(&self, a: f64, b: f64, c: f64, g: f64) -> f64 {
        let det = a * c - b * b;
        if !(det > 0.0) {
            return f64::INFINITY;
        }
        let (i00, i01, i11) = (c / det, -b / det, a / det);
        let mut value = 0.0;
        for t in 0..2 {
            let w = self.w[t];
            let (h00, h01, h11) = (w * self.sig[0] + g * i00, g * i01, w * self.sig[1] + g * i11);
            let hd = h00 * h11 - h01 * h01;
            let [z0, z1] = self.z[t];
            let quad = (h11 * z0 * z0 - 2.0 * h01 * z0 * z1 + h00 * z1 * z1) / hd;
            value += w * self.yy[t] - w * w * quad;
        }
        value
    }
}

struct FeatureInstance {
    two: TwoTask,
    feature: FeatureSpace,
}

/// Linear kernel on 2-d inputs, so `K~ = U Σ^{1/2}` has `l = 2` columns.
fn feature_instance(seed: u64) -> Result<FeatureInstance> {
    let mut rng = substream(seed, 0);
    let n = 5;
    let x = randn(&mut rng, n, 2);
    let y = randn(&mut rng, n, 2);
    let gram = Arc::new(GramMatrix::new(KernelSpec::Linear, x)?);
    let eig = gram.eig();
    let ktilde = Mat::from_fn(n, 2, |i, j| eig.vectors[(i, j)] * eig.values[j].max(0.0).sqrt());
    let w = Mat::from_element(n, 2, 1.0 / n as f64);
    let inst = ProblemInstance::new(gram, y.clone(), w, 1.0, PenaltySpec::Schatten { p: 1.0, mu: 1.0 }, 0.0)?;
    Ok(FeatureInstance {
        two: TwoTask::new(&inst)?,
        feature: FeatureSpace::new(&ktilde, &y, [1.0 / n as f64; 2]),
    })
}

fn log_box_search(f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let axes = [
        Axis { lo: LOG_MIN, hi: LOG_MAX, open: false },
        Axis { lo: LOG_MIN, hi: LOG_MAX, open: false },
        Axis { lo: -1.0, hi: 1.0, open: true },
    ];
    grid_search(&axes, |x| {
        let (a, c) = (10f64.powf(x[0]), 10f64.powf(x[1]));
        f(a, x[2] * (a * c).sqrt(), c)
    })
    .1
}

/// Minimum of the feature-space problem with penalty `lam ‖D‖_p` against the
/// minimum of `R` with unit trace weight and `F(A) = lam ‖A‖_p`.
pub fn check_feature_space_equivalence(seed: u64, p: f64, lam: f64) -> OracleReport {
    let name = format!("feature_space_p{p}");
    let fi = match feature_instance(seed) {
        Ok(f) => f,
        Err(e) => return OracleReport::error(&name, e, format!("seed={seed}")),
    };
    let norm = |e1: f64, e2: f64| (e1.max(0.0).powf(p) + e2.max(0.0).powf(p)).powf(1.0 / p);
    let min_t = log_box_search(|a, b, c| {
        let (e1, e2) = eig2(a, b, c);
        fi.feature.profile(a, b, c, 1.0) + lam * norm(e1, e2)
    });
    let min_r = fi.two.minimize(|e1, e2| lam * norm(e1, e2)).value;
    OracleReport::within(
        &name,
        (min_t - min_r).abs(),
        0.0,
        1e-3,
        format!("seed={seed} lambda={lam} min feature-space={min_t:.8} min R={min_r:.8}"),
    )
}

pub const CALIBRATION_ISSUE: &str = "with p=1 the feature-space problem reduces to V + 2 sqrt(lambda) ||B||_* \
while the trace-constrained form reduces to V + gamma ||B||_*^2; at lambda = gamma^2/4 the minima agree only when \
the optimal ||B||_* is 0 or 1";

/// Trace-constrained feature-space problem at weight `gamma` against the
/// `p = 1` problem at `lambda = gamma² / 4`.
pub fn check_feature_space_calibration(seed: u64, gamma: f64) -> OracleReport {
    const NAME: &str = "feature_space_gamma_calibration";
    let fi = match feature_instance(seed) {
        Ok(f) => f,
        Err(e) => return OracleReport::error(NAME, e, format!("seed={seed}")),
    };
    let lam = gamma * gamma / 4.0;
    let min_t = log_box_search(|a, b, c| fi.feature.profile(a, b, c, 1.0) + lam * (a + c));
    let axes = [Axis { lo: 0.0, hi: 1.0, open: true }, Axis { lo: -1.0, hi: 1.0, open: true }];
    let (_, min_special) = grid_search(&axes, |x| {
        let (a, c) = (x[0], 1.0 - x[0]);
        fi.feature.profile(a, x[1] * (a * c).sqrt(), c, gamma)
    });
    let mut report = OracleReport::within(
        NAME,
        (min_t - min_special).abs(),
        0.0,
        1e-3,
        format!("seed={seed} gamma={gamma} min p=1 form={min_t:.8} min trace-constrained form={min_special:.8}"),
    );
    if !report.passed {
        report.known_issue = Some(CALIBRATION_ISSUE.to_string());
    }
    report
}

// ---------------------------------------------------------------------------
// closed forms, gradients, solver paths, multi-start

fn structure_objective(b: &Mat, lam: f64, p: f64, mu: f64, a: &Mat) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let quad = chol.solve(b).trace();
    let eig = sym_eig(a).ok()?;
    Some(lam * quad + mu * eig.values.iter().map(|v| v.max(0.0).powf(p)).sum::<f64>())
}

/// Closed-form unsupervised step against random positive definite probes.
pub fn check_prop1(seed: u64, instances: usize, probes: usize) -> OracleReport {
    const NAME: &str = "prop1_closed_form";
    let mut worst_margin = f64::INFINITY;
    let mut worst_commute: f64 = 0.0;
    for inst in 0..instances {
        let mut rng = substream(seed, inst as u64);
        let t = rng.gen_range(2..=4);
        let p = [1.0, 2.0, 3.0][inst % 3];
        let lam = 10f64.powf(rng.gen_range(-2.0..1.0));
        let mu = 10f64.powf(rng.gen_range(-1.0..1.0));
        let b = random_pd(&mut rng, t, 0.05);
        let spec = PenaltySpec::Schatten { p, mu };
        let a_star = match unsupervised_min(&spec, &PsdMatrix::new(&b).unwrap(), lam) {
            Ok(a) => a.into_data(),
            Err(e) => return OracleReport::error(NAME, e, format!("seed={seed} instance={inst}")),
        };
        let best = structure_objective(&b, lam, p, mu, &a_star).unwrap_or(f64::NAN);
        let commute = frob(&(&a_star * &b - &b * &a_star)) / (1.0 + frob(&a_star) * frob(&b));
        worst_commute = worst_commute.max(commute);
        for k in 0..probes {
            let probe = if k % 2 == 0 {
                random_pd(&mut rng, t, 1e-3) * 10f64.powf(rng.gen_range(-2.0..2.0))
            } else {
                let eps = 10f64.powf(rng.gen_range(-6.0..-0.5));
                &a_star + random_sym(&mut rng, t) * (eps * frob(&a_star))
            };
            if let Some(v) = structure_objective(&b, lam, p, mu, &probe) {
                if v.is_finite() {
                    worst_margin = worst_margin.min((v - best) / (1.0 + best.abs()));
                }
            }
        }
    }
    let mut report = OracleReport {
        name: NAME.to_string(),
        passed: worst_margin >= -1e-8,
        observed: worst_margin,
        expected: 0.0,
        tolerance: 1e-8,
        detail: format!(
            "seed={seed} instances={instances} probes={probes} worst commutator={worst_commute:.2e} (tol 1e-8)"
        ),
        known_issue: None,
    };
    report.passed &= worst_commute <= 1e-8;
    report
}

/// Central finite differences of `S` against the analytic block gradients.
pub fn check_gradients(seed: u64, points: usize) -> OracleReport {
    const NAME: &str = "gradients";
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for pt in 0..points {
        let mut rng = substream(seed, pt as u64);
        let (n, t) = (rng.gen_range(4..9), rng.gen_range(2..=4));
        let p = rng.gen_range(1.0..3.0);
        let mu = rng.gen_range(0.2..2.0);
        let mut inst = match random_instance(&mut rng, n, t, PenaltySpec::Schatten { p, mu }) {
            Ok(i) => i,
            Err(e) => return OracleReport::error(NAME, e, format!("seed={seed} point={pt}")),
        };
        inst.ridge = rng.gen_range(0.0..0.1);
        inst.delta = rng.gen_range(0.01..0.5);
        if pt % 2 == 1 {
            for v in inst.w.iter_mut() {
                if rng.gen::<f64>() < 0.3 {
                    *v = 0.0;
                }
            }
        }
        let c = randn(&mut rng, n, t);
        let a = PsdMatrix::new(&random_pd(&mut rng, t, 0.5)).unwrap();
        let s = |c: &Mat, a: &Mat| inst.eval_s(c, &PsdMatrix::new(a).unwrap()).unwrap();
        let gc = inst.grad_s_c(&c, &a).unwrap();
        let ga = inst.grad_s_a(&c, &a).unwrap();

        let mut fd_c = Mat::zeros(n, t);
        for i in 0..n {
            for j in 0..t {
                let (mut up, mut dn) = (c.clone(), c.clone());
                up[(i, j)] += h;
                dn[(i, j)] -= h;
                fd_c[(i, j)] = (s(&up, a.data()) - s(&dn, a.data())) / (2.0 * h);
            }
        }
        worst = worst.max(frob(&(&fd_c - &gc)) / frob(&gc).max(1e-12));

        let (mut fd, mut an) = (Vec::new(), Vec::new());
        for _ in 0..10 {
            let e = random_sym(&mut rng, t);
            let up = a.data() + &e * h;
            let dn = a.data() - &e * h;
            fd.push((s(&c, &up) - s(&c, &dn)) / (2.0 * h));
            an.push(ga.dot(&e));
        }
        let diff: f64 = fd.iter().zip(&an).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let scale: f64 = an.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(diff / scale.max(1e-12));
    }
    OracleReport::within(NAME, worst, 0.0, 1e-5, format!("seed={seed} points={points} central differences h={h:e}"))
}

/// Spectral Sylvester solve against the dense Kronecker system, and the
/// masked conjugate-gradient path on a full mask against the spectral solve,
/// on `repeats` random instances for every `n <= 12`, `T <= 4`.
pub fn check_solver_paths(seed: u64, repeats: usize) -> OracleReport {
    const NAME: &str = "solver_paths";
    let mut worst_kron: f64 = 0.0;
    let mut worst_cg: f64 = 0.0;
    let mut count = 0u64;
    for n in 1..=12 {
        for t in 1..=4 {
            for _ in 0..repeats {
                let mut rng = substream(seed, count);
                count += 1;
                let lam = 10f64.powf(rng.gen_range(-2.0..0.5));
                let mut run = || -> Result<(f64, f64)> {
                    let mut inst = random_instance(&mut rng, n, t, PenaltySpec::Schatten { p: 1.0, mu: 1.0 })?;
                    inst.lam = lam;
                    inst.w.fill(1.0);
                    let a = PsdMatrix::new(&random_pd(&mut rng, t, 0.2))?;
                    let fast = sylvester_ls_solve(inst.gram.psd(), &a, lam, &inst.y)?;
                    let dense = kron_ls_solve(inst.gram.psd(), &a, lam, &inst.y)?;
                    let kron = frob(&(&fast - &dense)) / frob(&dense).max(1e-300);
                    let cg = supervised_cg_step(&inst, &a, &Mat::zeros(n, t), 1e-12)?;
                    let cg_err = frob(&(&cg - &fast)) / frob(&fast).max(1e-300);
                    Ok((kron, cg_err))
                };
                match run() {
                    Ok((a, b)) => {
                        worst_kron = worst_kron.max(a);
                        worst_cg = worst_cg.max(b);
                    }
                    Err(e) => return OracleReport::error(NAME, e, format!("seed={seed} n={n} T={t}")),
                }
            }
        }
    }
    let mut report = OracleReport::within(
        NAME,
        worst_kron,
        0.0,
        1e-8,
        format!("seed={seed} instances={count} (n=1..12, T=1..4) worst full-mask CG error={worst_cg:.2e} (tol 1e-7)"),
    );
    report.passed &= worst_cg <= 1e-7;
    report
}

/// Largest relative increase of the objective, including the value after
/// each supervised half step, across fits covering every penalty family,
/// both modes, masked and full weights, and barrier continuation.
pub fn check_monotonicity(seed: u64) -> OracleReport {
    const NAME: &str = "monotonicity";
    let t = 3;
    let graph = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
    let fixed = match build_fixed_structure(Provenance::Graph { adjacency: graph, gamma: 0.5 }) {
        Ok(f) => f.penalty(),
        Err(e) => return OracleReport::error(NAME, e, format!("seed={seed}")),
    };
    let penalties = [
        PenaltySpec::Schatten { p: 1.0, mu: 1.0 },
        PenaltySpec::Schatten { p: 1.5, mu: 0.5 },
        PenaltySpec::Schatten { p: 3.0, mu: 2.0 },
        PenaltySpec::TraceOne,
        PenaltySpec::Cluster { r: 1, eps_m: 1.0, eps_b: 2.0, eps_w: 1.5 },
        fixed,
    ];
    let mut worst: f64 = 0.0;
    let mut fits = 0;
    let mut where_worst = String::new();
    for (k, penalty) in penalties.iter().enumerate() {
        for masked in [false, true] {
            for mode in [Mode::AltMin, Mode::Bcd] {
                for loss in [Loss::Squared, Loss::Logistic] {
                    if loss == Loss::Logistic && mode == Mode::AltMin {
                        continue;
                    }
                    let mut rng = substream(seed, fits as u64);
                    let mut run = || -> Result<f64> {
                        let mut inst = random_instance(&mut rng, 9, t, penalty.clone())?;
                        if loss == Loss::Logistic {
                            inst.y = inst.y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
                            inst = inst.with_loss(Loss::Logistic);
                        }
                        if masked {
                            for i in 0..9 {
                                for j in 0..t {
                                    if (i + j) % 3 != 0 {
                                        inst.w[(i, j)] = 0.0;
                                    }
                                }
                            }
                        }
                        inst.ridge = if k % 2 == 0 { 0.0 } else { 0.05 };
                        let config = SolverConfig {
                            mode,
                            epsilon: 1e-10,
                            max_iter: if mode == Mode::Bcd { 300 } else { 2000 },
                            delta: 1e-1,
                            delta_schedule: DeltaSchedule::Geometric { factor: 0.1, floor: 1e-4 },
                            masked_solver: if k % 2 == 0 { MaskedSolver::Auto } else { MaskedSolver::Cg },
                            ..SolverConfig::default()
                        };
                        let (_, report) = solve(&inst, &config, None)?;
                        Ok(report.worst_increase())
                    };
                    match run() {
                        Ok(rise) => {
                            if rise > worst {
                                worst = rise;
                                where_worst = format!("{penalty} masked={masked} mode={mode:?} loss={loss:?}");
                            }
                        }
                        Err(e) => {
                            return OracleReport::error(
                                NAME,
                                e,
                                format!("seed={seed} {penalty} masked={masked} mode={mode:?} loss={loss:?}"),
                            )
                        }
                    }
                    fits += 1;
                }
            }
        }
    }
    OracleReport::within(
        NAME,
        worst,
        0.0,
        1e-10,
        format!("seed={seed} fits={fits} worst at: {}", if where_worst.is_empty() { "none" } else { &where_worst }),
    )
}

/// Random strictly positive definite starts reach the same final objective.
pub fn check_multistart(seed: u64, instances: usize, starts: usize) -> OracleReport {
    const NAME: &str = "multistart";
    let mut worst_spread: f64 = 0.0;
    let mut worst_rise: f64 = 0.0;
    for k in 0..instances {
        let mut rng = substream(seed, k as u64);
        let (n, t) = (rng.gen_range(5..=10), rng.gen_range(2..=3));
        let penalty = match k % 3 {
            0 => PenaltySpec::Schatten { p: 1.0, mu: rng.gen_range(0.5..2.0) },
            1 => PenaltySpec::Schatten { p: 2.0, mu: rng.gen_range(0.5..2.0) },
            _ => PenaltySpec::TraceOne,
        };
        let run = || -> Result<(f64, f64)> {
            let inst = random_instance(&mut rng, n, t, penalty)?;
            let mut finals = Vec::new();
            let mut rise: f64 = 0.0;
            for _ in 0..starts {
                let mut a0 = random_pd(&mut rng, t, 0.05) * 10f64.powf(rng.gen_range(-1.0..1.0));
                if inst.penalty.is_indicator() {
                    a0 /= a0.trace();
                }
                let config = SolverConfig {
                    a0: InitStructure::Custom(PsdMatrix::new(&a0)?),
                    ..tight_config()
                };
                let (_, report) = solve(&inst, &config, None)?;
                rise = rise.max(report.worst_increase());
                finals.push(report.final_objective());
            }
            let lo = finals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok(((hi - lo) / lo.abs(), rise))
        };
        match run() {
            Ok((spread, rise)) => {
                worst_spread = worst_spread.max(spread);
                worst_rise = worst_rise.max(rise);
            }
            Err(e) => return OracleReport::error(NAME, e, format!("seed={seed} instance={k}")),
        }
    }
    let mut report = OracleReport::within(
        NAME,
        worst_spread,
        0.0,
        1e-5,
        format!("seed={seed} instances={instances} starts={starts} worst rise={worst_rise:.2e}"),
    );
    report.passed &= worst_rise <= 1e-10;
    report
}

// ---------------------------------------------------------------------------
// suite

pub type Check = (&'static str, fn() -> OracleReport);

pub fn default_suite() -> Vec<Check> {
    vec![
        ("theorem1", || check_theorem1(1, 20)),
        ("barrier_convergence", || check_barrier_convergence_seeded(2)),
        ("prop1", || check_prop1(3, 50, 10_000)),
        ("gradients", || check_gradients(4, 20)),
        ("solver_paths", || check_solver_paths(5, 2)),
        ("monotonicity", || check_monotonicity(12)),
        ("multistart", || check_multistart(6, 10, 10)),
        ("alignment", || check_alignment(7, 50)),
        ("coding_equivalence", || check_coding_equivalence(8, 50)),
        ("metric_equivalence", || check_metric_equivalence(9, 50)),
        ("nuclear_variational", || check_nuclear_variational(10, 50)),
        ("feature_space_p1", || check_feature_space_equivalence(11, 1.0, 0.5)),
        ("feature_space_p2", || check_feature_space_equivalence(11, 2.0, 0.5)),
        ("feature_space_calibration", || check_feature_space_calibration(11, 1.0)),
    ]
}

/// Runs the checks whose name contains `filter`, using up to `threads`
/// workers; reports come back in suite order.
pub fn run_suite(filter: Option<&str>, threads: usize) -> Vec<OracleReport> {
    let checks: Vec<Check> = default_suite()
        .into_iter()
        .filter(|(name, _)| filter.map_or(true, |f| name.contains(f)))
        .collect();
    let slots: Vec<std::sync::Mutex<Option<OracleReport>>> = checks.iter().map(|_| std::sync::Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, checks.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= checks.len() {
                    break;
                }
                let report = (checks[i].1)();
                *slots[i].lock().expect("slot poisoned") = Some(report);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot poisoned").expect("check ran"))
        .collect()
}
