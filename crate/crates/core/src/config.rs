//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Unknown and repeated keys are errors. Every error carries the 1-based line
//! of the offending key (line 0 for problems with defaults).

use std::collections::HashMap;
use std::path::Path;

use crate::data::{Loss, Weighting};
use crate::error::{Result, SmtlError};
use crate::kernels::KernelSpec;
use crate::linalg::PsdMatrix;
use crate::penalties::PenaltySpec;
use crate::solver::{DeltaSchedule, MaskedSolver, Mode, ProblemParams, SolverConfig};
use crate::synth::SyntheticSpec;

pub const KEYS: &[&str] = &[
    "kernel.type",
    "kernel.gamma",
    "penalty.type",
    "penalty.p",
    "penalty.mu",
    "penalty.r",
    "penalty.eps_m",
    "penalty.eps_b",
    "penalty.eps_w",
    "lambda",
    "ridge",
    "delta",
    "delta.schedule",
    "delta.factor",
    "delta.floor",
    "epsilon",
    "stop",
    "max_iter",
    "mode",
    "step_c",
    "step_a",
    "masked_solver",
    "loss",
    "weighting",
    "seed",
    "synth.n_per_task",
    "synth.noise_sd",
    "synth.relatedness",
    "benchmark.repeats",
];

/// Penalty choice before the task count is known.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyChoice {
    Schatten { p: f64, mu: f64 },
    TraceOne,
    Cluster { r: usize, eps_m: f64, eps_b: f64, eps_w: f64 },
    /// `fixed(I)`: independent single-task learning.
    Independent,
}

impl PenaltyChoice {
    pub fn to_spec(&self, tasks: usize) -> PenaltySpec {
        match *self {
            PenaltyChoice::Schatten { p, mu } => PenaltySpec::Schatten { p, mu },
            PenaltyChoice::TraceOne => PenaltySpec::TraceOne,
            PenaltyChoice::Cluster { r, eps_m, eps_b, eps_w } => PenaltySpec::Cluster { r, eps_m, eps_b, eps_w },
            PenaltyChoice::Independent => PenaltySpec::Fixed(PsdMatrix::identity(tasks)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub penalty: PenaltyChoice,
    pub lambda: f64,
    pub ridge: f64,
    pub loss: Loss,
    pub weighting: Weighting,
    pub solver: SolverConfig,
    pub seed: u64,
    pub synth: SyntheticSpec,
    pub repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kernel: KernelSpec::Linear,
            penalty: PenaltyChoice::Schatten { p: 1.0, mu: 1.0 },
            lambda: 0.1,
            ridge: 0.0,
            loss: Loss::Squared,
            weighting: Weighting::PerTask,
            solver: SolverConfig::default(),
            seed: 0,
            synth: SyntheticSpec {
                relatedness: 0.5,
                ..SyntheticSpec::new(1, 1)
            },
            repeats: 5,
        }
    }
}

impl RunConfig {
    pub fn params(&self, tasks: usize) -> ProblemParams {
        ProblemParams {
            lam: self.lambda,
            ridge: self.ridge,
            penalty: self.penalty.to_spec(tasks),
            loss: self.loss,
        }
    }
}

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.0)
    }

    fn err(&self, key: &str, reason: impl Into<String>) -> SmtlError {
        SmtlError::Config {
            line: self.line(key),
            reason: format!("{key}: {}", reason.into()),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|e| e.1.as_str())
    }

    fn num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| self.err(key, format!("cannot parse '{v}'"))),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.num(key, default)?;
        if !v.is_finite() {
            return Err(self.err(key, "value must be finite"));
        }
        Ok(v)
    }

    fn word<'a>(&'a self, key: &str, default: &'a str, allowed: &[&str]) -> Result<&'a str> {
        let v = self.raw(key).unwrap_or(default);
        if allowed.contains(&v) {
            Ok(v)
        } else {
            Err(self.err(key, format!("expected one of {}, got '{v}'", allowed.join("|"))))
        }
    }

    fn check(&self, key: &str, ok: bool, reason: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.err(key, reason))
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map = HashMap::new();
    for (idx, raw) in text.trim_start_matches('\u{feff}').lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SmtlError::Config {
            line,
            reason: format!("expected 'key = value', got '{content}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(SmtlError::Config {
                line,
                reason: format!("unknown key '{key}'"),
            });
        }
        if value.is_empty() {
            return Err(SmtlError::Config {
                line,
                reason: format!("{key}: missing value"),
            });
        }
        if let Some((first, _)) = map.insert(key.to_string(), (line, value.to_string())) {
            return Err(SmtlError::Config {
                line,
                reason: format!("{key}: already set on line {first}"),
            });
        }
    }
    build(&Entries { map })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn build(e: &Entries) -> Result<RunConfig> {
    let defaults = RunConfig::default();

    let kernel = match e.word("kernel.type", "linear", &["linear", "gaussian"])? {
        "linear" => {
            e.check("kernel.gamma", e.raw("kernel.gamma").is_none(), "only valid with kernel.type = gaussian")?;
            KernelSpec::Linear
        }
        _ => {
            let gamma = e.real("kernel.gamma", 1.0)?;
            e.check("kernel.gamma", gamma > 0.0, "must be > 0")?;
            KernelSpec::Gaussian { gamma }
        }
    };

    let penalty = match e.word("penalty.type", "schatten", &["schatten", "trace_one", "cluster", "independent"])? {
        "schatten" => {
            let p = e.real("penalty.p", 1.0)?;
            let mu = e.real("penalty.mu", 1.0)?;
            e.check("penalty.p", p >= 1.0, "must be >= 1")?;
            e.check("penalty.mu", mu > 0.0, "must be > 0")?;
            PenaltyChoice::Schatten { p, mu }
        }
        "trace_one" => PenaltyChoice::TraceOne,
        "cluster" => {
            let r: usize = e.num("penalty.r", 1)?;
            let eps_m = e.real("penalty.eps_m", 1.0)?;
            let eps_b = e.real("penalty.eps_b", 2.0)?;
            let eps_w = e.real("penalty.eps_w", 1.5)?;
            e.check("penalty.r", r >= 1, "must be >= 1")?;
            for (k, v) in [("penalty.eps_m", eps_m), ("penalty.eps_b", eps_b), ("penalty.eps_w", eps_w)] {
                e.check(k, v > 0.0, "must be > 0")?;
            }
            e.check(
                "penalty.eps_w",
                eps_w.min(eps_b) + (eps_m - eps_b).min(0.0) > 0.0,
                "need min(eps_w, eps_b) + min(0, eps_m - eps_b) > 0",
            )?;
            PenaltyChoice::Cluster { r, eps_m, eps_b, eps_w }
        }
        _ => PenaltyChoice::Independent,
    };
    for key in ["penalty.p", "penalty.mu"] {
        e.check(
            key,
            e.raw(key).is_none() || matches!(penalty, PenaltyChoice::Schatten { .. }),
            "only valid with penalty.type = schatten",
        )?;
    }
    for key in ["penalty.r", "penalty.eps_m", "penalty.eps_b", "penalty.eps_w"] {
        e.check(
            key,
            e.raw(key).is_none() || matches!(penalty, PenaltyChoice::Cluster { .. }),
            "only valid with penalty.type = cluster",
        )?;
    }

    let lambda = e.real("lambda", defaults.lambda)?;
    e.check("lambda", lambda > 0.0, "must be > 0")?;
    let ridge = e.real("ridge", 0.0)?;
    e.check("ridge", ridge >= 0.0, "must be >= 0")?;

    let base = SolverConfig::default();
    let delta = e.real("delta", base.delta)?;
    e.check("delta", delta > 0.0, "must be > 0")?;
    let delta_schedule = match e.word("delta.schedule", "fixed", &["fixed", "geometric"])? {
        "fixed" => {
            for key in ["delta.factor", "delta.floor"] {
                e.check(key, e.raw(key).is_none(), "only valid with delta.schedule = geometric")?;
            }
            DeltaSchedule::Fixed
        }
        _ => {
            let factor = e.real("delta.factor", 0.1)?;
            let floor = e.real("delta.floor", 1e-6)?;
            e.check("delta.factor", factor > 0.0 && factor < 1.0, "must lie in (0, 1)")?;
            e.check("delta.floor", floor > 0.0, "must be > 0")?;
            DeltaSchedule::Geometric { factor, floor }
        }
    };
    let epsilon = e.real("epsilon", base.epsilon)?;
    e.check("epsilon", epsilon > 0.0, "must be > 0")?;
    let relative_stop = e.word("stop", "absolute", &["absolute", "relative"])? == "relative";
    let max_iter: usize = e.num("max_iter", base.max_iter)?;
    e.check("max_iter", max_iter > 0, "must be positive")?;
    let mode = match e.word("mode", "altmin", &["altmin", "bcd"])? {
        "altmin" => Mode::AltMin,
        _ => Mode::Bcd,
    };
    let step_c = e.real("step_c", base.step_c)?;
    let step_a = e.real("step_a", base.step_a)?;
    e.check("step_c", step_c > 0.0, "must be > 0")?;
    e.check("step_a", step_a > 0.0, "must be > 0")?;
    let masked_solver = match e.word("masked_solver", "auto", &["auto", "direct", "cg"])? {
        "auto" => MaskedSolver::Auto,
        "direct" => MaskedSolver::Direct,
        _ => MaskedSolver::Cg,
    };
    let loss = match e.word("loss", "squared", &["squared", "logistic"])? {
        "squared" => Loss::Squared,
        _ => Loss::Logistic,
    };
    e.check(
        "loss",
        loss == Loss::Squared || mode == Mode::Bcd,
        "logistic loss needs mode = bcd",
    )?;
    let weighting = match e.word("weighting", "per_task", &["per_task", "uniform"])? {
        "per_task" => Weighting::PerTask,
        _ => Weighting::Uniform,
    };
    let seed: u64 = e.num("seed", 0)?;

    let n_per_task: usize = e.num("synth.n_per_task", defaults.synth.n_per_task)?;
    e.check("synth.n_per_task", n_per_task > 0, "must be positive")?;
    let noise_sd = e.real("synth.noise_sd", defaults.synth.noise_sd)?;
    e.check("synth.noise_sd", noise_sd >= 0.0, "must be >= 0")?;
    let relatedness = e.real("synth.relatedness", defaults.synth.relatedness)?;
    e.check("synth.relatedness", (0.0..=1.0).contains(&relatedness), "must lie in [0, 1]")?;
    let repeats: usize = e.num("benchmark.repeats", defaults.repeats)?;
    e.check("benchmark.repeats", repeats > 0, "must be positive")?;

    Ok(RunConfig {
        kernel,
        penalty,
        lambda,
        ridge,
        loss,
        weighting,
        solver: SolverConfig {
            mode,
            epsilon,
            relative_stop,
            max_iter,
            delta,
            delta_schedule,
            step_c,
            step_a,
            masked_solver,
            ..base
        },
        seed,
        synth: SyntheticSpec {
            n_per_task,
            noise_sd,
            relatedness,
            ..defaults.synth
        },
        repeats,
    })
}
