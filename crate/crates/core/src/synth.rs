//! Synthetic linear multi-task regression data.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`; independent consumers
//! use [`substream`], which keeps the seed and selects a ChaCha stream id, so
//! results depend only on `(seed, stream)` and not on the order of use.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{TaskDataset, Weighting};
use crate::error::{Result, SmtlError};
use crate::linalg::Mat;

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub d: usize,
    pub tasks: usize,
    pub n_per_task: usize,
    pub noise_sd: f64,
    /// Weight of the shared component in each task vector, in `[0, 1]`.
    pub relatedness: f64,
}

impl SyntheticSpec {
    pub fn new(d: usize, tasks: usize) -> Self {
        SyntheticSpec {
            d,
            tasks,
            n_per_task: 30,
            noise_sd: 0.1,
            relatedness: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.tasks == 0 || self.n_per_task == 0 {
            return Err(SmtlError::Invalid("d, T and n_per_task must be at least 1".into()));
        }
        if !(self.noise_sd >= 0.0) || !(0.0..=1.0).contains(&self.relatedness) {
            return Err(SmtlError::Invalid(
                "noise_sd must be >= 0 and relatedness in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

fn normal_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Task weight vectors `w_t = sqrt(1 - rel) g_t + sqrt(rel) g_shared` as columns.
pub fn task_weights<R: Rng>(spec: &SyntheticSpec, rng: &mut R) -> Mat {
    let shared = normal_matrix(rng, spec.d, 1);
    let own = normal_matrix(rng, spec.d, spec.tasks);
    let (a, b) = ((1.0 - spec.relatedness).sqrt(), spec.relatedness.sqrt());
    Mat::from_fn(spec.d, spec.tasks, |i, t| a * own[(i, t)] + b * shared[(i, 0)])
}

/// `n_per_task` fresh examples per task, in long format with task-major rows.
pub fn sample_tasks<R: Rng>(
    weights: &Mat,
    n_per_task: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<TaskDataset> {
    let (d, t) = weights.shape();
    let n = n_per_task * t;
    let x = normal_matrix(rng, n, d);
    let mut tasks = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let task = i / n_per_task;
        let clean = x.row(i).transpose().dot(&weights.column(task));
        let noise: f64 = rng.sample(StandardNormal);
        tasks.push(task);
        values.push(clean + noise_sd * noise);
    }
    TaskDataset::from_long(x, &tasks, &values, t, Weighting::PerTask)
}

/// Generates a training set and returns it with the true task weights (`d x T`).
pub fn synth_generate(spec: &SyntheticSpec, seed: u64) -> Result<(TaskDataset, Mat)> {
    spec.validate()?;
    let weights = task_weights(spec, &mut substream(seed, 0));
    let data = sample_tasks(&weights, spec.n_per_task, spec.noise_sd, &mut substream(seed, 1))?;
    Ok((data, weights))
}

/// Training set plus an independent test set drawn from the same task vectors.
pub fn synth_train_test(
    spec: &SyntheticSpec,
    n_test_per_task: usize,
    seed: u64,
) -> Result<(TaskDataset, TaskDataset, Mat)> {
    let (train, weights) = synth_generate(spec, seed)?;
    let test = sample_tasks(&weights, n_test_per_task, spec.noise_sd, &mut substream(seed, 2))?;
    Ok((train, test, weights))
}
