//! Multi-task datasets in stacked form and the weighted loss functional.
//!
//! Observations from all tasks are stacked into one `n x d` input matrix.
//! The `n x T` output and weight matrices carry, for each row, the entries
//! of the task(s) it was observed on; a zero weight masks the entry out of
//! the loss.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, SmtlError};
use crate::linalg::Mat;

/// How per-observation loss weights are assigned by the loaders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// `1/n_t` on the observation's own task.
    #[default]
    PerTask,
    /// `1/n` for every observation.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub x: Mat,
    pub y: Mat,
    pub w: Mat,
    pub task_sizes: Vec<usize>,
    /// Task of each row for long-format data; `None` when rows carry all tasks.
    pub task_of: Option<Vec<usize>>,
}

impl TaskDataset {
    /// Builds a long-format dataset: row `i` belongs to task `tasks[i]` only.
    pub fn from_long(
        x: Mat,
        tasks: &[usize],
        values: &[f64],
        n_tasks: usize,
        weighting: Weighting,
    ) -> Result<Self> {
        let n = x.nrows();
        if tasks.len() != n || values.len() != n {
            return Err(SmtlError::dims(format!(
                "{} inputs, {} task ids, {} outputs",
                n,
                tasks.len(),
                values.len()
            )));
        }
        let mut sizes = vec![0usize; n_tasks];
        for &t in tasks {
            if t >= n_tasks {
                return Err(SmtlError::dims(format!("task id {t} >= task count {n_tasks}")));
            }
            sizes[t] += 1;
        }
        if let Some(t) = sizes.iter().position(|&s| s == 0) {
            return Err(SmtlError::EmptyTask(t));
        }
        let mut y = Mat::zeros(n, n_tasks);
        let mut w = Mat::zeros(n, n_tasks);
        for (i, (&t, &v)) in tasks.iter().zip(values).enumerate() {
            y[(i, t)] = v;
            w[(i, t)] = match weighting {
                Weighting::PerTask => 1.0 / sizes[t] as f64,
                Weighting::Uniform => 1.0 / n as f64,
            };
        }
        Ok(TaskDataset {
            x,
            y,
            w,
            task_sizes: sizes,
            task_of: Some(tasks.to_vec()),
        })
    }

    /// Every row observed on every task, all weights equal to `weight`.
    pub fn full(x: Mat, y: Mat, weight: f64) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(SmtlError::dims("inputs and outputs have different row counts"));
        }
        let (n, t) = y.shape();
        Ok(TaskDataset {
            x,
            w: Mat::from_element(n, t, weight),
            y,
            task_sizes: vec![n; t],
            task_of: None,
        })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_tasks(&self) -> usize {
        self.y.ncols()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows restricted to `idx`, keeping weights as they are.
    pub fn subset(&self, idx: &[usize]) -> TaskDataset {
        let pick = |m: &Mat| Mat::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)]);
        let task_of = self.task_of.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect::<Vec<_>>());
        let mut sizes = vec![0usize; self.n_tasks()];
        match &task_of {
            Some(t) => t.iter().for_each(|&t| sizes[t] += 1),
            None => sizes.iter_mut().for_each(|s| *s = idx.len()),
        }
        TaskDataset {
            x: pick(&self.x),
            y: pick(&self.y),
            w: pick(&self.w),
            task_sizes: sizes,
            task_of,
        }
    }

    /// Serialises a long-format dataset in the CSV layout read by [`load_dataset`].
    pub fn to_long_csv(&self) -> Result<String> {
        let tasks = self
            .task_of
            .as_ref()
            .ok_or_else(|| SmtlError::Invalid("dataset is not in long format".into()))?;
        let mut out = String::from("task,y");
        for j in 0..self.dim() {
            let _ = write!(out, ",x{}", j + 1);
        }
        out.push('\n');
        for (i, &t) in tasks.iter().enumerate() {
            let _ = write!(out, "{},{}", t, self.y[(i, t)]);
            for j in 0..self.dim() {
                let _ = write!(out, ",{}", self.x[(i, j)]);
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Parsed long-format rows before weights are attached.
#[derive(Debug, Clone)]
pub struct LongRows {
    pub tasks: Vec<usize>,
    pub y: Vec<f64>,
    pub x: Mat,
}

fn parse_field(s: &str, line: usize, what: &str) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(SmtlError::Parse {
            line,
            reason: format!("{what} '{}' is not a finite number", s.trim()),
        }),
    }
}

/// Parses `task,y,x1,...,xd` rows. Line numbers in errors are 1-based.
pub fn parse_long_csv(text: &str) -> Result<LongRows> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(SmtlError::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let header = header.trim_start_matches('\u{feff}').trim_end_matches('\r');
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "task" || cols[1] != "y" {
        return Err(SmtlError::Parse {
            line: 1,
            reason: "header must start with 'task,y'".into(),
        });
    }
    let d = cols.len() - 2;
    let mut tasks = Vec::new();
    let mut y = Vec::new();
    let mut feats = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(SmtlError::InconsistentDimension {
                line: line_no,
                expected: d + 2,
                found: fields.len(),
            });
        }
        let t = fields[0].trim().parse::<usize>().map_err(|_| SmtlError::Parse {
            line: line_no,
            reason: format!("task id '{}' is not a nonnegative integer", fields[0].trim()),
        })?;
        tasks.push(t);
        y.push(parse_field(fields[1], line_no, "output")?);
        for f in &fields[2..] {
            feats.push(parse_field(f, line_no, "feature")?);
        }
    }
    let n = tasks.len();
    if n == 0 {
        return Err(SmtlError::Parse {
            line: 2,
            reason: "no data rows".into(),
        });
    }
    Ok(LongRows {
        tasks,
        y,
        x: Mat::from_row_slice(n, d, &feats),
    })
}

/// Loads a long-format CSV; the task count is `1 + max task id`.
pub fn load_dataset(path: impl AsRef<Path>, weighting: Weighting) -> Result<TaskDataset> {
    let text = fs::read_to_string(path)?;
    dataset_from_csv(&text, weighting)
}

pub fn dataset_from_csv(text: &str, weighting: Weighting) -> Result<TaskDataset> {
    let rows = parse_long_csv(text)?;
    let n_tasks = rows.tasks.iter().max().map_or(0, |&t| t + 1);
    TaskDataset::from_long(rows.x, &rows.tasks, &rows.y, n_tasks, weighting)
}

/// Entrywise loss applied to `(y, z)` pairs and combined with weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    /// `(y - z)²`
    #[default]
    Squared,
    /// `log(1 + exp(-y z))`, for labels in {-1, +1}.
    Logistic,
}

/// Weighted loss `Σ W_it L(Y_it, Z_it)` and its gradient in `Z`.
pub fn loss_value_grad(loss: Loss, y: &Mat, z: &Mat, w: &Mat) -> Result<(f64, Mat)> {
    if y.shape() != z.shape() || y.shape() != w.shape() {
        return Err(SmtlError::dims(format!(
            "loss operands: Y {:?}, Z {:?}, W {:?}",
            y.shape(),
            z.shape(),
            w.shape()
        )));
    }
    let mut grad = Mat::zeros(y.nrows(), y.ncols());
    let mut value = 0.0;
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            let (yi, zi, wi) = (y[(i, j)], z[(i, j)], w[(i, j)]);
            if wi == 0.0 {
                continue;
            }
            match loss {
                Loss::Squared => {
                    let r = yi - zi;
                    value += wi * r * r;
                    grad[(i, j)] = -2.0 * wi * r;
                }
                Loss::Logistic => {
                    let m = yi * zi;
                    // log(1 + e^{-m}) without overflow
                    value += wi * if m > 0.0 { (-m).exp().ln_1p() } else { -m + m.exp().ln_1p() };
                    let s = 1.0 / (1.0 + m.exp());
                    grad[(i, j)] = -wi * yi * s;
                }
            }
        }
    }
    Ok((value, grad))
}

pub fn loss_value(loss: Loss, y: &Mat, z: &Mat, w: &Mat) -> Result<f64> {
    if loss == Loss::Squared {
        if y.shape() != z.shape() || y.shape() != w.shape() {
            return Err(SmtlError::dims("loss operands"));
        }
        return Ok(y
            .iter()
            .zip(z.iter())
            .zip(w.iter())
            .map(|((a, b), c)| c * (a - b) * (a - b))
            .sum());
    }
    loss_value_grad(loss, y, z, w).map(|(v, _)| v)
}
