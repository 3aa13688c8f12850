//! Timing sweeps over `(d, T)` grids on synthetic data.
//!
//! Cell `i` (row-major over `T`, then `d`, then repeat) draws its data from
//! seed `master_seed + i`, so objective columns are reproducible for a fixed
//! master seed whatever the thread count.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::config::{PenaltyChoice, RunConfig};
use crate::error::{Result, SmtlError};
use crate::kernels::GramMatrix;
use crate::solver::{fit_with_gram, Mode, ProblemParams, Termination};
use crate::synth::{synth_generate, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AltMin,
    Bcd,
    SingleTask,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::AltMin => "altmin",
            Method::Bcd => "bcd",
            Method::SingleTask => "stl",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dims: Vec<usize>,
    pub tasks: Vec<usize>,
}

/// Parses `d1,d2,..xT1,T2,..`, e.g. `5,50,150x20`.
pub fn parse_grid(text: &str) -> Result<Grid> {
    let bad = || SmtlError::Invalid(format!("grid must look like '5,50x10,20', got '{text}'"));
    let (d, t) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let list = |s: &str| -> Result<Vec<usize>> {
        s.split(',')
            .map(|v| match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(bad()),
            })
            .collect()
    };
    Ok(Grid {
        dims: list(d)?,
        tasks: list(t)?,
    })
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub cell: usize,
    pub tasks: usize,
    pub d: usize,
    pub repeat: usize,
    pub seed: u64,
    pub method: Method,
    pub gram_seconds: f64,
    pub fit_seconds: f64,
    pub iters: usize,
    pub converged: bool,
    pub final_objective: f64,
}

pub const CSV_HEADER: &str = "cell,T,d,repeat,seed,method,gram_seconds,fit_seconds,iters,converged,final_objective";

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{},{},{:.17e}",
            r.cell,
            r.tasks,
            r.d,
            r.repeat,
            r.seed,
            r.method.name(),
            r.gram_seconds,
            r.fit_seconds,
            r.iters,
            r.converged,
            r.final_objective
        );
    }
    out
}

struct Cell {
    index: usize,
    tasks: usize,
    d: usize,
    repeat: usize,
}

fn run_cell(cfg: &RunConfig, cell: &Cell, methods: &[Method]) -> Result<Vec<BenchRow>> {
    let seed = cfg.seed.wrapping_add(cell.index as u64);
    let spec = SyntheticSpec {
        d: cell.d,
        tasks: cell.tasks,
        ..cfg.synth.clone()
    };
    let (data, _) = synth_generate(&spec, seed)?;
    let t0 = Instant::now();
    let gram = Arc::new(GramMatrix::new(cfg.kernel, data.x.clone())?);
    let gram_seconds = t0.elapsed().as_secs_f64();
    let mut rows = Vec::new();
    for &method in methods {
        let mut solver = cfg.solver.clone();
        let params = match method {
            Method::AltMin => {
                solver.mode = Mode::AltMin;
                cfg.params(cell.tasks)
            }
            Method::Bcd => {
                solver.mode = Mode::Bcd;
                cfg.params(cell.tasks)
            }
            Method::SingleTask => {
                solver.mode = Mode::AltMin;
                ProblemParams {
                    penalty: PenaltyChoice::Independent.to_spec(cell.tasks),
                    ..cfg.params(cell.tasks)
                }
            }
        };
        let t1 = Instant::now();
        let (_, report) = fit_with_gram(gram.clone(), &data, &params, &solver)?;
        rows.push(BenchRow {
            cell: cell.index,
            tasks: cell.tasks,
            d: cell.d,
            repeat: cell.repeat,
            seed,
            method,
            gram_seconds,
            fit_seconds: t1.elapsed().as_secs_f64(),
            iters: report.iters,
            converged: report.termination == Termination::Converged,
            final_objective: report.final_objective(),
        });
    }
    Ok(rows)
}

/// Runs every `(T, d, repeat)` cell with up to `threads` workers and returns
/// rows ordered by cell index, then method.
pub fn run_benchmark(cfg: &RunConfig, grid: &Grid, methods: &[Method], threads: usize) -> Result<Vec<BenchRow>> {
    let mut cells = Vec::new();
    for &tasks in &grid.tasks {
        for &d in &grid.dims {
            for repeat in 0..cfg.repeats {
                cells.push(Cell {
                    index: cells.len(),
                    tasks,
                    d,
                    repeat,
                });
            }
        }
    }
    let results: Mutex<Vec<Option<Result<Vec<BenchRow>>>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, cells.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let out = run_cell(cfg, &cells[i], methods);
                results.lock().expect("collector poisoned")[i] = Some(out);
            });
        }
    });
    let mut rows = Vec::new();
    for r in results.into_inner().expect("collector poisoned") {
        rows.extend(r.expect("every cell runs")?);
    }
    Ok(rows)
}

/// Worker count from `SMTL_THREADS`, defaulting to the available parallelism.
pub fn thread_budget() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("SMTL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n.min(available.max(1)).max(1),
        _ => available,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(
            parse_grid("5,50x10,20").unwrap(),
            Grid {
                dims: vec![5, 50],
                tasks: vec![10, 20]
            }
        );
        assert!(parse_grid("5,50").is_err());
        assert!(parse_grid("0x2").is_err());
        assert!(parse_grid("ax2").is_err());
    }

    #[test]
    fn rows_are_reproducible_across_thread_counts() {
        let cfg = RunConfig {
            repeats: 2,
            synth: SyntheticSpec {
                n_per_task: 6,
                ..RunConfig::default().synth
            },
            ..RunConfig::default()
        };
        let grid = parse_grid("2,3x2").unwrap();
        let methods = [Method::AltMin, Method::SingleTask];
        let a = run_benchmark(&cfg, &grid, &methods, 1).unwrap();
        let b = run_benchmark(&cfg, &grid, &methods, 3).unwrap();
        assert_eq!(a.len(), 8);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.cell, x.method), (y.cell, y.method));
            assert_eq!(x.final_objective.to_bits(), y.final_objective.to_bits());
        }
        let seeds: Vec<u64> = a.iter().map(|r| r.seed).collect();
        assert!(seeds.windows(2).all(|w| w[0] <= w[1]));
        let csv = rows_to_csv(&a);
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with(CSV_HEADER));
    }
}
