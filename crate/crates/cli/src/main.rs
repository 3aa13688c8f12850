use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smtl::benchmark::{parse_grid, rows_to_csv, run_benchmark, thread_budget, Method};
use smtl::config::load_config;
use smtl::data::{load_dataset, parse_long_csv};
use smtl::kernels::GramMatrix;
use smtl::linalg::Mat;
use smtl::metrics::{accuracy, nmse_masked, predict};
use smtl::model_io::{load_model, save_model};
use smtl::oracles::{reports_to_csv, run_suite};
use smtl::solver::{fit_with_gram, FitReport};
use smtl::{ErrorClass, SmtlError};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "smtl", version, about = "Multi-task kernel learning with a learned output structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a long-format CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the fit report (default: <out>.report).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Predict with a saved model and score the predictions.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Treat the task column as a class label and report one-vs-all accuracy.
        #[arg(long)]
        labels: bool,
    },
    /// Time fits over a grid of input dimensions and task counts.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Dimensions and task counts, e.g. 5,50,150x20.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of altmin,bcd,stl.
        #[arg(long, default_value = "altmin,bcd,stl")]
        methods: String,
    },
    /// Run the verification oracles.
    Verify {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// Also write the reports as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

enum Failure {
    Lib(SmtlError),
    Verify(usize),
}

impl From<SmtlError> for Failure {
    fn from(e: SmtlError) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(SmtlError::Io(e))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Fit { data, config, out, report } => cmd_fit(&data, &config, &out, report),
        Command::Predict { model, data, out, labels } => cmd_predict(&model, &data, &out, labels),
        Command::Benchmark { config, grid, out, methods } => cmd_benchmark(&config, &grid, &out, &methods),
        Command::Verify { filter, csv } => cmd_verify(filter.as_deref(), csv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(n)) => {
            eprintln!("error: {n} verification check(s) failed");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => EXIT_USAGE,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numerical => EXIT_NUMERICAL,
            })
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn report_text(report: &FitReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "iterations = {}", report.iters);
    let _ = writeln!(out, "termination = {:?}", report.termination);
    let _ = writeln!(out, "final_objective = {:.17e}", report.final_objective());
    let _ = writeln!(out, "final_delta = {:e}", report.final_delta);
    let _ = writeln!(out, "threads = {}", report.threads);
    let t = &report.wall_times;
    let _ = writeln!(out, "seconds.supervised = {:.6}", t.supervised);
    let _ = writeln!(out, "seconds.unsupervised = {:.6}", t.unsupervised);
    let _ = writeln!(out, "seconds.objective = {:.6}", t.objective);
    let _ = writeln!(out, "seconds.total = {:.6}", t.total);
    let phases: Vec<String> = report.phases.iter().map(|(start, d)| format!("{start}:{d:e}")).collect();
    let _ = writeln!(out, "phases = {}", phases.join(" "));
    let _ = writeln!(out, "[trajectory]");
    for (k, (s, mid)) in report.objective_trajectory.iter().zip(&report.half_steps).enumerate() {
        let _ = writeln!(out, "{k} {s:.17e} {mid:.17e}");
    }
    out
}

fn cmd_fit(data: &Path, config: &Path, out: &Path, report_path: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let dataset = load_dataset(data, cfg.weighting)?;
    let gram = std::sync::Arc::new(GramMatrix::new(cfg.kernel, dataset.x.clone())?);
    let params = cfg.params(dataset.n_tasks());
    let (model, report) = fit_with_gram(gram, &dataset, &params, &cfg.solver)?;
    save_model(&model, out)?;
    let report_path = report_path.unwrap_or_else(|| with_suffix(out, ".report"));
    fs::write(&report_path, report_text(&report))?;
    let train = nmse_masked(&dataset.y, &model.fitted(), Some(&dataset.w))?;
    println!(
        "fit: n={} d={} T={} iterations={} termination={:?} objective={:.10e} train_nmse={:.6}",
        dataset.n(),
        dataset.dim(),
        dataset.n_tasks(),
        report.iters,
        report.termination,
        report.final_objective(),
        train
    );
    println!("model written to {}", out.display());
    Ok(())
}

fn cmd_predict(model_path: &Path, data: &Path, out: &Path, labels: bool) -> Result<(), Failure> {
    let model = load_model(model_path)?;
    let rows = parse_long_csv(&fs::read_to_string(data)?)?;
    let z = predict(&model, &rows.x)?;
    let t = z.ncols();
    let mut csv = String::from("row,task,y");
    for j in 0..t {
        let _ = write!(csv, ",z{j}");
    }
    csv.push('\n');
    for i in 0..z.nrows() {
        let _ = write!(csv, "{i},{},{}", rows.tasks[i], rows.y[i]);
        for j in 0..t {
            let _ = write!(csv, ",{:.17e}", z[(i, j)]);
        }
        csv.push('\n');
    }
    fs::write(out, csv)?;

    let mut metrics = String::new();
    if labels {
        let classes: Vec<i64> = rows.tasks.iter().map(|&c| c as i64).collect();
        let acc = accuracy(&classes, &z)?;
        let _ = writeln!(metrics, "accuracy = {acc:.6}");
    } else {
        let n = z.nrows();
        let mut truth = Mat::zeros(n, t);
        let mut mask = Mat::zeros(n, t);
        for (i, (&task, &y)) in rows.tasks.iter().zip(&rows.y).enumerate() {
            if task >= t {
                return Err(SmtlError::Parse {
                    line: i + 2,
                    reason: format!("task {task} is outside the model's {t} tasks"),
                }
                .into());
            }
            truth[(i, task)] = y;
            mask[(i, task)] = 1.0;
        }
        let score = nmse_masked(&truth, &z, Some(&mask))?;
        let _ = writeln!(metrics, "nmse = {score:.6}");
    }
    let _ = writeln!(metrics, "rows = {}", z.nrows());
    fs::write(with_suffix(out, ".metrics"), &metrics)?;
    print!("{metrics}");
    Ok(())
}

fn cmd_benchmark(config: &Path, grid: &str, out: &Path, methods: &str) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let grid = parse_grid(grid)?;
    let methods = methods
        .split(',')
        .map(|m| match m.trim() {
            "altmin" => Ok(Method::AltMin),
            "bcd" => Ok(Method::Bcd),
            "stl" => Ok(Method::SingleTask),
            other => Err(SmtlError::Invalid(format!("unknown method '{other}' (altmin, bcd, stl)"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let threads = thread_budget();
    let rows = run_benchmark(&cfg, &grid, &methods, threads)?;
    fs::write(out, rows_to_csv(&rows))?;
    println!("{} rows written to {} using {threads} thread(s)", rows.len(), out.display());
    Ok(())
}

fn cmd_verify(filter: Option<&str>, csv: Option<PathBuf>) -> Result<(), Failure> {
    let reports = run_suite(filter, thread_budget());
    if reports.is_empty() {
        return Err(SmtlError::Invalid(format!("no check matches '{}'", filter.unwrap_or(""))).into());
    }
    for r in &reports {
        println!("{}", r.line());
    }
    if let Some(path) = csv {
        fs::write(path, reports_to_csv(&reports))?;
    }
    let failed = reports.iter().filter(|r| r.counts_as_failure()).count();
    if failed > 0 {
        return Err(Failure::Verify(failed));
    }
    Ok(())
}
