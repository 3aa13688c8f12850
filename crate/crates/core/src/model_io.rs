//! Plain-text model files.
//!
//! ```text
//! SMTL-MODEL v1
//! [kernel]
//! type = gaussian
//! gamma = 5.0000000000000000e-1
//! [problem]
//! lambda = ...
//! ridge = ...
//! delta = ...
//! loss = squared
//! penalty = schatten <p> <mu> | trace_one | cluster <r> <eps_m> <eps_b> <eps_w> | fixed
//! [X] n d
//! [Y] n T
//! [W] n T
//! [C] n T
//! [A] T T
//! [A0] T T        (only for penalty = fixed)
//! ```
//!
//! Matrix blocks are followed by their rows, numbers written with 17
//! significant digits so that reading reproduces every value bitwise.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::data::Loss;
use crate::error::{Result, SmtlError};
use crate::kernels::{GramMatrix, KernelSpec};
use crate::linalg::{Mat, PsdMatrix};
use crate::objectives::ProblemInstance;
use crate::penalties::PenaltySpec;
use crate::solver::ModelState;

pub const HEADER: &str = "SMTL-MODEL v1";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_matrix(out: &mut String, name: &str, m: &Mat) {
    let _ = writeln!(out, "[{name}] {} {}", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
}

pub fn model_to_string(model: &ModelState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "[kernel]");
    match model.gram().spec() {
        KernelSpec::Linear => {
            let _ = writeln!(out, "type = linear");
        }
        KernelSpec::Gaussian { gamma } => {
            let _ = writeln!(out, "type = gaussian\ngamma = {}", num(*gamma));
        }
    }
    let inst = &model.inst;
    let _ = writeln!(out, "[problem]");
    let _ = writeln!(out, "lambda = {}", num(inst.lam));
    let _ = writeln!(out, "ridge = {}", num(inst.ridge));
    let _ = writeln!(out, "delta = {}", num(inst.delta));
    let loss = match inst.loss {
        Loss::Squared => "squared",
        Loss::Logistic => "logistic",
    };
    let _ = writeln!(out, "loss = {loss}");
    let penalty = match &inst.penalty {
        PenaltySpec::Schatten { p, mu } => format!("schatten {} {}", num(*p), num(*mu)),
        PenaltySpec::TraceOne => "trace_one".to_string(),
        PenaltySpec::Cluster { r, eps_m, eps_b, eps_w } => {
            format!("cluster {r} {} {} {}", num(*eps_m), num(*eps_b), num(*eps_w))
        }
        PenaltySpec::Fixed(_) => "fixed".to_string(),
    };
    let _ = writeln!(out, "penalty = {penalty}");
    write_matrix(&mut out, "X", model.gram().x_train());
    write_matrix(&mut out, "Y", &inst.y);
    write_matrix(&mut out, "W", &inst.w);
    write_matrix(&mut out, "C", &model.c);
    write_matrix(&mut out, "A", model.a.data());
    if let PenaltySpec::Fixed(a0) = &inst.penalty {
        write_matrix(&mut out, "A0", a0.data());
    }
    out
}

pub fn save_model(model: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelState> {
    model_from_str(&std::fs::read_to_string(path)?)
}

struct Reader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

fn perr(line: usize, reason: impl Into<String>) -> SmtlError {
    SmtlError::Parse {
        line,
        reason: reason.into(),
    }
}

impl<'a> Reader<'a> {
    fn next_line(&mut self, expecting: &str) -> Result<(usize, &'a str)> {
        while self.pos < self.lines.len() {
            let line = self.lines[self.pos].trim();
            self.pos += 1;
            if !line.is_empty() {
                return Ok((self.pos, line));
            }
        }
        Err(perr(self.lines.len() + 1, format!("unexpected end of file: missing {expecting}")))
    }

    fn peek_is(&self, prefix: &str) -> bool {
        self.lines[self.pos..]
            .iter()
            .map(|l| l.trim())
            .find(|l| !l.is_empty())
            .is_some_and(|l| l.starts_with(prefix))
    }

    fn key(&mut self, block: &str, key: &str) -> Result<(usize, &'a str)> {
        let (line, text) = self.next_line(&format!("'{key}' in block [{block}]"))?;
        match text.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok((line, v.trim())),
            _ => Err(perr(line, format!("expected '{key} = ...' in block [{block}]"))),
        }
    }

    fn real(&mut self, block: &str, key: &str) -> Result<f64> {
        let (line, v) = self.key(block, key)?;
        parse_real(line, v)
    }

    fn tag(&mut self, name: &str) -> Result<usize> {
        let (line, text) = self.next_line(&format!("block [{name}]"))?;
        if text != format!("[{name}]") {
            return Err(perr(line, format!("missing block [{name}], found '{text}'")));
        }
        Ok(line)
    }

    fn matrix(&mut self, name: &str, shape: Option<(usize, usize)>) -> Result<Mat> {
        let (line, text) = self.next_line(&format!("block [{name}]"))?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(&format!("[{name}]")) {
            return Err(perr(line, format!("missing block [{name}], found '{text}'")));
        }
        let dims: Vec<usize> = parts
            .map(|p| p.parse().map_err(|_| perr(line, format!("bad dimension '{p}' in [{name}]"))))
            .collect::<Result<_>>()?;
        let [r, c] = dims[..] else {
            return Err(perr(line, format!("block [{name}] needs two dimensions")));
        };
        if let Some(expected) = shape {
            if (r, c) != expected {
                return Err(perr(
                    line,
                    format!("block [{name}] is {r}x{c}, expected {}x{}", expected.0, expected.1),
                ));
            }
        }
        let mut m = Mat::zeros(r, c);
        for i in 0..r {
            let (line, text) = self.next_line(&format!("row {} of block [{name}]", i + 1))?;
            let cells: Vec<&str> = text.split_whitespace().collect();
            if cells.len() != c {
                return Err(perr(line, format!("block [{name}] row has {} values, expected {c}", cells.len())));
            }
            for (j, cell) in cells.iter().enumerate() {
                m[(i, j)] = parse_real(line, cell)?;
            }
        }
        Ok(m)
    }
}

fn parse_real(line: usize, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| perr(line, format!("cannot parse number '{v}'")))?;
    if !x.is_finite() {
        return Err(perr(line, format!("non-finite value '{v}'")));
    }
    Ok(x)
}

pub fn model_from_str(text: &str) -> Result<ModelState> {
    let text = text.trim_start_matches('\u{feff}');
    let mut r = Reader {
        lines: text.lines().collect(),
        pos: 0,
    };
    let (_, header) = r
        .next_line("header")
        .map_err(|_| SmtlError::VersionMismatch("empty file".into()))?;
    if header != HEADER {
        return Err(SmtlError::VersionMismatch(header.to_string()));
    }

    r.tag("kernel")?;
    let (line, kind) = r.key("kernel", "type")?;
    let kernel = match kind {
        "linear" => KernelSpec::Linear,
        "gaussian" => KernelSpec::Gaussian {
            gamma: r.real("kernel", "gamma")?,
        },
        other => return Err(perr(line, format!("unknown kernel type '{other}'"))),
    };

    r.tag("problem")?;
    let lam = r.real("problem", "lambda")?;
    let ridge = r.real("problem", "ridge")?;
    let delta = r.real("problem", "delta")?;
    let (line, loss) = r.key("problem", "loss")?;
    let loss = match loss {
        "squared" => Loss::Squared,
        "logistic" => Loss::Logistic,
        other => return Err(perr(line, format!("unknown loss '{other}'"))),
    };
    let (pen_line, penalty_text) = r.key("problem", "penalty")?;
    let fields: Vec<&str> = penalty_text.split_whitespace().collect();

    let x = r.matrix("X", None)?;
    let n = x.nrows();
    let y = r.matrix("Y", None)?;
    if y.nrows() != n {
        return Err(perr(r.pos, format!("block [Y] has {} rows, expected {n}", y.nrows())));
    }
    let t = y.ncols();
    let w = r.matrix("W", Some((n, t)))?;
    let c = r.matrix("C", Some((n, t)))?;
    let a = r.matrix("A", Some((t, t)))?;

    let bad_penalty = || perr(pen_line, format!("bad penalty '{penalty_text}'"));
    let real_at = |i: usize| -> Result<f64> { parse_real(pen_line, fields.get(i).ok_or_else(bad_penalty)?) };
    let penalty = match fields.first().copied() {
        Some("schatten") if fields.len() == 3 => PenaltySpec::Schatten {
            p: real_at(1)?,
            mu: real_at(2)?,
        },
        Some("trace_one") if fields.len() == 1 => PenaltySpec::TraceOne,
        Some("cluster") if fields.len() == 5 => PenaltySpec::Cluster {
            r: fields[1].parse().map_err(|_| bad_penalty())?,
            eps_m: real_at(2)?,
            eps_b: real_at(3)?,
            eps_w: real_at(4)?,
        },
        Some("fixed") if fields.len() == 1 => {
            if !r.peek_is("[A0]") {
                return Err(perr(r.lines.len() + 1, "missing block [A0] for penalty = fixed"));
            }
            PenaltySpec::Fixed(PsdMatrix::new(&r.matrix("A0", Some((t, t)))?)?)
        }
        _ => return Err(bad_penalty()),
    };

    let gram = Arc::new(GramMatrix::new(kernel, x)?);
    let inst = ProblemInstance::new(gram, y, w, lam, penalty, delta)?
        .with_ridge(ridge)?
        .with_loss(loss);
    Ok(ModelState {
        c,
        a: PsdMatrix::new(&a)?,
        inst,
    })
}
