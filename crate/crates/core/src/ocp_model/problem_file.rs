//! Plain-text problem files.
//!
//! ```text
//! lahoc-problem v1
//! # two coupled scalar subsystems
//! subsystem
//! states 1
//! controls 1
//! A 1
//! B 1
//! Q 1
//! R 1
//! x0 0
//! f 1 -1 3 0
//! f 1 1 0 2
//! end
//! ```
//!
//! Matrices are given row-major. `f <row> <coef> <exponents...>` adds one
//! monomial to local state `row` (1-based), with one exponent per stacked
//! state of the whole problem. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::{ModelError, OCProblem, SubsystemSpec};
use crate::sham_engine::MonomialTerm;

pub const HEADER: &str = "lahoc-problem v1";

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn perr<T>(line: usize, message: impl Into<String>) -> Result<T, ProblemFileError> {
    Err(ProblemFileError::Parse { line, message: message.into() })
}

#[derive(Default)]
struct Pending {
    start: usize,
    states: Option<usize>,
    controls: Option<usize>,
    a: Option<(usize, Vec<f64>)>,
    b: Option<(usize, Vec<f64>)>,
    q: Option<(usize, Vec<f64>)>,
    r: Option<(usize, Vec<f64>)>,
    x0: Option<(usize, Vec<f64>)>,
    f: Vec<(usize, usize, f64, Vec<u32>)>,
}

fn parse_numbers(line: usize, key: &str, fields: &[&str]) -> Result<Vec<f64>, ProblemFileError> {
    fields
        .iter()
        .map(|s| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => perr(line, format!("{key}: '{s}' is not a finite number")),
        })
        .collect()
}

fn parse_count(line: usize, key: &str, fields: &[&str]) -> Result<usize, ProblemFileError> {
    match fields {
        [s] => match s.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => perr(line, format!("{key}: expected a positive integer, got '{s}'")),
        },
        _ => perr(line, format!("{key}: expected one value")),
    }
}

fn set_once<T>(slot: &mut Option<T>, value: T, line: usize, key: &str) -> Result<(), ProblemFileError> {
    if slot.is_some() {
        return perr(line, format!("{key} given twice"));
    }
    *slot = Some(value);
    Ok(())
}

fn matrix(line: usize, key: &str, data: Vec<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>, ProblemFileError> {
    if data.len() != rows * cols {
        return perr(line, format!("{key}: expected {} entries ({rows}x{cols}), got {}", rows * cols, data.len()));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Parses problem text; errors carry the 1-based line number.
pub fn parse_problem(text: &str) -> Result<OCProblem, ProblemFileError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == HEADER.split(' ').collect::<Vec<_>>() => {}
        Some((n, l)) => return perr(n, format!("expected header '{HEADER}', got '{l}'")),
        None => return perr(1, "empty problem file"),
    }

    let mut done: Vec<(Pending, usize)> = Vec::new();
    let mut cur: Option<Pending> = None;
    let mut last_line = 1;
    for (n, l) in lines {
        last_line = n;
        let fields: Vec<&str> = l.split_whitespace().collect();
        let (key, rest) = (fields[0], &fields[1..]);
        if key == "subsystem" {
            if cur.is_some() {
                return perr(n, "'subsystem' inside an open subsystem (missing 'end')");
            }
            if !rest.is_empty() {
                return perr(n, "'subsystem' takes no arguments");
            }
            cur = Some(Pending { start: n, ..Default::default() });
            continue;
        }
        let Some(p) = cur.as_mut() else {
            return perr(n, format!("'{key}' outside a subsystem block"));
        };
        match key {
            "states" => {
                let v = parse_count(n, key, rest)?;
                set_once(&mut p.states, v, n, key)?
            }
            "controls" => {
                let v = parse_count(n, key, rest)?;
                set_once(&mut p.controls, v, n, key)?
            }
            "A" | "B" | "Q" | "R" | "x0" => {
                let v = parse_numbers(n, key, rest)?;
                let slot = match key {
                    "A" => &mut p.a,
                    "B" => &mut p.b,
                    "Q" => &mut p.q,
                    "R" => &mut p.r,
                    _ => &mut p.x0,
                };
                set_once(slot, (n, v), n, key)?
            }
            "f" => {
                if rest.len() < 3 {
                    return perr(n, "f: expected '<row> <coef> <exponents...>'");
                }
                let row = match rest[0].parse::<usize>() {
                    Ok(r) if r >= 1 => r,
                    _ => return perr(n, format!("f: row '{}' must be a 1-based index", rest[0])),
                };
                let coef = parse_numbers(n, key, &rest[1..2])?[0];
                let exps = rest[2..]
                    .iter()
                    .map(|s| s.parse::<u32>().or_else(|_| perr(n, format!("f: exponent '{s}' is not a non-negative integer"))))
                    .collect::<Result<Vec<_>, _>>()?;
                p.f.push((n, row - 1, coef, exps));
            }
            "end" => {
                if !rest.is_empty() {
                    return perr(n, "'end' takes no arguments");
                }
                done.push((cur.take().expect("open block"), n));
            }
            other => return perr(n, format!("unknown keyword '{other}'")),
        }
    }
    if let Some(p) = cur {
        return perr(p.start, "subsystem block is not closed with 'end'");
    }
    if done.is_empty() {
        return perr(last_line, "no subsystem blocks");
    }

    let mut total = 0;
    for (p, end) in &done {
        total += p.states.ok_or(()).or_else(|_| perr(*end, "subsystem is missing 'states'"))?;
    }
    let mut subsystems = Vec::new();
    for (p, end) in done {
        let n = p.states.expect("checked");
        let m = match p.controls {
            Some(m) => m,
            None => return perr(end, "subsystem is missing 'controls'"),
        };
        let need = |v: Option<(usize, Vec<f64>)>, key: &str| v.ok_or(()).or_else(|_| perr(end, format!("subsystem is missing '{key}'")));
        let (la, a) = need(p.a, "A")?;
        let a = matrix(la, "A", a, n, n)?;
        let (lb, b) = need(p.b, "B")?;
        let b = matrix(lb, "B", b, n, m)?;
        let (lq, q) = need(p.q, "Q")?;
        let q = matrix(lq, "Q", q, n, n)?;
        let (lr, r) = need(p.r, "R")?;
        let r = matrix(lr, "R", r, m, m)?;
        let (lx, x0) = need(p.x0, "x0")?;
        if x0.len() != n {
            return perr(lx, format!("x0: expected {n} entries, got {}", x0.len()));
        }
        let mut f = vec![Vec::new(); n];
        for (line, row, coef, exps) in p.f {
            if row >= n {
                return perr(line, format!("f: row {} exceeds the {n} local states", row + 1));
            }
            if exps.len() != total {
                return perr(line, format!("f: {} exponents given, expected {total} (one per stacked state)", exps.len()));
            }
            match MonomialTerm::new(coef, exps) {
                Ok(t) => f[row].push(t),
                Err(e) => return perr(line, format!("f: {e}")),
            }
        }
        subsystems.push(SubsystemSpec { a_mat: a, b_mat: b, q_mat: q, r_mat: r, f, x0: DVector::from_vec(x0) });
    }
    Ok(OCProblem::new(subsystems)?)
}

pub fn read_problem(path: &Path) -> Result<OCProblem, ProblemFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProblemFileError::Io { path: path.display().to_string(), source })?;
    parse_problem(&text)
}

fn push_row_major(out: &mut String, key: &str, m: &DMatrix<f64>) {
    out.push_str(key);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let _ = write!(out, " {:?}", m[(i, j)]);
        }
    }
    out.push('\n');
}

/// Writes a problem in the format read by [`parse_problem`]; numbers use the
/// shortest round-trip representation.
pub fn write_problem(problem: &OCProblem) -> String {
    let mut out = format!("{HEADER}\n");
    for s in problem.subsystems() {
        out.push_str("subsystem\n");
        let _ = writeln!(out, "states {}", s.state_dim());
        let _ = writeln!(out, "controls {}", s.control_dim());
        push_row_major(&mut out, "A", &s.a_mat);
        push_row_major(&mut out, "B", &s.b_mat);
        push_row_major(&mut out, "Q", &s.q_mat);
        push_row_major(&mut out, "R", &s.r_mat);
        out.push_str("x0");
        for v in s.x0.iter() {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
        for (row, terms) in s.f.iter().enumerate() {
            for t in terms {
                let _ = write!(out, "f {} {:?}", row + 1, t.coefficient());
                for e in t.exponents() {
                    let _ = write!(out, " {e}");
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
    }
    out
}
