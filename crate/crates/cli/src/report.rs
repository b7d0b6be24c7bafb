use std::path::Path;

use lahoc::ocp_model::{OCProblem, SolutionBundle};
use lahoc::sham_engine::Termination;

use crate::CliError;

/// Nine significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.8e}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(CliError::from)
}

pub fn write_trajectories(path: &Path, problem: &OCProblem, b: &SolutionBundle) -> Result<(), CliError> {
    let n = problem.state_dim();
    let m = problem.control_dim();
    let mut w = writer(path)?;
    let mut header = vec!["time".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("lambda{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    w.write_record(&header)?;
    for (i, &t) in b.times.iter().enumerate() {
        let mut rec = vec![sci(t)];
        rec.extend((0..n).map(|c| sci(b.states[(i, c)])));
        rec.extend((0..n).map(|c| sci(b.costates[(i, c)])));
        rec.extend((0..m).map(|c| sci(b.controls[(i, c)])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    Ok(())
}

pub fn write_convergence(path: &Path, b: &SolutionBundle) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["order", "tail_norm", "cost"])?;
    for (m, (tail, cost)) in b.tail_norms.iter().zip(&b.per_order_costs).enumerate() {
        w.write_record([m.to_string(), sci(*tail), sci(*cost)])?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    Ok(())
}

pub struct SweepRow {
    value: f64,
    status: String,
    orders: String,
    tail: String,
    cost: String,
}

impl SweepRow {
    pub fn new(value: f64, outcome: Result<SolutionBundle, String>) -> Self {
        match outcome {
            Ok(b) => Self {
                value,
                status: match b.termination {
                    Termination::Converged { .. } => "converged".into(),
                    Termination::MaxOrder => "max_order".into(),
                    Termination::Diverged { .. } => "diverged".into(),
                },
                orders: b.orders_used.to_string(),
                tail: sci(*b.tail_norms.last().unwrap_or(&f64::NAN)),
                cost: sci(b.cost),
            },
            Err(e) => Self { value, status: format!("error: {e}"), orders: String::new(), tail: String::new(), cost: String::new() },
        }
    }
}

/// Writes `sweep.csv` and returns the same rows as text.
pub fn write_sweep(path: &Path, axis: &str, rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = writer(path)?;
    let mut mem = csv::Writer::from_writer(Vec::new());
    let header = [axis, "status", "orders_used", "final_tail_norm", "cost"];
    w.write_record(header)?;
    mem.write_record(header)?;
    for r in rows {
        let rec = [sci(r.value), r.status.clone(), r.orders.clone(), r.tail.clone(), r.cost.clone()];
        w.write_record(&rec)?;
        mem.write_record(&rec)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let bytes = mem.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
