//! Truncated-domain reference solver for the optimality systems.
//!
//! The infinite horizon is cut at `t_end`, decaying components are pinned to
//! zero there, and the system is discretized by the implicit midpoint rule
//! on a graded mesh. The discrete equations are solved by damped Newton with
//! a banded LU.

pub mod banded;

use std::io::Write;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::sham_engine::{BoundaryTag, ShamRun, SolverError, SystemSpec};
use banded::BandedMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spec(#[from] SolverError),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error("singular Newton Jacobian (zero pivot in column {column})")]
    SingularJacobian { column: usize },
    #[error("time {t} lies outside a compared trajectory's domain")]
    TimeOutsideDomain { t: f64 },
    #[error("trajectories have {a} and {b} components")]
    DimensionMismatch { a: usize, b: usize },
}

/// How mesh points are placed on `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshLayout {
    /// Step `h0` at the origin, growing by `growth` per step up to `h_max`.
    Spacing { h0: f64, growth: f64, h_max: f64 },
    /// The default spacing law, uniformly rescaled to give this many points.
    Points(usize),
}

pub const DEFAULT_SPACING: MeshLayout = MeshLayout::Spacing { h0: 1e-3, growth: 1.02, h_max: 0.04 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    pub t_end: f64,
    pub mesh: MeshLayout,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// First Newton step length, in `(0, 1]`.
    pub damping: f64,
    /// Richardson-extrapolate against a solve on the bisected mesh.
    pub extrapolate: bool,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { t_end: 40.0, mesh: DEFAULT_SPACING, newton_tol: 1e-12, max_newton_iters: 60, damping: 1.0, extrapolate: true }
    }
}

impl TruncationConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: &str| Err(OracleError::InvalidConfig(m.into()));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive and finite");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be positive");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        match self.mesh {
            MeshLayout::Spacing { h0, growth, h_max } => {
                if !(h0 > 0.0 && h_max >= h0 && growth >= 1.0 && h_max.is_finite()) {
                    return bad("mesh spacing needs 0 < h0 <= h_max and growth >= 1");
                }
            }
            MeshLayout::Points(n) if n < 50 => return bad("mesh needs at least 50 points"),
            MeshLayout::Points(_) => {}
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Vec<f64>, OracleError> {
        self.validate()?;
        Ok(match self.mesh {
            MeshLayout::Spacing { h0, growth, h_max } => graded_mesh(self.t_end, h0, growth, h_max),
            MeshLayout::Points(n) => mesh_with_points(self.t_end, n),
        })
    }
}

fn graded_mesh(t_end: f64, h0: f64, growth: f64, h_max: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut t = 0.0;
    let mut h = h0;
    loop {
        if t + 1.5 * h >= t_end {
            pts.push(t_end);
            return pts;
        }
        t += h;
        pts.push(t);
        h = (h * growth).min(h_max);
    }
}

fn mesh_with_points(t_end: f64, n: usize) -> Vec<f64> {
    let MeshLayout::Spacing { h0, growth, h_max } = DEFAULT_SPACING else { unreachable!() };
    let at = |c: f64| graded_mesh(t_end, c * h0, growth, c * h_max);
    let (mut lo, mut hi) = (1e-6f64, 1e6f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if at(mid).len() >= n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

/// Newton statistics of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_norm: f64,
    /// Nonlinearity scalings used before the full problem converged; 0 when
    /// no continuation was needed.
    pub continuation_steps: usize,
    pub extrapolated: bool,
}

/// Mesh trajectories, interpolated by cubic Hermite splines.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub mesh: Vec<f64>,
    /// `points x dim`.
    pub values: DMatrix<f64>,
    /// Right-hand side at the mesh points, `points x dim`.
    pub slopes: DMatrix<f64>,
    pub report: NewtonReport,
}

impl OracleSolution {
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn t_end(&self) -> f64 {
        *self.mesh.last().expect("non-empty mesh")
    }

    /// Component `c` at `t`; `NaN` outside `[0, t_end]`.
    pub fn evaluate(&self, c: usize, t: f64) -> f64 {
        if !(0.0..=self.t_end()).contains(&t) {
            return f64::NAN;
        }
        let k = self.mesh.partition_point(|&m| m <= t).clamp(1, self.mesh.len() - 1) - 1;
        let (t0, t1) = (self.mesh[k], self.mesh[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (self.values[(k, c)], self.values[(k + 1, c)]);
        let (d0, d1) = (self.slopes[(k, c)] * h, self.slopes[(k + 1, c)] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1
    }

    /// `time,z0,z1,...` rows at the mesh points.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim()).map(|c| format!("z{c}")).collect();
        writeln!(w, "time,{}", header.join(","))?;
        for (k, t) in self.mesh.iter().enumerate() {
            write!(w, "{t:.8e}")?;
            for c in 0..self.dim() {
                write!(w, ",{:.8e}", self.values[(k, c)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

struct Layout {
    dim: usize,
    iv: Vec<(usize, f64)>,
    decay: Vec<usize>,
}

impl Layout {
    fn new(spec: &SystemSpec) -> Self {
        let mut iv = Vec::new();
        let mut decay = Vec::new();
        for (r, tag) in spec.bc().iter().enumerate() {
            match *tag {
                BoundaryTag::InitialValue(v) => iv.push((r, v)),
                BoundaryTag::DecayAtInfinity => decay.push(r),
            }
        }
        Self { dim: spec.dim(), iv, decay }
    }
}

fn residual(spec: &SystemSpec, lay: &Layout, mesh: &[f64], z: &[f64]) -> Vec<f64> {
    let d = lay.dim;
    let k_last = mesh.len() - 1;
    let mut out = Vec::with_capacity(z.len());
    for &(r, v) in &lay.iv {
        out.push(z[r] - v);
    }
    let mut mid = vec![0.0; d];
    for k in 0..k_last {
        let h = mesh[k + 1] - mesh[k];
        let (a, b) = (&z[k * d..(k + 1) * d], &z[(k + 1) * d..(k + 2) * d]);
        for r in 0..d {
            mid[r] = 0.5 * (a[r] + b[r]);
        }
        let f = spec.rhs(0.5 * (mesh[k] + mesh[k + 1]), &mid);
        for r in 0..d {
            out.push(b[r] - a[r] - h * f[r]);
        }
    }
    for &r in &lay.decay {
        out.push(z[k_last * d + r]);
    }
    out
}

fn jacobian(spec: &SystemSpec, lay: &Layout, mesh: &[f64], z: &[f64]) -> BandedMatrix {
    let d = lay.dim;
    let niv = lay.iv.len();
    let k_last = mesh.len() - 1;
    let n = z.len();
    let mut jac = BandedMatrix::zeros(n, niv + d - 1, 2 * d - 1 - niv);
    for (i, &(r, _)) in lay.iv.iter().enumerate() {
        jac.add(i, r, 1.0);
    }
    let mut mid = vec![0.0; d];
    for k in 0..k_last {
        let h = mesh[k + 1] - mesh[k];
        for r in 0..d {
            mid[r] = 0.5 * (z[k * d + r] + z[(k + 1) * d + r]);
        }
        let jf = spec.rhs_jacobian(&mid);
        let row0 = niv + k * d;
        for r in 0..d {
            jac.add(row0 + r, k * d + r, -1.0);
            jac.add(row0 + r, (k + 1) * d + r, 1.0);
            for c in 0..d {
                let v = -0.5 * h * jf[(r, c)];
                if v != 0.0 {
                    jac.add(row0 + r, k * d + c, v);
                    jac.add(row0 + r, (k + 1) * d + c, v);
                }
            }
        }
    }
    for (j, &r) in lay.decay.iter().enumerate() {
        jac.add(niv + k_last * d + j, k_last * d + r, 1.0);
    }
    jac
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton(
    spec: &SystemSpec,
    lay: &Layout,
    mesh: &[f64],
    z: &mut [f64],
    cfg: &TruncationConfig,
) -> Result<(usize, f64), OracleError> {
    let mut res = residual(spec, lay, mesh, z);
    let mut rn = inf_norm(&res);
    for it in 1..=cfg.max_newton_iters {
        let lu = jacobian(spec, lay, mesh, z).factorize().map_err(|column| OracleError::SingularJacobian { column })?;
        let mut step = res.clone();
        lu.solve(&mut step);
        if step.iter().any(|v| !v.is_finite()) {
            return Err(OracleError::NewtonFailed { iterations: it, residual: rn });
        }
        let mut alpha = if it == 1 { cfg.damping } else { 1.0 };
        let mut trial = vec![0.0; z.len()];
        loop {
            for i in 0..z.len() {
                trial[i] = z[i] - alpha * step[i];
            }
            let tres = residual(spec, lay, mesh, &trial);
            let tn = inf_norm(&tres);
            if tn.is_finite() && (tn <= (1.0 - 1e-4 * alpha) * rn || tn <= 1e-14 || alpha < 1e-6) {
                if alpha < 1e-6 && !(tn < rn) {
                    return Err(OracleError::NewtonFailed { iterations: it, residual: rn });
                }
                res = tres;
                rn = tn;
                break;
            }
            alpha *= 0.5;
        }
        z.copy_from_slice(&trial);
        let dz = alpha * inf_norm(&step);
        if dz <= cfg.newton_tol * (1.0 + inf_norm(z)) {
            return Ok((it, rn));
        }
    }
    Err(OracleError::NewtonFailed { iterations: cfg.max_newton_iters, residual: rn })
}

fn initial_state(lay: &Layout, mesh: &[f64]) -> Vec<f64> {
    let d = lay.dim;
    let t_end = *mesh.last().expect("mesh");
    let mut z = vec![0.0; mesh.len() * d];
    for (k, &t) in mesh.iter().enumerate() {
        for &(r, v) in &lay.iv {
            z[k * d + r] = v * (1.0 - t / t_end);
        }
    }
    z
}

fn solve_on_mesh(
    spec: &SystemSpec,
    lay: &Layout,
    mesh: &[f64],
    guess: Option<Vec<f64>>,
    cfg: &TruncationConfig,
) -> Result<(Vec<f64>, usize, f64, usize), OracleError> {
    let start = guess.unwrap_or_else(|| initial_state(lay, mesh));
    let mut z = start.clone();
    match newton(spec, lay, mesh, &mut z, cfg) {
        Ok((it, rn)) => Ok((z, it, rn, 0)),
        Err(first) if spec.is_linear() => Err(first),
        Err(_) => {
            let mut z = start;
            let mut total = 0;
            let mut last = (0, 0.0);
            for (i, s) in [0.25, 0.5, 0.75, 1.0].iter().enumerate() {
                let scaled = spec.scaled_nonlinearity(*s);
                last = newton(&scaled, lay, mesh, &mut z, cfg)?;
                total += last.0;
                let _ = i;
            }
            Ok((z, total, last.1, 4))
        }
    }
}

fn bisect_mesh(mesh: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * mesh.len() - 1);
    for w in mesh.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*mesh.last().expect("mesh"));
    out
}

/// Solves the system on `[0, t_end]`.
pub fn solve_truncated(spec: &SystemSpec, cfg: &TruncationConfig) -> Result<OracleSolution, OracleError> {
    spec.validate()?;
    let mesh = cfg.build_mesh()?;
    let lay = Layout::new(spec);
    let d = lay.dim;
    let (coarse, mut iterations, mut rn, steps) = solve_on_mesh(spec, &lay, &mesh, None, cfg)?;
    let values = if cfg.extrapolate {
        let fine_mesh = bisect_mesh(&mesh);
        let mut guess = vec![0.0; fine_mesh.len() * d];
        for k in 0..mesh.len() {
            guess[2 * k * d..(2 * k + 1) * d].copy_from_slice(&coarse[k * d..(k + 1) * d]);
            if k + 1 < mesh.len() {
                for r in 0..d {
                    guess[(2 * k + 1) * d + r] = 0.5 * (coarse[k * d + r] + coarse[(k + 1) * d + r]);
                }
            }
        }
        let (fine, it, frn, _) = solve_on_mesh(spec, &lay, &fine_mesh, Some(guess), cfg)?;
        iterations += it;
        rn = rn.max(frn);
        let mut ex = vec![0.0; coarse.len()];
        for k in 0..mesh.len() {
            for r in 0..d {
                ex[k * d + r] = (4.0 * fine[2 * k * d + r] - coarse[k * d + r]) / 3.0;
            }
        }
        ex
    } else {
        coarse
    };
    let values = DMatrix::from_row_slice(mesh.len(), d, &values);
    let mut slopes = DMatrix::zeros(mesh.len(), d);
    for (k, &t) in mesh.iter().enumerate() {
        let row: Vec<f64> = values.row(k).iter().copied().collect();
        let f = spec.rhs(t, &row);
        for r in 0..d {
            slopes[(k, r)] = f[r];
        }
    }
    Ok(OracleSolution {
        mesh,
        values,
        slopes,
        report: NewtonReport { iterations, residual_norm: rn, continuation_steps: steps, extrapolated: cfg.extrapolate },
    })
}

/// Anything that can be sampled component-wise in time.
pub trait Trajectory {
    fn dim(&self) -> usize;
    fn domain(&self) -> (f64, f64);
    fn value(&self, c: usize, t: f64) -> f64;
}

impl Trajectory for OracleSolution {
    fn dim(&self) -> usize {
        self.values.ncols()
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, self.t_end())
    }
    fn value(&self, c: usize, t: f64) -> f64 {
        self.evaluate(c, t)
    }
}

/// The final partial sum of a homotopy run.
pub struct RunTrajectory<'a> {
    run: &'a ShamRun,
    grid: DMatrix<f64>,
}

impl<'a> RunTrajectory<'a> {
    pub fn new(run: &'a ShamRun) -> Self {
        Self { run, grid: run.solution() }
    }
}

impl Trajectory for RunTrajectory<'_> {
    fn dim(&self) -> usize {
        self.grid.ncols()
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
    fn value(&self, c: usize, t: f64) -> f64 {
        self.run.evaluate_grid(&self.grid, c, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentDeviation {
    pub max: f64,
    pub at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub per_component: Vec<ComponentDeviation>,
}

impl Comparison {
    pub fn max(&self) -> f64 {
        self.per_component.iter().fold(0.0, |m, c| m.max(c.max))
    }
}

/// Component-wise largest `|a - b|` over `times`.
pub fn compare(a: &dyn Trajectory, b: &dyn Trajectory, times: &[f64]) -> Result<Comparison, OracleError> {
    if a.dim() != b.dim() {
        return Err(OracleError::DimensionMismatch { a: a.dim(), b: b.dim() });
    }
    for &t in times {
        let (a0, a1) = a.domain();
        let (b0, b1) = b.domain();
        if !(t >= a0.max(b0) && t <= a1.min(b1)) {
            return Err(OracleError::TimeOutsideDomain { t });
        }
    }
    let per_component = (0..a.dim())
        .map(|c| {
            let mut best = ComponentDeviation { max: 0.0, at: times.first().copied().unwrap_or(0.0) };
            for &t in times {
                let dev = (a.value(c, t) - b.value(c, t)).abs();
                if dev > best.max || dev.is_nan() {
                    best = ComponentDeviation { max: dev, at: t };
                }
            }
            best
        })
        .collect();
    Ok(Comparison { per_component })
}
