//! Interconnected optimal control problems and their Pontryagin systems.
//!
//! Subsystem `i` follows `x_i' = A_i x_i + B_i u_i + f_i(x)` and the cost is
//! `J = 1/2 int_0^inf sum_i (x_i' Q_i x_i + u_i' R_i u_i) dt`. The derived
//! system stacks all states first and all costates after them, so the
//! extended variable vector is `(x, lambda)` of length `2n`.

pub mod problem_file;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::laguerre_basis::{quadrature_unweighted, BasisError, BasisRule};
use crate::sham_engine::{
    gamma_diagnostic, run_sham, run_sham_with_rule, BoundaryTag, MonomialTerm, ShamRun, SolverConfig,
    SolverError, SystemSpec, Termination,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("subsystem {index}: {message}")]
    InvalidSubsystem { index: usize, message: String },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// One subsystem; `f` has one list of monomials per local state, each over
/// the full stacked state.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemSpec {
    pub a_mat: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
    pub q_mat: DMatrix<f64>,
    pub r_mat: DMatrix<f64>,
    pub f: Vec<Vec<MonomialTerm>>,
    pub x0: DVector<f64>,
}

impl SubsystemSpec {
    pub fn state_dim(&self) -> usize {
        self.a_mat.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b_mat.ncols()
    }

    fn validate(&self, index: usize, total_states: usize) -> Result<(), ModelError> {
        let err = |message: String| Err(ModelError::InvalidSubsystem { index, message });
        let n = self.state_dim();
        let m = self.control_dim();
        if n == 0 || self.a_mat.ncols() != n {
            return err(format!("A must be square and non-empty, got {}x{}", n, self.a_mat.ncols()));
        }
        if self.b_mat.nrows() != n || m == 0 {
            return err(format!("B must be {n}xm with m >= 1, got {}x{}", self.b_mat.nrows(), m));
        }
        if self.q_mat.shape() != (n, n) {
            return err(format!("Q must be {n}x{n}"));
        }
        if self.r_mat.shape() != (m, m) {
            return err(format!("R must be {m}x{m}"));
        }
        if self.x0.len() != n {
            return err(format!("x0 has {} entries, expected {n}", self.x0.len()));
        }
        if self.f.len() != n {
            return err(format!("f has {} rows, expected {n}", self.f.len()));
        }
        for mat in [&self.a_mat, &self.b_mat, &self.q_mat, &self.r_mat] {
            if mat.iter().any(|v| !v.is_finite()) {
                return err("non-finite matrix entry".into());
            }
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return err("non-finite initial state".into());
        }
        if !is_symmetric(&self.q_mat) {
            return err("Q is not symmetric".into());
        }
        if min_eigenvalue(&self.q_mat) < -1e-10 {
            return err("Q is not positive semidefinite".into());
        }
        if !is_symmetric(&self.r_mat) {
            return err("R is not symmetric".into());
        }
        if min_eigenvalue(&self.r_mat) <= 0.0 {
            return err("R is not positive definite".into());
        }
        for (row, terms) in self.f.iter().enumerate() {
            for t in terms {
                if t.exponents().len() != total_states {
                    return err(format!(
                        "f row {row}: monomial over {} variables, expected the {total_states} stacked states",
                        t.exponents().len()
                    ));
                }
                if t.degree() == 0 {
                    return err(format!("f row {row}: constant term (f must vanish at 0)"));
                }
            }
        }
        Ok(())
    }

    fn r_inverse(&self) -> DMatrix<f64> {
        self.r_mat.clone().cholesky().expect("R checked positive definite").inverse()
    }
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.iter().map(|v| v.abs()).fold(1.0, f64::max);
    (m - m.transpose()).iter().all(|v| v.abs() <= 1e-12 * scale)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Ordered subsystems sharing one stacked state.
#[derive(Debug, Clone, PartialEq)]
pub struct OCProblem {
    subsystems: Vec<SubsystemSpec>,
}

impl OCProblem {
    pub fn new(subsystems: Vec<SubsystemSpec>) -> Result<Self, ModelError> {
        if subsystems.is_empty() {
            return Err(ModelError::InvalidProblem("no subsystems".into()));
        }
        let n: usize = subsystems.iter().map(|s| s.a_mat.nrows()).sum();
        for (i, s) in subsystems.iter().enumerate() {
            s.validate(i, n)?;
        }
        Ok(Self { subsystems })
    }

    pub fn subsystems(&self) -> &[SubsystemSpec] {
        &self.subsystems
    }

    /// Total state dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.state_dim()).sum()
    }

    pub fn control_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.control_dim()).sum()
    }

    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut so = 0;
        let mut co = 0;
        self.subsystems
            .iter()
            .map(|s| {
                let out = (so, co);
                so += s.state_dim();
                co += s.control_dim();
                out
            })
            .collect()
    }

    /// Stacked initial state.
    pub fn x0(&self) -> DVector<f64> {
        let v: Vec<f64> = self.subsystems.iter().flat_map(|s| s.x0.iter().copied()).collect();
        DVector::from_vec(v)
    }

    fn block_diag(&self, pick: impl Fn(&SubsystemSpec) -> DMatrix<f64>, cols: impl Fn(&SubsystemSpec) -> usize) -> DMatrix<f64> {
        let rows: usize = self.state_dim();
        let total_cols: usize = self.subsystems.iter().map(&cols).sum();
        let mut out = DMatrix::zeros(rows, total_cols);
        let mut r0 = 0;
        let mut c0 = 0;
        for s in &self.subsystems {
            let b = pick(s);
            out.view_mut((r0, c0), b.shape()).copy_from(&b);
            r0 += b.nrows();
            c0 += b.ncols();
        }
        out
    }

    /// Stacked `A`, `B R^-1 B'` and `Q`.
    pub fn stacked_a(&self) -> DMatrix<f64> {
        self.block_diag(|s| s.a_mat.clone(), |s| s.state_dim())
    }

    pub fn stacked_s(&self) -> DMatrix<f64> {
        self.block_diag(|s| &s.b_mat * s.r_inverse() * s.b_mat.transpose(), |s| s.state_dim())
    }

    pub fn stacked_q(&self) -> DMatrix<f64> {
        self.block_diag(|s| s.q_mat.clone(), |s| s.state_dim())
    }

    /// Full nonlinear field `f(x)` as one monomial list per stacked state.
    pub fn stacked_f(&self) -> Vec<Vec<MonomialTerm>> {
        self.subsystems.iter().flat_map(|s| s.f.iter().cloned()).collect()
    }
}

fn combine_like_terms(terms: Vec<MonomialTerm>) -> Vec<MonomialTerm> {
    let mut order: Vec<Vec<u32>> = Vec::new();
    let mut sums: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for t in terms {
        let key = t.exponents().to_vec();
        if !sums.contains_key(&key) {
            order.push(key.clone());
        }
        *sums.entry(key).or_insert(0.0) += t.coefficient();
    }
    order
        .into_iter()
        .filter_map(|k| {
            let c = sums[&k];
            if c == 0.0 {
                None
            } else {
                MonomialTerm::new(c, k).ok()
            }
        })
        .collect()
}

/// `Psi_k = sum_j (d f_j / d x_k) lambda_j` as monomials over `(x, lambda)`.
pub fn costate_interaction(f: &[Vec<MonomialTerm>], n: usize) -> Vec<Vec<MonomialTerm>> {
    (0..n)
        .map(|k| {
            let mut terms = Vec::new();
            for (j, fj) in f.iter().enumerate() {
                for t in fj {
                    if let Some(d) = t.derivative(k) {
                        terms.push(d.widened(2 * n).times_variable(n + j, 1.0));
                    }
                }
            }
            combine_like_terms(terms)
        })
        .collect()
}

/// Pontryagin system in the moved-to-left form: state rows
/// `x' - A x + S lambda - f = 0`, costate rows `lambda' + Q x + A' lambda + Psi = 0`
/// with `S = B R^-1 B'`.
pub fn derive_tpbvp(problem: &OCProblem) -> Result<SystemSpec, ModelError> {
    let n = problem.state_dim();
    let a = problem.stacked_a();
    let s = problem.stacked_s();
    let q = problem.stacked_q();
    let mut sigma = DMatrix::zeros(2 * n, 2 * n);
    sigma.view_mut((0, 0), (n, n)).copy_from(&(-&a));
    sigma.view_mut((0, n), (n, n)).copy_from(&s);
    sigma.view_mut((n, 0), (n, n)).copy_from(&q);
    sigma.view_mut((n, n), (n, n)).copy_from(&a.transpose());

    let f = problem.stacked_f();
    let mut nonlinear: Vec<Vec<MonomialTerm>> = f
        .iter()
        .map(|row| {
            let terms = row.iter().map(|t| {
                let w = t.widened(2 * n);
                MonomialTerm::new(-w.coefficient(), w.exponents().to_vec()).expect("degree preserved")
            });
            combine_like_terms(terms.collect())
        })
        .collect();
    nonlinear.extend(costate_interaction(&f, n));

    let x0 = problem.x0();
    let mut bc: Vec<BoundaryTag> = x0.iter().map(|&v| BoundaryTag::InitialValue(v)).collect();
    bc.extend(std::iter::repeat_n(BoundaryTag::DecayAtInfinity, n));
    Ok(SystemSpec::new(sigma, nonlinear, bc)?)
}

/// `u_i = -R_i^-1 B_i' lambda_i` row by row; `costates` is `times x n`.
pub fn optimal_control(problem: &OCProblem, costates: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
    if costates.ncols() != problem.state_dim() {
        return Err(ModelError::Shape(format!(
            "{} costate columns for {} states",
            costates.ncols(),
            problem.state_dim()
        )));
    }
    let mut u = DMatrix::zeros(costates.nrows(), problem.control_dim());
    for (s, (so, co)) in problem.subsystems.iter().zip(problem.offsets()) {
        let gain = -(s.r_inverse() * s.b_mat.transpose());
        let lam = costates.columns(so, s.state_dim());
        let block = lam * gain.transpose();
        u.columns_mut(co, s.control_dim()).copy_from(&block);
    }
    Ok(u)
}

/// Cost value with the quadrature overflow flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostValue {
    pub value: f64,
    pub overflow_warning: bool,
}

/// Running cost `1/2 sum_i (x_i' Q_i x_i + u_i' R_i u_i)` at each row.
pub fn running_cost(problem: &OCProblem, states: &DMatrix<f64>, controls: &DMatrix<f64>) -> Result<DVector<f64>, ModelError> {
    if states.ncols() != problem.state_dim() || controls.ncols() != problem.control_dim() || states.nrows() != controls.nrows() {
        return Err(ModelError::Shape("state/control grids do not match the problem".into()));
    }
    let mut out = DVector::zeros(states.nrows());
    for (s, (so, co)) in problem.subsystems.iter().zip(problem.offsets()) {
        for row in 0..states.nrows() {
            let x = states.view((row, so), (1, s.state_dim())).transpose();
            let u = controls.view((row, co), (1, s.control_dim())).transpose();
            out[row] += 0.5 * ((x.transpose() * &s.q_mat * &x)[(0, 0)] + (u.transpose() * &s.r_mat * &u)[(0, 0)]);
        }
    }
    Ok(out)
}

/// Cost integral by unweighted Laguerre quadrature; grids are sampled at the
/// rule nodes.
pub fn evaluate_cost(
    problem: &OCProblem,
    states: &DMatrix<f64>,
    controls: &DMatrix<f64>,
    rule: &BasisRule,
) -> Result<CostValue, ModelError> {
    let integrand = running_cost(problem, states, controls)?;
    let q = quadrature_unweighted(rule, integrand.as_slice())?;
    Ok(CostValue { value: q.value, overflow_warning: q.overflow_warning })
}

/// Trajectories, controls, cost and convergence data of one solve.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub times: Vec<f64>,
    /// `times x n`.
    pub states: DMatrix<f64>,
    /// `times x n`.
    pub costates: DMatrix<f64>,
    /// `times x m`.
    pub controls: DMatrix<f64>,
    pub cost: f64,
    pub cost_overflow_warning: bool,
    /// Cost of the partial sum through order `m`, for each computed order.
    pub per_order_costs: Vec<f64>,
    pub tail_norms: Vec<f64>,
    pub gamma: Option<f64>,
    pub termination: Termination,
    pub orders_used: usize,
}

impl SolutionBundle {
    /// Largest `|u - (-R^-1 B' lambda)|` over the report grid.
    pub fn control_discrepancy(&self, problem: &OCProblem) -> Result<f64, ModelError> {
        let u = optimal_control(problem, &self.costates)?;
        Ok((&u - &self.controls).iter().fold(0.0, |m, v| m.max(v.abs())))
    }
}

/// Problem data with a solved homotopy run.
#[derive(Debug, Clone)]
pub struct OcpSolution {
    pub bundle: SolutionBundle,
    pub run: ShamRun,
}

fn split_grid(grid: &DMatrix<f64>, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    (grid.columns(0, n).clone_owned(), grid.columns(n, n).clone_owned())
}

/// Runs the solver on the Pontryagin system of `problem` (or on `system`
/// when given, e.g. a displayed TPBVP) and tabulates at `times`.
pub fn solve_problem(
    problem: &OCProblem,
    system: Option<&SystemSpec>,
    config: &SolverConfig,
    times: &[f64],
    rule: Option<Arc<BasisRule>>,
    lipschitz: Option<f64>,
) -> Result<OcpSolution, ModelError> {
    let derived;
    let spec = match system {
        Some(s) => s,
        None => {
            derived = derive_tpbvp(problem)?;
            &derived
        }
    };
    let n = problem.state_dim();
    if spec.dim() != 2 * n {
        return Err(ModelError::Shape(format!("system has {} components, problem needs {}", spec.dim(), 2 * n)));
    }
    let run = match rule {
        Some(r) => run_sham_with_rule(spec, config, r)?,
        None => run_sham(spec, config)?,
    };
    let bundle = tabulate(problem, spec, config, &run, times, lipschitz)?;
    Ok(OcpSolution { bundle, run })
}

fn tabulate(
    problem: &OCProblem,
    spec: &SystemSpec,
    config: &SolverConfig,
    run: &ShamRun,
    times: &[f64],
    lipschitz: Option<f64>,
) -> Result<SolutionBundle, ModelError> {
    let n = problem.state_dim();
    let mut per_order_costs = Vec::with_capacity(run.series.len());
    let mut partial = DMatrix::zeros(run.rule.len(), 2 * n);
    let mut last = CostValue { value: f64::NAN, overflow_warning: false };
    for z in run.series.orders() {
        partial += z;
        let (x, lam) = split_grid(&partial, n);
        let u = optimal_control(problem, &lam)?;
        last = evaluate_cost(problem, &x, &u, &run.rule)?;
        per_order_costs.push(last.value);
    }
    let solution = run.solution();
    let mut states = DMatrix::zeros(times.len(), n);
    let mut costates = DMatrix::zeros(times.len(), n);
    for (i, &t) in times.iter().enumerate() {
        for c in 0..n {
            states[(i, c)] = run.evaluate_grid(&solution, c, t);
            costates[(i, c)] = run.evaluate_grid(&solution, n + c, t);
        }
    }
    let controls = optimal_control(problem, &costates)?;
    Ok(SolutionBundle {
        times: times.to_vec(),
        states,
        costates,
        controls,
        cost: last.value,
        cost_overflow_warning: last.overflow_warning,
        per_order_costs,
        tail_norms: run.series.tail_norms().to_vec(),
        gamma: lipschitz.and_then(|l| gamma_diagnostic(spec, config, l)),
        termination: run.termination,
        orders_used: run.orders_used(),
    })
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn mono(coef: f64, dim: usize, vars: &[usize]) -> MonomialTerm {
    let factors: Vec<(usize, u32)> = vars.iter().map(|&v| (v, 1)).collect();
    MonomialTerm::from_factors(coef, dim, &factors).expect("builtin monomial")
}

/// Two scalar subsystems coupled through `f_1 = -x1^3 + x2^2`,
/// `f_2 = x1 x2 + x2^3`, with `x(0) = (0, 0.8)`.
pub fn builtin_problem_31() -> OCProblem {
    let n = 2;
    let s1 = SubsystemSpec {
        a_mat: scalar(1.0),
        b_mat: scalar(1.0),
        q_mat: scalar(1.0),
        r_mat: scalar(1.0),
        f: vec![vec![mono(-1.0, n, &[0, 0, 0]), mono(1.0, n, &[1, 1])]],
        x0: DVector::from_element(1, 0.0),
    };
    let s2 = SubsystemSpec {
        a_mat: scalar(-1.0),
        b_mat: scalar(1.0),
        q_mat: scalar(1.0),
        r_mat: scalar(1.0),
        f: vec![vec![mono(1.0, n, &[0, 1]), mono(1.0, n, &[1, 1, 1])]],
        x0: DVector::from_element(1, 0.8),
    };
    OCProblem::new(vec![s1, s2]).expect("builtin problem is valid")
}

/// Rigid-body attitude problem with inertia `diag(10, 6.3, 8.5)`: states
/// `(rho, omega)`, `rho' = omega/2 + (rho rho') omega / 2`, Euler coupling in
/// the `omega` rows, `Q = I`, `R = I`, `B = [0; J^-1]`.
pub fn builtin_problem_32() -> OCProblem {
    let n = 6;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..3 {
        a[(i, 3 + i)] = 0.5;
    }
    let mut b = DMatrix::zeros(n, 3);
    for (i, j) in [10.0, 6.3, 8.5].iter().enumerate() {
        b[(3 + i, i)] = 1.0 / j;
    }
    let h = 0.5;
    let f = vec![
        vec![mono(h, n, &[3, 0, 0]), mono(h, n, &[4, 0, 1]), mono(h, n, &[5, 0, 2])],
        vec![mono(h, n, &[4, 1, 1]), mono(h, n, &[3, 0, 1]), mono(h, n, &[5, 1, 2])],
        vec![mono(h, n, &[5, 2, 2]), mono(h, n, &[3, 0, 2]), mono(h, n, &[4, 1, 2])],
        vec![mono(-11.0 / 50.0, n, &[4, 5])],
        vec![mono(-5.0 / 21.0, n, &[3, 5])],
        vec![mono(37.0 / 85.0, n, &[3, 4])],
    ];
    let s = SubsystemSpec {
        a_mat: a,
        b_mat: b,
        q_mat: DMatrix::identity(n, n),
        r_mat: DMatrix::identity(3, 3),
        f,
        x0: DVector::from_vec(vec![0.3735, 0.4115, 0.2521, 0.0, 0.0, 0.0]),
    };
    OCProblem::new(vec![s]).expect("builtin problem is valid")
}

/// The 12-equation optimality system of the attitude problem, entered term
/// by term in right-hand-side form `z' = M z + p(z)`.
pub fn builtin_tpbvp_32() -> SystemSpec {
    let n = 12;
    let h = 0.5;
    let linear: [&[(f64, usize)]; 12] = [
        &[(h, 3)],
        &[(h, 4)],
        &[(h, 5)],
        &[(-1.0 / 100.0, 9)],
        &[(-100.0 / 3969.0, 10)],
        &[(-4.0 / 289.0, 11)],
        &[(-1.0, 0)],
        &[(-1.0, 1)],
        &[(-1.0, 2)],
        &[(-h, 6), (-1.0, 3)],
        &[(-h, 7), (-1.0, 4)],
        &[(-h, 8), (-1.0, 5)],
    ];
    let nonlinear: [&[(f64, &[usize])]; 12] = [
        &[(h, &[3, 0, 0]), (h, &[4, 0, 1]), (h, &[5, 0, 2])],
        &[(h, &[4, 1, 1]), (h, &[3, 0, 1]), (h, &[5, 1, 2])],
        &[(h, &[5, 2, 2]), (h, &[3, 0, 2]), (h, &[4, 1, 2])],
        &[(-11.0 / 50.0, &[4, 5])],
        &[(-5.0 / 21.0, &[3, 5])],
        &[(37.0 / 85.0, &[3, 4])],
        &[(-1.0, &[6, 3, 0]), (-h, &[6, 4, 1]), (-h, &[6, 5, 2]), (-h, &[7, 3, 1]), (-h, &[8, 3, 2])],
        &[(-1.0, &[7, 4, 1]), (-h, &[6, 4, 0]), (-h, &[7, 3, 0]), (-h, &[7, 5, 2]), (-h, &[8, 4, 2])],
        &[(-1.0, &[8, 5, 2]), (-h, &[6, 5, 0]), (-h, &[7, 5, 1]), (-h, &[8, 3, 0]), (-h, &[8, 4, 1])],
        &[(-37.0 / 85.0, &[11, 4]), (5.0 / 21.0, &[10, 5]), (-h, &[6, 0, 0]), (-h, &[7, 0, 1]), (-h, &[8, 0, 2])],
        &[(11.0 / 50.0, &[9, 5]), (-37.0 / 85.0, &[11, 3]), (-h, &[7, 1, 1]), (-h, &[6, 0, 1]), (-h, &[8, 1, 2])],
        &[(-11.0 / 50.0, &[9, 4]), (5.0 / 21.0, &[10, 3]), (-h, &[8, 2, 2]), (-h, &[6, 0, 2]), (-h, &[7, 1, 2])],
    ];
    let mut sigma = DMatrix::zeros(n, n);
    for (r, row) in linear.iter().enumerate() {
        for &(c, v) in row.iter() {
            sigma[(r, v)] = -c;
        }
    }
    let g: Vec<Vec<MonomialTerm>> = nonlinear
        .iter()
        .map(|row| row.iter().map(|&(c, vars)| mono(-c, n, vars)).collect())
        .collect();
    let x0 = [0.3735, 0.4115, 0.2521, 0.0, 0.0, 0.0];
    let mut bc: Vec<BoundaryTag> = x0.iter().map(|&v| BoundaryTag::InitialValue(v)).collect();
    bc.extend(std::iter::repeat_n(BoundaryTag::DecayAtInfinity, 6));
    SystemSpec::new(sigma, g, bc).expect("builtin system is valid")
}

/// Builtin problems addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Tp31,
    Tp32,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tp31" => Some(Self::Tp31),
            "tp32" => Some(Self::Tp32),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Tp31 => "tp31",
            Self::Tp32 => "tp32",
        }
    }

    pub fn problem(&self) -> OCProblem {
        match self {
            Self::Tp31 => builtin_problem_31(),
            Self::Tp32 => builtin_problem_32(),
        }
    }

    /// System handed to the solver: derived for `tp31`, entered directly
    /// for `tp32`.
    pub fn system(&self) -> SystemSpec {
        match self {
            Self::Tp31 => derive_tpbvp(&builtin_problem_31()).expect("builtin derives"),
            Self::Tp32 => builtin_tpbvp_32(),
        }
    }

    /// Times at which the tabulated reference values are printed.
    pub fn report_times(&self) -> Vec<f64> {
        match self {
            Self::Tp31 => TP31_TIMES.to_vec(),
            Self::Tp32 => TP32_TIMES.to_vec(),
        }
    }
}

/// Report times of the tp31 reference values.
pub const TP31_TIMES: [f64; 6] = [0.113, 0.494, 1.152, 2.107, 3.389, 5.047];

/// Report times of the tp32 reference values.
pub const TP32_TIMES: [f64; 6] = [0.409, 1.950, 4.663, 8.597, 20.488, 38.855];
