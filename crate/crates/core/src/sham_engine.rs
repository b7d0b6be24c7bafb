//! Spectral homotopy iteration for first-order systems
//! `z' + sigma z + g(z) = phi` on a Laguerre-Radau grid.
//!
//! Each order solves one linear system against the same factorized block
//! operator. Grid data is held as `(N+1) x n` matrices, one column per
//! component, so the column-major storage is exactly the stacked vector the
//! operator acts on (component-major, node-minor).

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, Dyn, LU};
use thiserror::Error;

use crate::laguerre_basis::{
    build_rule, condition_1norm, interpolate, interpolate_scaled, BasisConfig, BasisError,
    BasisRule, NodeFamily,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid system: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("collocation operator is singular (1-norm condition estimate {condition:e})")]
    SingularOperator { condition: f64 },
    #[error("order {requested} requested but the series holds orders 0..{available}")]
    OrderOutOfRange { requested: usize, available: usize },
    #[error("series diverged at order {order} (max magnitude {max_magnitude:e})")]
    Diverged { order: usize, max_magnitude: f64 },
}

/// `coefficient * prod_c z_c^exponents[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialTerm {
    coefficient: f64,
    exponents: Vec<u32>,
}

impl MonomialTerm {
    /// Fails when the total degree is zero; constants belong in the forcing.
    pub fn new(coefficient: f64, exponents: Vec<u32>) -> Result<Self, SolverError> {
        if !coefficient.is_finite() {
            return Err(SolverError::InvalidSpec(format!("non-finite coefficient {coefficient}")));
        }
        if exponents.iter().all(|&e| e == 0) {
            return Err(SolverError::InvalidSpec("monomial of total degree 0".into()));
        }
        Ok(Self { coefficient, exponents })
    }

    /// Monomial in `dim` variables with the listed `(variable, power)` factors.
    pub fn from_factors(coefficient: f64, dim: usize, factors: &[(usize, u32)]) -> Result<Self, SolverError> {
        let mut exponents = vec![0u32; dim];
        for &(c, p) in factors {
            if c >= dim {
                return Err(SolverError::InvalidSpec(format!("variable {c} out of range for dimension {dim}")));
            }
            exponents[c] += p;
        }
        Self::new(coefficient, exponents)
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(z)
            .filter(|(e, _)| **e > 0)
            .fold(self.coefficient, |acc, (&e, &v)| acc * v.powi(e as i32))
    }

    /// `d/dz_k` of the term. The result may have total degree zero.
    pub fn derivative(&self, k: usize) -> Option<MonomialTerm> {
        let e = *self.exponents.get(k)?;
        if e == 0 {
            return None;
        }
        let mut exponents = self.exponents.clone();
        exponents[k] -= 1;
        Some(MonomialTerm { coefficient: self.coefficient * e as f64, exponents })
    }

    /// The same term over a larger variable vector; new slots get power 0.
    pub fn widened(&self, dim: usize) -> MonomialTerm {
        let mut exponents = self.exponents.clone();
        exponents.resize(dim.max(exponents.len()), 0);
        MonomialTerm { coefficient: self.coefficient, exponents }
    }

    /// Multiplies by `z_k` (one more power of variable `k`).
    pub fn times_variable(&self, k: usize, scale: f64) -> MonomialTerm {
        let mut exponents = self.exponents.clone();
        exponents[k] += 1;
        MonomialTerm { coefficient: self.coefficient * scale, exponents }
    }

    /// Component index of each linear factor, repeated by multiplicity.
    fn factor_list(&self) -> Vec<usize> {
        self.exponents
            .iter()
            .enumerate()
            .flat_map(|(c, &e)| std::iter::repeat_n(c, e as usize))
            .collect()
    }
}

/// Scalar function of time sampled at the grid nodes.
#[derive(Clone)]
pub struct GridFunction(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl GridFunction {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("GridFunction(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryTag {
    InitialValue(f64),
    DecayAtInfinity,
}

/// `z_r' + sum_k sigma[r][k] z_k + g_r(z) = phi_r` with one boundary tag per
/// component.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    sigma: DMatrix<f64>,
    nonlinear: Vec<Vec<MonomialTerm>>,
    forcing: Vec<Option<GridFunction>>,
    bc: Vec<BoundaryTag>,
}

impl SystemSpec {
    pub fn new(
        sigma: DMatrix<f64>,
        nonlinear: Vec<Vec<MonomialTerm>>,
        bc: Vec<BoundaryTag>,
    ) -> Result<Self, SolverError> {
        let n = sigma.nrows();
        let spec = Self { sigma, nonlinear, forcing: vec![None; n], bc };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_forcing(mut self, component: usize, phi: GridFunction) -> Self {
        self.forcing[component] = Some(phi);
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.sigma.nrows();
        let bad = |m: String| Err(SolverError::InvalidSpec(m));
        if n == 0 || self.sigma.ncols() != n {
            return bad(format!("sigma must be square and non-empty, got {}x{}", n, self.sigma.ncols()));
        }
        if self.sigma.iter().any(|v| !v.is_finite()) {
            return bad("sigma has non-finite entries".into());
        }
        if self.nonlinear.len() != n {
            return bad(format!("{} nonlinear lists for {} equations", self.nonlinear.len(), n));
        }
        if self.bc.len() != n {
            return bad(format!("{} boundary tags for {} components", self.bc.len(), n));
        }
        if self.forcing.len() != n {
            return bad(format!("{} forcing entries for {} equations", self.forcing.len(), n));
        }
        for (r, terms) in self.nonlinear.iter().enumerate() {
            for term in terms {
                if term.exponents.len() != n {
                    return bad(format!("equation {r}: monomial over {} variables, expected {n}", term.exponents.len()));
                }
                if term.degree() == 0 {
                    return bad(format!("equation {r}: monomial of total degree 0"));
                }
            }
        }
        if !self.bc.iter().any(|b| matches!(b, BoundaryTag::InitialValue(_))) {
            return bad("no InitialValue component; the problem is unanchored".into());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn nonlinear(&self) -> &[Vec<MonomialTerm>] {
        &self.nonlinear
    }

    pub fn bc(&self) -> &[BoundaryTag] {
        &self.bc
    }

    pub fn forcing(&self, r: usize) -> Option<&GridFunction> {
        self.forcing[r].as_ref()
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinear.iter().all(|t| t.is_empty())
    }

    /// `-sigma`, the matrix of the linear part written as `z' = M z + ...`.
    pub fn linear_rhs(&self) -> DMatrix<f64> {
        -&self.sigma
    }

    /// `g_r(z)` at one point.
    pub fn eval_nonlinear(&self, r: usize, z: &[f64]) -> f64 {
        self.nonlinear[r].iter().map(|t| t.eval(z)).sum()
    }

    /// Right-hand side `z' = -sigma z - g(z) + phi(t)` at one point.
    pub fn rhs(&self, t: f64, z: &[f64]) -> DVector<f64> {
        let zv = DVector::from_column_slice(z);
        let mut out = -(&self.sigma * zv);
        for r in 0..self.dim() {
            out[r] -= self.eval_nonlinear(r, z);
            if let Some(phi) = &self.forcing[r] {
                out[r] += phi.eval(t);
            }
        }
        out
    }

    /// Jacobian of [`SystemSpec::rhs`] with respect to `z`.
    pub fn rhs_jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut jac = -&self.sigma;
        for r in 0..n {
            for term in &self.nonlinear[r] {
                for k in 0..n {
                    if let Some(d) = term.derivative(k) {
                        jac[(r, k)] -= d.eval(z);
                    }
                }
            }
        }
        jac
    }

    /// Copy with every nonlinear coefficient multiplied by `s`.
    pub fn scaled_nonlinearity(&self, s: f64) -> SystemSpec {
        let mut out = self.clone();
        for terms in &mut out.nonlinear {
            for t in terms {
                t.coefficient *= s;
            }
        }
        out
    }
}

/// Which function space the grid values represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Collocation {
    /// Samples of `exp(-beta t / 2) p(t)`, `deg p <= N`. Bounded entries and
    /// stable for the nonlinear iteration.
    #[default]
    WeightAbsorbed,
    /// Samples of a degree-`N` polynomial, differentiated by the plain
    /// Laguerre-Radau matrix. Its operator is too ill-conditioned beyond
    /// small `N` for pointwise nonlinear terms, which diverge.
    Polynomial,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub hbar: f64,
    /// Auxiliary function `H(t)`; `None` means identically 1.
    pub aux_h: Option<GridFunction>,
    pub max_order: usize,
    pub tail_tol: f64,
    pub basis: BasisConfig,
    pub collocation: Collocation,
}

impl SolverConfig {
    pub fn new(hbar: f64, max_order: usize, tail_tol: f64, basis: BasisConfig) -> Result<Self, SolverError> {
        let config = Self { hbar, aux_h: None, max_order, tail_tol, basis, collocation: Collocation::default() };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !self.hbar.is_finite() || self.hbar == 0.0 {
            return Err(SolverError::InvalidConfig(format!("hbar must be finite and non-zero, got {}", self.hbar)));
        }
        if !(self.tail_tol.is_finite() && self.tail_tol > 0.0) {
            return Err(SolverError::InvalidConfig(format!("tail_tol must be positive, got {}", self.tail_tol)));
        }
        if self.max_order < 1 {
            return Err(SolverError::InvalidConfig("max_order must be at least 1".into()));
        }
        if self.basis.node_family != NodeFamily::Glr {
            return Err(SolverError::InvalidConfig("the solver needs a Radau rule (node at t = 0)".into()));
        }
        self.basis.validate()?;
        Ok(())
    }
}

/// Grid values of a function in the chosen [`Collocation`] space.
pub fn interpolate_component(rule: &BasisRule, collocation: Collocation, samples: &[f64], t: f64) -> f64 {
    match collocation {
        Collocation::WeightAbsorbed => interpolate_scaled(rule, samples, t),
        Collocation::Polynomial => interpolate(rule, samples, t),
    }
}

/// Assembled block operator with its LU factorization.
#[derive(Debug, Clone)]
pub struct Operator {
    matrix: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    dim: usize,
    nodes: usize,
    boundary_rows: Vec<usize>,
    collocation: Collocation,
    condition: OnceLock<f64>,
}

impl Operator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    pub fn collocation(&self) -> Collocation {
        self.collocation
    }

    /// Stacked row indices replaced by boundary conditions, one per component.
    pub fn boundary_rows(&self) -> &[usize] {
        &self.boundary_rows
    }

    /// 1-norm condition number, computed on first use.
    pub fn condition(&self) -> f64 {
        *self.condition.get_or_init(|| condition_1norm(&self.matrix))
    }

    /// Solves `A x = b` for a stacked right-hand side.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(rhs).expect("factorization checked invertible at assembly")
    }

    fn solve_grid(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let v = self.solve(&DVector::from_column_slice(rhs.as_slice()));
        DMatrix::from_column_slice(self.nodes, self.dim, v.as_slice())
    }
}

/// Builds `D + sigma_pp I` diagonal blocks and `sigma_pq I` off-diagonal
/// blocks, replaces boundary rows by unit rows (initial-value components at
/// `t_0`, decaying components at `t_N`) and factorizes once.
pub fn assemble_operator(
    spec: &SystemSpec,
    rule: &BasisRule,
    collocation: Collocation,
) -> Result<Operator, SolverError> {
    if rule.config().node_family != NodeFamily::Glr {
        return Err(SolverError::InvalidConfig("the solver needs a Radau rule (node at t = 0)".into()));
    }
    let n = spec.dim();
    let k = rule.len();
    let d = match collocation {
        Collocation::WeightAbsorbed => rule.scaled_diff(),
        Collocation::Polynomial => rule.diff(),
    };
    let mut a = DMatrix::<f64>::zeros(n * k, n * k);
    for p in 0..n {
        for q in 0..n {
            let s = spec.sigma()[(p, q)];
            if p == q {
                a.view_mut((p * k, q * k), (k, k)).copy_from(d);
            }
            if s != 0.0 {
                for j in 0..k {
                    a[(p * k + j, q * k + j)] += s;
                }
            }
        }
    }
    let boundary_rows: Vec<usize> = spec
        .bc()
        .iter()
        .enumerate()
        .map(|(p, tag)| match tag {
            BoundaryTag::InitialValue(_) => p * k,
            BoundaryTag::DecayAtInfinity => p * k + k - 1,
        })
        .collect();
    for &row in &boundary_rows {
        a.row_mut(row).fill(0.0);
        a[(row, row)] = 1.0;
    }
    let lu = a.clone().lu();
    if !lu.is_invertible() {
        return Err(SolverError::SingularOperator { condition: condition_1norm(&a) });
    }
    Ok(Operator {
        matrix: a,
        lu,
        dim: n,
        nodes: k,
        boundary_rows,
        collocation,
        condition: OnceLock::new(),
    })
}

fn forcing_grid(spec: &SystemSpec, rule: &BasisRule) -> DMatrix<f64> {
    let k = rule.len();
    let mut phi = DMatrix::<f64>::zeros(k, spec.dim());
    for r in 0..spec.dim() {
        if let Some(f) = spec.forcing(r) {
            for (j, &t) in rule.nodes().iter().enumerate() {
                phi[(j, r)] = f.eval(t);
            }
        }
    }
    phi
}

fn set_boundary(grid: &mut DMatrix<f64>, op: &Operator, value: impl Fn(usize) -> f64) {
    let k = op.nodes;
    for (p, &row) in op.boundary_rows.iter().enumerate() {
        grid[(row - p * k, p)] = value(p);
    }
}

/// Solves the linear part with the forcing at interior rows and the boundary
/// data at replaced rows.
pub fn initial_guess(spec: &SystemSpec, rule: &BasisRule, op: &Operator) -> Result<DMatrix<f64>, SolverError> {
    check_dims(spec, rule, op)?;
    let mut rhs = forcing_grid(spec, rule);
    let data = |p: usize| match spec.bc()[p] {
        BoundaryTag::InitialValue(v) => v,
        BoundaryTag::DecayAtInfinity => 0.0,
    };
    set_boundary(&mut rhs, op, data);
    let mut z0 = op.solve_grid(&rhs);
    set_boundary(&mut z0, op, data);
    Ok(z0)
}

fn check_dims(spec: &SystemSpec, rule: &BasisRule, op: &Operator) -> Result<(), SolverError> {
    if op.dim != spec.dim() || op.nodes != rule.len() {
        return Err(SolverError::InvalidSpec(format!(
            "operator is {}x{} blocks, system needs {} components on {} nodes",
            op.dim,
            op.nodes,
            spec.dim(),
            rule.len()
        )));
    }
    Ok(())
}

/// Homotopy series: `orders[m]` is the `(N+1) x n` grid of `Z_m`.
#[derive(Debug, Clone, Default)]
pub struct HomotopySeries {
    orders: Vec<DMatrix<f64>>,
    tail_norms: Vec<f64>,
}

impl HomotopySeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_orders(orders: Vec<DMatrix<f64>>) -> Self {
        let tail_norms = vec![f64::NAN; orders.len()];
        Self { orders, tail_norms }
    }

    pub fn push(&mut self, z: DMatrix<f64>, tail_norm: f64) {
        self.orders.push(z);
        self.tail_norms.push(tail_norm);
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Highest order held.
    pub fn highest_order(&self) -> Option<usize> {
        self.orders.len().checked_sub(1)
    }

    pub fn order(&self, m: usize) -> &DMatrix<f64> {
        &self.orders[m]
    }

    pub fn orders(&self) -> &[DMatrix<f64>] {
        &self.orders
    }

    /// `Z_m` in the `n x (N+1)` orientation (component rows).
    pub fn order_by_component(&self, m: usize) -> DMatrix<f64> {
        self.orders[m].transpose()
    }

    pub fn tail_norms(&self) -> &[f64] {
        &self.tail_norms
    }

    /// `sum_{m=0}^{upto} Z_m`.
    pub fn partial_sum(&self, upto: usize) -> DMatrix<f64> {
        let mut acc = self.orders[0].clone();
        for z in &self.orders[1..=upto.min(self.orders.len() - 1)] {
            acc += z;
        }
        acc
    }
}

/// Coefficient of `q^(m-1)` in `prod_c (sum_j Z_{c,j} q^j)^{e_c}`, times the
/// term coefficient, node-wise. Stateless reference version; the solver uses
/// an incremental cache with the same result.
pub fn cauchy_order_term(series: &HomotopySeries, term: &MonomialTerm, m: usize) -> Result<DVector<f64>, SolverError> {
    if m == 0 || m > series.len() {
        return Err(SolverError::OrderOutOfRange { requested: m, available: series.len() });
    }
    let top = m - 1;
    let factors = term.factor_list();
    let column = |c: usize, j: usize| series.orders[j].column(c).clone_owned();
    let mut acc: Vec<DVector<f64>> = (0..=top).map(|j| column(factors[0], j)).collect();
    for &c in &factors[1..] {
        let f: Vec<DVector<f64>> = (0..=top).map(|j| column(c, j)).collect();
        acc = (0..=top)
            .map(|k| {
                let mut s = acc[0].component_mul(&f[k]);
                for i in 1..=k {
                    s += acc[i].component_mul(&f[k - i]);
                }
                s
            })
            .collect();
    }
    Ok(&acc[top] * term.coefficient)
}

/// Running prefix products of one monomial's factors, extended by one
/// coefficient per order so each order costs `O(m)` per factor.
#[derive(Debug, Clone)]
struct MonomialCache {
    factors: Vec<usize>,
    // prefixes[l][k]: coefficient k of the product of factors 0..=l+1.
    prefixes: Vec<Vec<DVector<f64>>>,
}

impl MonomialCache {
    fn new(term: &MonomialTerm) -> Self {
        let factors = term.factor_list();
        let prefixes = vec![Vec::new(); factors.len().saturating_sub(1)];
        Self { factors, prefixes }
    }

    /// Coefficient `k` of the full product, given orders `0..=k` and all
    /// lower coefficients already pushed.
    fn advance(&mut self, series: &HomotopySeries, k: usize) -> DVector<f64> {
        let col = |c: usize, j: usize| series.orders[j].column(c);
        let mut latest = col(self.factors[0], k).clone_owned();
        for l in 0..self.prefixes.len() {
            let c = self.factors[l + 1];
            let mut s = DVector::zeros(latest.len());
            for i in 0..=k {
                let lower = if l == 0 { col(self.factors[0], i).clone_owned() } else { self.prefixes[l - 1][i].clone() };
                s += lower.component_mul(&col(c, k - i));
            }
            self.prefixes[l].push(s.clone());
            latest = s;
        }
        latest
    }
}

/// Per-equation caches for all monomials of a system.
#[derive(Debug, Clone)]
pub struct CauchyWorkspace {
    caches: Vec<Vec<(f64, MonomialCache)>>,
    next: usize,
}

impl CauchyWorkspace {
    pub fn new(spec: &SystemSpec) -> Self {
        let caches = spec
            .nonlinear()
            .iter()
            .map(|terms| terms.iter().map(|t| (t.coefficient(), MonomialCache::new(t))).collect())
            .collect();
        Self { caches, next: 0 }
    }

    /// `sum_terms cauchy_order_term(..., m)` for every equation as a grid.
    /// Must be called for `m = 1, 2, ...` in sequence.
    pub fn nonlinear_order(&mut self, series: &HomotopySeries, m: usize) -> Result<DMatrix<f64>, SolverError> {
        if m != self.next + 1 || m > series.len() {
            return Err(SolverError::OrderOutOfRange { requested: m, available: series.len() });
        }
        let k = m - 1;
        let nodes = series.orders[0].nrows();
        let mut out = DMatrix::<f64>::zeros(nodes, self.caches.len());
        for (r, terms) in self.caches.iter_mut().enumerate() {
            for (coef, cache) in terms.iter_mut() {
                let v = cache.advance(series, k);
                out.column_mut(r).axpy(*coef, &v, 1.0);
            }
        }
        self.next = m;
        Ok(out)
    }
}

/// Weighted norm of a grid: the discrete Laguerre norm of the polynomial
/// representative, summed over components.
pub fn grid_norm(rule: &BasisRule, collocation: Collocation, z: &DMatrix<f64>) -> f64 {
    let beta = rule.beta();
    let w: Vec<f64> = rule
        .nodes()
        .iter()
        .zip(rule.log_weights())
        .map(|(t, lw)| match collocation {
            Collocation::WeightAbsorbed => (lw + beta * t).exp(),
            Collocation::Polynomial => lw.exp(),
        })
        .collect();
    let mut s = 0.0;
    for c in 0..z.ncols() {
        for (j, wj) in w.iter().enumerate() {
            let v = z[(j, c)];
            if v != 0.0 {
                s += wj * v * v;
            }
        }
    }
    s.sqrt()
}

fn max_abs(z: &DMatrix<f64>) -> f64 {
    z.iter().fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

/// State carried between orders of one run.
#[derive(Debug, Clone)]
pub struct ShamState {
    pub series: HomotopySeries,
    workspace: CauchyWorkspace,
    phi: DMatrix<f64>,
    aux: Option<DVector<f64>>,
}

impl ShamState {
    pub fn new(spec: &SystemSpec, rule: &BasisRule, config: &SolverConfig, z0: DMatrix<f64>) -> Self {
        let norm = grid_norm(rule, config.collocation, &z0);
        let mut series = HomotopySeries::new();
        series.push(z0, norm);
        let aux = config
            .aux_h
            .as_ref()
            .map(|h| DVector::from_iterator(rule.len(), rule.nodes().iter().map(|&t| h.eval(t))));
        Self { series, workspace: CauchyWorkspace::new(spec), phi: forcing_grid(spec, rule), aux }
    }
}

/// Computes `Z_m` from orders `0..m-1`.
///
/// With `H = 1` this is `Z_m = (chi_m + hbar) Z_{m-1} + hbar A^-1 Q_{m-1}`,
/// where the boundary rows of `Q` carry `-(chi_m + hbar)/hbar Z_{m-1}` so
/// that `Z_m` meets homogeneous boundary conditions. A general `H` uses
/// `Z_m = chi_m Z_{m-1} + hbar A^-1 [H (A Z_{m-1} + Q)]`.
pub fn deformation_step(
    spec: &SystemSpec,
    rule: &BasisRule,
    op: &Operator,
    state: &mut ShamState,
    config: &SolverConfig,
    m: usize,
) -> Result<DMatrix<f64>, SolverError> {
    check_dims(spec, rule, op)?;
    if m == 0 || m != state.series.len() {
        return Err(SolverError::OrderOutOfRange { requested: m, available: state.series.len() });
    }
    let hbar = config.hbar;
    let chi = if m == 1 { 0.0 } else { 1.0 };
    let mut q = state.workspace.nonlinear_order(&state.series, m)?;
    if m == 1 {
        q -= &state.phi;
    }
    let peak = max_abs(&q);
    if !peak.is_finite() {
        return Err(SolverError::Diverged { order: m, max_magnitude: peak });
    }
    let prev = state.series.order(m - 1);
    let mut z = match &state.aux {
        None => {
            set_boundary(&mut q, op, |p| {
                let row = op.boundary_rows[p] - p * op.nodes;
                -(chi + hbar) / hbar * prev[(row, p)]
            });
            let mut z = op.solve_grid(&q);
            z *= hbar;
            z += prev * (chi + hbar);
            z
        }
        Some(h) => {
            let az = &op.matrix * DVector::from_column_slice(prev.as_slice());
            let mut r = DMatrix::from_column_slice(op.nodes, op.dim, az.as_slice()) + &q;
            for c in 0..op.dim {
                r.column_mut(c).component_mul_assign(h);
            }
            set_boundary(&mut r, op, |_| 0.0);
            let mut z = op.solve_grid(&r);
            z *= hbar;
            z += prev * chi;
            z
        }
    };
    set_boundary(&mut z, op, |_| 0.0);
    let peak = max_abs(&z);
    if !peak.is_finite() {
        return Err(SolverError::Diverged { order: m, max_magnitude: peak });
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Converged { order: usize },
    MaxOrder,
    Diverged { order: usize, max_magnitude: f64 },
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Converged { order } => write!(f, "Converged at order {order}"),
            Termination::MaxOrder => f.write_str("MaxOrder"),
            Termination::Diverged { order, max_magnitude } => {
                write!(f, "Diverged at order {order} (max magnitude {max_magnitude:e})")
            }
        }
    }
}

/// Outcome of [`run_sham`].
#[derive(Debug, Clone)]
pub struct ShamRun {
    pub rule: Arc<BasisRule>,
    pub collocation: Collocation,
    pub series: HomotopySeries,
    pub termination: Termination,
    pub operator_condition: Option<f64>,
}

impl ShamRun {
    /// Partial sum of all computed orders, as an `(N+1) x n` grid.
    pub fn solution(&self) -> DMatrix<f64> {
        self.series.partial_sum(self.series.highest_order().unwrap_or(0))
    }

    /// Highest order included in [`ShamRun::solution`].
    pub fn orders_used(&self) -> usize {
        self.series.highest_order().unwrap_or(0)
    }

    pub fn final_tail_norm(&self) -> f64 {
        *self.series.tail_norms().last().unwrap_or(&f64::NAN)
    }

    /// Component `c` of a grid at time `t`.
    pub fn evaluate_grid(&self, grid: &DMatrix<f64>, c: usize, t: f64) -> f64 {
        let col = grid.column(c).clone_owned();
        interpolate_component(&self.rule, self.collocation, col.as_slice(), t)
    }

    /// Final partial sum, component `c`, at time `t`.
    pub fn evaluate(&self, c: usize, t: f64) -> f64 {
        self.evaluate_grid(&self.solution(), c, t)
    }
}

/// Builds the rule and runs the iteration.
pub fn run_sham(spec: &SystemSpec, config: &SolverConfig) -> Result<ShamRun, SolverError> {
    config.validate()?;
    let rule = Arc::new(build_rule(config.basis)?);
    run_sham_with_rule(spec, config, rule)
}

fn diverging(norms: &[f64]) -> bool {
    let n = norms.len();
    if n < 4 {
        return false;
    }
    let w = &norms[n - 4..];
    let floor = norms.iter().copied().fold(f64::INFINITY, f64::min);
    w.windows(2).all(|p| p[1] > p[0]) && w[3] > 1e6 * floor
}

/// [`run_sham`] on a prebuilt rule, which may be shared between runs.
pub fn run_sham_with_rule(spec: &SystemSpec, config: &SolverConfig, rule: Arc<BasisRule>) -> Result<ShamRun, SolverError> {
    config.validate()?;
    spec.validate()?;
    if rule.config() != &config.basis {
        return Err(SolverError::InvalidConfig("rule does not match the configured basis".into()));
    }
    let op = assemble_operator(spec, &rule, config.collocation)?;
    let z0 = initial_guess(spec, &rule, &op)?;
    if !max_abs(&z0).is_finite() {
        return Ok(ShamRun {
            rule,
            collocation: config.collocation,
            series: HomotopySeries::from_orders(vec![z0]),
            termination: Termination::Diverged { order: 0, max_magnitude: f64::INFINITY },
            operator_condition: None,
        });
    }
    let mut state = ShamState::new(spec, &rule, config, z0);
    let mut termination = Termination::MaxOrder;
    for m in 1..=config.max_order {
        match deformation_step(spec, &rule, &op, &mut state, config, m) {
            Ok(z) => {
                let norm = grid_norm(&rule, config.collocation, &z);
                state.series.push(z, norm);
                if norm < config.tail_tol {
                    termination = Termination::Converged { order: m };
                    break;
                }
                if diverging(state.series.tail_norms()) {
                    let max_magnitude = max_abs(state.series.order(m));
                    termination = Termination::Diverged { order: m, max_magnitude };
                    break;
                }
            }
            Err(SolverError::Diverged { order, max_magnitude }) => {
                termination = Termination::Diverged { order, max_magnitude };
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(ShamRun { rule, collocation: config.collocation, series: state.series, termination, operator_condition: None })
}

/// Interior-row collocation residual `|D z + sigma z + g(z) - phi|` of a
/// grid, per stacked row, alongside the 1-norm of the matching operator row.
pub fn collocation_residual(spec: &SystemSpec, rule: &BasisRule, op: &Operator, z: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let k = rule.len();
    let n = spec.dim();
    let lin = &op.matrix * DVector::from_column_slice(z.as_slice());
    let phi = forcing_grid(spec, rule);
    let mut out = Vec::new();
    let mut point = vec![0.0; n];
    for p in 0..n {
        for j in 0..k {
            let row = p * k + j;
            if op.boundary_rows.contains(&row) {
                continue;
            }
            for c in 0..n {
                point[c] = z[(j, c)];
            }
            let r = lin[row] + spec.eval_nonlinear(p, &point) - phi[(j, p)];
            let scale: f64 = op.matrix.row(row).iter().map(|v| v.abs()).sum();
            out.push((r.abs(), scale));
        }
    }
    out
}

/// Inputs of the contraction ratio of the convergence theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaInputs {
    pub n_order: usize,
    pub hbar: f64,
    pub h_max: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta: f64,
    pub lipschitz: f64,
}

/// `(N |1 + hbar H| + alpha1 + |hbar| H L_f) / (beta/2 + alpha0)`, or `None`
/// when the denominator is not positive.
pub fn gamma_ratio(g: &GammaInputs) -> Option<f64> {
    let den = g.beta / 2.0 + g.alpha0;
    if !(den > 0.0) {
        return None;
    }
    let num = g.n_order as f64 * (1.0 + g.hbar * g.h_max).abs() + g.alpha1 + g.hbar.abs() * g.h_max * g.lipschitz;
    Some(num / den)
}

/// Diagnostic ratio with `alpha0 = min sigma_rr`, `alpha1 = max |sigma_rr|`
/// and `H` maximized over the grid nodes.
pub fn gamma_diagnostic(spec: &SystemSpec, config: &SolverConfig, lipschitz_estimate: f64) -> Option<f64> {
    let diag = spec.sigma().diagonal();
    let alpha0 = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha1 = diag.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let h_max = match &config.aux_h {
        None => 1.0,
        Some(h) => {
            let rule = build_rule(config.basis).ok()?;
            rule.nodes().iter().map(|&t| h.eval(t).abs()).fold(0.0, f64::max)
        }
    };
    gamma_ratio(&GammaInputs {
        n_order: config.basis.n_order,
        hbar: config.hbar,
        h_max,
        alpha0,
        alpha1,
        beta: config.basis.beta,
        lipschitz: lipschitz_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_decay() -> SystemSpec {
        SystemSpec::new(DMatrix::from_element(1, 1, 1.0), vec![vec![]], vec![BoundaryTag::InitialValue(1.0)]).unwrap()
    }

    fn config(hbar: f64, n: usize, beta: f64) -> SolverConfig {
        SolverConfig::new(hbar, 30, 1e-12, BasisConfig::glr(beta, n).unwrap()).unwrap()
    }

    fn rule(beta: f64, n: usize) -> BasisRule {
        build_rule(BasisConfig::glr(beta, n).unwrap()).unwrap()
    }

    #[test]
    fn monomial_basics() {
        let m = MonomialTerm::new(2.0, vec![3, 0, 1]).unwrap();
        assert_eq!(m.degree(), 4);
        assert_abs_diff_eq!(m.eval(&[2.0, 9.0, 0.5]), 8.0);
        let d = m.derivative(0).unwrap();
        assert_eq!(d.coefficient(), 6.0);
        assert_eq!(d.exponents(), &[2, 0, 1]);
        assert!(m.derivative(1).is_none());
        assert!(MonomialTerm::new(1.0, vec![0, 0]).is_err());
        assert_eq!(m.factor_list(), vec![0, 0, 0, 2]);
    }

    #[test]
    fn spec_validation() {
        let sigma = DMatrix::zeros(2, 2);
        let decays = vec![BoundaryTag::DecayAtInfinity; 2];
        assert!(SystemSpec::new(sigma.clone(), vec![vec![], vec![]], decays).is_err());
        let bad_monomial = vec![vec![MonomialTerm { coefficient: 1.0, exponents: vec![1] }], vec![]];
        let tags = vec![BoundaryTag::InitialValue(0.0), BoundaryTag::DecayAtInfinity];
        assert!(SystemSpec::new(sigma.clone(), bad_monomial, tags.clone()).is_err());
        assert!(SystemSpec::new(sigma, vec![vec![]], tags).is_err());
    }

    #[test]
    fn config_validation() {
        let basis = BasisConfig::glr(1.0, 10).unwrap();
        assert!(SolverConfig::new(0.0, 10, 1e-10, basis).is_err());
        assert!(SolverConfig::new(-1.0, 10, 0.0, basis).is_err());
        assert!(SolverConfig::new(-1.0, 0, 1e-10, basis).is_err());
        let gl = BasisConfig::new(1.0, 10, NodeFamily::Gl).unwrap();
        assert!(SolverConfig::new(-1.0, 10, 1e-10, gl).is_err());
    }

    #[test]
    fn smallest_polynomial_operator() {
        let spec = SystemSpec::new(DMatrix::zeros(1, 1), vec![vec![]], vec![BoundaryTag::InitialValue(1.0)]).unwrap();
        let op = assemble_operator(&spec, &rule(1.0, 1), Collocation::Polynomial).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -0.5, 0.5]);
        assert_abs_diff_eq!(op.matrix().clone(), expect, epsilon = 1e-15);
        assert_eq!(op.boundary_rows(), &[0]);
    }

    #[test]
    fn decoupled_operator_is_block_diagonal() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let spec = SystemSpec::new(
            sigma,
            vec![vec![], vec![]],
            vec![BoundaryTag::InitialValue(1.0), BoundaryTag::DecayAtInfinity],
        )
        .unwrap();
        let r = rule(1.0, 6);
        let op = assemble_operator(&spec, &r, Collocation::WeightAbsorbed).unwrap();
        let k = r.len();
        assert!(op.matrix().view((0, k), (k, k)).iter().all(|v| *v == 0.0));
        assert!(op.matrix().view((k, 0), (k, k)).iter().all(|v| *v == 0.0));
        assert_eq!(op.boundary_rows(), &[0, 2 * k - 1]);
    }

    #[test]
    fn zero_data_gives_zero_guess() {
        let spec = SystemSpec::new(DMatrix::from_element(1, 1, 1.0), vec![vec![]], vec![BoundaryTag::InitialValue(0.0)]).unwrap();
        let r = rule(1.0, 10);
        let op = assemble_operator(&spec, &r, Collocation::WeightAbsorbed).unwrap();
        assert!(initial_guess(&spec, &r, &op).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn exponential_decay_guess() {
        let spec = scalar_decay();
        for collocation in [Collocation::WeightAbsorbed, Collocation::Polynomial] {
            let r = rule(1.0, 30);
            let op = assemble_operator(&spec, &r, collocation).unwrap();
            let z0 = initial_guess(&spec, &r, &op).unwrap();
            for (j, &t) in r.nodes().iter().enumerate().take(12) {
                assert_abs_diff_eq!(z0[(j, 0)], (-t).exp(), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn forcing_enters_initial_guess() {
        // z' + z = exp(-2t), z(0) = 0  =>  z = exp(-t) - exp(-2t)
        let spec = scalar_decay().with_forcing(0, GridFunction::new(|t| (-2.0 * t).exp()));
        let spec = SystemSpec { bc: vec![BoundaryTag::InitialValue(0.0)], ..spec };
        let run = run_sham(&spec, &config(-1.0, 40, 1.0)).unwrap();
        assert_eq!(run.termination, Termination::Converged { order: 1 });
        for &t in &[0.3, 1.0, 4.0] {
            assert_abs_diff_eq!(run.evaluate(0, t), (-t).exp() - (-2.0 * t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn cauchy_examples() {
        let z0 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let z1 = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 2.0, 0.25]);
        let series = HomotopySeries::from_orders(vec![z0.clone(), z1.clone()]);
        let lin = MonomialTerm::new(3.0, vec![0, 1]).unwrap();
        assert_eq!(cauchy_order_term(&series, &lin, 2).unwrap(), z1.column(1) * 3.0);
        let uv = MonomialTerm::new(1.0, vec![1, 1]).unwrap();
        assert_eq!(cauchy_order_term(&series, &uv, 1).unwrap(), z0.column(0).component_mul(&z0.column(1)));
        let cube = MonomialTerm::new(1.0, vec![3, 0]).unwrap();
        let expect = z0.column(0).map(|u| 3.0 * u * u).component_mul(&z1.column(0));
        assert_eq!(cauchy_order_term(&series, &cube, 2).unwrap(), expect);
        assert!(cauchy_order_term(&series, &cube, 3).is_err());
        assert!(cauchy_order_term(&series, &cube, 0).is_err());
    }

    #[test]
    fn workspace_matches_reference() {
        let n = 3;
        let orders: Vec<DMatrix<f64>> = (0..6)
            .map(|m| DMatrix::from_fn(4, n, |j, c| ((m * 7 + j * 3 + c) as f64 * 0.37).sin()))
            .collect();
        let spec = SystemSpec::new(
            DMatrix::zeros(n, n),
            vec![
                vec![MonomialTerm::new(1.5, vec![2, 1, 0]).unwrap(), MonomialTerm::new(-1.0, vec![0, 0, 1]).unwrap()],
                vec![MonomialTerm::new(0.5, vec![1, 1, 2]).unwrap()],
                vec![],
            ],
            vec![BoundaryTag::InitialValue(0.0); n],
        )
        .unwrap();
        let series = HomotopySeries::from_orders(orders);
        let mut ws = CauchyWorkspace::new(&spec);
        for m in 1..=6 {
            let got = ws.nonlinear_order(&series, m).unwrap();
            for r in 0..n {
                let mut expect = DVector::zeros(4);
                for t in &spec.nonlinear()[r] {
                    expect += cauchy_order_term(&series, t, m).unwrap();
                }
                for j in 0..4 {
                    assert_abs_diff_eq!(got[(j, r)], expect[j], epsilon = 1e-13);
                }
            }
        }
        assert!(ws.nonlinear_order(&series, 3).is_err());
    }

    #[test]
    fn linear_fixed_point() {
        let sigma = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, 1.0]);
        let spec = SystemSpec::new(
            sigma,
            vec![vec![], vec![]],
            vec![BoundaryTag::InitialValue(1.0), BoundaryTag::DecayAtInfinity],
        )
        .unwrap();
        for hbar in [-1.0, -0.4, 0.7] {
            let cfg = config(hbar, 30, 1.0);
            let r = rule(1.0, 30);
            let op = assemble_operator(&spec, &r, cfg.collocation).unwrap();
            let z0 = initial_guess(&spec, &r, &op).unwrap();
            let mut state = ShamState::new(&spec, &r, &cfg, z0);
            for m in 1..=6 {
                let z = deformation_step(&spec, &r, &op, &mut state, &cfg, m).unwrap();
                assert!(z.iter().all(|v| v.abs() <= 1e-12), "m={m}");
                state.series.push(z, 0.0);
            }
        }
    }

    #[test]
    fn scalar_linear_converges_first_order() {
        let run = run_sham(&scalar_decay(), &config(-0.5, 30, 1.0)).unwrap();
        assert_eq!(run.termination, Termination::Converged { order: 1 });
        for &t in &[0.0, 0.5, 2.0, 7.0] {
            assert_abs_diff_eq!(run.evaluate(0, t), (-t).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn first_order_is_newton_like_for_unit_hbar() {
        // z' + z + z^2 = 0, z(0) = 1/2
        let spec = SystemSpec::new(
            DMatrix::from_element(1, 1, 1.0),
            vec![vec![MonomialTerm::new(1.0, vec![2]).unwrap()]],
            vec![BoundaryTag::InitialValue(0.5)],
        )
        .unwrap();
        let r = rule(1.0, 20);
        let cfg = config(-1.0, 20, 1.0);
        let op = assemble_operator(&spec, &r, Collocation::WeightAbsorbed).unwrap();
        let z0 = initial_guess(&spec, &r, &op).unwrap();
        let mut state = ShamState::new(&spec, &r, &cfg, z0.clone());
        let z1 = deformation_step(&spec, &r, &op, &mut state, &cfg, 1).unwrap();
        let mut q = z0.map(|v| v * v);
        q[(0, 0)] = 0.0;
        let expect = -op.solve_grid(&q);
        assert_abs_diff_eq!(z1, expect, epsilon = 1e-14);
    }

    #[test]
    fn logistic_decay_converges_to_closed_form() {
        // z' + z + z^2 = 0, z(0) = a  =>  z = a e^-t / (1 + a (1 - e^-t))
        let a = 0.5;
        let spec = SystemSpec::new(
            DMatrix::from_element(1, 1, 1.0),
            vec![vec![MonomialTerm::new(1.0, vec![2]).unwrap()]],
            vec![BoundaryTag::InitialValue(a)],
        )
        .unwrap();
        // Poles at t = -ln 3 + 2 pi i k limit the Laguerre rate to
        // sub-geometric; N = 100 reaches about 1e-8.
        let mut cfg = config(-1.0, 100, 1.0);
        cfg.max_order = 80;
        let run = run_sham(&spec, &cfg).unwrap();
        assert!(matches!(run.termination, Termination::Converged { .. }), "{:?}", run.termination);
        for &t in &[0.1f64, 1.0, 3.0, 8.0] {
            let e = (-t).exp();
            assert_abs_diff_eq!(run.evaluate(0, t), a * e / (1.0 + a * (1.0 - e)), epsilon = 5e-8);
        }
        let op = assemble_operator(&spec, &run.rule, run.collocation).unwrap();
        for (res, scale) in collocation_residual(&spec, &run.rule, &op, &run.solution()) {
            assert!(res <= 10.0 * cfg.tail_tol * scale);
        }
    }

    #[test]
    fn auxiliary_function_path_matches_unit_path() {
        let spec = SystemSpec::new(
            DMatrix::from_element(1, 1, 1.0),
            vec![vec![MonomialTerm::new(1.0, vec![2]).unwrap()]],
            vec![BoundaryTag::InitialValue(0.5)],
        )
        .unwrap();
        let mut plain = config(-0.8, 30, 1.0);
        plain.max_order = 6;
        plain.tail_tol = 1e-300;
        let mut with_h = plain.clone();
        with_h.aux_h = Some(GridFunction::new(|_| 1.0));
        let a = run_sham(&spec, &plain).unwrap();
        let b = run_sham(&spec, &with_h).unwrap();
        for m in 0..=6 {
            assert_abs_diff_eq!(a.series.order(m).clone(), b.series.order(m).clone(), epsilon = 1e-12);
        }
    }

    #[test]
    fn boundary_entries_vanish_after_order_zero() {
        let sigma = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, 1.0]);
        let spec = SystemSpec::new(
            sigma,
            vec![vec![MonomialTerm::new(1.0, vec![3, 0]).unwrap()], vec![MonomialTerm::new(-3.0, vec![2, 1]).unwrap()]],
            vec![BoundaryTag::InitialValue(0.4), BoundaryTag::DecayAtInfinity],
        )
        .unwrap();
        let mut cfg = config(-0.6, 30, 1.0);
        cfg.max_order = 8;
        let run = run_sham(&spec, &cfg).unwrap();
        let k = run.rule.len();
        assert_eq!(run.series.order(0)[(0, 0)], 0.4);
        for m in 1..run.series.len() {
            assert_eq!(run.series.order(m)[(0, 0)], 0.0);
            assert_eq!(run.series.order(m)[(k - 1, 1)], 0.0);
        }
    }

    #[test]
    fn divergence_is_reported() {
        // z' - z + 5 z^3 = 0 from a large start blows up under hbar = -2.5.
        let spec = SystemSpec::new(
            DMatrix::from_element(1, 1, 1.0),
            vec![vec![MonomialTerm::new(5.0, vec![3]).unwrap()]],
            vec![BoundaryTag::InitialValue(3.0)],
        )
        .unwrap();
        let mut cfg = config(-2.5, 20, 1.0);
        cfg.max_order = 200;
        let run = run_sham(&spec, &cfg).unwrap();
        assert!(matches!(run.termination, Termination::Diverged { .. }), "{:?}", run.termination);
    }

    #[test]
    fn gamma_examples() {
        let g = GammaInputs { n_order: 100, hbar: -0.6, h_max: 1.0, alpha0: 1.0, alpha1: 1.0, beta: 1.0, lipschitz: 3.0 };
        assert_abs_diff_eq!(gamma_ratio(&g).unwrap(), 42.8 / 1.5, epsilon = 1e-12);
        let g = GammaInputs { hbar: -1.0, lipschitz: 0.0, alpha0: 0.7, alpha1: 0.7, ..g };
        assert_abs_diff_eq!(gamma_ratio(&g).unwrap(), 0.7 / 1.2, epsilon = 1e-15);
        let g = GammaInputs { alpha0: -0.5, ..g };
        assert!(gamma_ratio(&g).is_none());
        let g = GammaInputs { alpha0: -0.6, ..g };
        assert!(gamma_ratio(&g).is_none());

        let cfg = config(-1.0, 10, 1.0);
        assert_abs_diff_eq!(gamma_diagnostic(&scalar_decay(), &cfg, 0.0).unwrap(), 1.0 / 1.5, epsilon = 1e-15);
    }
}
