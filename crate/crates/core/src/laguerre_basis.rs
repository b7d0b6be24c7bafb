//! Modified Laguerre polynomials, Gauss-Laguerre(-Radau) rules and
//! pseudo-spectral differentiation on `[0, inf)`.
//!
//! The modified polynomial of degree `l` is `L_l(beta * t)`, orthogonal under
//! the weight `exp(-beta t)`. Nodes of a Radau rule spread out to roughly
//! `4N / beta`, where the polynomials reach magnitudes far beyond `f64`
//! range, so every quantity that multiplies or divides polynomial values is
//! carried as a sign and a natural logarithm.

use std::io::{self, Write};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Which quadrature points a rule uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeFamily {
    /// Zeros of `L_{N+1}`.
    Gl,
    /// `t = 0` plus the zeros of `d/dt L_{N+1}`.
    Glr,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BasisError {
    #[error("beta must be positive and finite, got {0}")]
    InvalidBeta(f64),
    #[error("polynomial order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("evaluation point must be finite and non-negative, got {0}")]
    InvalidPoint(f64),
    #[error("node construction failed for N = {n}, beta = {beta}: {reason}")]
    NodeConstruction { n: usize, beta: f64, reason: String },
    #[error("nodes {i} and {j} coincide")]
    DuplicateNodes { i: usize, j: usize },
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Discretization parameters: scaling `beta`, order `N`, node family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConfig {
    pub beta: f64,
    pub n_order: usize,
    pub node_family: NodeFamily,
}

impl BasisConfig {
    pub fn new(beta: f64, n_order: usize, node_family: NodeFamily) -> Result<Self, BasisError> {
        let config = Self { beta, n_order, node_family };
        config.validate()?;
        Ok(config)
    }

    /// Radau rule, the family used by the solver.
    pub fn glr(beta: f64, n_order: usize) -> Result<Self, BasisError> {
        Self::new(beta, n_order, NodeFamily::Glr)
    }

    pub fn validate(&self) -> Result<(), BasisError> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(BasisError::InvalidBeta(self.beta));
        }
        if self.n_order < 1 {
            return Err(BasisError::InvalidOrder(self.n_order));
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.n_order + 1
    }
}

/// Generalized Laguerre value `L_n^(alpha)(x) = p * exp(log_scale)` together
/// with `L_{n-1}^(alpha)(x) = q * exp(log_scale)` on the same scale.
#[derive(Debug, Clone, Copy)]
struct ScaledPair {
    p: f64,
    q: f64,
    log_scale: f64,
}

const RESCALE_AT: f64 = 1e100;

fn laguerre_pair(alpha: f64, n: usize, x: f64) -> ScaledPair {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut log_scale = 0.0;
    for k in 0..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        let mag = cur.abs().max(prev.abs());
        if mag > RESCALE_AT {
            prev /= mag;
            cur /= mag;
            log_scale += mag.ln();
        }
    }
    ScaledPair { p: cur, q: prev, log_scale }
}

/// Sign and natural log of `|L_n^(alpha)(x)|`.
fn laguerre_log(alpha: f64, n: usize, x: f64) -> (f64, f64) {
    let pair = laguerre_pair(alpha, n, x);
    (pair.p.signum(), pair.p.abs().ln() + pair.log_scale)
}

fn check_point(beta: f64, t: f64) -> Result<(), BasisError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(BasisError::InvalidBeta(beta));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(BasisError::InvalidPoint(t));
    }
    Ok(())
}

/// Modified Laguerre polynomial `L_degree(beta * t)` by the three-term
/// recurrence. Overflows to infinity for degrees and arguments whose true
/// value exceeds the `f64` range; use [`log_abs_laguerre`] there.
pub fn eval_laguerre(beta: f64, degree: usize, t: f64) -> Result<f64, BasisError> {
    check_point(beta, t)?;
    let pair = laguerre_pair(0.0, degree, beta * t);
    Ok(pair.p * pair.log_scale.exp())
}

/// `(sign, ln |L_degree(beta t)|)`.
pub fn log_abs_laguerre(beta: f64, degree: usize, t: f64) -> Result<(f64, f64), BasisError> {
    check_point(beta, t)?;
    Ok(laguerre_log(0.0, degree, beta * t))
}

/// Time derivative of the modified polynomial, `-beta * L^(1)_{degree-1}(beta t)`.
pub fn eval_laguerre_derivative(beta: f64, degree: usize, t: f64) -> Result<f64, BasisError> {
    check_point(beta, t)?;
    if degree == 0 {
        return Ok(0.0);
    }
    let pair = laguerre_pair(1.0, degree - 1, beta * t);
    Ok(-beta * pair.p * pair.log_scale.exp())
}

/// Quadrature nodes, Christoffel weights and differentiation matrix for one
/// discretization. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BasisRule {
    config: BasisConfig,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    diff: DMatrix<f64>,
    scaled_diff: DMatrix<f64>,
    bary_sign: Vec<f64>,
    bary_log: Vec<f64>,
    diff_condition: OnceLock<f64>,
}

impl BasisRule {
    pub fn config(&self) -> &BasisConfig {
        &self.config
    }

    pub fn beta(&self) -> f64 {
        self.config.beta
    }

    pub fn n_order(&self) -> usize {
        self.config.n_order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Natural logs of the weights; finite even where the weights underflow.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Differentiation matrix acting on samples of a degree-`N` polynomial.
    pub fn diff(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// Differentiation matrix acting on samples of `exp(-beta t / 2) p(t)`
    /// with `p` a degree-`N` polynomial, i.e. `E^-1 D E - beta/2 I` with
    /// `E = diag(exp(beta t_j / 2))`. Its entries stay moderate where the
    /// polynomial matrix reaches `1e78` and beyond.
    pub fn scaled_diff(&self) -> &DMatrix<f64> {
        &self.scaled_diff
    }

    /// 1-norm condition number of the differentiation matrix with its first
    /// row replaced by the unit row selecting `t_0` (the matrix itself is
    /// singular: constants lie in its kernel). Computed on first use.
    ///
    /// In double precision this grows past `1e100` by `N ~ 100`; pointwise
    /// products of polynomial samples lose all accuracy at the far nodes.
    pub fn diff_condition(&self) -> f64 {
        *self.diff_condition.get_or_init(|| {
            let mut pinned = self.diff.clone();
            for j in 0..pinned.ncols() {
                pinned[(0, j)] = if j == 0 { 1.0 } else { 0.0 };
            }
            condition_1norm(&pinned)
        })
    }

    fn check_len(&self, got: usize) -> Result<(), BasisError> {
        if got != self.len() {
            return Err(BasisError::LengthMismatch { expected: self.len(), got });
        }
        Ok(())
    }

    /// Writes `index,node,weight` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,node,weight")?;
        for (j, (t, w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            writeln!(out, "{j},{t:.16e},{w:.16e}")?;
        }
        Ok(())
    }
}

/// 1-norm condition number through an explicit inverse; infinite when singular.
pub(crate) fn condition_1norm(a: &DMatrix<f64>) -> f64 {
    let norm = |m: &DMatrix<f64>| {
        m.column_iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match a.clone().lu().try_inverse() {
        Some(inv) => norm(a) * norm(&inv),
        None => f64::INFINITY,
    }
}

fn jacobi_eigenvalues(alpha: f64, size: usize) -> Option<Vec<f64>> {
    let mut jac = DMatrix::<f64>::zeros(size, size);
    for k in 0..size {
        jac[(k, k)] = 2.0 * k as f64 + alpha + 1.0;
        if k + 1 < size {
            let kf = (k + 1) as f64;
            let off = (kf * (kf + alpha)).sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = jac.symmetric_eigenvalues();
    let mut values: Vec<f64> = eig.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    Some(values)
}

/// One Newton step on `L_n^(alpha)` at `x`, using
/// `x L_n' = n L_n - (n + alpha) L_{n-1}`.
fn newton_polish(alpha: f64, n: usize, x: f64) -> f64 {
    let pair = laguerre_pair(alpha, n, x);
    let deriv = n as f64 * pair.p - (n as f64 + alpha) * pair.q;
    if deriv == 0.0 {
        return x;
    }
    x - x * pair.p / deriv
}

/// Nodal factor `c_i = m_i * exp(s_i)` whose ratios give the off-diagonal
/// differentiation entries, `d_ij = c_i / ((t_i - t_j) c_j)`. Mantissas and
/// scales are kept apart so that ratios are exact wherever no rescaling
/// happened in the recurrence.
fn nodal_factors(nodes: &[f64], config: &BasisConfig) -> (Vec<f64>, Vec<f64>) {
    let beta = config.beta;
    let n = config.n_order;
    nodes
        .iter()
        .map(|&t| match config.node_family {
            NodeFamily::Glr => {
                let pair = laguerre_pair(0.0, n + 1, beta * t);
                (pair.p, pair.log_scale)
            }
            NodeFamily::Gl => {
                let pair = laguerre_pair(0.0, n, beta * t);
                (pair.p / t, pair.log_scale)
            }
        })
        .unzip()
}

fn diagonal_entry(config: &BasisConfig, i: usize, t: f64) -> f64 {
    let beta = config.beta;
    match config.node_family {
        NodeFamily::Glr => {
            if i == 0 {
                -beta * config.n_order as f64 / 2.0
            } else {
                beta / 2.0
            }
        }
        NodeFamily::Gl => (beta * t - 1.0) / (2.0 * t),
    }
}

fn check_distinct(nodes: &[f64]) -> Result<(), BasisError> {
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            if nodes[i] == nodes[j] {
                return Err(BasisError::DuplicateNodes { i, j });
            }
        }
    }
    Ok(())
}

fn diff_from_factors(
    nodes: &[f64],
    config: &BasisConfig,
    mantissa: &[f64],
    scale: &[f64],
    absorb_weight: bool,
) -> DMatrix<f64> {
    let half_beta = config.beta / 2.0;
    let n = nodes.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let d = diagonal_entry(config, i, nodes[i]);
            if absorb_weight {
                d - half_beta
            } else {
                d
            }
        } else {
            let mut expo = scale[i] - scale[j];
            if absorb_weight {
                expo -= half_beta * (nodes[i] - nodes[j]);
            }
            let ratio = mantissa[i] / mantissa[j];
            if expo == 0.0 {
                ratio / (nodes[i] - nodes[j])
            } else {
                ratio * expo.exp() / (nodes[i] - nodes[j])
            }
        }
    })
}

/// Polynomial differentiation matrix on the given nodes.
pub fn build_diff_matrix(nodes: &[f64], config: &BasisConfig) -> Result<DMatrix<f64>, BasisError> {
    config.validate()?;
    check_distinct(nodes)?;
    let (mantissa, scale) = nodal_factors(nodes, config);
    Ok(diff_from_factors(nodes, config, &mantissa, &scale, false))
}

/// Weight-absorbed differentiation matrix, see [`BasisRule::scaled_diff`].
pub fn build_scaled_diff_matrix(
    nodes: &[f64],
    config: &BasisConfig,
) -> Result<DMatrix<f64>, BasisError> {
    config.validate()?;
    check_distinct(nodes)?;
    let (mantissa, scale) = nodal_factors(nodes, config);
    Ok(diff_from_factors(nodes, config, &mantissa, &scale, true))
}

/// Builds nodes, weights and both differentiation matrices.
pub fn build_rule(config: BasisConfig) -> Result<BasisRule, BasisError> {
    config.validate()?;
    let beta = config.beta;
    let n = config.n_order;
    let fail = |reason: &str| BasisError::NodeConstruction { n, beta, reason: reason.to_string() };

    let (alpha, count) = match config.node_family {
        NodeFamily::Glr => (1.0, n),
        NodeFamily::Gl => (0.0, n + 1),
    };
    let roots: Vec<f64> = jacobi_eigenvalues(alpha, count)
        .ok_or_else(|| fail("eigenvalue solve produced non-finite values"))?
        .into_iter()
        .map(|x| newton_polish(alpha, count, x))
        .collect();
    if roots.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(fail("root outside (0, inf)"));
    }
    if roots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(fail("roots not distinct"));
    }

    let mut xs = Vec::with_capacity(n + 1);
    if config.node_family == NodeFamily::Glr {
        xs.push(0.0);
    }
    xs.extend_from_slice(&roots);
    let nodes: Vec<f64> = xs.iter().map(|x| x / beta).collect();

    let log_weights: Vec<f64> = match config.node_family {
        NodeFamily::Glr => {
            let base = -(beta * (n as f64 + 1.0)).ln();
            let mut lw = vec![base];
            for &x in &xs[1..] {
                let (s_n, l_n) = laguerre_log(0.0, n, x);
                let (s_n1, l_n1) = laguerre_log(0.0, n + 1, x);
                if s_n * s_n1 <= 0.0 {
                    return Err(fail("non-positive Christoffel number"));
                }
                lw.push(base - l_n - l_n1);
            }
            lw
        }
        NodeFamily::Gl => {
            let np2 = (n + 2) as f64;
            xs.iter()
                .map(|&x| {
                    let (_, l) = laguerre_log(0.0, n + 2, x);
                    x.ln() - 2.0 * np2.ln() - 2.0 * l - beta.ln()
                })
                .collect()
        }
    };
    let weights: Vec<f64> = log_weights.iter().map(|l| l.exp()).collect();

    let (mantissa, scale) = nodal_factors(&nodes, &config);
    let diff = diff_from_factors(&nodes, &config, &mantissa, &scale, false);
    let scaled_diff = diff_from_factors(&nodes, &config, &mantissa, &scale, true);
    let (bary_sign, bary_log) = barycentric_log_weights(&nodes);

    Ok(BasisRule {
        config,
        nodes,
        weights,
        log_weights,
        diff,
        scaled_diff,
        bary_sign,
        bary_log,
        diff_condition: OnceLock::new(),
    })
}

fn barycentric_log_weights(nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &tj)| {
            let mut sign = 1.0;
            let mut log = 0.0;
            for (k, &tk) in nodes.iter().enumerate() {
                if k != j {
                    let d = tj - tk;
                    if d < 0.0 {
                        sign = -sign;
                    }
                    log -= d.abs().ln();
                }
            }
            (sign, log)
        })
        .unzip()
}

/// `sum_j samples[j] * w_j`, exact for `int_0^inf p(t) exp(-beta t) dt`
/// with `deg p <= 2N` (Radau) or `2N + 1` (Gauss).
pub fn quadrature_weighted(rule: &BasisRule, samples: &[f64]) -> Result<f64, BasisError> {
    rule.check_len(samples.len())?;
    Ok(samples.iter().zip(&rule.weights).map(|(s, w)| s * w).sum())
}

/// Result of an integral without the Laguerre weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnweightedQuadrature {
    pub value: f64,
    /// Set when `exp(beta t_N)` exceeds `1e15`: samples at the far nodes are
    /// amplified that much, so they must already be decayed for the sum to
    /// mean anything.
    pub overflow_warning: bool,
}

/// `sum_j samples[j] * w_j * exp(beta t_j)`, approximating `int_0^inf g dt`.
pub fn quadrature_unweighted(
    rule: &BasisRule,
    samples: &[f64],
) -> Result<UnweightedQuadrature, BasisError> {
    rule.check_len(samples.len())?;
    let beta = rule.beta();
    let value = samples
        .iter()
        .zip(rule.nodes.iter().zip(&rule.log_weights))
        .map(|(s, (t, lw))| if *s == 0.0 { 0.0 } else { s * (lw + beta * t).exp() })
        .sum();
    let t_last = *rule.nodes.last().unwrap_or(&0.0);
    Ok(UnweightedQuadrature { value, overflow_warning: beta * t_last > 1e15f64.ln() })
}

/// Discrete inner product `sum_j u_j v_j w_j`.
pub fn discrete_inner(rule: &BasisRule, u: &[f64], v: &[f64]) -> Result<f64, BasisError> {
    rule.check_len(u.len())?;
    rule.check_len(v.len())?;
    Ok(u.iter().zip(v).zip(&rule.weights).map(|((a, b), w)| a * b * w).sum())
}

/// Discrete norm induced by [`discrete_inner`].
pub fn discrete_norm(rule: &BasisRule, u: &[f64]) -> Result<f64, BasisError> {
    Ok(discrete_inner(rule, u, u)?.sqrt())
}

fn barycentric_eval(rule: &BasisRule, samples: &[f64], t: f64, absorb_weight: bool) -> f64 {
    if let Some(k) = rule.nodes.iter().position(|&tj| tj == t) {
        return samples[k];
    }
    let half_beta = rule.beta() / 2.0;
    let mut exps = Vec::with_capacity(rule.len());
    let mut signs = Vec::with_capacity(rule.len());
    for (j, &tj) in rule.nodes.iter().enumerate() {
        let d = t - tj;
        exps.push(rule.bary_log[j] - d.abs().ln());
        signs.push(rule.bary_sign[j] * d.signum());
    }
    let top = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..rule.len() {
        let c = signs[j] * (exps[j] - top).exp();
        den += c;
        if absorb_weight {
            num += signs[j] * (exps[j] - top + half_beta * (rule.nodes[j] - t)).exp() * samples[j];
        } else {
            num += c * samples[j];
        }
    }
    num / den
}

/// Barycentric evaluation of the degree-`N` interpolant through `samples`.
///
/// # Panics
///
/// If `samples` does not have one entry per node.
pub fn interpolate(rule: &BasisRule, samples: &[f64], t_query: f64) -> f64 {
    assert_eq!(samples.len(), rule.len(), "one sample per node");
    barycentric_eval(rule, samples, t_query, false)
}

/// Interpolation in the weight-absorbed space: `samples` are values of
/// `exp(-beta t / 2) p(t)` and the result is that function at `t_query`.
///
/// # Panics
///
/// If `samples` does not have one entry per node.
pub fn interpolate_scaled(rule: &BasisRule, samples: &[f64], t_query: f64) -> f64 {
    assert_eq!(samples.len(), rule.len(), "one sample per node");
    barycentric_eval(rule, samples, t_query, true)
}

/// Samples of `f` at the rule nodes.
pub fn sample<F: Fn(f64) -> f64>(rule: &BasisRule, f: F) -> DVector<f64> {
    DVector::from_iterator(rule.len(), rule.nodes.iter().map(|&t| f(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn glr(beta: f64, n: usize) -> BasisRule {
        build_rule(BasisConfig::glr(beta, n).unwrap()).unwrap()
    }

    fn gl(beta: f64, n: usize) -> BasisRule {
        build_rule(BasisConfig::new(beta, n, NodeFamily::Gl).unwrap()).unwrap()
    }

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    #[test]
    fn low_degree_values() {
        assert_eq!(eval_laguerre(1.0, 0, 7.3).unwrap(), 1.0);
        assert_abs_diff_eq!(eval_laguerre(1.0, 1, 2.0).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_laguerre(1.0, 2, 2.0).unwrap(), -1.0, epsilon = 1e-15);
        assert!(eval_laguerre(0.0, 2, 1.0).is_err());
        assert!(eval_laguerre(-1.0, 2, 1.0).is_err());
    }

    #[test]
    fn matches_explicit_sum() {
        // L_l(x) = sum_k C(l,k) (-x)^k / k!
        for l in 0..12 {
            for &t in &[0.0, 0.3, 1.7, 5.0, 11.0] {
                let x: f64 = 0.7 * t;
                let mut explicit = 0.0;
                let mut binom = 1.0;
                for k in 0..=l {
                    explicit += binom * (-x).powi(k as i32) / factorial(k);
                    binom = binom * (l - k) as f64 / (k + 1) as f64;
                }
                let v = eval_laguerre(0.7, l, t).unwrap();
                assert_abs_diff_eq!(v, explicit, epsilon = 1e-9 * explicit.abs().max(1.0));
            }
        }
    }

    #[test]
    fn derivative_recurrence_holds() {
        let beta = 1.3;
        for l in 1..20 {
            for &t in &[0.0, 0.5, 2.0, 9.0] {
                let lhs = eval_laguerre_derivative(beta, l, t).unwrap();
                let rhs = eval_laguerre_derivative(beta, l - 1, t).unwrap()
                    - beta * eval_laguerre(beta, l - 1, t).unwrap();
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-9 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn log_scaled_agrees_with_direct() {
        for &(l, t) in &[(5usize, 3.0), (40, 20.0), (90, 150.0)] {
            let direct = eval_laguerre(1.0, l, t).unwrap();
            let (s, lg) = log_abs_laguerre(1.0, l, t).unwrap();
            assert_abs_diff_eq!(s * lg.exp(), direct, epsilon = 1e-10 * direct.abs());
        }
        let (_, lg) = log_abs_laguerre(1.0, 200, 700.0).unwrap();
        assert!(lg.is_finite() && lg > 300.0f64.ln());
    }

    #[test]
    fn smallest_radau_rule() {
        let rule = glr(1.0, 1);
        assert_eq!(rule.nodes(), &[0.0, 2.0]);
        assert_abs_diff_eq!(rule.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rule.weights()[1], 0.5, epsilon = 1e-15);
        let expect = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, -0.5, 0.5]);
        assert_abs_diff_eq!(rule.diff().clone(), expect, epsilon = 1e-15);
        let dt = rule.diff() * DVector::from_column_slice(rule.nodes());
        assert_abs_diff_eq!(dt[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dt[1], 1.0, epsilon = 1e-15);

        let rule2 = glr(2.0, 1);
        assert_eq!(rule2.nodes(), &[0.0, 1.0]);
    }

    #[test]
    fn radau_nodes_are_derivative_roots() {
        for &(beta, n) in &[(1.0, 10usize), (0.5, 30), (2.0, 100)] {
            let rule = glr(beta, n);
            assert_eq!(rule.nodes()[0], 0.0);
            for &t in &rule.nodes()[1..] {
                let x = beta * t;
                let pair = laguerre_pair(1.0, n, x);
                let deriv = (n as f64 * pair.p - (n as f64 + 1.0) * pair.q) / x;
                assert!((pair.p / deriv).abs() < 1e-12 * x.max(1.0), "N={n} t={t}");
            }
            assert!(rule.nodes().windows(2).all(|w| w[1] > w[0]));
            assert!(rule.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn gauss_nodes_are_roots() {
        let rule = gl(1.0, 12);
        for &t in rule.nodes() {
            let pair = laguerre_pair(0.0, 13, t);
            let deriv = (13.0 * pair.p - 13.0 * pair.q) / t;
            assert!((pair.p / deriv).abs() < 1e-12 * t.max(1.0));
        }
        // Gauss is exact to degree 2N+1.
        let samples: Vec<f64> = rule.nodes().iter().map(|t| t.powi(25)).collect();
        let exact = factorial(25);
        assert_abs_diff_eq!(quadrature_weighted(&rule, &samples).unwrap() / exact, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn quadrature_examples() {
        let rule = glr(1.0, 1);
        assert_abs_diff_eq!(quadrature_weighted(&rule, &[1.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(quadrature_weighted(&rule, &[0.0, 2.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(quadrature_weighted(&rule, &[0.0, 4.0]).unwrap(), 2.0, epsilon = 1e-15);
        for &beta in &[0.5, 2.0, 3.0] {
            let r = glr(beta, 8);
            let ones = vec![1.0; r.len()];
            assert_abs_diff_eq!(quadrature_weighted(&r, &ones).unwrap(), 1.0 / beta, epsilon = 1e-13);
        }
        assert!(quadrature_weighted(&rule, &[1.0]).is_err());
    }

    #[test]
    fn unweighted_examples() {
        let rule = glr(1.0, 60);
        let e = sample(&rule, |t| (-t).exp());
        let q = quadrature_unweighted(&rule, e.as_slice()).unwrap();
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-8);
        assert!(q.overflow_warning);
        let z = vec![0.0; rule.len()];
        assert_eq!(quadrature_unweighted(&rule, &z).unwrap().value, 0.0);
        let rule = glr(1.0, 20);
        let g = sample(&rule, |t| t * (-2.0 * t).exp());
        assert_abs_diff_eq!(quadrature_unweighted(&rule, g.as_slice()).unwrap().value, 0.25, epsilon = 1e-6);
        let small = glr(1.0, 4);
        assert!(!quadrature_unweighted(&small, &[0.0; 5]).unwrap().overflow_warning);
    }

    #[test]
    fn discrete_orthogonality() {
        let beta = 1.5;
        let n = 12;
        let rule = glr(beta, n);
        let polys: Vec<Vec<f64>> = (0..=2 * n)
            .map(|l| rule.nodes().iter().map(|&t| eval_laguerre(beta, l, t).unwrap()).collect())
            .collect();
        for l in 0..=2 * n {
            for m in 0..=(2 * n - l) {
                let ip = discrete_inner(&rule, &polys[l], &polys[m]).unwrap();
                let expect = if l == m { 1.0 / beta } else { 0.0 };
                assert_abs_diff_eq!(ip, expect, epsilon = 1e-9);
            }
        }
        assert_abs_diff_eq!(discrete_norm(&rule, &polys[3]).unwrap(), (1.0 / beta).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn diff_rows_sum_to_zero() {
        for rule in [glr(1.0, 20), glr(0.5, 60), gl(1.0, 20), gl(2.0, 40)] {
            for i in 0..rule.len() {
                let row = rule.diff().row(i);
                let max = row.iter().map(|v| v.abs()).fold(0.0, f64::max);
                assert!(row.sum().abs() <= 1e-10 * max, "row {i}");
            }
        }
    }

    fn weighted_rel_err(rule: &BasisRule, got: &DVector<f64>, exact: &DVector<f64>) -> f64 {
        let err = got - exact;
        discrete_norm(rule, err.as_slice()).unwrap() / discrete_norm(rule, exact.as_slice()).unwrap()
    }

    #[test]
    fn diff_exact_on_monomials() {
        for rule in [glr(1.0, 15), gl(1.0, 15), glr(2.0, 20), glr(0.5, 20)] {
            let n = rule.n_order();
            for k in 1..=n.min(10) {
                let f = sample(&rule, |t| t.powi(k as i32));
                let exact = sample(&rule, |t| k as f64 * t.powi(k as i32 - 1));
                let err = weighted_rel_err(&rule, &(rule.diff() * f), &exact);
                assert!(err <= 1e-7 * factorial(k), "k={k} err={err}");
            }
        }
    }

    #[test]
    fn diff_squared_is_second_derivative() {
        for rule in [glr(1.0, 12), glr(1.0, 20), gl(1.0, 16)] {
            let d2 = rule.diff() * rule.diff();
            for k in 2..=rule.n_order() {
                let f = sample(&rule, |t| t.powi(k as i32));
                let exact = sample(&rule, |t| (k * (k - 1)) as f64 * t.powi(k as i32 - 2));
                let err = weighted_rel_err(&rule, &(&d2 * f), &exact);
                assert!(err <= 1e-7 * factorial(k), "k={k} err={err}");
            }
        }
    }

    #[test]
    fn scaling_covariance() {
        let base = glr(1.0, 25);
        for &beta in &[0.5, 2.0, 3.7] {
            let r = glr(beta, 25);
            for (a, b) in r.nodes().iter().zip(base.nodes()) {
                assert_abs_diff_eq!(*a, b / beta, epsilon = 1e-12 * b.max(1.0));
            }
            let scaled = base.diff() * beta;
            for (a, b) in r.diff().iter().zip(scaled.iter()) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn scaled_diff_is_similarity() {
        let rule = glr(1.0, 12);
        let d = rule.diff();
        let s = rule.scaled_diff();
        let b = rule.beta();
        for i in 0..rule.len() {
            for j in 0..rule.len() {
                let ti = rule.nodes()[i];
                let tj = rule.nodes()[j];
                let mut expect = d[(i, j)] * (b * (tj - ti) / 2.0).exp();
                if i == j {
                    expect -= b / 2.0;
                }
                assert!((s[(i, j)] - expect).abs() <= 1e-9 * expect.abs().max(1.0));
            }
        }
        assert_abs_diff_eq!(s[(0, 0)], -b * 13.0 / 2.0, epsilon = 1e-14);
        assert_eq!(s[(5, 5)], 0.0);
    }

    #[test]
    fn scaled_diff_differentiates_decaying_functions() {
        let rule = glr(1.0, 40);
        let z = sample(&rule, |t| (-t).exp());
        let dz = rule.scaled_diff() * &z;
        for j in 0..rule.len() {
            assert_abs_diff_eq!(dz[j], -z[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn interpolation() {
        let rule = glr(1.0, 6);
        let samples = sample(&rule, |t| t * t);
        for &t in &[0.0, 0.1, 1.3, 4.4, 17.0] {
            assert_abs_diff_eq!(interpolate(&rule, samples.as_slice(), t), t * t, epsilon = 1e-9 * t.max(1.0).powi(2));
        }
        assert_eq!(interpolate(&rule, samples.as_slice(), rule.nodes()[3]), samples[3]);
        let r3 = glr(0.8, 3);
        let l3 = sample(&r3, |t| eval_laguerre(0.8, 3, t).unwrap());
        assert_abs_diff_eq!(interpolate(&r3, l3.as_slice(), 0.0), 1.0, epsilon = 1e-14);

        let big = glr(1.0, 100);
        let z = sample(&big, |t| (-1.3 * t).exp());
        for &t in &[0.05, 0.7, 3.3, 12.0] {
            assert_abs_diff_eq!(interpolate_scaled(&big, z.as_slice(), t), (-1.3 * t).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn condition_estimate_grows() {
        let small = glr(1.0, 8).diff_condition();
        let large = glr(1.0, 40).diff_condition();
        assert!(small.is_finite() && small > 1.0);
        assert!(large > small * 1e3);
    }

    #[test]
    fn csv_dump() {
        let rule = glr(1.0, 1);
        let mut buf = Vec::new();
        rule.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "index,node,weight");
        assert!(lines[2].starts_with("1,2.0"));
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let cfg = BasisConfig::glr(1.0, 2).unwrap();
        assert_eq!(
            build_diff_matrix(&[0.0, 1.0, 1.0], &cfg),
            Err(BasisError::DuplicateNodes { i: 1, j: 2 })
        );
    }

    #[test]
    fn invalid_config() {
        assert!(BasisConfig::glr(0.0, 3).is_err());
        assert!(BasisConfig::glr(1.0, 0).is_err());
        assert!(BasisConfig::glr(f64::NAN, 3).is_err());
    }
}
