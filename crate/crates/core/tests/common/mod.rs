#![allow(dead_code)]

use lahoc::ocp_model::{OCProblem, SubsystemSpec};
use lahoc::sham_engine::{HomotopySeries, MonomialTerm};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Full product of power series in the embedding parameter, untruncated.
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coefficient of `q^(m-1)` of `coef * prod_c (sum_j Z_{c,j} q^j)^{e_c}` by
/// expanding the whole product; the second vector bounds the magnitudes.
pub fn brute_cauchy(series: &HomotopySeries, term: &MonomialTerm, m: usize) -> (DVector<f64>, DVector<f64>) {
    let orders = series.orders();
    let nodes = orders[0].nrows();
    let mut val = DVector::zeros(nodes);
    let mut mag = DVector::zeros(nodes);
    for node in 0..nodes {
        let mut p = vec![1.0];
        let mut pa = vec![1.0];
        for (c, &e) in term.exponents().iter().enumerate() {
            let s: Vec<f64> = orders.iter().map(|z| z[(node, c)]).collect();
            let sa: Vec<f64> = s.iter().map(|v| v.abs()).collect();
            for _ in 0..e {
                p = poly_mul(&p, &s);
                pa = poly_mul(&pa, &sa);
            }
        }
        val[node] = term.coefficient() * p.get(m - 1).copied().unwrap_or(0.0);
        mag[node] = term.coefficient().abs() * pa.get(m - 1).copied().unwrap_or(0.0);
    }
    (val, mag)
}

pub fn random_series<R: Rng>(rng: &mut R, dim: usize, orders: usize, nodes: usize) -> HomotopySeries {
    HomotopySeries::from_orders((0..orders).map(|_| DMatrix::from_fn(nodes, dim, |_, _| rng.gen_range(-2.0..2.0))).collect())
}

pub fn random_monomial<R: Rng>(rng: &mut R, dim: usize, max_exp: u32) -> MonomialTerm {
    loop {
        let exps: Vec<u32> = (0..dim).map(|_| rng.gen_range(0..=max_exp)).collect();
        if exps.iter().sum::<u32>() > 0 {
            return MonomialTerm::new(rng.gen_range(-3.0..3.0), exps).unwrap();
        }
    }
}

fn random_spd<R: Rng>(rng: &mut R, n: usize, shift: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let mut s = &m * m.transpose() + DMatrix::identity(n, n) * shift;
    for i in 0..n {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }
    s
}

/// Random well-posed problem with `dims.len()` subsystems.
pub fn random_problem<R: Rng>(rng: &mut R, dims: &[(usize, usize)], nonlinear: bool) -> OCProblem {
    let total: usize = dims.iter().map(|d| d.0).sum();
    let subs = dims
        .iter()
        .map(|&(n, m)| SubsystemSpec {
            a_mat: DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)),
            b_mat: DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0)),
            q_mat: random_spd(rng, n, 0.1),
            r_mat: random_spd(rng, m, 0.5),
            f: (0..n)
                .map(|_| {
                    if nonlinear {
                        let k = rng.gen_range(0..3);
                        (0..k).map(|_| random_monomial(rng, total, 2)).collect()
                    } else {
                        Vec::new()
                    }
                })
                .collect(),
            x0: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        })
        .collect();
    OCProblem::new(subs).unwrap()
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}
