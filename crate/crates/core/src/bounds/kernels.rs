//! Auxiliary kernels of the bounds: `h_k`, `H_k`, `phi_n`, and their
//! integrals over partition cells.
//!
//! Every function here takes the elapsed time `x = t - t0 >= 0` (or cell
//! offsets measured backwards from the evaluation time) rather than absolute
//! times.

use crate::error::{CertifyError, Result};
use crate::jet::factorial;

/// Relative gap below which two decay rates are treated as coincident.
pub fn degeneracy_threshold(lambdas: &[f64]) -> f64 {
    let max = lambdas.iter().fold(0.0_f64, |m, &l| m.max(l.abs()));
    1e-6 * (1.0 + max)
}

/// Largest accepted ratio of summed magnitudes to the result of a
/// partial-fraction sum; beyond it the matrix-exponential path is used.
const CANCELLATION_LIMIT: f64 = 1e3;

/// `h_1(x; lambda) = (1 - e^{-lambda x}) / lambda`, `x` for `lambda = 0`.
/// Valid for either sign of `lambda`.
pub fn h1(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        x
    } else {
        -(-lambda * x).exp_m1() / lambda
    }
}

/// `h_k(x; lambda) = lambda^{-k} (1 - e^{-lambda x} sum_{j<k} (lambda x)^j / j!)`,
/// equal to `int_0^x s^{k-1}/(k-1)! e^{-lambda s} ds`. Requires `lambda >= 0`.
pub fn h_k_elapsed(x: f64, lambda: f64, k: usize) -> f64 {
    debug_assert!(k >= 1 && lambda >= 0.0 && x >= 0.0);
    if k == 1 {
        return h1(x, lambda);
    }
    let y = lambda * x;
    if y < k as f64 {
        // x^k e^{-y} sum_i y^i / (k+i)!, no cancellation
        let mut term = 1.0 / factorial(k);
        let mut sum = term;
        let mut i = 0;
        while term > 1e-17 * sum {
            i += 1;
            term *= y / (k + i) as f64;
            sum += term;
            if i > 500 {
                break;
            }
        }
        x.powi(k as i32) * (-y).exp() * sum
    } else {
        let mut partial = 0.0;
        let mut term = 1.0;
        for j in 0..k {
            if j > 0 {
                term *= y / j as f64;
            }
            partial += term;
        }
        (1.0 - (-y).exp() * partial) / lambda.powi(k as i32)
    }
}

fn check_args(x: f64, lambdas: &[f64]) -> Result<()> {
    if let Some(&lambda) = lambdas.iter().find(|&&l| l < 0.0 || l.is_nan()) {
        return Err(CertifyError::NegativeDecay { lambda });
    }
    if !(x >= 0.0) {
        return Err(CertifyError::InvalidProblem(format!("negative elapsed time {x}")));
    }
    Ok(())
}

/// `h_k(t; lambda)` measured from `t0`.
pub fn h_k(t: f64, lambda: f64, k: usize, t0: f64) -> Result<f64> {
    if k == 0 {
        return Err(CertifyError::InvalidProblem("h_k needs k >= 1".into()));
    }
    check_args(t - t0, &[lambda])?;
    Ok(h_k_elapsed(t - t0, lambda, k))
}

/// `H_k(t; lambda) = sum_{j=1}^k h_j(t; lambda)`.
pub fn big_h_k(t: f64, lambda: f64, k: usize, t0: f64) -> Result<f64> {
    if k == 0 {
        return Err(CertifyError::InvalidProblem("H_k needs k >= 1".into()));
    }
    check_args(t - t0, &[lambda])?;
    Ok((1..=k).map(|j| h_k_elapsed(t - t0, lambda, j)).sum())
}

/// `int_{x_lo}^{x_lo + w} s^m / m! e^{-lambda s} ds` for `lambda >= 0`
/// (any sign when `m = 0`).
///
/// Expands `(x_lo + r)^m` binomially so each term is a positive multiple of
/// `h_{i+1}(w; lambda)`.
pub fn poly_exp_cell(m: usize, lambda: f64, x_lo: f64, w: f64) -> f64 {
    let decay = (-lambda * x_lo).exp();
    if m == 0 {
        return decay * h1(w, lambda);
    }
    let mut sum = 0.0;
    for i in 0..=m {
        let p = m - i;
        sum += x_lo.powi(p as i32) / factorial(p) * h_k_elapsed(w, lambda, i + 1);
    }
    decay * sum
}

/// Evaluation path taken by [`phi_n_with_branch`] and [`chain_cell_integral`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelBranch {
    /// All roots equal: polynomial-times-exponential form.
    Repeated,
    /// Partial fractions over distinct roots.
    Distinct,
    /// Matrix exponential of the chain generator (near-coincident roots).
    MatrixExponential,
}

/// `int_{x_lo}^{x_lo + w} K_n(s) ds`, where `K_n` is the convolution of
/// `e^{-lambda_k s}` over all roots (`K_n(s) = phi_n'(s)`).
pub fn chain_cell_integral(lambdas: &[f64], x_lo: f64, w: f64) -> Result<(f64, KernelBranch)> {
    check_args(w, lambdas)?;
    check_args(x_lo, &[])?;
    let n = lambdas.len();
    if n == 0 {
        return Err(CertifyError::InvalidProblem("kernel needs at least one root".into()));
    }
    if lambdas.iter().all(|&l| l == lambdas[0]) {
        return Ok((poly_exp_cell(n - 1, lambdas[0], x_lo, w), KernelBranch::Repeated));
    }
    let delta = degeneracy_threshold(lambdas);
    let min_gap = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (lambdas[i] - lambdas[j]).abs())
        .fold(f64::INFINITY, f64::min);
    if min_gap >= delta {
        let mut value = 0.0;
        let mut magnitude = 0.0;
        for (k, &lk) in lambdas.iter().enumerate() {
            let denom: f64 = lambdas.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &lj)| lj - lk).product();
            let term = (-lk * x_lo).exp() * h1(w, lk) / denom;
            value += term;
            magnitude += term.abs();
        }
        if value > 0.0 && magnitude <= CANCELLATION_LIMIT * value {
            return Ok((value, KernelBranch::Distinct));
        }
        if value == 0.0 && magnitude == 0.0 {
            return Ok((0.0, KernelBranch::Distinct));
        }
    }
    Ok((chain_expm_integral(lambdas, x_lo, w), KernelBranch::MatrixExponential))
}

/// `phi_n(x; lambdas) = int_0^x K_n`, with the path taken.
pub fn phi_n_with_branch(x: f64, lambdas: &[f64]) -> Result<(f64, KernelBranch)> {
    chain_cell_integral(lambdas, 0.0, x)
}

/// `phi_n(t; lambdas)` measured from `t0`.
pub fn phi_n(t: f64, lambdas: &[f64], t0: f64) -> Result<f64> {
    check_args(t - t0, lambdas)?;
    Ok(phi_n_with_branch(t - t0, lambdas)?.0)
}

/// Second-order kernel `phi(t; lambda1, lambda2)` with the zero-root limits
/// written out explicitly.
pub fn phi2(t: f64, lam1: f64, lam2: f64, t0: f64) -> Result<f64> {
    check_args(t - t0, &[lam1, lam2])?;
    let x = t - t0;
    match (lam1 == 0.0, lam2 == 0.0) {
        (true, true) => Ok(0.5 * x * x),
        (false, true) => Ok(h1_integral(x, lam1)),
        (true, false) => Ok(h1_integral(x, lam2)),
        (false, false) => Ok(phi_n_with_branch(x, &[lam1, lam2])?.0),
    }
}

/// `int_0^x h_1(s; lambda) ds = (e^{-lambda x} + lambda x - 1) / lambda^2`.
fn h1_integral(x: f64, lambda: f64) -> f64 {
    let y = lambda * x;
    if y < 1.0 {
        // x^2 sum_i (-y)^i / (i+2)!
        let mut term: f64 = 0.5;
        let mut sum = term;
        let mut i = 0;
        while term.abs() > 1e-17 * sum {
            i += 1;
            term *= -y / (i + 2) as f64;
            sum += term;
        }
        x * x * sum
    } else {
        ((-y).exp_m1() + y) / (lambda * lambda)
    }
}

/// The chain generator: `(n+1) x (n+1)` lower-bidiagonal with diagonal
/// `-lambda_i` (last entry 0) and unit subdiagonal. The last state integrates
/// the convolution chain.
fn chain_generator(lambdas: &[f64]) -> Vec<Vec<f64>> {
    let n = lambdas.len();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for (i, &l) in lambdas.iter().enumerate() {
        a[i][i] = -l;
        a[i + 1][i] = 1.0;
    }
    a
}

fn chain_expm_integral(lambdas: &[f64], x_lo: f64, w: f64) -> f64 {
    let a = chain_generator(lambdas);
    let n1 = a.len();
    let mut state = vec![0.0; n1];
    state[0] = 1.0;
    if x_lo > 0.0 {
        state = matvec(&expm_metzler(&a, x_lo), &state);
    }
    state[n1 - 1] = 0.0;
    matvec(&expm_metzler(&a, w), &state)[n1 - 1]
}

fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..n {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

/// `exp(x A)` for a Metzler matrix `A` (nonnegative off-diagonal).
///
/// The diagonal is shifted so the Taylor series has nonnegative terms, the
/// shift factor is reapplied at the scaled level and the result squared; every
/// intermediate is entrywise nonnegative, so nothing cancels.
pub fn expm_metzler(a: &[Vec<f64>], x: f64) -> Vec<Vec<f64>> {
    let n = a.len();
    let mu = (0..n).map(|i| -a[i][i] * x).fold(0.0_f64, f64::max);
    let mut c: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] * x + if i == j { mu } else { 0.0 }).collect())
        .collect();
    let norm = c.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    // Taylor series of exp(C)
    let mut result: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut term = result.clone();
    for k in 1..40 {
        term = matmul(&term, &c);
        let inv = 1.0 / k as f64;
        let mut largest = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                term[i][j] *= inv;
                result[i][j] += term[i][j];
                largest = largest.max(term[i][j] / result[i][j].max(f64::MIN_POSITIVE));
            }
        }
        if largest < 1e-18 {
            break;
        }
    }
    let shift = (-mu * scale).exp();
    for row in &mut result {
        for v in row.iter_mut() {
            *v *= shift;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h1_limits() {
        assert_eq!(h1(2.0, 0.0), 2.0);
        assert!((h1(1.0, 3.0) - (1.0 - (-3.0f64).exp()) / 3.0).abs() < 1e-16);
    }

    #[test]
    fn h_k_series_and_closed_form_meet() {
        for k in 2..=4 {
            let lambda = 1.7;
            let x_switch = k as f64 / lambda;
            let a = h_k_elapsed(x_switch * (1.0 - 1e-15), lambda, k);
            let b = h_k_elapsed(x_switch * (1.0 + 1e-15), lambda, k);
            assert!((a - b).abs() <= 1e-12 * a, "{k} {a} {b}");
        }
    }

    #[test]
    fn h_k_zero_rate_is_polynomial() {
        assert!((h_k_elapsed(2.0, 0.0, 3) - 8.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn big_h_limit() {
        let v = big_h_k(200.0, 2.0, 2, 0.0).unwrap();
        assert!((v - 0.75).abs() < 1e-14);
    }

    #[test]
    fn phi2_double_zero() {
        assert_eq!(phi2(3.0, 0.0, 0.0, 0.0).unwrap(), 4.5);
    }

    #[test]
    fn phi2_distinct_closed_form() {
        let (l1, l2, t) = (3.0_f64, 1.0_f64, 1.4_f64);
        let closed = (1.0 - (l1 * (-l2 * t).exp() - l2 * (-l1 * t).exp()) / (l1 - l2)) / (l1 * l2);
        assert!((phi2(t, l1, l2, 0.0).unwrap() - closed).abs() < 1e-15);
    }

    #[test]
    fn expm_path_matches_partial_fractions() {
        let lambdas = [3.0, 2.0, 1.0];
        for (x_lo, w) in [(0.0, 2.0), (0.5, 0.3), (1.2, 1.8)] {
            let (a, branch) = chain_cell_integral(&lambdas, x_lo, w).unwrap();
            assert_eq!(branch, KernelBranch::Distinct);
            let b = chain_expm_integral(&lambdas, x_lo, w);
            assert!((a - b).abs() <= 1e-13 * a, "{a} {b}");
        }
    }

    #[test]
    fn near_coincident_roots_use_matrix_exponential() {
        let (v, branch) = phi_n_with_branch(2.0, &[1.0, 1.0 + 1e-7]).unwrap();
        assert_eq!(branch, KernelBranch::MatrixExponential);
        assert!((v - h_k_elapsed(2.0, 1.0, 2)).abs() < 1e-7);
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(matches!(phi_n(1.0, &[1.0, -0.5], 0.0), Err(CertifyError::NegativeDecay { .. })));
        assert!(h_k(1.0, -1.0, 2, 0.0).is_err());
    }

    #[test]
    fn poly_exp_cell_adds_over_subcells() {
        let whole = poly_exp_cell(2, 0.7, 0.0, 3.0);
        let parts = poly_exp_cell(2, 0.7, 0.0, 1.0) + poly_exp_cell(2, 0.7, 1.0, 2.0);
        assert!((whole - parts).abs() < 1e-14 * whole);
        assert!((whole - h_k_elapsed(3.0, 0.7, 3)).abs() < 1e-14 * whole);
    }
}
