//! Test-side oracles. Nothing here calls into the library's kernels or
//! quadrature: every reference value is recomputed from definitions.
#![allow(dead_code)]

/// Adaptive Simpson with Richardson correction; `tol` is absolute.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= 4 && (delta.abs() <= 15.0 * tol || depth >= 40) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}

/// Composite trapezoid rule on `n` intervals.
pub fn trapezoid(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

fn fact(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `int_0^x s^{k-1}/(k-1)! e^{-lambda s} ds` by quadrature.
pub fn h_k_oracle(x: f64, lambda: f64, k: usize) -> f64 {
    let c = fact(k - 1);
    simpson(&|s: f64| s.powi(k as i32 - 1) / c * (-lambda * s).exp(), 0.0, x, 1e-14)
}

pub fn big_h_oracle(x: f64, lambda: f64, k: usize) -> f64 {
    (1..=k).map(|j| h_k_oracle(x, lambda, j)).sum()
}

/// `int_{x_lo}^{x_lo+w} s^m/m! e^{-lambda s} ds` by quadrature.
pub fn poly_exp_oracle(m: usize, lambda: f64, x_lo: f64, w: f64) -> f64 {
    let c = fact(m);
    simpson(&|s: f64| s.powi(m as i32) / c * (-lambda * s).exp(), x_lo, x_lo + w, 1e-14)
}

/// Running integrals `c[j] = int_0^{jh} g` of samples on a uniform grid,
/// fourth order at every node (Simpson pairs, a 3/8 panel for odd nodes).
fn cumulative_simpson(g: &[f64], h: f64) -> Vec<f64> {
    let mut c = vec![0.0; g.len()];
    if g.len() < 3 {
        if g.len() == 2 {
            c[1] = 0.5 * h * (g[0] + g[1]);
        }
        return c;
    }
    c[1] = h / 12.0 * (5.0 * g[0] + 8.0 * g[1] - g[2]);
    for j in 2..g.len() {
        c[j] = if j % 2 == 0 {
            c[j - 2] + h / 3.0 * (g[j - 2] + 4.0 * g[j - 1] + g[j])
        } else {
            c[j - 3] + 3.0 * h / 8.0 * (g[j - 3] + 3.0 * g[j - 2] + 3.0 * g[j - 1] + g[j])
        };
    }
    c
}

/// `K_n(x)` on `n_steps` uniform steps: `K_1 = e^{-lambda_1 s}`,
/// `K_k(s) = int_0^s K_{k-1}(r) e^{-lambda_k (s - r)} dr`.
fn kernel_on_grid(x: f64, lambdas: &[f64], n_steps: usize) -> f64 {
    let h = x / n_steps as f64;
    let s: Vec<f64> = (0..=n_steps).map(|j| j as f64 * h).collect();
    let mut k: Vec<f64> = s.iter().map(|&r| (-lambdas[0] * r).exp()).collect();
    for &l in &lambdas[1..] {
        let g: Vec<f64> = s.iter().zip(&k).map(|(&r, &v)| (l * (r - x)).exp() * v).collect();
        let cum = cumulative_simpson(&g, h);
        k = s.iter().zip(&cum).map(|(&sj, &c)| (l * (x - sj)).exp() * c).collect();
    }
    k[n_steps]
}

/// `K_n(x)` for the convolution chain of `e^{-lambda_k s}`, by the
/// recurrence above with Richardson extrapolation over two grids.
pub fn kernel_oracle(x: f64, lambdas: &[f64]) -> f64 {
    let coarse = kernel_on_grid(x, lambdas, 2048);
    let fine = kernel_on_grid(x, lambdas, 4096);
    (16.0 * fine - coarse) / 15.0
}

/// `phi_n(x) = int_0^x K_n`, i.e. the chain with an extra zero root.
pub fn phi_oracle(x: f64, lambdas: &[f64]) -> f64 {
    let mut l = lambdas.to_vec();
    l.push(0.0);
    kernel_oracle(x, &l)
}

/// `int_{x_lo}^{x_lo+w} K_n(s) ds` by adaptive Simpson over the kernel.
pub fn chain_cell_oracle(lambdas: &[f64], x_lo: f64, w: f64) -> f64 {
    let f = |s: f64| kernel_oracle(s, lambdas);
    let scale = trapezoid(&f, x_lo, x_lo + w, 8).abs();
    simpson(&f, x_lo, x_lo + w, 1e-12 * scale)
}

/// Fourth-order central difference.
pub fn central_diff(f: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
}

/// `|a - b| <= rel * |b| + abs`.
pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= rel * b.abs() + abs
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b { 0.0 } else { (a - b).abs() / b.abs().max(f64::MIN_POSITIVE) }
}
