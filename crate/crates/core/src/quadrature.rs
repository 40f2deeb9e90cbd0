//! Adaptive Simpson quadrature with a function-evaluation budget.

use crate::error::{CertifyError, Result};

#[derive(Clone, Copy, Debug)]
pub struct SimpsonOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
    pub max_evals: usize,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-12, max_depth: 50, max_evals: 2_000_000 }
    }
}

struct State<'a, F> {
    f: &'a F,
    evals: usize,
    max_evals: usize,
    max_depth: u32,
    exhausted: bool,
}

/// Integrates `f` over `[a, b]` to roughly `max(abs_tol, rel_tol * |I|)`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: SimpsonOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // a coarse estimate of the integral's scale sets the relative target
    let tol = opts.abs_tol.max(opts.rel_tol * whole.abs());
    let mut st = State { f, evals: 3, max_evals: opts.max_evals, max_depth: opts.max_depth, exhausted: false };
    let value = recurse(&mut st, a, b, fa, fm, fb, whole, tol, 0);
    if st.exhausted || !value.is_finite() {
        return Err(CertifyError::QuadratureFailure { a, b, budget: opts.max_evals });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    st: &mut State<'_, F>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    if st.evals + 2 > st.max_evals {
        st.exhausted = true;
        return whole;
    }
    let flm = (st.f)(lm);
    let frm = (st.f)(rm);
    st.evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= st.max_depth || delta.abs() <= 15.0 * tol || (m - a).abs() < 1e-15 * (a.abs() + b.abs()) {
        if depth >= st.max_depth && delta.abs() > 15.0 * tol {
            st.exhausted = true;
        }
        return left + right + delta / 15.0;
    }
    recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        + recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
}
