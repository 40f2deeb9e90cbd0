//! WebAssembly exports for the static demo page in `www/`.
//!
//! Every export returns a JSON string; errors come back as a JS exception
//! carrying the message.

use std::sync::Arc;

use num_complex::Complex64;
use odecert::bounds::kernels::{phi_n_with_branch, KernelBranch};
use odecert::bounds::{bound_curve, SystemBoundContext};
use odecert::candidate::{synthetic_constant_residual_candidate, Candidate};
use odecert::harness::error_curve;
use odecert::jet::Jet;
use odecert::linalg::NormP;
use odecert::model::{find_case, ComplexRoot, ExactFn, Interval, ManufacturedCase, ProblemClass};
use odecert::residual::{ResidualProfile, ResidualSamples};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const GRID_PER_CELL: usize = 64;

#[derive(Serialize)]
pub struct FirstOrderCurves {
    pub t: Vec<f64>,
    pub bound_single: Vec<f64>,
    pub bound_cells: Vec<f64>,
    pub error: Vec<f64>,
    pub residual: Vec<f64>,
    pub cell_eps: Vec<f64>,
    pub cut_points: Vec<f64>,
}

/// `u' + lambda u = f` on `[0, t1]` with exact solution `cos t`. The
/// candidate is either `u* + amplitude sin(omega t)` or, for
/// `constant = true`, the constant-residual candidate with residual
/// `amplitude`, which attains the single-cell bound.
pub fn first_order_curves(
    lambda: f64,
    amplitude: f64,
    omega: f64,
    constant: bool,
    cells: usize,
    t1: f64,
    points: usize,
) -> Result<FirstOrderCurves, String> {
    let err = |e: odecert::CertifyError| e.to_string();
    let domain = Interval::new(0.0, t1).map_err(err)?;
    if cells == 0 || points < 2 {
        return Err("need at least one cell and two points".into());
    }
    let exact: ExactFn = Arc::new(|t: &Jet| vec![t.cos().to_complex()]);
    let class = ProblemClass::FirstOrderConstant {
        root: ComplexRoot::new(lambda, 0.0).map_err(err)?,
        u0: Complex64::new(1.0, 0.0),
    };
    let case = ManufacturedCase::new("demo", class, domain, exact.clone(), "").map_err(err)?;
    let candidate = if constant {
        synthetic_constant_residual_candidate(&case, amplitude).map_err(err)?
    } else {
        let f: ExactFn = Arc::new(move |t: &Jet| {
            let bump = t.scale(omega).sin().scale(amplitude).to_complex();
            exact(t).into_iter().map(|u| u + bump.clone()).collect()
        });
        Candidate::analytic("perturbed", 1, f)
    };
    let samples = ResidualSamples::collect(&case.problem, &candidate, cells * GRID_PER_CELL, NormP::Two).map_err(err)?;
    let single = samples.profile(1).map_err(err)?;
    let fine = samples.profile(cells).map_err(err)?;
    let t = domain.linspace(points);
    Ok(FirstOrderCurves {
        bound_single: bound_curve(&case.problem, &single, &t).map_err(err)?.values,
        bound_cells: bound_curve(&case.problem, &fine, &t).map_err(err)?.values,
        error: error_curve(&candidate, &case.exact, &t, NormP::Two).map_err(err)?,
        residual: samples.norms.iter().step_by((samples.norms.len() / 400).max(1)).copied().collect(),
        cell_eps: fine.eps.clone(),
        cut_points: fine.partition.cut_points.clone(),
        t,
    })
}

#[derive(Serialize)]
pub struct PhiCurve {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
    pub branches: Vec<&'static str>,
    /// `1 / prod(lambda)` when every root is positive.
    pub cap: Option<f64>,
}

fn branch_name(b: KernelBranch) -> &'static str {
    match b {
        KernelBranch::Repeated => "repeated",
        KernelBranch::Distinct => "distinct",
        KernelBranch::MatrixExponential => "matrix-exponential",
    }
}

/// `phi_n(t; lambdas)` on `[0, t1]`, with the evaluation path at each point.
pub fn phi_curve(lambdas: &[f64], t1: f64, points: usize) -> Result<PhiCurve, String> {
    if lambdas.is_empty() || lambdas.len() > 8 {
        return Err("give between one and eight roots".into());
    }
    let t = Interval::new(0.0, t1).map_err(|e| e.to_string())?.linspace(points.max(2));
    let mut phi = Vec::with_capacity(t.len());
    let mut branches = Vec::new();
    for &x in &t {
        let (v, b) = phi_n_with_branch(x, lambdas).map_err(|e| e.to_string())?;
        phi.push(v);
        let name = branch_name(b);
        if !branches.contains(&name) {
            branches.push(name);
        }
    }
    let cap = lambdas.iter().all(|&l| l > 0.0).then(|| 1.0 / lambdas.iter().product::<f64>());
    Ok(PhiCurve { t, phi, branches, cap })
}

#[derive(Serialize)]
pub struct SystemCurves {
    pub t: Vec<f64>,
    pub bound: Vec<f64>,
    /// Per-component bounds in modal coordinates, one series per component.
    pub components: Vec<Vec<f64>>,
    pub cap: f64,
}

/// Bound for the six-dimensional Jordan system with a constant residual
/// `epsilon`, split into `cells` equal cells.
pub fn system_curves(epsilon: f64, cells: usize, norm: &str, points: usize) -> Result<SystemCurves, String> {
    let err = |e: odecert::CertifyError| e.to_string();
    let norm = NormP::parse(norm).ok_or_else(|| format!("unknown norm {norm}"))?;
    let case = find_case("sys-jordan6").ok_or("system case missing")?;
    let ProblemClass::LinearSystem(sys) = &case.problem.class else {
        return Err("not a system".into());
    };
    let ctx = SystemBoundContext::new(&sys.clone().with_norm(norm), norm).map_err(err)?;
    let profile = ResidualProfile::uniform_constant(case.problem.domain, cells.max(1), epsilon).map_err(err)?;
    let t = case.problem.domain.linspace(points.max(2));
    let mut bound = Vec::with_capacity(t.len());
    let mut components = vec![Vec::with_capacity(t.len()); sys.dim()];
    for &x in &t {
        bound.push(ctx.bound(&profile, x).map_err(err)?);
        for (series, v) in components.iter_mut().zip(ctx.component_bounds(&profile, x).map_err(err)?) {
            series.push(v);
        }
    }
    Ok(SystemCurves { t, bound, components, cap: 6f64.sqrt() * epsilon / 2.0 })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = firstOrderCurves)]
pub fn first_order_curves_js(
    lambda: f64,
    amplitude: f64,
    omega: f64,
    constant: bool,
    cells: usize,
    t1: f64,
    points: usize,
) -> Result<String, JsValue> {
    to_js(first_order_curves(lambda, amplitude, omega, constant, cells, t1, points))
}

#[wasm_bindgen(js_name = phiCurve)]
pub fn phi_curve_js(lambdas: Vec<f64>, t1: f64, points: usize) -> Result<String, JsValue> {
    to_js(phi_curve(&lambdas, t1, points))
}

#[wasm_bindgen(js_name = systemCurves)]
pub fn system_curves_js(epsilon: f64, cells: usize, norm: &str, points: usize) -> Result<String, JsValue> {
    to_js(system_curves(epsilon, cells, norm, points))
}
