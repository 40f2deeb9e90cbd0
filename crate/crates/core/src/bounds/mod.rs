//! Certified pointwise error bounds from residual profiles.
//!
//! Every bound has the form `sum_i eps_i * int_{I_i ∩ [t0, t]} K(t - tau) dtau`
//! for a class-specific kernel `K`; with a single cell it reduces to the
//! global-epsilon bound.

pub mod kernels;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::ScalarFn;
use crate::error::{CertifyError, Result};
use crate::jet::Jet;
use crate::linalg::NormP;
use crate::model::{LinearSystem, OdeProblem, ProblemClass};
use crate::quadrature::{adaptive_simpson, SimpsonOptions};
use crate::residual::ResidualProfile;

use kernels::{chain_cell_integral, h1, poly_exp_cell};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    AbsoluteError,
    RelativeToNaturalResponse,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::AbsoluteError => "absolute",
            Self::RelativeToNaturalResponse => "relative",
        }
    }
}

pub const TAG_FIRST_ORDER: &str = "first-order-integrating-factor";
pub const TAG_FIRST_ORDER_RELATIVE: &str = "first-order-relative";
pub const TAG_HIGHER_ORDER: &str = "higher-order-phi-kernel";
pub const TAG_SYSTEM: &str = "jordan-chain-system";
pub const TAG_NONCONSTANT: &str = "nonconstant-integrating-factor";

/// Bound values on a time grid, with provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: BoundKind,
    pub theorem_tag: String,
    pub partition_cells: usize,
}

impl BoundCurve {
    /// CSV with columns `t,bound,kind,theorem_tag,cells`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,bound,kind,theorem_tag,cells\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t:.16e},{v:.16e},{},{},{}", self.kind.as_str(), self.theorem_tag, self.partition_cells);
        }
        out
    }
}

pub fn theorem_tag(problem: &OdeProblem) -> &'static str {
    match problem.class {
        ProblemClass::FirstOrderConstant { .. } => TAG_FIRST_ORDER,
        ProblemClass::HigherOrderConstant { .. } => TAG_HIGHER_ORDER,
        ProblemClass::LinearSystem(_) => TAG_SYSTEM,
        ProblemClass::NonconstantFirstOrder { .. } => TAG_NONCONSTANT,
    }
}

/// Sums `eps_i * kernel(x_lo, w)` over the cells meeting `[t0, t]`, where the
/// clipped cell is `[t - x_lo - w, t - x_lo]`.
fn sum_cells(profile: &ResidualProfile, t: f64, mut kernel: impl FnMut(f64, f64) -> Result<f64>) -> Result<f64> {
    let cuts = &profile.partition.cut_points;
    let mut total = 0.0;
    for (i, &eps) in profile.eps.iter().enumerate() {
        let (a, b) = (cuts[i], cuts[i + 1]);
        if a >= t {
            break;
        }
        if eps == 0.0 {
            continue;
        }
        let hi = b.min(t);
        total += eps * kernel(t - hi, hi - a)?;
    }
    Ok(total)
}

fn check_time(problem: &OdeProblem, profile: &ResidualProfile, t: f64) -> Result<()> {
    problem.domain.check(t)?;
    if profile.partition.interval != problem.domain {
        return Err(CertifyError::InvalidProblem("profile interval differs from the problem domain".into()));
    }
    Ok(())
}

/// `sum_i eps_i int e^{-lambda (t - tau)} dtau` for `u' + (lambda + i omega) u = f`.
pub fn bound_first_order(problem: &OdeProblem, profile: &ResidualProfile, t: f64) -> Result<f64> {
    let ProblemClass::FirstOrderConstant { root, .. } = problem.class else {
        return Err(wrong_class("first-order constant", problem));
    };
    check_time(problem, profile, t)?;
    first_order_sum(root.lambda, profile, t)
}

fn first_order_sum(lambda: f64, profile: &ResidualProfile, t: f64) -> Result<f64> {
    sum_cells(profile, t, |x_lo, w| Ok((-lambda * x_lo).exp() * h1(w, lambda)))
}

/// Error relative to the natural response, `eps (1 - e^{-|lambda| (t - t0)}) / (|lambda| |u0|)`,
/// for growing (`lambda < 0`) first-order problems.
pub fn bound_first_order_relative(problem: &OdeProblem, epsilon: f64, t: f64) -> Result<f64> {
    let ProblemClass::FirstOrderConstant { root, u0 } = problem.class else {
        return Err(wrong_class("first-order constant", problem));
    };
    problem.domain.check(t)?;
    if !(root.lambda < 0.0) {
        return Err(CertifyError::InvalidProblem(format!(
            "relative bound needs a negative decay rate, got {}",
            root.lambda
        )));
    }
    if u0.norm() == 0.0 {
        return Err(CertifyError::ZeroInitialCondition);
    }
    if !(epsilon >= 0.0) {
        return Err(CertifyError::InvalidProblem("epsilon must be nonnegative".into()));
    }
    let rate = root.lambda.abs();
    Ok(epsilon * h1(t - problem.domain.t0, rate) / u0.norm())
}

/// `sum_i eps_i int K_n(t - tau) dtau`; a single cell gives `eps phi_n(t)`.
pub fn bound_higher_order(problem: &OdeProblem, profile: &ResidualProfile, t: f64) -> Result<f64> {
    let ProblemClass::HigherOrderConstant { roots, .. } = &problem.class else {
        return Err(wrong_class("higher-order constant", problem));
    };
    problem.require_nonnegative_decay()?;
    check_time(problem, profile, t)?;
    let lambdas: Vec<f64> = roots.iter().map(|r| r.lambda).collect();
    sum_cells(profile, t, |x_lo, w| Ok(chain_cell_integral(&lambdas, x_lo, w)?.0))
}

/// Precomputed norms for the Jordan-chain bound.
#[derive(Clone, Debug)]
pub struct SystemBoundContext {
    blocks: Vec<(f64, usize)>,
    modal_norm: f64,
    modal_inv_norm: f64,
    norm: NormP,
}

impl SystemBoundContext {
    pub fn new(system: &LinearSystem, norm: NormP) -> Result<Self> {
        if let Some(b) = system.blocks().iter().find(|b| b.root.lambda < 0.0) {
            return Err(CertifyError::NegativeDecay { lambda: b.root.lambda });
        }
        Ok(Self {
            blocks: system.blocks().iter().map(|b| (b.root.lambda, b.size)).collect(),
            modal_norm: system.modal().norm(norm),
            modal_inv_norm: system.modal_inverse().norm(norm),
            norm,
        })
    }

    /// Bounds on the modal-coordinate error components, block by block,
    /// top of each chain first.
    pub fn component_bounds(&self, profile: &ResidualProfile, t: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for &(lambda, size) in &self.blocks {
            // chain[m] = sum_i eps_i int s^m/m! e^{-lambda s}
            let chain: Vec<f64> = (0..size)
                .map(|m| sum_cells(profile, t, |x_lo, w| Ok(poly_exp_cell(m, lambda, x_lo, w))))
                .collect::<Result<_>>()?;
            for j in 0..size {
                let reach = size - 1 - j;
                out.push(self.modal_inv_norm * chain[..=reach].iter().sum::<f64>());
            }
        }
        Ok(out)
    }

    pub fn bound(&self, profile: &ResidualProfile, t: f64) -> Result<f64> {
        let comps = self.component_bounds(profile, t)?;
        Ok(self.modal_norm * self.norm.vector_norm(comps))
    }
}

/// `||M||_p * || (||M^{-1}||_p sum_m chain integrals)_j ||_p` over all chain positions.
pub fn bound_system(problem: &OdeProblem, profile: &ResidualProfile, t: f64) -> Result<f64> {
    let ProblemClass::LinearSystem(system) = &problem.class else {
        return Err(wrong_class("linear system", problem));
    };
    check_time(problem, profile, t)?;
    SystemBoundContext::new(system, profile.norm_p)?.bound(profile, t)
}

fn tight_quadrature() -> SimpsonOptions {
    SimpsonOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_depth: 50, max_evals: 2_000_000 }
}

/// Antiderivative of `p`, either supplied or integrated from anchor nodes.
#[derive(Clone)]
enum Antiderivative {
    Supplied(ScalarFn),
    Numeric { p: ScalarFn, anchors: Vec<f64>, values: Vec<f64> },
}

impl Antiderivative {
    fn build(p: &ScalarFn, supplied: &Option<ScalarFn>, t0: f64, t1: f64) -> Result<Self> {
        if let Some(pp) = supplied {
            return Ok(Self::Supplied(pp.clone()));
        }
        const ANCHORS: usize = 64;
        let anchors = crate::model::Interval::new(t0, t1)?.linspace(ANCHORS + 1);
        let f = |x: f64| p(&Jet::constant(x, 0)).value();
        let mut values = vec![0.0];
        for w in anchors.windows(2) {
            let last = *values.last().unwrap();
            values.push(last + adaptive_simpson(&f, w[0], w[1], tight_quadrature())?);
        }
        Ok(Self::Numeric { p: p.clone(), anchors, values })
    }

    fn eval(&self, x: f64) -> Result<f64> {
        match self {
            Self::Supplied(pp) => Ok(pp(&Jet::constant(x, 0)).value()),
            Self::Numeric { p, anchors, values } => {
                let h = anchors[1] - anchors[0];
                let k = (((x - anchors[0]) / h).floor().max(0.0) as usize).min(anchors.len() - 2);
                let f = |s: f64| p(&Jet::constant(s, 0)).value();
                Ok(values[k] + adaptive_simpson(&f, anchors[k], x, tight_quadrature())?)
            }
        }
    }
}

/// Cached per-cell integrals for the nonconstant-coefficient bound.
#[derive(Clone)]
pub struct NonconstantBoundContext {
    antiderivative: Antiderivative,
    cuts: Vec<f64>,
    /// `P(b_i)` and `int_{a_i}^{b_i} e^{P(tau) - P(b_i)} dtau`.
    right_values: Vec<f64>,
    full_cells: Vec<f64>,
}

impl NonconstantBoundContext {
    pub fn new(problem: &OdeProblem, profile: &ResidualProfile) -> Result<Self> {
        let ProblemClass::NonconstantFirstOrder { p, antiderivative, .. } = &problem.class else {
            return Err(wrong_class("nonconstant first-order", problem));
        };
        let antiderivative = Antiderivative::build(p, antiderivative, problem.domain.t0, problem.domain.t1)?;
        let cuts = profile.partition.cut_points.clone();
        let mut right_values = Vec::new();
        let mut full_cells = Vec::new();
        for w in cuts.windows(2) {
            let pb = antiderivative.eval(w[1])?;
            right_values.push(pb);
            full_cells.push(integrate_exp_p(&antiderivative, w[0], w[1], pb)?);
        }
        Ok(Self { antiderivative, cuts, right_values, full_cells })
    }

    /// `e^{-P(t)} sum_i eps_i int_{I_i ∩ [t0, t]} e^{P(tau)} dtau`.
    pub fn bound(&self, profile: &ResidualProfile, t: f64) -> Result<f64> {
        if profile.partition.cut_points != self.cuts {
            return Err(CertifyError::InvalidProblem("profile partition changed".into()));
        }
        let pt = self.antiderivative.eval(t)?;
        let mut total = 0.0;
        for (i, &eps) in profile.eps.iter().enumerate() {
            let (a, b) = (self.cuts[i], self.cuts[i + 1]);
            if a >= t {
                break;
            }
            if eps == 0.0 {
                continue;
            }
            let part = if b <= t {
                (self.right_values[i] - pt).exp() * self.full_cells[i]
            } else {
                integrate_exp_p(&self.antiderivative, a, t, pt)?
            };
            total += eps * part;
        }
        Ok(total)
    }
}

fn integrate_exp_p(pp: &Antiderivative, a: f64, b: f64, shift: f64) -> Result<f64> {
    let failure = std::cell::RefCell::new(None);
    let f = |x: f64| match pp.eval(x) {
        Ok(v) => (v - shift).exp(),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let result = adaptive_simpson(&f, a, b, tight_quadrature());
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    result
}

/// Integrating-factor bound for `u' + (p + i q) u = f`.
pub fn bound_nonconstant(problem: &OdeProblem, profile: &ResidualProfile, t: f64) -> Result<f64> {
    check_time(problem, profile, t)?;
    NonconstantBoundContext::new(problem, profile)?.bound(profile, t)
}

/// Bound at every time of an increasing grid, dispatched on the problem class.
pub fn bound_curve(problem: &OdeProblem, profile: &ResidualProfile, times: &[f64]) -> Result<BoundCurve> {
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CertifyError::InvalidProblem("bound times must be strictly increasing".into()));
    }
    for &t in times {
        check_time(problem, profile, t)?;
    }
    let values: Vec<f64> = match &problem.class {
        ProblemClass::FirstOrderConstant { root, .. } => {
            times.iter().map(|&t| first_order_sum(root.lambda, profile, t)).collect::<Result<_>>()?
        }
        ProblemClass::HigherOrderConstant { .. } => {
            times.iter().map(|&t| bound_higher_order(problem, profile, t)).collect::<Result<_>>()?
        }
        ProblemClass::LinearSystem(system) => {
            let ctx = SystemBoundContext::new(system, profile.norm_p)?;
            times.iter().map(|&t| ctx.bound(profile, t)).collect::<Result<_>>()?
        }
        ProblemClass::NonconstantFirstOrder { .. } => {
            let ctx = NonconstantBoundContext::new(problem, profile)?;
            times.iter().map(|&t| ctx.bound(profile, t)).collect::<Result<_>>()?
        }
    };
    Ok(BoundCurve {
        times: times.to_vec(),
        values,
        kind: BoundKind::AbsoluteError,
        theorem_tag: theorem_tag(problem).to_string(),
        partition_cells: profile.n_cells(),
    })
}

/// Relative-error curve for growing first-order problems.
pub fn relative_bound_curve(problem: &OdeProblem, epsilon: f64, times: &[f64]) -> Result<BoundCurve> {
    let values = times.iter().map(|&t| bound_first_order_relative(problem, epsilon, t)).collect::<Result<_>>()?;
    Ok(BoundCurve {
        times: times.to_vec(),
        values,
        kind: BoundKind::RelativeToNaturalResponse,
        theorem_tag: TAG_FIRST_ORDER_RELATIVE.to_string(),
        partition_cells: 1,
    })
}

fn wrong_class(expected: &str, problem: &OdeProblem) -> CertifyError {
    CertifyError::InvalidProblem(format!("expected a {expected} problem, got {}", problem.kind_name()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::find_case;

    #[test]
    fn first_order_single_cell_closed_form() {
        let case = find_case("fo-exp").unwrap();
        let prof = ResidualProfile::constant(case.problem.domain, 0.2).unwrap();
        for t in [0.0, 0.5, 3.0] {
            let b = bound_first_order(&case.problem, &prof, t).unwrap();
            assert!((b - 0.2 * (1.0 - (-3.0 * t).exp()) / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_profile_does_not_depend_on_partition() {
        for name in ["ho-damp-poly", "ho-osc-log", "sys-jordan6", "nc-trig"] {
            let case = find_case(name).unwrap();
            let times = case.problem.domain.linspace(7);
            let a = bound_curve(&case.problem, &ResidualProfile::constant(case.problem.domain, 0.1).unwrap(), &times)
                .unwrap();
            let b = bound_curve(
                &case.problem,
                &ResidualProfile::uniform_constant(case.problem.domain, 10, 0.1).unwrap(),
                &times,
            )
            .unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() <= 1e-10 * x.max(1e-300), "{name}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn relative_bound_needs_growth_and_nonzero_start() {
        let case = find_case("fo-poly").unwrap();
        assert!(bound_first_order_relative(&case.problem, 0.1, 1.0).is_err());
    }

    #[test]
    fn out_of_domain_time_rejected() {
        let case = find_case("fo-poly").unwrap();
        let prof = ResidualProfile::constant(case.problem.domain, 0.1).unwrap();
        assert!(matches!(bound_first_order(&case.problem, &prof, 3.5), Err(CertifyError::OutsideDomain { .. })));
    }

    #[test]
    fn csv_format() {
        let c = BoundCurve {
            times: vec![0.0, 1.0],
            values: vec![0.0, 0.5],
            kind: BoundKind::AbsoluteError,
            theorem_tag: TAG_FIRST_ORDER.into(),
            partition_cells: 1,
        };
        let csv = c.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "t,bound,kind,theorem_tag,cells");
        assert!(csv.lines().nth(2).unwrap().starts_with("1.0000000000000000e0,5.0000000000000000e-1,absolute"));
    }
}
