mod common;

use std::sync::Arc;

use common::*;
use num_complex::Complex64;
use odecert::bounds::kernels::big_h_k;
use odecert::bounds::{bound_curve, bound_first_order, bound_first_order_relative, bound_higher_order, BoundKind};
use odecert::candidate::{synthetic_constant_residual_candidate, Candidate};
use odecert::harness::{certify, CertifyOptions, Verdict};
use odecert::jet::Jet;
use odecert::linalg::{CMatrix, NormP};
use odecert::model::{
    find_case, manufactured_suite, ComplexRoot, ExactFn, Forcing, Interval, JordanBlock, LinearSystem, OdeProblem,
    ProblemClass,
};
use odecert::residual::ResidualProfile;
use odecert::CertifyError;
use proptest::prelude::*;

const REL: f64 = 1e-10;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn unforced(class: ProblemClass, t1: f64, dim: usize) -> OdeProblem {
    let forcing = Forcing::Function(Arc::new(move |_| vec![c(0.0); dim]));
    OdeProblem::new(class, forcing, Interval::new(0.0, t1).unwrap()).unwrap()
}

fn first_order(lambda: f64, t1: f64) -> OdeProblem {
    unforced(ProblemClass::FirstOrderConstant { root: ComplexRoot::real(lambda), u0: c(1.0) }, t1, 1)
}

fn single_cell(problem: &OdeProblem, eps: f64) -> ResidualProfile {
    ResidualProfile::constant(problem.domain, eps).unwrap()
}

fn check_curve(case: &str, eps: f64, printed: impl Fn(f64) -> f64) {
    let p = find_case(case).unwrap().problem;
    let times = p.domain.linspace(100);
    let curve = bound_curve(&p, &single_cell(&p, eps), &times).unwrap();
    for (t, v) in times.iter().zip(&curve.values) {
        let want = printed(*t);
        assert!(close(*v, want, REL, 1e-300), "{case} t={t}: {v} vs {want}");
    }
}

#[test]
fn single_cell_closed_forms() {
    let e = 0.37;
    check_curve("fo-poly", e, |t| e * (1.0 - (-3.0 * t).exp()) / 3.0);
    check_curve("ho-osc-exp", e, |t| e * t * t / 2.0);
    check_curve("ho-damp-exp", e, |t| e * (2.0 + (-3.0 * t).exp() - 3.0 * (-t).exp()) / 6.0);
    check_curve("nc-recip", e, |t| e * (t * t / 2.0 + t) / (t + 1.0));
    check_curve("nc-rational", e, |t| e * (t.powi(3) / 3.0 + t) / (t * t + 1.0));
    // derived from p(t) directly: P = ln(1 + sin t) and P = t + ln(1 + t)
    check_curve("nc-trig", e, |t| e * (t - t.cos() + 1.0) / (t.sin() + 1.0));
    check_curve("nc-log", e, |t| e * t / (t + 1.0));
    check_curve("sys-jordan6", e, |t| {
        let h = |k, l| big_h_k(t, l, k, 0.0).unwrap();
        e * (h(3, 4.0).powi(2) + h(2, 4.0).powi(2) + h(1, 4.0).powi(2) + h(2, 3.0).powi(2) + h(1, 3.0).powi(2)
            + h(1, 2.0).powi(2))
        .sqrt()
    });
}

#[test]
fn system_bound_capped() {
    let p = find_case("sys-jordan6").unwrap().problem;
    let times = p.domain.linspace(200);
    let curve = bound_curve(&p, &single_cell(&p, 1.0), &times).unwrap();
    assert!(curve.values.iter().all(|&v| v <= 6f64.sqrt() / 2.0));
}

#[test]
fn nonconstant_bound_at_one_matches_quadrature() {
    let p = find_case("nc-rational").unwrap().problem;
    let v = bound_curve(&p, &single_cell(&p, 1.0), &[0.0, 1.0]).unwrap().values[1];
    assert!((v - 2.0 / 3.0).abs() < 1e-12);
    let big_p = |t: f64| (1.0 + t * t).ln();
    let oracle = (-big_p(1.0)).exp() * simpson(&|s| big_p(s).exp(), 0.0, 1.0, 1e-14);
    assert!(close(v, oracle, 1e-8, 0.0));
}

#[test]
fn first_order_tends_to_eps_over_lambda() {
    let p = first_order(3.0, 20.0);
    let profile = single_cell(&p, 0.3);
    let v = bound_first_order(&p, &profile, 20.0).unwrap();
    assert!((v - 0.1).abs() < 1e-12);
    for t in [0.5f64, 2.0, 7.0] {
        let oracle = (-3.0 * t).exp() * trapezoid(&|s| 0.3 * (3.0 * s).exp(), 0.0, t, 100_000);
        assert!(close(bound_first_order(&p, &profile, t).unwrap(), oracle, 1e-6, 0.0));
    }
}

#[test]
fn relative_bound() {
    let mut p = first_order(-2.0, 30.0);
    assert_eq!(bound_first_order_relative(&p, 0.1, 0.0).unwrap(), 0.0);
    let v = bound_first_order_relative(&p, 0.1, 1.0).unwrap();
    let oracle = (2.0f64).exp().recip() * simpson(&|s| 0.1 * (2.0 * (1.0 - s)).exp(), 0.0, 1.0, 1e-15);
    assert!((v - 0.05 * (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    assert!(close(v, oracle, 1e-10, 0.0));
    assert!((bound_first_order_relative(&p, 0.1, 30.0).unwrap() - 0.05).abs() < 1e-15);
    assert!(bound_first_order_relative(&first_order(2.0, 1.0), 0.1, 0.5).is_err());
    p.class = ProblemClass::FirstOrderConstant { root: ComplexRoot::real(-2.0), u0: c(0.0) };
    assert!(matches!(bound_first_order_relative(&p, 0.1, 1.0), Err(CertifyError::ZeroInitialCondition)));
}

#[test]
fn one_by_one_system_equals_first_order() {
    let sys = LinearSystem::new(
        CMatrix::identity(1),
        vec![JordanBlock { root: ComplexRoot::real(3.0), size: 1 }],
        vec![c(1.0)],
        NormP::Two,
    )
    .unwrap();
    let ps = unforced(ProblemClass::LinearSystem(sys), 3.0, 1);
    let pf = first_order(3.0, 3.0);
    let prof = ResidualProfile::new(
        odecert::residual::Partition::uniform(pf.domain, 3).unwrap(),
        vec![0.5, 0.1, 0.2],
        NormP::Two,
        16,
    )
    .unwrap();
    let times = pf.domain.linspace(50);
    let a = bound_curve(&ps, &prof, &times).unwrap();
    let b = bound_curve(&pf, &prof, &times).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!(close(*x, *y, 1e-13, 1e-300));
    }
}

#[test]
fn constant_profile_refinement_changes_nothing() {
    let p = find_case("ho-damp-log").unwrap().problem;
    let times = p.domain.linspace(40);
    let one = bound_curve(&p, &single_cell(&p, 0.2), &times).unwrap();
    let ten = bound_curve(&p, &ResidualProfile::uniform_constant(p.domain, 10, 0.2).unwrap(), &times).unwrap();
    for (a, b) in one.values.iter().zip(&ten.values) {
        assert!(close(*b, *a, 1e-12, 1e-300));
    }
}

#[test]
fn zero_at_t0_and_for_zero_epsilon() {
    for case in manufactured_suite() {
        let p = &case.problem;
        let curve = bound_curve(p, &single_cell(p, 1.0), &[p.domain.t0]).unwrap();
        assert_eq!(curve.values, vec![0.0], "{}", case.name);
        assert_eq!(curve.kind, BoundKind::AbsoluteError);
        let zero = bound_curve(p, &single_cell(p, 0.0), &p.domain.linspace(20)).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0), "{}", case.name);
    }
}

#[test]
fn negative_rates_refused_for_higher_order() {
    let class = ProblemClass::HigherOrderConstant {
        roots: vec![ComplexRoot::real(-1.0), ComplexRoot::real(2.0)],
        ics: vec![c(1.0), c(0.0)],
    };
    let p = unforced(class, 1.0, 1);
    let e = bound_higher_order(&p, &single_cell(&p, 1.0), 0.5);
    assert!(matches!(e, Err(CertifyError::NegativeDecay { .. })));
}

#[test]
fn sharpness_of_first_order_bound() {
    let case = find_case("fo-poly").unwrap();
    for eps in [0.01, 0.3] {
        let cand = synthetic_constant_residual_candidate(&case, eps).unwrap();
        let cert = certify(&case.name, &case.problem, &cand, Some(&case.exact), &CertifyOptions::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::CertifiedAndVerified);
        let err = cert.error_curve.as_ref().unwrap();
        let dev = err.iter().zip(&cert.bound_curves[0].values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-9, "eps {eps}: {dev}");
    }
}

#[test]
fn exact_candidate_has_vanishing_bounds() {
    let case = find_case("ho-osc-poly").unwrap();
    let cert = certify(&case.name, &case.problem, &Candidate::exact(&case), Some(&case.exact), &CertifyOptions::default())
        .unwrap();
    assert!(cert.bound_curves.iter().flat_map(|c| &c.values).all(|&v| v <= 1e-8));
    assert!(cert.max_error.unwrap() == 0.0);
}

#[test]
fn understated_bound_is_a_violation() {
    // a candidate off by a constant the profile cannot see: residual is
    // measured on u' + 3u, so shift by a multiple of e^{-3t} (zero residual)
    let case = find_case("fo-trig").unwrap();
    let exact = case.exact.clone();
    let f: ExactFn = Arc::new(move |t: &Jet| {
        let shift = t.scale(-3.0).exp().scale(0.5).to_complex();
        exact(t).into_iter().map(|u| u + shift.clone()).collect()
    });
    let cand = Candidate::analytic("shifted", 1, f);
    let cert = certify(&case.name, &case.problem, &cand, Some(&case.exact), &CertifyOptions::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::Violation);
    assert!(cert.violations > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bounds_are_linear_in_epsilon(
        eps in proptest::collection::vec(0.0f64..2.0, 10),
        scale in 0.0f64..5.0,
        which in 0usize..17,
    ) {
        let case = &manufactured_suite()[which];
        let p = &case.problem;
        let prof = ResidualProfile::new(
            odecert::residual::Partition::uniform(p.domain, 10).unwrap(), eps, p.norm(), 16).unwrap();
        let times = p.domain.linspace(25);
        let a = bound_curve(p, &prof, &times).unwrap();
        let b = bound_curve(p, &prof.scaled(scale).unwrap(), &times).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((y - scale * x).abs() <= 1e-12 * (1.0 + scale * x));
        }
    }

    #[test]
    fn refining_a_profile_never_loosens_the_bound(
        eps in proptest::collection::vec(0.0f64..2.0, 10),
        which in 0usize..17,
    ) {
        // coarse cell value = max of its two fine halves
        let case = &manufactured_suite()[which];
        let p = &case.problem;
        let fine_part = odecert::residual::Partition::uniform(p.domain, 10).unwrap();
        let coarse_eps: Vec<f64> = eps.chunks(2).map(|c| c[0].max(c[1])).collect();
        let fine = ResidualProfile::new(fine_part, eps, p.norm(), 16).unwrap();
        let coarse = ResidualProfile::new(
            odecert::residual::Partition::uniform(p.domain, 5).unwrap(), coarse_eps, p.norm(), 32).unwrap();
        let times = p.domain.linspace(30);
        let f = bound_curve(p, &fine, &times).unwrap();
        let g = bound_curve(p, &coarse, &times).unwrap();
        for (x, y) in f.values.iter().zip(&g.values) {
            prop_assert!(*x <= y * (1.0 + 1e-12) + 1e-15);
        }
    }
}
