mod common;

use common::*;
use odecert::candidate::{MlpCandidate, NetworkCandidate, ReparamKind, Reparametrization};
use odecert::catalog;
use odecert::jet::Jet;
use odecert::model::{find_case, manufactured_suite};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REL: f64 = 1e-5;
const ABS: f64 = 1e-7;
const STEP: f64 = 1e-3;

/// Checks derivative k of `jet(t)` against a central difference of derivative k-1.
fn check_orders(jet: &dyn Fn(f64) -> Jet, t: f64, what: &str) {
    for k in 1..=3 {
        let fd = central_diff(&|s| jet(s).derivative(k - 1), t, STEP);
        let got = jet(t).derivative(k);
        assert!(close(got, fd, REL, ABS), "{what} order {k} at t={t}: jet {got}, fd {fd}");
    }
}

#[test]
fn random_mlp_jets_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in 0..10u64 {
        let width = rng.random_range(4..16);
        let out = rng.random_range(1..3);
        let mlp = MlpCandidate::init(&[1, width, width, out], seed).unwrap();
        for _ in 0..50 {
            let t = rng.random_range(-1.0..4.0);
            for j in 0..out {
                check_orders(&|s| mlp.forward_jet(s, 3)[j].clone(), t, &format!("mlp {seed} out {j}"));
            }
        }
    }
}

#[test]
fn network_candidates_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = |x: f64| Complex64::new(x, 0.0);
    let reparams = [
        Reparametrization::new(ReparamKind::LagarisLinear, 0.0, vec![c(2.0)], None).unwrap(),
        Reparametrization::new(ReparamKind::ExpFirstOrder, 0.0, vec![c(2.0)], None).unwrap(),
        Reparametrization::new(ReparamKind::ExpSecondOrder, 0.0, vec![c(2.0)], Some(vec![c(-1.0)])).unwrap(),
    ];
    for (i, rp) in reparams.into_iter().enumerate() {
        let mlp = MlpCandidate::init(&[1, 8, 8, 2], i as u64).unwrap();
        let net = NetworkCandidate::new(mlp, rp, true).unwrap();
        for _ in 0..20 {
            let t = rng.random_range(0.0..3.0);
            check_orders(&|s| net.jet_eval(s, 3).unwrap()[0].map_scalar(|z| z.re), t, "re");
            check_orders(&|s| net.jet_eval(s, 3).unwrap()[0].map_scalar(|z| z.im), t, "im");
        }
    }
}

#[test]
fn catalog_terms_match_finite_differences() {
    for name in catalog::names() {
        let f = catalog::lookup(name).unwrap();
        for t in [0.1, 0.7, 1.9, 2.8] {
            check_orders(&|s| f(&Jet::variable(s, 3)), t, name);
        }
    }
}

#[test]
fn exact_solutions_match_finite_differences() {
    for case in manufactured_suite() {
        for t in [0.2, 1.1, 2.6] {
            for j in 0..case.problem.dim() {
                check_orders(&|s| (case.exact)(&Jet::variable(s, 3))[j].map_scalar(|z| z.re), t, &case.name);
            }
        }
    }
}

#[test]
fn fo_poly_closed_form_coefficients() {
    let case = find_case("fo-poly").unwrap();
    let u = (case.exact)(&Jet::variable(1.0, 1))[0].clone();
    let e3 = (-3.0f64).exp();
    assert!((u.value().re - (e3 + 3.0)).abs() < 1e-14);
    assert!((u.derivative(1).re - (-3.0 * e3 + 3.0)).abs() < 1e-13);
    let fd = central_diff(&|s| (case.exact)(&Jet::variable(s, 0))[0].value().re, 1.0, 1e-5);
    assert!(close(u.derivative(1).re, fd, 1e-6, 0.0));
}

#[test]
fn tanh_of_identity_at_zero() {
    let j = Jet::variable(0.0, 2).tanh();
    assert_eq!(j.coeffs(), &[0.0, 1.0, 0.0]);
}

fn jet_strategy() -> impl Strategy<Value = (f64, f64, f64)> {
    (-2.0f64..2.0, -2.0f64..2.0, 0.1f64..3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exp_ln_round_trip((a, b, t) in jet_strategy()) {
        let x = Jet::from_coeffs(vec![t, a, b, 0.5]);
        let y = x.ln().exp();
        for (p, q) in y.coeffs().iter().zip(x.coeffs()) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn product_then_quotient_is_identity((a, b, t) in jet_strategy()) {
        let x = Jet::from_coeffs(vec![t, a, b]);
        let y = Jet::from_coeffs(vec![b, t, a]);
        let z = (&x * &y) / x.clone();
        for (p, q) in z.coeffs().iter().zip(y.coeffs()) {
            prop_assert!((p - q).abs() <= 1e-11 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn pythagorean_identity((a, b, t) in jet_strategy()) {
        let x = Jet::from_coeffs(vec![t, a, b, a * b]);
        let (s, c) = x.sin_cos();
        let one = &s * &s + &c * &c;
        prop_assert!((one.coeffs()[0] - 1.0).abs() < 1e-14);
        for v in &one.coeffs()[1..] {
            prop_assert!(v.abs() < 1e-12);
        }
    }
}
