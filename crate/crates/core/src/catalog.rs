//! Registered scalar functions of time, usable as exact solutions, forcing
//! terms and variable coefficients from config files.
//!
//! Each entry maps a time jet to a jet, so derivatives come for free. A
//! config term is either a bare entry name (`"exp(-3t)"`), a numeric
//! constant (`"2.5"`) or a scaled entry (`"-3*ln(1+t)"`).

use std::sync::Arc;

use crate::error::{CertifyError, Result};
use crate::jet::Jet;

pub type ScalarFn = Arc<dyn Fn(&Jet) -> Jet + Send + Sync>;

type Entry = (&'static str, fn(&Jet) -> Jet);

fn c(t: &Jet, v: f64) -> Jet {
    Jet::constant(v, t.order())
}

fn exp_scaled(t: &Jet, k: f64) -> Jet {
    t.scale(k).exp()
}

const ENTRIES: &[Entry] = &[
    ("0", |t| c(t, 0.0)),
    ("1", |t| c(t, 1.0)),
    ("t", |t| t.clone()),
    ("t^2", |t| t * t),
    ("t^3", |t| t.powi(3)),
    ("t^2+t+1", |t| &(t.clone() + 1.0) * t + 1.0),
    ("exp(t)", |t| t.exp()),
    ("exp(-t)", |t| exp_scaled(t, -1.0)),
    ("exp(2t)", |t| exp_scaled(t, 2.0)),
    ("exp(-2t)", |t| exp_scaled(t, -2.0)),
    ("exp(-3t)", |t| exp_scaled(t, -3.0)),
    ("exp(-4t)", |t| exp_scaled(t, -4.0)),
    ("sin(t)", |t| t.sin()),
    ("cos(t)", |t| t.cos()),
    ("sin(3t)", |t| t.scale(3.0).sin()),
    ("cos(3t)", |t| t.scale(3.0).cos()),
    ("sin(t^2)", |t| (t * t).sin()),
    ("t*cos(t)", |t| t * &t.cos()),
    ("ln(1+t)", |t| (t.clone() + 1.0).ln()),
    ("1/(1+t)", |t| (t.clone() + 1.0).recip()),
    ("1/(1+t)^2", |t| (t.clone() + 1.0).powi(2).recip()),
    ("1/(t^2+1)", |t| ((t * t) + 1.0).recip()),
    ("1/(1+sin(t))", |t| (t.sin() + 1.0).recip()),
    ("exp(-t)/(1+t)", |t| exp_scaled(t, -1.0) / (t.clone() + 1.0)),
    ("2t/(t^2+1)", |t| t.scale(2.0) / ((t * t) + 1.0)),
    ("cos(t)/(1+sin(t))", |t| {
        let (s, co) = t.sin_cos();
        co / (s + 1.0)
    }),
    ("(t+2)/(t+1)", |t| (t.clone() + 2.0) / (t.clone() + 1.0)),
    ("ln(t^2+1)", |t| ((t * t) + 1.0).ln()),
    ("ln(1+sin(t))", |t| (t.sin() + 1.0).ln()),
    ("t+ln(1+t)", |t| t.clone() + (t.clone() + 1.0).ln()),
];

/// Names of every registered entry, in registration order.
pub fn names() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|(n, _)| *n)
}

pub fn lookup(name: &str) -> Result<fn(&Jet) -> Jet> {
    ENTRIES
        .iter()
        .find(|(n, _)| *n == name.trim())
        .map(|(_, f)| *f)
        .ok_or_else(|| CertifyError::UnknownCatalogEntry(name.to_string()))
}

fn parse_term(term: &str) -> Result<(f64, Option<fn(&Jet) -> Jet>)> {
    let term = term.trim();
    if let Ok(v) = term.parse::<f64>() {
        return Ok((v, None));
    }
    if let Ok(f) = lookup(term) {
        return Ok((1.0, Some(f)));
    }
    if let Some((coef, rest)) = term.split_once('*') {
        if let Ok(v) = coef.trim().parse::<f64>() {
            return Ok((v, Some(lookup(rest)?)));
        }
    }
    Err(CertifyError::UnknownCatalogEntry(term.to_string()))
}

/// The sum of the given terms as a single function.
pub fn sum_of_terms<S: AsRef<str>>(terms: &[S]) -> Result<ScalarFn> {
    let parsed: Vec<(f64, Option<fn(&Jet) -> Jet>)> =
        terms.iter().map(|s| parse_term(s.as_ref())).collect::<Result<_>>()?;
    Ok(Arc::new(move |t: &Jet| {
        let mut acc = Jet::zero(t.order());
        for (coef, f) in &parsed {
            acc = match f {
                Some(f) => acc + f(t).scale(*coef),
                None => acc + *coef,
            };
        }
        acc
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_sum_with_coefficients() {
        let f = sum_of_terms(&["exp(-3t)", "-3*ln(1+t)", "1/(1+t)"]).unwrap();
        let t = 0.8_f64;
        let v = f(&Jet::variable(t, 0)).value();
        let expected = (-3.0 * t).exp() - 3.0 * (1.0 + t).ln() + 1.0 / (1.0 + t);
        assert!((v - expected).abs() < 1e-15);
    }

    #[test]
    fn unknown_entry_is_reported() {
        assert!(matches!(sum_of_terms(&["gamma(t)"]), Err(CertifyError::UnknownCatalogEntry(_))));
    }

    #[test]
    fn every_entry_evaluates_finite_on_unit_interval() {
        for name in names() {
            let f = lookup(name).unwrap();
            for i in 0..=10 {
                let y = f(&Jet::variable(i as f64 * 0.1, 3));
                assert!(y.coeffs().iter().all(|c| c.is_finite()), "{name}");
            }
        }
    }
}
