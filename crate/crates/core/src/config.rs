//! TOML problem files.
//!
//! ```toml
//! name = "decay"
//! variant = "first_order"        # first_order | higher_order | system | nonconstant
//! solution = ["exp(-3t)", "t^2+t+1"]
//!
//! [domain]
//! t0 = 0.0
//! t1 = 3.0
//!
//! [[roots]]
//! lambda = 3.0
//! ```
//!
//! Functions are lists of catalog terms that are summed. A `solution` makes
//! the problem manufactured (forcing derived from it, initial conditions
//! optional); otherwise `forcing` and `u0` are required. Systems take one term
//! list per component, a `modal` matrix (real rows) or a `modal_seed` for a
//! random orthogonal one, and Jordan `blocks`.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::catalog::{self, ScalarFn};
use crate::error::{CertifyError, Result};
use crate::jet::Jet;
use crate::linalg::{CMatrix, NormP};
use crate::model::{
    ComplexRoot, ExactFn, Forcing, Interval, JordanBlock, LinearSystem, ManufacturedCase, OdeProblem, ProblemClass,
};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    FirstOrder,
    HigherOrder,
    System,
    Nonconstant,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootSpec {
    pub lambda: f64,
    #[serde(default)]
    pub omega: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub lambda: f64,
    #[serde(default)]
    pub omega: f64,
    pub size: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub t0: f64,
    pub t1: f64,
}

/// Either one term list (scalar problems) or one per component (systems).
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Terms {
    Scalar(Vec<String>),
    Vector(Vec<Vec<String>>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    pub variant: Variant,
    pub domain: DomainSpec,
    #[serde(default)]
    pub roots: Vec<RootSpec>,
    #[serde(default)]
    pub blocks: Vec<BlockSpec>,
    pub modal: Option<Vec<Vec<f64>>>,
    pub modal_seed: Option<u64>,
    pub norm: Option<String>,
    #[serde(default)]
    pub p: Vec<String>,
    pub q: Option<Vec<String>>,
    pub antiderivative: Option<Vec<String>>,
    pub solution: Option<Terms>,
    pub forcing: Option<Terms>,
    /// Initial values: `u^(k)(t0)` for scalar problems, `u(t0)` for systems.
    pub u0: Option<Vec<f64>>,
    #[serde(default)]
    pub notes: String,
}

/// A problem read from a config file, with its exact solution when known.
#[derive(Clone, Debug)]
pub enum LoadedProblem {
    Manufactured(ManufacturedCase),
    ForcingOnly { name: String, problem: OdeProblem },
}

impl LoadedProblem {
    pub fn name(&self) -> &str {
        match self {
            Self::Manufactured(c) => &c.name,
            Self::ForcingOnly { name, .. } => name,
        }
    }

    pub fn problem(&self) -> &OdeProblem {
        match self {
            Self::Manufactured(c) => &c.problem,
            Self::ForcingOnly { problem, .. } => problem,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> CertifyError {
    CertifyError::Config(msg.into())
}

fn component_fns(terms: &Terms, dim: usize, what: &str) -> Result<Vec<ScalarFn>> {
    let lists: Vec<Vec<String>> = match terms {
        Terms::Scalar(v) if dim == 1 => vec![v.clone()],
        Terms::Vector(v) => v.clone(),
        Terms::Scalar(_) => return Err(cfg_err(format!("{what} needs one term list per component"))),
    };
    if lists.len() != dim {
        return Err(cfg_err(format!("{what} has {} components, expected {dim}", lists.len())));
    }
    lists.iter().map(|l| catalog::sum_of_terms(l)).collect()
}

fn root(r: &RootSpec) -> Result<ComplexRoot> {
    ComplexRoot::new(r.lambda, r.omega)
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn dim(&self) -> usize {
        match self.variant {
            Variant::System => self.blocks.iter().map(|b| b.size).sum(),
            _ => 1,
        }
    }

    fn order(&self) -> usize {
        match self.variant {
            Variant::HigherOrder => self.roots.len(),
            _ => 1,
        }
    }

    pub fn build(&self) -> Result<LoadedProblem> {
        let domain = Interval::new(self.domain.t0, self.domain.t1)?;
        let dim = self.dim();
        if dim == 0 {
            return Err(cfg_err("system needs at least one Jordan block"));
        }
        let exact: Option<ExactFn> = match &self.solution {
            Some(t) => {
                let fns = component_fns(t, dim, "solution")?;
                Some(Arc::new(move |t: &Jet| fns.iter().map(|f| f(t).to_complex()).collect()))
            }
            None => None,
        };
        // initial data: explicit, else from the exact solution
        let ics: Vec<Complex64> = match (&self.u0, &exact) {
            (Some(v), _) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            (None, Some(e)) => {
                let jets = e(&Jet::variable(domain.t0, self.order()));
                if self.variant == Variant::System {
                    jets.iter().map(|j| j.value()).collect()
                } else {
                    (0..self.order()).map(|k| jets[0].derivative(k)).collect()
                }
            }
            (None, None) => return Err(cfg_err("u0 is required when no solution is given")),
        };
        let expected_ics = if self.variant == Variant::System { dim } else { self.order() };
        if ics.len() != expected_ics {
            return Err(cfg_err(format!("u0 has {} entries, expected {expected_ics}", ics.len())));
        }

        let class = match self.variant {
            Variant::FirstOrder => {
                let [r] = self.roots.as_slice() else {
                    return Err(cfg_err("first_order needs exactly one root"));
                };
                ProblemClass::FirstOrderConstant { root: root(r)?, u0: ics[0] }
            }
            Variant::HigherOrder => {
                if self.roots.is_empty() {
                    return Err(cfg_err("higher_order needs roots"));
                }
                ProblemClass::HigherOrderConstant { roots: self.roots.iter().map(root).collect::<Result<_>>()?, ics }
            }
            Variant::System => {
                let modal = match (&self.modal, self.modal_seed) {
                    (Some(rows), _) => CMatrix::from_real_rows(rows)?,
                    (None, Some(seed)) => CMatrix::random_orthogonal(dim, &mut ChaCha8Rng::seed_from_u64(seed)),
                    (None, None) => return Err(cfg_err("system needs modal or modal_seed")),
                };
                let blocks = self
                    .blocks
                    .iter()
                    .map(|b| Ok(JordanBlock { root: ComplexRoot::new(b.lambda, b.omega)?, size: b.size }))
                    .collect::<Result<Vec<_>>>()?;
                let norm = match &self.norm {
                    Some(s) => NormP::parse(s).ok_or_else(|| cfg_err(format!("unknown norm {s}")))?,
                    None => NormP::Two,
                };
                ProblemClass::LinearSystem(LinearSystem::new(modal, blocks, ics, norm)?)
            }
            Variant::Nonconstant => {
                if self.p.is_empty() {
                    return Err(cfg_err("nonconstant needs p"));
                }
                let opt = |v: &Option<Vec<String>>| v.as_ref().map(|l| catalog::sum_of_terms(l)).transpose();
                ProblemClass::NonconstantFirstOrder {
                    p: catalog::sum_of_terms(&self.p)?,
                    q: opt(&self.q)?,
                    antiderivative: opt(&self.antiderivative)?,
                    u0: ics[0],
                }
            }
        };

        match (exact, &self.forcing) {
            (Some(_), Some(_)) => Err(cfg_err("give either solution or forcing, not both")),
            (Some(e), None) => Ok(LoadedProblem::Manufactured(ManufacturedCase::new(
                &self.name,
                class,
                domain,
                e,
                &self.notes,
            )?)),
            (None, Some(f)) => {
                let fns = component_fns(f, dim, "forcing")?;
                let forcing = Forcing::Function(Arc::new(move |t: f64| {
                    let tj = Jet::constant(t, 0);
                    fns.iter().map(|f| Complex64::new(f(&tj).value(), 0.0)).collect()
                }));
                Ok(LoadedProblem::ForcingOnly {
                    name: self.name.clone(),
                    problem: OdeProblem::new(class, forcing, domain)?,
                })
            }
            (None, None) => Err(cfg_err("either solution or forcing is required")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::find_case;

    const FIRST: &str = r#"
name = "decay"
variant = "first_order"
solution = ["exp(-3t)", "t^2+t+1"]
[domain]
t0 = 0.0
t1 = 3.0
[[roots]]
lambda = 3.0
"#;

    #[test]
    fn first_order_config_matches_suite_case() {
        let LoadedProblem::Manufactured(case) = ProblemConfig::from_toml(FIRST).unwrap().build().unwrap() else {
            panic!("expected manufactured case");
        };
        let suite = find_case("fo-poly").unwrap();
        for t in [0.0, 1.0, 2.5] {
            assert!((case.problem.forcing_at(t)[0] - suite.problem.forcing_at(t)[0]).norm() < 1e-13);
        }
        assert_eq!(case.problem.initial_conditions()[0][0], Complex64::new(2.0, 0.0));
    }

    #[test]
    fn forcing_only_config_needs_u0() {
        let text = FIRST.replace("solution", "forcing");
        assert!(ProblemConfig::from_toml(&text).unwrap().build().is_err());
        let text = format!("u0 = [2.0]\n{text}");
        let loaded = ProblemConfig::from_toml(&text).unwrap().build().unwrap();
        assert!(matches!(loaded, LoadedProblem::ForcingOnly { .. }));
    }

    #[test]
    fn system_config() {
        let text = r#"
name = "sys"
variant = "system"
modal_seed = 3
solution = [["exp(-t)"], ["sin(t)"], ["t"]]
[domain]
t0 = 0.0
t1 = 2.0
[[blocks]]
lambda = 1.0
size = 2
[[blocks]]
lambda = 0.5
size = 1
"#;
        let loaded = ProblemConfig::from_toml(text).unwrap().build().unwrap();
        assert_eq!(loaded.problem().dim(), 3);
    }

    #[test]
    fn unknown_field_rejected() {
        let text = format!("colour = 1\n{FIRST}");
        assert!(matches!(ProblemConfig::from_toml(&text), Err(CertifyError::Config(_))));
    }
}
