//! Certified problem classes, manufactured-solution cases and the linear
//! differential operators they define.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, ScalarFn};
use crate::error::{CertifyError, Result};
use crate::jet::{ComplexJet, Jet};
use crate::linalg::{CMatrix, NormP};

/// Factor `(x + lambda + i omega)` of a characteristic polynomial, or the
/// eigenvalue of a Jordan block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexRoot {
    pub lambda: f64,
    pub omega: f64,
}

impl ComplexRoot {
    pub fn new(lambda: f64, omega: f64) -> Result<Self> {
        if !lambda.is_finite() || !omega.is_finite() {
            return Err(CertifyError::InvalidProblem(format!("non-finite root ({lambda}, {omega})")));
        }
        Ok(Self { lambda, omega })
    }

    pub fn real(lambda: f64) -> Self {
        Self { lambda, omega: 0.0 }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.lambda, self.omega)
    }
}

/// Closed, finite time interval `[t0, t1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub t0: f64,
    pub t1: f64,
}

impl Interval {
    pub fn new(t0: f64, t1: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(CertifyError::InvalidProblem(format!("invalid interval [{t0}, {t1}]")));
        }
        Ok(Self { t0, t1 })
    }

    pub fn length(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t1
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(CertifyError::OutsideDomain { t, t0: self.t0, t1: self.t1 })
        }
    }

    /// `n` equally spaced points including both endpoints.
    pub fn linspace(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.t0],
            _ => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.t1
                    } else {
                        self.t0 + self.length() * (i as f64) / ((n - 1) as f64)
                    }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    pub root: ComplexRoot,
    pub size: usize,
}

/// `u' + M J M^-1 u = f`, stored through its modal matrix and Jordan blocks.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    modal: CMatrix,
    modal_inv: CMatrix,
    generator: CMatrix,
    blocks: Vec<JordanBlock>,
    u0: Vec<Complex64>,
    norm: NormP,
}

impl LinearSystem {
    pub fn new(modal: CMatrix, blocks: Vec<JordanBlock>, u0: Vec<Complex64>, norm: NormP) -> Result<Self> {
        let n = modal.dim();
        let total: usize = blocks.iter().map(|b| b.size).sum();
        if blocks.iter().any(|b| b.size == 0) {
            return Err(CertifyError::InvalidProblem("Jordan block of size 0".into()));
        }
        if total != n {
            return Err(CertifyError::DimensionMismatch { expected: n, got: total });
        }
        if u0.len() != n {
            return Err(CertifyError::DimensionMismatch { expected: n, got: u0.len() });
        }
        let modal_inv = modal.inverse()?;
        if !modal.cond(norm)?.is_finite() {
            return Err(CertifyError::InvalidProblem("modal matrix condition number is not finite".into()));
        }
        let jordan = jordan_matrix(&blocks);
        let generator = modal.matmul(&jordan).matmul(&modal_inv);
        Ok(Self { modal, modal_inv, generator, blocks, u0, norm })
    }

    pub fn modal(&self) -> &CMatrix {
        &self.modal
    }

    pub fn modal_inverse(&self) -> &CMatrix {
        &self.modal_inv
    }

    /// `A = M J M^-1`.
    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    pub fn blocks(&self) -> &[JordanBlock] {
        &self.blocks
    }

    pub fn u0(&self) -> &[Complex64] {
        &self.u0
    }

    pub fn norm(&self) -> NormP {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.modal.dim()
    }

    pub fn with_norm(mut self, norm: NormP) -> Self {
        self.norm = norm;
        self
    }
}

/// Block-diagonal upper-bidiagonal Jordan matrix.
pub fn jordan_matrix(blocks: &[JordanBlock]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.size).sum();
    let mut j = CMatrix::zeros(n);
    let mut offset = 0;
    for b in blocks {
        for i in 0..b.size {
            j[(offset + i, offset + i)] = b.root.value();
            if i + 1 < b.size {
                j[(offset + i, offset + i + 1)] = Complex64::new(1.0, 0.0);
            }
        }
        offset += b.size;
    }
    j
}

/// The four certified problem classes.
#[derive(Clone)]
pub enum ProblemClass {
    /// `u' + (lambda + i omega) u = f`
    FirstOrderConstant { root: ComplexRoot, u0: Complex64 },
    /// `u^(n) + a_{n-1} u^(n-1) + ... + a_0 u = f` with `p_c(x) = prod (x + lambda_k + i omega_k)`
    HigherOrderConstant { roots: Vec<ComplexRoot>, ics: Vec<Complex64> },
    LinearSystem(LinearSystem),
    /// `u' + (p(t) + i q(t)) u = f`; `antiderivative` is `P(t) = int_{t0}^t p`.
    NonconstantFirstOrder { p: ScalarFn, q: Option<ScalarFn>, antiderivative: Option<ScalarFn>, u0: Complex64 },
}

impl fmt::Debug for ProblemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FirstOrderConstant { root, u0 } => {
                f.debug_struct("FirstOrderConstant").field("root", root).field("u0", u0).finish()
            }
            Self::HigherOrderConstant { roots, ics } => {
                f.debug_struct("HigherOrderConstant").field("roots", roots).field("ics", ics).finish()
            }
            Self::LinearSystem(s) => f.debug_tuple("LinearSystem").field(s).finish(),
            Self::NonconstantFirstOrder { antiderivative, u0, q, .. } => f
                .debug_struct("NonconstantFirstOrder")
                .field("has_q", &q.is_some())
                .field("has_antiderivative", &antiderivative.is_some())
                .field("u0", u0)
                .finish(),
        }
    }
}

/// Jets of a (possibly vector-valued) function of time.
pub type ExactFn = Arc<dyn Fn(&Jet) -> Vec<ComplexJet> + Send + Sync>;

#[derive(Clone)]
pub enum Forcing {
    Function(Arc<dyn Fn(f64) -> Vec<Complex64> + Send + Sync>),
    /// `f := L(u_exact)`, evaluated through jets of the exact solution.
    Manufactured(ExactFn),
}

/// One term `coeff * u_component^(order)` of residual row `row`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorTerm {
    pub row: usize,
    pub component: usize,
    pub order: usize,
    pub coeff: Complex64,
}

#[derive(Clone)]
pub struct OdeProblem {
    pub class: ProblemClass,
    pub forcing: Forcing,
    pub domain: Interval,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem").field("class", &self.class).field("domain", &self.domain).finish()
    }
}

impl OdeProblem {
    pub fn new(class: ProblemClass, forcing: Forcing, domain: Interval) -> Result<Self> {
        if let ProblemClass::HigherOrderConstant { roots, ics } = &class {
            if roots.is_empty() {
                return Err(CertifyError::InvalidProblem("higher-order problem without roots".into()));
            }
            if roots.len() != ics.len() {
                return Err(CertifyError::DimensionMismatch { expected: roots.len(), got: ics.len() });
            }
        }
        Ok(Self { class, forcing, domain })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.class {
            ProblemClass::FirstOrderConstant { .. } => "first-order-constant",
            ProblemClass::HigherOrderConstant { .. } => "higher-order-constant",
            ProblemClass::LinearSystem(_) => "linear-system",
            ProblemClass::NonconstantFirstOrder { .. } => "nonconstant-first-order",
        }
    }

    /// Number of (complex) solution components.
    pub fn dim(&self) -> usize {
        match &self.class {
            ProblemClass::LinearSystem(s) => s.dim(),
            _ => 1,
        }
    }

    /// Highest derivative appearing in the operator.
    pub fn order(&self) -> usize {
        match &self.class {
            ProblemClass::HigherOrderConstant { roots, .. } => roots.len(),
            _ => 1,
        }
    }

    /// Norm used for residual and error vectors (systems only; scalars use |.|).
    pub fn norm(&self) -> NormP {
        match &self.class {
            ProblemClass::LinearSystem(s) => s.norm(),
            _ => NormP::Two,
        }
    }

    /// Initial conditions: entry `k` holds `u^(k)(t0)` for every component.
    pub fn initial_conditions(&self) -> Vec<Vec<Complex64>> {
        match &self.class {
            ProblemClass::FirstOrderConstant { u0, .. } | ProblemClass::NonconstantFirstOrder { u0, .. } => {
                vec![vec![*u0]]
            }
            ProblemClass::HigherOrderConstant { ics, .. } => ics.iter().map(|&c| vec![c]).collect(),
            ProblemClass::LinearSystem(s) => vec![s.u0().to_vec()],
        }
    }

    /// Terms of `L u` at time `t`.
    pub fn operator_terms(&self, t: f64) -> Vec<OperatorTerm> {
        let one = Complex64::new(1.0, 0.0);
        let term = |row, component, order, coeff| OperatorTerm { row, component, order, coeff };
        match &self.class {
            ProblemClass::FirstOrderConstant { root, .. } => {
                vec![term(0, 0, 1, one), term(0, 0, 0, root.value())]
            }
            ProblemClass::HigherOrderConstant { roots, .. } => {
                let n = roots.len();
                let a = expand_characteristic(roots);
                let mut terms = vec![term(0, 0, n, one)];
                terms.extend(a.iter().enumerate().map(|(k, &c)| term(0, 0, k, c)));
                terms
            }
            ProblemClass::LinearSystem(s) => {
                let n = s.dim();
                let a = s.generator();
                let mut terms: Vec<OperatorTerm> = (0..n).map(|i| term(i, i, 1, one)).collect();
                for i in 0..n {
                    for j in 0..n {
                        if a[(i, j)] != Complex64::new(0.0, 0.0) {
                            terms.push(term(i, j, 0, a[(i, j)]));
                        }
                    }
                }
                terms
            }
            ProblemClass::NonconstantFirstOrder { p, q, .. } => {
                let tj = Jet::variable(t, 0);
                let re = p(&tj).value();
                let im = q.as_ref().map_or(0.0, |q| q(&tj).value());
                vec![term(0, 0, 1, one), term(0, 0, 0, Complex64::new(re, im))]
            }
        }
    }

    /// `L u` at `t`, given jets (of order >= `self.order()`) of every component.
    pub fn apply_operator(&self, u: &[ComplexJet], t: f64) -> Result<Vec<Complex64>> {
        if u.len() != self.dim() {
            return Err(CertifyError::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        if let Some(j) = u.iter().find(|j| j.order() < self.order()) {
            return Err(CertifyError::DimensionMismatch { expected: self.order(), got: j.order() });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for term in self.operator_terms(t) {
            out[term.row] += term.coeff * u[term.component].derivative(term.order);
        }
        Ok(out)
    }

    pub fn forcing_at(&self, t: f64) -> Vec<Complex64> {
        match &self.forcing {
            Forcing::Function(f) => f(t),
            Forcing::Manufactured(exact) => {
                let jets = exact(&Jet::variable(t, self.order()));
                self.apply_operator(&jets, t).expect("manufactured solution has the problem's shape")
            }
        }
    }

    /// Whether every coefficient, initial condition and (sampled) forcing value is real.
    pub fn is_real(&self) -> bool {
        let coeffs_real = self.operator_terms(self.domain.t0).iter().all(|t| t.coeff.im == 0.0)
            && match &self.class {
                ProblemClass::NonconstantFirstOrder { q, .. } => q.is_none(),
                _ => true,
            };
        let ics_real = self.initial_conditions().iter().flatten().all(|z| z.im == 0.0);
        let forcing_real = self
            .domain
            .linspace(17)
            .into_iter()
            .all(|t| self.forcing_at(t).iter().all(|z| z.im.abs() <= 1e-14 * (1.0 + z.re.abs())));
        coeffs_real && ics_real && forcing_real
    }

    /// Fails unless every decay rate the bound engine relies on is nonnegative.
    pub fn require_nonnegative_decay(&self) -> Result<()> {
        let lambdas: Vec<f64> = match &self.class {
            ProblemClass::HigherOrderConstant { roots, .. } => roots.iter().map(|r| r.lambda).collect(),
            ProblemClass::LinearSystem(s) => s.blocks().iter().map(|b| b.root.lambda).collect(),
            _ => Vec::new(),
        };
        match lambdas.into_iter().find(|&l| l < 0.0) {
            Some(lambda) => Err(CertifyError::NegativeDecay { lambda }),
            None => Ok(()),
        }
    }
}

/// Coefficients `a_0..a_{n-1}` of the monic polynomial `prod_k (x + lambda_k + i omega_k)`.
pub fn expand_characteristic(roots: &[ComplexRoot]) -> Vec<Complex64> {
    // poly[k] is the coefficient of x^k, leading 1 kept at the end
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let c = r.value();
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (k, &p) in poly.iter().enumerate() {
            next[k + 1] += p;
            next[k] += p * c;
        }
        poly = next;
    }
    poly.pop();
    poly
}

/// A problem with a known exact solution.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub problem: OdeProblem,
    pub exact: ExactFn,
    pub notes: String,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("problem", &self.problem)
            .field("notes", &self.notes)
            .finish()
    }
}

impl ManufacturedCase {
    /// Builds a case whose forcing is `L(exact)`.
    pub fn new(name: &str, class: ProblemClass, domain: Interval, exact: ExactFn, notes: &str) -> Result<Self> {
        let problem = OdeProblem::new(class, Forcing::Manufactured(exact.clone()), domain)?;
        Ok(Self { name: name.to_string(), problem, exact, notes: notes.to_string() })
    }

    /// Maximum of `|L(exact)(t) - f(t)|` over `probes` uniform points.
    pub fn operator_self_check(&self, probes: usize) -> f64 {
        let p = &self.problem;
        p.domain
            .linspace(probes)
            .into_iter()
            .map(|t| {
                let jets = (self.exact)(&Jet::variable(t, p.order()));
                let lu = p.apply_operator(&jets, t).expect("exact solution shape");
                let f = p.forcing_at(t);
                lu.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation between the exact solution's derivatives at `t0`
    /// and the stored initial conditions.
    pub fn initial_condition_mismatch(&self) -> f64 {
        let p = &self.problem;
        let ics = p.initial_conditions();
        let jets = (self.exact)(&Jet::variable(p.domain.t0, ics.len()));
        ics.iter()
            .enumerate()
            .flat_map(|(k, row)| row.iter().enumerate().map(move |(i, v)| (k, i, *v)))
            .map(|(k, i, v)| (jets[i].derivative(k) - v).norm())
            .fold(0.0, f64::max)
    }
}

/// Evaluates the exact solution of `case` at `t`.
pub fn exact_eval(case: &ManufacturedCase, t: f64) -> Vec<Complex64> {
    (case.exact)(&Jet::variable(t, 0)).iter().map(|j| j.value()).collect()
}

fn scalar_exact(f: ScalarFn) -> ExactFn {
    Arc::new(move |t: &Jet| vec![f(t).to_complex()])
}

fn terms(list: &[&str]) -> ScalarFn {
    catalog::sum_of_terms(list).expect("suite uses registered catalog entries")
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Default seed for the random orthogonal modal matrix of the system case.
pub const DEFAULT_SUITE_SEED: u64 = 42;

/// The manufactured-solution suite with the default system seed.
pub fn manufactured_suite() -> Vec<ManufacturedCase> {
    manufactured_suite_with_seed(DEFAULT_SUITE_SEED)
}

pub fn manufactured_suite_with_seed(seed: u64) -> Vec<ManufacturedCase> {
    let domain = Interval { t0: 0.0, t1: 3.0 };
    let mut cases = Vec::new();

    let first_order = [
        ("fo-poly", &["exp(-3t)", "t^2+t+1"][..]),
        ("fo-trig", &["exp(-3t)", "sin(3t)", "cos(3t)"][..]),
        ("fo-exp", &["exp(-3t)", "exp(t)"][..]),
        ("fo-log", &["exp(-3t)", "-3*ln(1+t)", "1/(1+t)"][..]),
    ];
    for (name, exact) in first_order {
        let class = ProblemClass::FirstOrderConstant { root: ComplexRoot::real(3.0), u0: real(2.0) };
        cases.push(
            ManufacturedCase::new(name, class, domain, scalar_exact(terms(exact)), "u' + 3u = f, u(0) = 2")
                .expect("valid suite case"),
        );
    }

    let oscillator = vec![ComplexRoot { lambda: 0.0, omega: 1.0 }, ComplexRoot { lambda: 0.0, omega: -1.0 }];
    let damped = vec![ComplexRoot::real(1.0), ComplexRoot::real(3.0)];
    let second_order: [(&str, &Vec<ComplexRoot>, &[&str], [f64; 2]); 8] = [
        ("ho-osc-exp", &oscillator, &["sin(t)", "cos(t)", "exp(t)"], [2.0, 2.0]),
        ("ho-osc-poly", &oscillator, &["sin(t)", "cos(t)", "t^2+t+1"], [2.0, 2.0]),
        ("ho-osc-log", &oscillator, &["sin(t)", "cos(t)", "ln(1+t)"], [1.0, 2.0]),
        ("ho-osc-sinsq", &oscillator, &["sin(t)", "cos(t)", "sin(t^2)"], [1.0, 1.0]),
        ("ho-damp-exp", &damped, &["exp(-t)", "exp(-3t)", "exp(t)"], [3.0, -3.0]),
        ("ho-damp-poly", &damped, &["exp(-t)", "exp(-3t)", "t^2+t+1"], [3.0, -3.0]),
        ("ho-damp-log", &damped, &["exp(-t)", "exp(-3t)", "ln(1+t)"], [2.0, -3.0]),
        ("ho-damp-trig", &damped, &["exp(-t)", "exp(-3t)", "sin(t)", "cos(t)"], [3.0, -3.0]),
    ];
    for (name, roots, exact, ics) in second_order {
        let notes = if roots[0].lambda == 0.0 { "u'' + u = f" } else { "u'' + 4u' + 3u = f" };
        let class =
            ProblemClass::HigherOrderConstant { roots: roots.clone(), ics: ics.iter().map(|&x| real(x)).collect() };
        cases.push(ManufacturedCase::new(name, class, domain, scalar_exact(terms(exact)), notes).expect("valid suite case"));
    }

    let nonconstant: [(&str, &str, &str, &[&str], f64); 4] = [
        ("nc-recip", "1/(1+t)", "ln(1+t)", &["1/(1+t)", "t*cos(t)"], 1.0),
        ("nc-rational", "2t/(t^2+1)", "ln(t^2+1)", &["1/(t^2+1)", "exp(t)"], 2.0),
        ("nc-trig", "cos(t)/(1+sin(t))", "ln(1+sin(t))", &["1/(1+sin(t))", "t^2"], 1.0),
        ("nc-log", "(t+2)/(t+1)", "t+ln(1+t)", &["exp(-t)/(1+t)", "ln(1+t)"], 1.0),
    ];
    for (name, p, big_p, exact, u0) in nonconstant {
        let class = ProblemClass::NonconstantFirstOrder {
            p: terms(&[p]),
            q: None,
            antiderivative: Some(terms(&[big_p])),
            u0: real(u0),
        };
        cases.push(
            ManufacturedCase::new(name, class, domain, scalar_exact(terms(exact)), &format!("u' + p(t) u = f, p = {p}"))
                .expect("valid suite case"),
        );
    }

    cases.push(jordan_system_case(seed));
    cases
}

/// Six-dimensional system `u' + M J M^-1 u = f` with Jordan blocks of sizes
/// 3, 2, 1 at decay rates 4, 3, 2 and a seeded random orthogonal `M`.
///
/// The exact solution is `u = M v` with `v = v_p + exp(-J t) 1`, where
/// `v_p = (sin t, e^t - 1, t^2, t^3, e^{2t} - 1, ln(1+t))` is the particular
/// solution matching the tabulated modal forcing and the homogeneous part
/// carries the initial condition `v(0) = (1, ..., 1)`.
pub fn jordan_system_case(seed: u64) -> ManufacturedCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modal = CMatrix::random_orthogonal(6, &mut rng);
    let blocks = vec![
        JordanBlock { root: ComplexRoot::real(4.0), size: 3 },
        JordanBlock { root: ComplexRoot::real(3.0), size: 2 },
        JordanBlock { root: ComplexRoot::real(2.0), size: 1 },
    ];
    let u0 = modal.matvec(&[real(1.0); 6]);
    let system = LinearSystem::new(modal.clone(), blocks, u0, NormP::Two).expect("orthogonal modal matrix");
    let particular = [
        terms(&["sin(t)"]),
        terms(&["exp(t)", "-1"]),
        terms(&["t^2"]),
        terms(&["t^3"]),
        terms(&["exp(2t)", "-1"]),
        terms(&["ln(1+t)"]),
    ];
    let exact: ExactFn = Arc::new(move |t: &Jet| {
        let e4 = t.scale(-4.0).exp();
        let e3 = t.scale(-3.0).exp();
        let e2 = t.scale(-2.0).exp();
        let one = Jet::constant(1.0, t.order());
        // exp(-J t) applied to the all-ones vector, block by block
        let homogeneous = [
            &e4 * &(one.clone() - t.clone() + (t * t).scale(0.5)),
            &e4 * &(one.clone() - t.clone()),
            e4.clone(),
            &e3 * &(one.clone() - t.clone()),
            e3.clone(),
            e2,
        ];
        let v: Vec<Jet> = particular.iter().zip(homogeneous).map(|(p, h)| p(t) + h).collect();
        (0..6)
            .map(|i| {
                let mut acc = ComplexJet::zero(t.order());
                for (j, vj) in v.iter().enumerate() {
                    acc = acc + vj.to_complex().scale(modal[(i, j)]);
                }
                acc
            })
            .collect()
    });
    ManufacturedCase::new(
        "sys-jordan6",
        ProblemClass::LinearSystem(system),
        Interval { t0: 0.0, t1: 3.0 },
        exact,
        &format!("u' + M J M^-1 u = f, J = J3(4) + J2(3) + J1(2), orthogonal M (seed {seed})"),
    )
    .expect("valid system case")
}

pub fn find_case(name: &str) -> Option<ManufacturedCase> {
    manufactured_suite().into_iter().find(|c| c.name == name)
}
