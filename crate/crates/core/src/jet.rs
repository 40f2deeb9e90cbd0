//! Truncated Taylor arithmetic ("jets") in a single scalar variable.
//!
//! A [`Jet`] of order `K` stores the normalized Taylor coefficients
//! `c[k] = u^(k)(t) / k!` of a function at a point. Every operation below is
//! the exact truncation of the corresponding power-series operation, so the
//! derivatives recovered with [`Jet::derivative`] are exact up to rounding.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Largest jet order any evaluator in this crate accepts.
pub const MAX_JET_ORDER: usize = 6;

/// Scalar field a jet can carry: `f64` or `Complex64`.
pub trait JetScalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn modulus(self) -> f64;
}

impl JetScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl JetScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn ln(self) -> Self {
        Complex64::ln(self)
    }
    fn sin(self) -> Self {
        Complex64::sin(self)
    }
    fn cos(self) -> Self {
        Complex64::cos(self)
    }
    fn tanh(self) -> Self {
        Complex64::tanh(self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Normalized Taylor coefficients of a function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T: JetScalar = f64> {
    coeffs: Vec<T>,
}

pub type ComplexJet = Jet<Complex64>;

impl<T: JetScalar> Jet<T> {
    /// Jet of the constant function `c`.
    pub fn constant(c: T, order: usize) -> Self {
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = c;
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(T::zero(), order)
    }

    /// Builds a jet from raw normalized coefficients. Panics on an empty vector.
    pub fn from_coeffs(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least the value coefficient");
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// The `k`-th derivative, `k! * c[k]`.
    pub fn derivative(&self, k: usize) -> T {
        self.coeffs[k].scale(factorial(k))
    }

    /// All derivatives `u, u', ..., u^(K)`.
    pub fn derivatives(&self) -> Vec<T> {
        (0..self.coeffs.len()).map(|k| self.derivative(k)).collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    pub fn add_constant(&self, c: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Same function, truncated or zero-extended to `order`.
    pub fn with_order(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, T::zero());
        Self { coeffs }
    }

    pub fn map_scalar<U: JetScalar>(&self, f: impl Fn(T) -> U) -> Jet<U> {
        Jet { coeffs: self.coeffs.iter().map(|&c| f(c)).collect() }
    }

    pub fn recip(&self) -> Self {
        Self::constant(T::one(), self.order()) / self.clone()
    }

    pub fn exp(&self) -> Self {
        let a = &self.coeffs;
        let n = a.len();
        let mut y = vec![T::zero(); n];
        y[0] = a[0].exp();
        for k in 1..n {
            let mut acc = T::zero();
            for j in 1..=k {
                acc += a[j].scale(j as f64) * y[k - j];
            }
            y[k] = acc.scale(1.0 / k as f64);
        }
        Self { coeffs: y }
    }

    pub fn ln(&self) -> Self {
        let a = &self.coeffs;
        let n = a.len();
        let mut y = vec![T::zero(); n];
        y[0] = a[0].ln();
        for k in 1..n {
            let mut acc = T::zero();
            for j in 1..k {
                acc += y[j].scale(j as f64) * a[k - j];
            }
            y[k] = (a[k] - acc.scale(1.0 / k as f64)) / a[0];
        }
        Self { coeffs: y }
    }

    /// `(sin u, cos u)` from the coupled recurrence.
    pub fn sin_cos(&self) -> (Self, Self) {
        let a = &self.coeffs;
        let n = a.len();
        let mut s = vec![T::zero(); n];
        let mut c = vec![T::zero(); n];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..n {
            let mut ds = T::zero();
            let mut dc = T::zero();
            for j in 1..=k {
                let ja = a[j].scale(j as f64);
                ds += ja * c[k - j];
                dc -= ja * s[k - j];
            }
            s[k] = ds.scale(1.0 / k as f64);
            c[k] = dc.scale(1.0 / k as f64);
        }
        (Self { coeffs: s }, Self { coeffs: c })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }

    /// `tanh u` via `y' = (1 - y^2) u'`.
    pub fn tanh(&self) -> Self {
        let a = &self.coeffs;
        let n = a.len();
        let mut y = vec![T::zero(); n];
        let mut s = vec![T::zero(); n];
        tanh_coeffs(a, &mut y, &mut s);
        Self { coeffs: y }
    }

    pub fn powi(&self, p: u32) -> Self {
        let mut out = Self::constant(T::one(), self.order());
        for _ in 0..p {
            out = out * self.clone();
        }
        out
    }
}

impl Jet<f64> {
    /// Jet of the identity function evaluated at `t`.
    pub fn variable(t: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = t;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Self { coeffs }
    }

    pub fn to_complex(&self) -> ComplexJet {
        self.map_scalar(|c| Complex64::new(c, 0.0))
    }
}

impl ComplexJet {
    pub fn from_parts(re: &Jet<f64>, im: &Jet<f64>) -> Self {
        assert_eq!(re.order(), im.order());
        Self {
            coeffs: re
                .coeffs
                .iter()
                .zip(&im.coeffs)
                .map(|(&r, &i)| Complex64::new(r, i))
                .collect(),
        }
    }
}

/// Forward tanh recurrence on raw coefficient slices. `s` receives the
/// coefficients of `1 - y^2`, which the reverse pass in training reuses.
pub(crate) fn tanh_coeffs<T: JetScalar>(a: &[T], y: &mut [T], s: &mut [T]) {
    let n = a.len();
    y[0] = a[0].tanh();
    s[0] = T::one() - y[0] * y[0];
    for k in 1..n {
        let mut acc = T::zero();
        for j in 1..=k {
            acc += a[j].scale(j as f64) * s[k - j];
        }
        y[k] = acc.scale(1.0 / k as f64);
        let mut sq = T::zero();
        for j in 0..=k {
            sq += y[j] * y[k - j];
        }
        s[k] = -sq;
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

fn assert_same_order<T: JetScalar>(a: &Jet<T>, b: &Jet<T>) {
    assert_eq!(a.coeffs.len(), b.coeffs.len(), "jet order mismatch");
}

impl<T: JetScalar> Add for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        assert_same_order(&self, &rhs);
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl<T: JetScalar> Sub for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        assert_same_order(&self, &rhs);
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl<T: JetScalar> Neg for Jet<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { coeffs: self.coeffs.into_iter().map(|c| -c).collect() }
    }
}

impl<T: JetScalar> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

impl<T: JetScalar> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Jet<T> {
        assert_same_order(self, rhs);
        let n = self.coeffs.len();
        let mut out = vec![T::zero(); n];
        for k in 0..n {
            let mut acc = T::zero();
            for j in 0..=k {
                acc += self.coeffs[j] * rhs.coeffs[k - j];
            }
            out[k] = acc;
        }
        Jet { coeffs: out }
    }
}

impl<T: JetScalar> Div for Jet<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        assert_same_order(&self, &rhs);
        let n = self.coeffs.len();
        let b = &rhs.coeffs;
        let mut q = vec![T::zero(); n];
        for k in 0..n {
            let mut acc = self.coeffs[k];
            for j in 1..=k {
                acc -= b[j] * q[k - j];
            }
            q[k] = acc / b[0];
        }
        Self { coeffs: q }
    }
}

impl<T: JetScalar> Add<T> for Jet<T> {
    type Output = Self;
    fn add(self, rhs: T) -> Self {
        self.add_constant(rhs)
    }
}

impl<T: JetScalar> Mul<T> for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.scale(rhs)
    }
}
