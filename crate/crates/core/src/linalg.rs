//! Small dense complex linear algebra: products, partial-pivoting inversion,
//! induced 1/2/inf norms and condition numbers.
//!
//! Matrices here are at most a few dozen rows, so everything is plain
//! row-major `Vec` storage with O(n^3) algorithms.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CertifyError, Result};

/// Which induced operator norm (and vector norm) to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormP {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl NormP {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Some(Self::One),
            "2" => Some(Self::Two),
            "inf" | "infinity" | "max" => Some(Self::Inf),
            _ => None,
        }
    }

    /// The vector p-norm of a sequence of magnitudes.
    pub fn vector_norm(self, magnitudes: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            Self::One => magnitudes.into_iter().map(f64::abs).sum(),
            Self::Two => {
                // scaled to avoid overflow on huge residuals
                let v: Vec<f64> = magnitudes.into_iter().map(f64::abs).collect();
                let scale = v.iter().cloned().fold(0.0, f64::max);
                if scale == 0.0 || !scale.is_finite() {
                    return scale;
                }
                scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
            }
            Self::Inf => magnitudes.into_iter().map(f64::abs).fold(0.0, f64::max),
        }
    }

    /// `n^(1/p)`, the factor relating the max-norm to the p-norm in dimension n.
    pub fn dimension_factor(self, n: usize) -> f64 {
        match self {
            Self::One => n as f64,
            Self::Two => (n as f64).sqrt(),
            Self::Inf => 1.0,
        }
    }
}

impl fmt::Display for NormP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::One => "1",
            Self::Two => "2",
            Self::Inf => "inf",
        })
    }
}

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(CertifyError::DimensionMismatch { expected: n, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting. A pivot
    /// below `1e-13 * ||M||_1` is reported as singular.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let threshold = 1e-13 * self.norm(NormP::One);
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot_mag > threshold) {
                return Err(CertifyError::SingularMatrix { pivot: pivot_mag, threshold });
            }
            if pivot_row != col {
                a.swap_rows(pivot_row, col);
                inv.swap_rows(pivot_row, col);
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[(r, col)];
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let ac = a[(col, j)];
                    let ic = inv[(col, j)];
                    a[(r, j)] -= factor * ac;
                    inv[(r, j)] -= factor * ic;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, r1: usize, r2: usize) {
        let n = self.n;
        for j in 0..n {
            self.data.swap(r1 * n + j, r2 * n + j);
        }
    }

    /// Induced operator norm.
    pub fn norm(&self, p: NormP) -> f64 {
        let n = self.n;
        match p {
            NormP::One => (0..n)
                .map(|j| (0..n).map(|i| self[(i, j)].norm()).sum::<f64>())
                .fold(0.0, f64::max),
            NormP::Inf => (0..n)
                .map(|i| (0..n).map(|j| self[(i, j)].norm()).sum::<f64>())
                .fold(0.0, f64::max),
            NormP::Two => self.spectral_norm(),
        }
    }

    /// Largest singular value: square root of the top eigenvalue of `M^H M`,
    /// found by cyclic Jacobi on the real symmetric embedding
    /// `[[Re, -Im], [Im, Re]]` of the Hermitian product.
    fn spectral_norm(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let h = self.adjoint().matmul(self);
        let m = 2 * n;
        let mut s = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                let z = h[(i, j)];
                s[i * m + j] = z.re;
                s[(i + n) * m + (j + n)] = z.re;
                s[i * m + (j + n)] = -z.im;
                s[(i + n) * m + j] = z.im;
            }
        }
        let eig = jacobi_eigenvalues(&mut s, m);
        eig.into_iter().fold(0.0, f64::max).max(0.0).sqrt()
    }

    /// `||M|| * ||M^-1||` in the induced p-norm.
    pub fn cond(&self, p: NormP) -> Result<f64> {
        Ok(self.norm(p) * self.inverse()?.norm(p))
    }

    /// Random orthogonal matrix: Gram-Schmidt (twice) on a standard normal
    /// matrix, with column signs fixed so the implied R has positive diagonal.
    pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        for j in 0..n {
            let raw_norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            for _pass in 0..2 {
                for k in 0..j {
                    let d: f64 = (0..n).map(|i| cols[j][i] * cols[k][i]).sum();
                    for i in 0..n {
                        cols[j][i] -= d * cols[k][i];
                    }
                }
            }
            let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            debug_assert!(norm > 1e-8 * raw_norm);
            for x in cols[j].iter_mut() {
                *x /= norm;
            }
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(cols[j][i], 0.0);
            }
        }
        m
    }
}

/// Eigenvalues of a real symmetric matrix (row-major, destroyed in place)
/// by cyclic Jacobi rotations.
fn jacobi_eigenvalues(a: &mut [f64], m: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * m + j] * a[i * m + j])
            .sum();
        let diag: f64 = (0..m).map(|i| a[i * m + i] * a[i * m + i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| a[i * m + i]).collect()
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}
