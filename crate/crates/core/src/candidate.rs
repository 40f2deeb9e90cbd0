//! Candidate approximate solutions and their exact derivatives.
//!
//! A candidate is either a tanh MLP wrapped in an initial-condition
//! reparametrization, or a closed-form function of time (exact solutions,
//! synthetic perturbations). Both are evaluated through jets, so residuals
//! use exact derivatives of the candidate rather than finite differences.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CertifyError, Result};
use crate::jet::{tanh_coeffs, ComplexJet, Jet, MAX_JET_ORDER};
use crate::model::{ExactFn, ManufacturedCase, ProblemClass};

/// Fully connected layer `z = W a + b`, `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Scalar-input MLP with tanh on every hidden layer and a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpCandidate {
    pub(crate) layers: Vec<Layer>,
}

/// Per-layer values kept by a batched forward pass.
///
/// Columns are laid out jet-major: column `k * batch + b` holds Taylor
/// coefficient `k` of sample `b`.
pub(crate) struct ForwardCache {
    /// Input of each layer (`inputs[0]` is the time jet itself).
    pub inputs: Vec<Array2<f64>>,
    /// Hidden-layer pre-activations and the coefficients of `1 - tanh^2`.
    pub pre_activations: Vec<Array2<f64>>,
    pub slopes: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl MlpCandidate {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(CertifyError::InvalidProblem("network without layers".into()));
        }
        if layers[0].weights.ncols() != 1 {
            return Err(CertifyError::DimensionMismatch { expected: 1, got: layers[0].weights.ncols() });
        }
        for w in layers.windows(2) {
            if w[1].weights.ncols() != w[0].weights.nrows() {
                return Err(CertifyError::DimensionMismatch {
                    expected: w[0].weights.nrows(),
                    got: w[1].weights.ncols(),
                });
            }
        }
        for l in &layers {
            if l.biases.len() != l.weights.nrows() {
                return Err(CertifyError::DimensionMismatch { expected: l.weights.nrows(), got: l.biases.len() });
            }
        }
        Ok(Self { layers })
    }

    /// Seeded uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    /// `widths` lists every layer width including input (1) and output.
    pub fn init(widths: &[usize], seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths[0] != 1 || widths.contains(&0) {
            return Err(CertifyError::InvalidProblem(format!("invalid network shape {widths:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (1.0 / fan_in as f64).sqrt();
                let weights = Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..bound));
                let biases = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound));
                Layer { weights, biases }
            })
            .collect();
        Self::new(layers)
    }

    /// Network with every weight and bias equal to zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        let mut net = Self::init(widths, 0)?;
        for l in &mut net.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.nrows())
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![1];
        w.extend(self.layers.iter().map(|l| l.weights.nrows()));
        w
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count());
        let mut it = params.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = *it.next().unwrap();
            }
            for b in l.biases.iter_mut() {
                *b = *it.next().unwrap();
            }
        }
    }

    /// Output jets at a single time, by direct jet arithmetic.
    pub fn forward_jet(&self, t: f64, order: usize) -> Vec<Jet> {
        let mut act: Vec<Jet> = vec![Jet::variable(t, order)];
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.weights.nrows());
            for (row, &bias) in layer.weights.rows().into_iter().zip(layer.biases.iter()) {
                let mut z = Jet::constant(bias, order);
                for (&w, a) in row.iter().zip(&act) {
                    for (zc, &ac) in z.coeffs_mut().iter_mut().zip(a.coeffs()) {
                        *zc += w * ac;
                    }
                }
                next.push(if li == last { z } else { z.tanh() });
            }
            act = next;
        }
        act
    }

    /// Batched forward pass. The returned output has shape
    /// `(output_dim, (order + 1) * ts.len())`, jet-major columns.
    pub(crate) fn forward_batch(&self, ts: &[f64], order: usize, keep: bool) -> ForwardCache {
        let batch = ts.len();
        let k1 = order + 1;
        let mut input = Array2::<f64>::zeros((1, k1 * batch));
        for (b, &t) in ts.iter().enumerate() {
            input[(0, b)] = t;
            if order >= 1 {
                input[(0, batch + b)] = 1.0;
            }
        }
        let mut inputs = Vec::new();
        let mut pre_activations = Vec::new();
        let mut slopes = Vec::new();
        let last = self.layers.len() - 1;
        let mut act = input;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.dot(&act);
            {
                let mut value_block = z.slice_mut(s![.., 0..batch]);
                for (mut row, &bias) in value_block.rows_mut().into_iter().zip(layer.biases.iter()) {
                    row.mapv_inplace(|v| v + bias);
                }
            }
            if keep {
                inputs.push(act);
            }
            if li == last {
                act = z;
            } else {
                let (y, slope) = tanh_batch(&z, order, batch);
                if keep {
                    slopes.push(slope);
                    pre_activations.push(z);
                }
                act = y;
            }
        }
        ForwardCache { inputs, pre_activations, slopes, output: act }
    }
}

/// Elementwise tanh on jet-major activations; also returns `1 - y^2` coefficients.
pub(crate) fn tanh_batch(z: &Array2<f64>, order: usize, batch: usize) -> (Array2<f64>, Array2<f64>) {
    let k1 = order + 1;
    let mut y = Array2::<f64>::zeros(z.raw_dim());
    let mut slope = Array2::<f64>::zeros(z.raw_dim());
    let mut a = [0.0; MAX_JET_ORDER + 1];
    let mut yc = [0.0; MAX_JET_ORDER + 1];
    let mut sc = [0.0; MAX_JET_ORDER + 1];
    for u in 0..z.nrows() {
        for b in 0..batch {
            for k in 0..k1 {
                a[k] = z[(u, k * batch + b)];
            }
            tanh_coeffs(&a[..k1], &mut yc[..k1], &mut sc[..k1]);
            for k in 0..k1 {
                y[(u, k * batch + b)] = yc[k];
                slope[(u, k * batch + b)] = sc[k];
            }
        }
    }
    (y, slope)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReparamKind {
    /// `u = u0 + (t - t0) NN(t)`
    LagarisLinear,
    /// `u = u0 + (1 - e^{-(t - t0)}) NN(t)`
    ExpFirstOrder,
    /// `u = u0 + (t - t0) u0' + (1 - e^{-(t - t0)^2}) NN(t)`
    ExpSecondOrder,
}

impl ReparamKind {
    fn tag(self) -> u8 {
        match self {
            Self::LagarisLinear => 0,
            Self::ExpFirstOrder => 1,
            Self::ExpSecondOrder => 2,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Self::LagarisLinear),
            1 => Ok(Self::ExpFirstOrder),
            2 => Ok(Self::ExpSecondOrder),
            _ => Err(CertifyError::Snapshot(format!("unknown reparametrization tag {tag}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reparametrization {
    pub kind: ReparamKind,
    pub t0: f64,
    pub u0: Vec<Complex64>,
    pub u0_prime: Option<Vec<Complex64>>,
}

impl Reparametrization {
    pub fn new(kind: ReparamKind, t0: f64, u0: Vec<Complex64>, u0_prime: Option<Vec<Complex64>>) -> Result<Self> {
        let r = Self { kind, t0, u0, u0_prime };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ReparamKind::ExpSecondOrder {
            match &self.u0_prime {
                None => return Err(CertifyError::MissingInitialDerivative),
                Some(p) if p.len() != self.u0.len() => {
                    return Err(CertifyError::DimensionMismatch { expected: self.u0.len(), got: p.len() })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Default form for a problem: exponential first/second-order factors,
    /// chosen by the operator's derivative order.
    pub fn for_problem(problem: &crate::model::OdeProblem) -> Result<Self> {
        let ics = problem.initial_conditions();
        let t0 = problem.domain.t0;
        match ics.len() {
            1 => Self::new(ReparamKind::ExpFirstOrder, t0, ics[0].clone(), None),
            2 => Self::new(ReparamKind::ExpSecondOrder, t0, ics[0].clone(), Some(ics[1].clone())),
            n => Err(CertifyError::InvalidProblem(format!(
                "no initial-condition reparametrization for derivative order {n}"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    /// Jet of the factor multiplying the network output.
    pub fn factor_jet(&self, t: f64, order: usize) -> Jet {
        let s = Jet::variable(t - self.t0, order);
        match self.kind {
            ReparamKind::LagarisLinear => s,
            ReparamKind::ExpFirstOrder => -(s.scale(-1.0).exp()) + 1.0,
            ReparamKind::ExpSecondOrder => -((&s * &s).scale(-1.0).exp()) + 1.0,
        }
    }

    /// Jet of the network-independent offset for one component.
    pub fn offset_jet(&self, component: usize, t: f64, order: usize) -> ComplexJet {
        let mut c = vec![Complex64::new(0.0, 0.0); order + 1];
        c[0] = self.u0[component];
        if let (ReparamKind::ExpSecondOrder, Some(p)) = (self.kind, &self.u0_prime) {
            c[0] += p[component] * (t - self.t0);
            if order >= 1 {
                c[1] = p[component];
            }
        }
        ComplexJet::from_coeffs(c)
    }
}

/// Applies `reparam` to raw network output jets at time `t`.
pub fn reparametrize(raw: &[ComplexJet], reparam: &Reparametrization, t: f64) -> Result<Vec<ComplexJet>> {
    reparam.validate()?;
    if raw.len() != reparam.dim() {
        return Err(CertifyError::DimensionMismatch { expected: reparam.dim(), got: raw.len() });
    }
    let Some(order) = raw.first().map(|j| j.order()) else {
        return Ok(Vec::new());
    };
    let g = reparam.factor_jet(t, order).to_complex();
    Ok(raw.iter().enumerate().map(|(i, nn)| reparam.offset_jet(i, t, order) + &g * nn).collect())
}

/// MLP plus the reparametrization that pins its initial conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkCandidate {
    pub mlp: MlpCandidate,
    pub reparam: Reparametrization,
    /// Output `2i` and `2i + 1` are the real and imaginary parts of component `i`.
    pub complex_outputs: bool,
}

impl NetworkCandidate {
    pub fn new(mlp: MlpCandidate, reparam: Reparametrization, complex_outputs: bool) -> Result<Self> {
        reparam.validate()?;
        let expected = if complex_outputs { 2 * reparam.dim() } else { reparam.dim() };
        if mlp.output_dim() != expected {
            return Err(CertifyError::DimensionMismatch { expected, got: mlp.output_dim() });
        }
        Ok(Self { mlp, reparam, complex_outputs })
    }

    pub fn dim(&self) -> usize {
        self.reparam.dim()
    }

    fn pair_outputs(&self, raw: Vec<Jet>) -> Vec<ComplexJet> {
        if self.complex_outputs {
            raw.chunks(2).map(|p| ComplexJet::from_parts(&p[0], &p[1])).collect()
        } else {
            raw.iter().map(Jet::to_complex).collect()
        }
    }

    pub fn jet_eval(&self, t: f64, order: usize) -> Result<Vec<ComplexJet>> {
        check_order(order)?;
        let raw = self.pair_outputs(self.mlp.forward_jet(t, order));
        reparametrize(&raw, &self.reparam, t)
    }

    fn eval_batch(&self, ts: &[f64], order: usize) -> Result<Vec<Vec<ComplexJet>>> {
        check_order(order)?;
        const CHUNK: usize = 1024;
        let mut out = Vec::with_capacity(ts.len());
        for chunk in ts.chunks(CHUNK) {
            let cache = self.mlp.forward_batch(chunk, order, false);
            let b = chunk.len();
            for (i, &t) in chunk.iter().enumerate() {
                let raw: Vec<Jet> = (0..cache.output.nrows())
                    .map(|r| Jet::from_coeffs((0..=order).map(|k| cache.output[(r, k * b + i)]).collect()))
                    .collect();
                out.push(reparametrize(&self.pair_outputs(raw), &self.reparam, t)?);
            }
        }
        Ok(out)
    }

    /// Versioned binary snapshot; doubles are stored bit-exactly (little endian).
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        put_u32(&mut buf, SNAPSHOT_VERSION);
        buf.push(self.reparam.kind.tag());
        put_f64(&mut buf, self.reparam.t0);
        buf.push(u8::from(self.complex_outputs));
        put_u32(&mut buf, self.reparam.u0.len() as u32);
        for z in &self.reparam.u0 {
            put_f64(&mut buf, z.re);
            put_f64(&mut buf, z.im);
        }
        match &self.reparam.u0_prime {
            Some(p) => {
                buf.push(1);
                for z in p {
                    put_f64(&mut buf, z.re);
                    put_f64(&mut buf, z.im);
                }
            }
            None => buf.push(0),
        }
        put_u32(&mut buf, self.mlp.layers.len() as u32);
        for l in &self.mlp.layers {
            put_u32(&mut buf, l.weights.nrows() as u32);
            put_u32(&mut buf, l.weights.ncols() as u32);
            for &w in l.weights.iter() {
                put_f64(&mut buf, w);
            }
            for &b in l.biases.iter() {
                put_f64(&mut buf, b);
            }
        }
        buf
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(SNAPSHOT_MAGIC.len())? != SNAPSHOT_MAGIC {
            return Err(CertifyError::Snapshot("bad magic".into()));
        }
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(CertifyError::Snapshot(format!("unsupported snapshot version {version}")));
        }
        let kind = ReparamKind::from_tag(r.u8()?)?;
        let t0 = r.f64()?;
        let complex_outputs = r.u8()? != 0;
        let n = r.u32()? as usize;
        let u0 = (0..n).map(|_| Ok(Complex64::new(r.f64()?, r.f64()?))).collect::<Result<Vec<_>>>()?;
        let u0_prime = match r.u8()? {
            0 => None,
            _ => Some((0..n).map(|_| Ok(Complex64::new(r.f64()?, r.f64()?))).collect::<Result<Vec<_>>>()?),
        };
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let w: Vec<f64> = (0..rows * cols).map(|_| r.f64()).collect::<Result<_>>()?;
            let b: Vec<f64> = (0..rows).map(|_| r.f64()).collect::<Result<_>>()?;
            let weights = Array2::from_shape_vec((rows, cols), w).map_err(|e| CertifyError::Snapshot(e.to_string()))?;
            layers.push(Layer { weights, biases: Array1::from(b) });
        }
        if r.pos != bytes.len() {
            return Err(CertifyError::Snapshot("trailing bytes".into()));
        }
        let reparam = Reparametrization::new(kind, t0, u0, u0_prime)?;
        Self::new(MlpCandidate::new(layers)?, reparam, complex_outputs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_snapshot())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_snapshot(&bytes)
    }
}

const SNAPSHOT_MAGIC: &[u8] = b"ODECAND\0";
const SNAPSHOT_VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CertifyError::Snapshot("truncated snapshot".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Closed-form candidate given directly as jets of time.
#[derive(Clone)]
pub struct AnalyticCandidate {
    pub name: String,
    pub dim: usize,
    pub f: ExactFn,
}

impl fmt::Debug for AnalyticCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticCandidate").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

#[derive(Clone, Debug)]
pub enum Candidate {
    Network(NetworkCandidate),
    Analytic(AnalyticCandidate),
}

impl Candidate {
    pub fn analytic(name: &str, dim: usize, f: ExactFn) -> Self {
        Self::Analytic(AnalyticCandidate { name: name.to_string(), dim, f })
    }

    /// The exact solution of a manufactured case, as a candidate.
    pub fn exact(case: &ManufacturedCase) -> Self {
        Self::analytic(&format!("exact:{}", case.name), case.problem.dim(), case.exact.clone())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Network(n) => n.dim(),
            Self::Analytic(a) => a.dim,
        }
    }

    /// Jets (orders `0..=order`) of every component at `t`.
    pub fn jet_eval(&self, t: f64, order: usize) -> Result<Vec<ComplexJet>> {
        check_order(order)?;
        match self {
            Self::Network(n) => n.jet_eval(t, order),
            Self::Analytic(a) => Ok((a.f)(&Jet::variable(t, order))),
        }
    }

    /// Values of every component at `t`.
    pub fn value(&self, t: f64) -> Result<Vec<Complex64>> {
        Ok(self.jet_eval(t, 0)?.iter().map(|j| j.value()).collect())
    }

    /// Jets at many times; networks use batched matrix products.
    pub fn eval_batch(&self, ts: &[f64], order: usize) -> Result<Vec<Vec<ComplexJet>>> {
        match self {
            Self::Network(n) => n.eval_batch(ts, order),
            Self::Analytic(_) => ts.iter().map(|&t| self.jet_eval(t, order)).collect(),
        }
    }

    /// Hex SHA-256 of the snapshot bytes (or of the closed form's name).
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        match self {
            Self::Network(n) => h.update(n.to_snapshot()),
            Self::Analytic(a) => {
                h.update(b"analytic:");
                h.update(a.name.as_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn label(&self) -> String {
        match self {
            Self::Network(n) => format!("mlp{:?}", n.mlp.widths()),
            Self::Analytic(a) => a.name.clone(),
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_JET_ORDER {
        return Err(CertifyError::UnsupportedOrder { requested: order, max: MAX_JET_ORDER });
    }
    Ok(())
}

/// `u*(t) + eps (1 - e^{-lambda (t - t0)}) / lambda` (or `u* + eps (t - t0)` for
/// `lambda = 0`): a candidate whose residual is identically `eps`, and for which
/// the single-interval first-order bound is attained.
pub fn synthetic_constant_residual_candidate(case: &ManufacturedCase, epsilon: f64) -> Result<Candidate> {
    let ProblemClass::FirstOrderConstant { root, .. } = case.problem.class else {
        return Err(CertifyError::InvalidProblem("synthetic candidate needs a first-order constant problem".into()));
    };
    if root.omega != 0.0 {
        return Err(CertifyError::InvalidProblem(format!(
            "synthetic candidate needs a real decay rate, got omega = {}",
            root.omega
        )));
    }
    let lambda = root.lambda;
    let t0 = case.problem.domain.t0;
    let exact = case.exact.clone();
    let f: ExactFn = Arc::new(move |t: &Jet| {
        let s = t.add_constant(-t0);
        let mut dev = if lambda == 0.0 {
            s.clone()
        } else {
            (-(s.scale(-lambda).exp()) + 1.0).scale(1.0 / lambda)
        };
        // accurate value coefficient near t0
        dev.coeffs_mut()[0] = crate::bounds::kernels::h1(s.value(), lambda);
        let dev = dev.scale(epsilon).to_complex();
        exact(t).into_iter().map(|u| u + dev.clone()).collect()
    });
    Ok(Candidate::analytic(&format!("synthetic-constant-residual:{}:{epsilon:e}", case.name), 1, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::find_case;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zero_network_with_exp_reparam_returns_u0_at_t0() {
        let mlp = MlpCandidate::zeros(&[1, 4, 4, 1]).unwrap();
        let rp = Reparametrization::new(ReparamKind::ExpFirstOrder, 0.5, vec![c(2.5)], None).unwrap();
        let cand = NetworkCandidate::new(mlp, rp, false).unwrap();
        assert_eq!(cand.jet_eval(0.5, 2).unwrap()[0].value(), c(2.5));
    }

    #[test]
    fn second_order_reparam_pins_value_and_slope() {
        let mlp = MlpCandidate::init(&[1, 8, 8, 1], 3).unwrap();
        let rp = Reparametrization::new(ReparamKind::ExpSecondOrder, 0.0, vec![c(1.0)], Some(vec![c(-2.0)])).unwrap();
        let cand = NetworkCandidate::new(mlp, rp, false).unwrap();
        let j = &cand.jet_eval(0.0, 2).unwrap()[0];
        assert_eq!(j.derivative(0), c(1.0));
        assert_eq!(j.derivative(1), c(-2.0));
    }

    #[test]
    fn constant_network_closed_forms() {
        let nn = vec![ComplexJet::constant(c(0.7), 2)];
        let rp = Reparametrization::new(ReparamKind::ExpFirstOrder, 0.0, vec![c(1.0)], None).unwrap();
        let t = 1.3;
        let u = reparametrize(&nn, &rp, t).unwrap();
        assert!((u[0].value() - c(1.0 + (1.0 - (-t).exp()) * 0.7)).norm() < 1e-15);

        let rp = Reparametrization::new(ReparamKind::LagarisLinear, 2.0, vec![c(1.0)], None).unwrap();
        let u = reparametrize(&nn, &rp, 3.0).unwrap();
        assert!((u[0].value() - c(1.7)).norm() < 1e-15);
    }

    #[test]
    fn second_order_reparam_requires_derivative() {
        let r = Reparametrization::new(ReparamKind::ExpSecondOrder, 0.0, vec![c(1.0)], None);
        assert!(matches!(r, Err(CertifyError::MissingInitialDerivative)));
    }

    #[test]
    fn order_limit_enforced() {
        let cand = Candidate::exact(&find_case("fo-poly").unwrap());
        assert!(matches!(cand.jet_eval(0.0, 7), Err(CertifyError::UnsupportedOrder { .. })));
    }

    #[test]
    fn batched_and_pointwise_evaluation_agree() {
        let mlp = MlpCandidate::init(&[1, 16, 16, 2], 11).unwrap();
        let rp = Reparametrization::new(ReparamKind::ExpSecondOrder, 0.0, vec![c(1.0)], Some(vec![c(0.5)])).unwrap();
        let cand = Candidate::Network(NetworkCandidate::new(mlp, rp, true).unwrap());
        let ts: Vec<f64> = (0..37).map(|i| -1.0 + 0.13 * i as f64).collect();
        let batch = cand.eval_batch(&ts, 3).unwrap();
        for (i, &t) in ts.iter().enumerate() {
            let single = cand.jet_eval(t, 3).unwrap();
            for (a, b) in single[0].coeffs().iter().zip(batch[i][0].coeffs()) {
                assert!((a - b).norm() <= 1e-13 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let mlp = MlpCandidate::init(&[1, 5, 3], 9).unwrap();
        let rp = Reparametrization::new(
            ReparamKind::ExpSecondOrder,
            0.25,
            vec![c(1.0), Complex64::new(0.1, -0.3), c(3.0)],
            Some(vec![c(0.0), c(1.0), c(-1.0)]),
        )
        .unwrap();
        let cand = NetworkCandidate::new(mlp, rp, false).unwrap();
        let bytes = cand.to_snapshot();
        let back = NetworkCandidate::from_snapshot(&bytes).unwrap();
        assert_eq!(back, cand);
        assert_eq!(back.to_snapshot(), bytes);
    }

    #[test]
    fn corrupted_snapshot_rejected() {
        let mlp = MlpCandidate::init(&[1, 2, 1], 1).unwrap();
        let rp = Reparametrization::new(ReparamKind::ExpFirstOrder, 0.0, vec![c(1.0)], None).unwrap();
        let bytes = NetworkCandidate::new(mlp, rp, false).unwrap().to_snapshot();
        assert!(NetworkCandidate::from_snapshot(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(NetworkCandidate::from_snapshot(&bad).is_err());
    }

    #[test]
    fn synthetic_candidate_with_zero_epsilon_is_exact() {
        let case = find_case("fo-poly").unwrap();
        let cand = synthetic_constant_residual_candidate(&case, 0.0).unwrap();
        let exact = Candidate::exact(&case);
        for t in [0.0, 0.5, 2.9] {
            assert_eq!(cand.value(t).unwrap(), exact.value(t).unwrap());
        }
    }

    #[test]
    fn synthetic_candidate_rejects_oscillating_root() {
        let mut case = find_case("fo-poly").unwrap();
        case.problem.class =
            ProblemClass::FirstOrderConstant { root: crate::model::ComplexRoot { lambda: 3.0, omega: 1.0 }, u0: c(2.0) };
        assert!(synthetic_constant_residual_candidate(&case, 0.1).is_err());
    }
}
