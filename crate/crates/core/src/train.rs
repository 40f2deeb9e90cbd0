//! Residual-loss training of MLP candidates with Adam.
//!
//! The loss `(|I|/N) sum_i ||Lu(t_i) - f(t_i)||^2` is computed from batched
//! jet propagation; weight gradients come from reverse accumulation through
//! the same jet recurrences.

use std::time::Instant;

use ndarray::{s, Array2, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::{Candidate, MlpCandidate, NetworkCandidate, Reparametrization};
use crate::error::{CertifyError, Result};
use crate::jet::{factorial, MAX_JET_ORDER};
use crate::model::{Interval, OdeProblem, ProblemClass};
use crate::residual::residual_at;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub sample_domain: Interval,
    pub validation_points: usize,
}

impl TrainConfig {
    pub fn new(sample_domain: Interval, epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            samples_per_epoch: 1024,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            seed,
            sample_domain,
            validation_points: 512,
        }
    }

    /// Sampling on the problem domain, widened to `[t0 - 0.5, t1 + 1]` for
    /// systems (the suite system's forcing is singular at `t0 - 1`).
    pub fn for_problem(problem: &OdeProblem, epochs: usize, seed: u64) -> Self {
        let d = problem.domain;
        let domain = match problem.class {
            ProblemClass::LinearSystem(_) => Interval { t0: d.t0 - 0.5, t1: d.t1 + 1.0 },
            _ => d,
        };
        Self::new(domain, epochs, seed)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.samples_per_epoch > 0
            && self.validation_points > 0
            && self.learning_rate > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.adam_epsilon > 0.0;
        if !ok {
            return Err(CertifyError::Config("invalid training hyperparameters".into()));
        }
        Interval::new(self.sample_domain.t0, self.sample_domain.t1).map(|_| ())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training loss of each epoch's sample, before that epoch's update.
    pub loss_history: Vec<f64>,
    /// Validation loss after each epoch's update.
    pub validation_history: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub best_validation_loss: Option<f64>,
    pub diverged: bool,
    pub wall_time: f64,
}

/// Layer widths (input 1 to output) of the default network for a problem.
pub fn default_widths(problem: &OdeProblem) -> Vec<usize> {
    let hidden = match problem.class {
        ProblemClass::LinearSystem(_) => 512,
        _ => 32,
    };
    let out = if problem.is_real() { problem.dim() } else { 2 * problem.dim() };
    vec![1, hidden, hidden, out]
}

/// `(|I|/N) sum ||residual(t_i)||^2` over the given points.
pub fn loss(problem: &OdeProblem, candidate: &Candidate, sample_points: &[f64], domain: Interval) -> Result<f64> {
    if sample_points.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for &t in sample_points {
        sum += residual_at(problem, candidate, t)?.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(domain.length() / sample_points.len() as f64 * sum)
}

/// Per-point quantities of the residual that do not depend on the weights.
struct PointData {
    factor: Vec<f64>,
    offsets: Vec<Vec<Complex64>>,
    terms: Vec<crate::model::OperatorTerm>,
    forcing: Vec<Complex64>,
}

fn point_data(problem: &OdeProblem, reparam: &Reparametrization, t: f64) -> PointData {
    let order = problem.order();
    PointData {
        factor: reparam.factor_jet(t, order).into_coeffs(),
        offsets: (0..reparam.dim()).map(|i| reparam.offset_jet(i, t, order).into_coeffs()).collect(),
        terms: problem.operator_terms(t),
        forcing: problem.forcing_at(t),
    }
}

/// Loss and (optionally) its gradient with respect to the flattened parameters.
fn loss_and_gradient(
    net: &NetworkCandidate,
    problem: &OdeProblem,
    data: &[PointData],
    ts: &[f64],
    measure: f64,
    want_grad: bool,
) -> (f64, Option<Vec<f64>>) {
    let order = problem.order();
    let k1 = order + 1;
    let batch = ts.len();
    let dim = net.dim();
    let cache = net.mlp.forward_batch(ts, order, want_grad);
    let out = &cache.output;
    let weight = measure / batch as f64;
    let mut total = 0.0;
    let mut out_grad = if want_grad { Some(Array2::<f64>::zeros(out.raw_dim())) } else { None };
    let mut u = vec![vec![Complex64::new(0.0, 0.0); k1]; dim];
    let mut nn = vec![vec![Complex64::new(0.0, 0.0); k1]; dim];
    for (b, pd) in data.iter().enumerate() {
        for i in 0..dim {
            for m in 0..k1 {
                let col = m * batch + b;
                nn[i][m] = if net.complex_outputs {
                    Complex64::new(out[(2 * i, col)], out[(2 * i + 1, col)])
                } else {
                    Complex64::new(out[(i, col)], 0.0)
                };
            }
            for k in 0..k1 {
                let mut acc = pd.offsets[i][k];
                for m in 0..=k {
                    acc += nn[i][m] * pd.factor[k - m];
                }
                u[i][k] = acc;
            }
        }
        let mut r = pd.forcing.iter().map(|f| -f).collect::<Vec<_>>();
        for term in &pd.terms {
            r[term.row] += term.coeff * u[term.component][term.order] * factorial(term.order);
        }
        total += r.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if let Some(g) = out_grad.as_mut() {
            // conjugate-gradient convention: dz = dL/dRe + i dL/dIm
            let mut u_bar = vec![vec![Complex64::new(0.0, 0.0); k1]; dim];
            for term in &pd.terms {
                let r_bar = r[term.row] * (2.0 * weight);
                u_bar[term.component][term.order] += term.coeff.conj() * r_bar * factorial(term.order);
            }
            for i in 0..dim {
                for m in 0..k1 {
                    let mut n_bar = Complex64::new(0.0, 0.0);
                    for k in m..k1 {
                        n_bar += u_bar[i][k] * pd.factor[k - m];
                    }
                    let col = m * batch + b;
                    if net.complex_outputs {
                        g[(2 * i, col)] = n_bar.re;
                        g[(2 * i + 1, col)] = n_bar.im;
                    } else {
                        g[(i, col)] = n_bar.re;
                    }
                }
            }
        }
    }
    let value = weight * total;
    let Some(mut grad_out) = out_grad else {
        return (value, None);
    };
    // reverse through the layers
    let layers = &net.mlp.layers;
    let mut grads: Vec<(Array2<f64>, ndarray::Array1<f64>)> = Vec::with_capacity(layers.len());
    for li in (0..layers.len()).rev() {
        let input = &cache.inputs[li];
        let dw = grad_out.dot(&input.t());
        let db = grad_out.slice(s![.., 0..batch]).sum_axis(Axis(1));
        grads.push((dw, db));
        if li == 0 {
            break;
        }
        let y_bar = layers[li].weights.t().dot(&grad_out);
        grad_out = tanh_backward(
            &y_bar,
            &cache.pre_activations[li - 1],
            &cache.inputs[li],
            &cache.slopes[li - 1],
            order,
            batch,
        );
    }
    grads.reverse();
    let mut flat = Vec::with_capacity(net.mlp.param_count());
    for (dw, db) in grads {
        flat.extend(dw.iter());
        flat.extend(db.iter());
    }
    (value, Some(flat))
}

/// Adjoint of the tanh jet recurrence: maps output-coefficient adjoints to
/// pre-activation-coefficient adjoints.
fn tanh_backward(
    y_bar: &Array2<f64>,
    z: &Array2<f64>,
    y: &Array2<f64>,
    s: &Array2<f64>,
    order: usize,
    batch: usize,
) -> Array2<f64> {
    let k1 = order + 1;
    let mut z_bar = Array2::<f64>::zeros(z.raw_dim());
    let mut zc = [0.0; MAX_JET_ORDER + 1];
    let mut yc = [0.0; MAX_JET_ORDER + 1];
    let mut sc = [0.0; MAX_JET_ORDER + 1];
    let mut yb = [0.0; MAX_JET_ORDER + 1];
    let mut sb = [0.0; MAX_JET_ORDER + 1];
    let mut zb = [0.0; MAX_JET_ORDER + 1];
    for u in 0..z.nrows() {
        for b in 0..batch {
            for k in 0..k1 {
                let col = k * batch + b;
                zc[k] = z[(u, col)];
                yc[k] = y[(u, col)];
                sc[k] = s[(u, col)];
                yb[k] = y_bar[(u, col)];
                sb[k] = 0.0;
                zb[k] = 0.0;
            }
            for k in (1..k1).rev() {
                // s_k = -sum_j y_j y_{k-j}
                for j in 0..=k {
                    yb[j] -= 2.0 * sb[k] * yc[k - j];
                }
                // y_k = (1/k) sum_{j>=1} j z_j s_{k-j}
                for j in 1..=k {
                    let c = j as f64 / k as f64;
                    zb[j] += yb[k] * c * sc[k - j];
                    sb[k - j] += yb[k] * c * zc[j];
                }
            }
            yb[0] -= 2.0 * sb[0] * yc[0];
            zb[0] += yb[0] * sc[0];
            for k in 0..k1 {
                z_bar[(u, k * batch + b)] = zb[k];
            }
        }
    }
    z_bar
}

/// Loss and flattened weight gradient of a network candidate on given points.
pub fn loss_gradient(
    net: &NetworkCandidate,
    problem: &OdeProblem,
    sample_points: &[f64],
    domain: Interval,
) -> Result<(f64, Vec<f64>)> {
    check_shapes(net, problem)?;
    let data: Vec<PointData> = sample_points.iter().map(|&t| point_data(problem, &net.reparam, t)).collect();
    let (l, g) = loss_and_gradient(net, problem, &data, sample_points, domain.length(), true);
    Ok((l, g.unwrap_or_default()))
}

fn check_shapes(net: &NetworkCandidate, problem: &OdeProblem) -> Result<()> {
    if net.dim() != problem.dim() {
        return Err(CertifyError::DimensionMismatch { expected: problem.dim(), got: net.dim() });
    }
    if problem.order() > MAX_JET_ORDER {
        return Err(CertifyError::UnsupportedOrder { requested: problem.order(), max: MAX_JET_ORDER });
    }
    Ok(())
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
    }
}

/// Trains a network of the given layer widths; returns the weights with the
/// lowest validation loss.
pub fn train(
    problem: &OdeProblem,
    reparam: Reparametrization,
    net_shape: &[usize],
    config: &TrainConfig,
) -> Result<(NetworkCandidate, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    let out = *net_shape.last().unwrap_or(&0);
    let complex_outputs = out == 2 * problem.dim() && out != problem.dim();
    let mut net = NetworkCandidate::new(MlpCandidate::init(net_shape, config.seed)?, reparam, complex_outputs)?;
    check_shapes(&net, problem)?;

    let validation_ts = config.sample_domain.linspace(config.validation_points);
    let validation_data: Vec<PointData> =
        validation_ts.iter().map(|&t| point_data(problem, &net.reparam, t)).collect();
    let measure = config.sample_domain.length();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut params = net.mlp.params();
    let mut adam = Adam::new(params.len());
    let mut report = TrainReport::default();
    let mut best = net.clone();
    let mut best_loss = f64::INFINITY;

    for epoch in 0..config.epochs {
        let ts: Vec<f64> = (0..config.samples_per_epoch)
            .map(|_| config.sample_domain.t0 + rng.random::<f64>() * measure)
            .collect();
        let data: Vec<PointData> = ts.iter().map(|&t| point_data(problem, &net.reparam, t)).collect();
        let (value, grad) = loss_and_gradient(&net, problem, &data, &ts, measure, true);
        let grad = grad.expect("gradient requested");
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            report.diverged = true;
            break;
        }
        report.loss_history.push(value);
        adam.update(&mut params, &grad, config);
        net.mlp.set_params(&params);
        let (val, _) = loss_and_gradient(&net, problem, &validation_data, &validation_ts, measure, false);
        if !val.is_finite() {
            report.diverged = true;
            break;
        }
        report.validation_history.push(val);
        if val < best_loss {
            best_loss = val;
            best = net.clone();
            report.best_epoch = Some(epoch);
        }
    }
    if report.best_epoch.is_some() {
        report.best_validation_loss = Some(best_loss);
    } else {
        best = NetworkCandidate::new(MlpCandidate::init(net_shape, config.seed)?, best.reparam, complex_outputs)?;
    }
    report.wall_time = started.elapsed().as_secs_f64();
    Ok((best, report))
}

/// Trains with the default architecture and reparametrization for the problem.
pub fn train_default(problem: &OdeProblem, config: &TrainConfig) -> Result<(NetworkCandidate, TrainReport)> {
    train(problem, Reparametrization::for_problem(problem)?, &default_widths(problem), config)
}
