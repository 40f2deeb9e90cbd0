//! End-to-end experiments: train a candidate, profile its residual on nested
//! partitions, evaluate the bounds on a shared time grid and compare with the
//! measured error when the exact solution is known.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{bound_curve, BoundCurve};
use crate::candidate::Candidate;
use crate::error::{CertifyError, Result};
use crate::jet::Jet;
use crate::linalg::NormP;
use crate::model::{ExactFn, Interval, ManufacturedCase, OdeProblem};
use crate::residual::{GridDiagnostic, ResidualProfile, ResidualSamples, DEFAULT_GRID_PER_CELL};
use crate::train::{train_default, TrainConfig, TrainReport};

pub const CERTIFICATE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_LEVELS: [usize; 3] = [1, 10, 100];
pub const DEFAULT_EVAL_POINTS: usize = 1000;
/// Absolute slack allowed between measured error and bound.
pub const VERIFICATION_SLACK: f64 = 1e-9;
/// Relative slack for comparing bounds across refinement levels.
pub const MONOTONICITY_SLACK: f64 = 1e-12;
pub const QUICK_EPOCHS: usize = 100;
pub const FULL_EPOCHS: usize = 1000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    CertifiedAndVerified,
    CertifiedOnly,
    Violation,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CertifiedAndVerified => "CERTIFIED_AND_VERIFIED",
            Self::CertifiedOnly => "CERTIFIED_ONLY",
            Self::Violation => "VIOLATION",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub levels: Vec<usize>,
    pub grid_per_cell: usize,
    pub eval_points: usize,
    /// Overrides the problem's norm for systems.
    pub norm: Option<NormP>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS.to_vec(),
            grid_per_cell: DEFAULT_GRID_PER_CELL,
            eval_points: DEFAULT_EVAL_POINTS,
            norm: None,
        }
    }
}

impl CertifyOptions {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels[0] == 0 {
            return Err(CertifyError::InvalidProblem("partition levels must be positive".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0) {
            return Err(CertifyError::InvalidProblem(format!(
                "partition levels {:?} must increase, each dividing the next",
                self.levels
            )));
        }
        if self.grid_per_cell < 2 || !self.grid_per_cell.is_multiple_of(2) {
            return Err(CertifyError::InvalidProblem("grid per cell must be even and at least 2".into()));
        }
        if self.eval_points < 2 {
            return Err(CertifyError::InvalidProblem("need at least two evaluation points".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub kind: String,
    pub dim: usize,
    pub order: usize,
    pub domain: Interval,
    pub norm: NormP,
}

impl ProblemSummary {
    fn of(problem: &OdeProblem, norm: NormP) -> Self {
        Self {
            kind: problem.kind_name().to_string(),
            dim: problem.dim(),
            order: problem.order(),
            domain: problem.domain,
            norm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub seed: u64,
    pub best_epoch: Option<usize>,
    pub best_validation_loss: Option<f64>,
    pub final_training_loss: Option<f64>,
    pub diverged: bool,
}

impl TrainingSummary {
    pub fn of(config: &TrainConfig, report: &TrainReport) -> Self {
        Self {
            epochs: config.epochs,
            seed: config.seed,
            best_epoch: report.best_epoch,
            best_validation_loss: report.best_validation_loss,
            final_training_loss: report.loss_history.last().copied(),
            diverged: report.diverged,
        }
    }
}

/// Full verification record of one candidate on one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema_version: u32,
    pub case_name: String,
    pub problem: ProblemSummary,
    pub candidate: String,
    pub candidate_digest: String,
    pub training: Option<TrainingSummary>,
    pub profiles: Vec<ResidualProfile>,
    pub bound_curves: Vec<BoundCurve>,
    pub error_curve: Option<Vec<f64>>,
    pub max_error: Option<f64>,
    /// Smallest `bound - error` over all levels and eval points.
    pub min_margin: Option<f64>,
    pub violations: usize,
    pub monotone_across_levels: bool,
    pub grid_diagnostic: GridDiagnostic,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn times(&self) -> &[f64] {
        self.bound_curves.first().map_or(&[], |c| c.times.as_slice())
    }

    /// CSV `t,bound_<cells>...,abs_error` over the shared eval grid.
    pub fn combined_csv(&self) -> String {
        let mut out = String::from("t");
        for c in &self.bound_curves {
            let _ = write!(out, ",bound_{}", c.partition_cells);
        }
        if self.error_curve.is_some() {
            out.push_str(",abs_error");
        }
        out.push('\n');
        for (i, t) in self.times().iter().enumerate() {
            let _ = write!(out, "{t:.16e}");
            for c in &self.bound_curves {
                let _ = write!(out, ",{:.16e}", c.values[i]);
            }
            if let Some(e) = &self.error_curve {
                let _ = write!(out, ",{:.16e}", e[i]);
            }
            out.push('\n');
        }
        out
    }

    /// Writes the combined CSV, per-level bound and profile CSVs and the JSON
    /// certificate into `dir`, all prefixed with the case name.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let name = &self.case_name;
        std::fs::write(dir.join(format!("{name}.csv")), self.combined_csv())?;
        for (curve, profile) in self.bound_curves.iter().zip(&self.profiles) {
            let cells = curve.partition_cells;
            std::fs::write(dir.join(format!("{name}.bound_{cells}.csv")), curve.to_csv())?;
            std::fs::write(dir.join(format!("{name}.profile_{cells}.csv")), profile.to_csv())?;
        }
        std::fs::write(dir.join(format!("{name}.certificate.json")), self.to_json()?)?;
        Ok(())
    }
}

/// Pointwise `||u(t) - u*(t)||_p` of a candidate against an exact solution.
pub fn error_curve(candidate: &Candidate, exact: &ExactFn, times: &[f64], norm: NormP) -> Result<Vec<f64>> {
    let values = candidate.eval_batch(times, 0)?;
    Ok(times
        .iter()
        .zip(values)
        .map(|(&t, u)| {
            let star = exact(&Jet::variable(t, 0));
            norm.vector_norm(u.iter().zip(&star).map(|(a, b)| (a.value() - b.value()).norm()))
        })
        .collect())
}

/// Profiles, bounds and (if `exact` is given) verification of a candidate.
pub fn certify(
    name: &str,
    problem: &OdeProblem,
    candidate: &Candidate,
    exact: Option<&ExactFn>,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    opts.validate()?;
    if candidate.dim() != problem.dim() {
        return Err(CertifyError::DimensionMismatch { expected: problem.dim(), got: candidate.dim() });
    }
    let norm = opts.norm.unwrap_or_else(|| problem.norm());
    let finest = *opts.levels.last().unwrap();
    // one global grid at double density serves the profiles and the grid check
    let dense = ResidualSamples::collect(problem, candidate, finest * opts.grid_per_cell * 2, norm)?;
    let samples = dense.subsample(2)?;
    let grid_diagnostic = GridDiagnostic::from_dense(&dense, opts.grid_per_cell)?;
    let profiles: Vec<ResidualProfile> =
        opts.levels.iter().map(|&n| samples.profile(n)).collect::<Result<_>>()?;
    let times = problem.domain.linspace(opts.eval_points);
    let bound_curves: Vec<BoundCurve> =
        profiles.iter().map(|p| bound_curve(problem, p, &times)).collect::<Result<_>>()?;
    if bound_curves.iter().flat_map(|c| &c.values).any(|v| !v.is_finite()) {
        return Err(CertifyError::InvalidProblem("non-finite bound value".into()));
    }
    let monotone_across_levels = bound_curves.windows(2).all(|w| {
        w[1].values.iter().zip(&w[0].values).all(|(fine, coarse)| *fine <= coarse * (1.0 + MONOTONICITY_SLACK))
    });

    let mut notes = Vec::new();
    if grid_diagnostic.grid_sensitive {
        notes.push("grid-sensitive".to_string());
    }
    let (error, max_error, min_margin, violations, verdict) = match exact {
        Some(e) => {
            let err = error_curve(candidate, e, &times, norm)?;
            let mut violations = 0;
            let mut margin = f64::INFINITY;
            for c in &bound_curves {
                for (b, x) in c.values.iter().zip(&err) {
                    margin = margin.min(b - x);
                    if *x > b + VERIFICATION_SLACK || !x.is_finite() {
                        violations += 1;
                    }
                }
            }
            let max = err.iter().copied().fold(0.0, f64::max);
            let verdict = if violations > 0 { Verdict::Violation } else { Verdict::CertifiedAndVerified };
            (Some(err), Some(max), Some(margin), violations, verdict)
        }
        None => (None, None, None, 0, Verdict::CertifiedOnly),
    };

    Ok(Certificate {
        schema_version: CERTIFICATE_SCHEMA_VERSION,
        case_name: name.to_string(),
        problem: ProblemSummary::of(problem, norm),
        candidate: candidate.label(),
        candidate_digest: candidate.digest(),
        training: None,
        profiles,
        bound_curves,
        error_curve: error,
        max_error,
        min_margin,
        violations,
        monotone_across_levels,
        grid_diagnostic,
        verdict,
        notes,
    })
}

/// Trains the default network on a manufactured case and certifies it.
pub fn run_case(case: &ManufacturedCase, config: &TrainConfig, opts: &CertifyOptions) -> Result<Certificate> {
    let (net, report) = train_default(&case.problem, config)?;
    let candidate = Candidate::Network(net);
    let mut cert = certify(&case.name, &case.problem, &candidate, Some(&case.exact), opts)?;
    cert.training = Some(TrainingSummary::of(config, &report));
    if report.diverged {
        cert.notes.push("training diverged; best finite snapshot certified".into());
        if cert.verdict == Verdict::CertifiedAndVerified {
            cert.verdict = Verdict::CertifiedOnly;
        }
    }
    Ok(cert)
}

/// Worker count: `ODE_CERTIFY_THREADS` if set to a positive integer, else all cores.
pub fn thread_count() -> usize {
    std::env::var("ODE_CERTIFY_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `run_case` on every case, in parallel when the feature is enabled.
/// Results keep the input order.
pub fn run_suite(
    cases: &[ManufacturedCase],
    epochs: usize,
    seed: u64,
    opts: &CertifyOptions,
) -> Vec<(String, Result<Certificate>)> {
    let job = |case: &ManufacturedCase| {
        let cfg = TrainConfig::for_problem(&case.problem, epochs, seed);
        (case.name.clone(), run_case(case, &cfg, opts))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(thread_count()).build() {
            Ok(pool) => pool.install(|| cases.par_iter().map(job).collect()),
            Err(_) => cases.iter().map(job).collect(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        cases.iter().map(job).collect()
    }
}

/// One row per case: verdict, epsilons per level, worst error and margin.
pub fn summary_csv(results: &[(String, Result<Certificate>)]) -> String {
    let levels: Vec<usize> = results
        .iter()
        .find_map(|(_, r)| r.as_ref().ok())
        .map(|c| c.profiles.iter().map(|p| p.n_cells()).collect())
        .unwrap_or_default();
    let mut out = String::from("case,kind,verdict");
    for l in &levels {
        let _ = write!(out, ",eps_{l}");
    }
    out.push_str(",max_error,min_margin,monotone,grid_sensitive\n");
    for (name, r) in results {
        match r {
            Ok(c) => {
                let _ = write!(out, "{name},{},{}", c.problem.kind, c.verdict.as_str());
                for p in &c.profiles {
                    let _ = write!(out, ",{:.16e}", p.global_epsilon());
                }
                let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
                let _ = writeln!(
                    out,
                    ",{},{},{},{}",
                    opt(c.max_error),
                    opt(c.min_margin),
                    c.monotone_across_levels,
                    c.grid_diagnostic.grid_sensitive
                );
            }
            Err(e) => {
                let _ = write!(out, "{name},,ERROR");
                for _ in &levels {
                    out.push(',');
                }
                let _ = writeln!(out, ",,,,\"{}\"", e.to_string().replace('"', "'"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate::synthetic_constant_residual_candidate;
    use crate::model::find_case;

    fn small_opts() -> CertifyOptions {
        CertifyOptions { levels: vec![1, 10], grid_per_cell: 16, eval_points: 50, norm: None }
    }

    #[test]
    fn exact_candidate_certifies_with_zero_bound() {
        let case = find_case("ho-damp-trig").unwrap();
        let cand = Candidate::exact(&case);
        let cert = certify(&case.name, &case.problem, &cand, Some(&case.exact), &small_opts()).unwrap();
        assert_eq!(cert.verdict, Verdict::CertifiedAndVerified);
        assert!(cert.bound_curves.iter().flat_map(|c| &c.values).all(|&v| v <= 1e-8));
    }

    #[test]
    fn synthetic_candidate_error_equals_bound() {
        let case = find_case("fo-log").unwrap();
        let cand = synthetic_constant_residual_candidate(&case, 0.3).unwrap();
        let cert = certify(&case.name, &case.problem, &cand, Some(&case.exact), &small_opts()).unwrap();
        let err = cert.error_curve.as_ref().unwrap();
        for (b, e) in cert.bound_curves[0].values.iter().zip(err) {
            assert!((b - e).abs() <= 1e-9);
        }
    }

    #[test]
    fn levels_must_nest() {
        let opts = CertifyOptions { levels: vec![1, 10, 25], ..small_opts() };
        assert!(opts.validate().is_err());
    }

    #[test]
    fn combined_csv_layout() {
        let case = find_case("fo-poly").unwrap();
        let cand = Candidate::exact(&case);
        let cert = certify(&case.name, &case.problem, &cand, Some(&case.exact), &small_opts()).unwrap();
        let csv = cert.combined_csv();
        assert_eq!(csv.lines().next().unwrap(), "t,bound_1,bound_10,abs_error");
        assert_eq!(csv.lines().count(), 51);
        assert!(!csv.contains('\r'));
    }
}
