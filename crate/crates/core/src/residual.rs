//! Residuals `Lu - f` of candidates and their per-cell sup-norm estimates.
//!
//! All partition levels are cut from one global uniform grid, so a fine cell's
//! samples are a subset of its parent's and refinement can never raise a
//! cell's epsilon.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::error::{CertifyError, Result};
use crate::linalg::NormP;
use crate::model::{Interval, OdeProblem};

pub const DEFAULT_GRID_PER_CELL: usize = 256;

/// Strictly increasing cut points `t0 = s_0 < ... < s_n = t1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub interval: Interval,
    pub cut_points: Vec<f64>,
}

impl Partition {
    pub fn new(interval: Interval, cut_points: Vec<f64>) -> Result<Self> {
        let ok = cut_points.len() >= 2
            && cut_points[0] == interval.t0
            && *cut_points.last().unwrap() == interval.t1
            && cut_points.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(CertifyError::InvalidProblem("partition cut points must increase from t0 to t1".into()));
        }
        Ok(Self { interval, cut_points })
    }

    pub fn uniform(interval: Interval, n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(CertifyError::InvalidProblem("partition needs at least one cell".into()));
        }
        Self::new(interval, interval.linspace(n_cells + 1))
    }

    /// Splits every cell into `k` equal parts; the old cut points are kept.
    pub fn refine(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(CertifyError::InvalidProblem("refinement factor must be positive".into()));
        }
        let mut cuts = Vec::with_capacity(self.n_cells() * k + 1);
        for w in self.cut_points.windows(2) {
            let cell = Interval { t0: w[0], t1: w[1] };
            let inner = cell.linspace(k + 1);
            cuts.extend_from_slice(&inner[..k]);
        }
        cuts.push(self.interval.t1);
        Self::new(self.interval, cuts)
    }

    pub fn n_cells(&self) -> usize {
        self.cut_points.len() - 1
    }

    pub fn cell(&self, i: usize) -> Interval {
        Interval { t0: self.cut_points[i], t1: self.cut_points[i + 1] }
    }
}

/// Residual norm estimates `eps[i]` on the cells of a partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualProfile {
    pub partition: Partition,
    pub eps: Vec<f64>,
    pub norm_p: NormP,
    pub grid_per_cell: usize,
}

impl ResidualProfile {
    pub fn new(partition: Partition, eps: Vec<f64>, norm_p: NormP, grid_per_cell: usize) -> Result<Self> {
        if eps.len() != partition.n_cells() {
            return Err(CertifyError::DimensionMismatch { expected: partition.n_cells(), got: eps.len() });
        }
        if eps.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(CertifyError::InvalidProblem("residual bounds must be finite and nonnegative".into()));
        }
        Ok(Self { partition, eps, norm_p, grid_per_cell })
    }

    /// Single cell with residual bound `epsilon` on the whole interval.
    pub fn constant(interval: Interval, epsilon: f64) -> Result<Self> {
        Self::new(Partition::uniform(interval, 1)?, vec![epsilon], NormP::Two, 1)
    }

    /// Uniform partition with the same bound on every cell.
    pub fn uniform_constant(interval: Interval, n_cells: usize, epsilon: f64) -> Result<Self> {
        Self::new(Partition::uniform(interval, n_cells)?, vec![epsilon; n_cells], NormP::Two, 1)
    }

    pub fn n_cells(&self) -> usize {
        self.eps.len()
    }

    pub fn global_epsilon(&self) -> f64 {
        self.eps.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.partition.clone(), self.eps.iter().map(|e| e * c).collect(), self.norm_p, self.grid_per_cell)
    }

    /// CSV with columns `cell_index,s_left,s_right,epsilon`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell_index,s_left,s_right,epsilon\n");
        for (i, e) in self.eps.iter().enumerate() {
            let c = self.partition.cell(i);
            let _ = writeln!(out, "{i},{:.16e},{:.16e},{:.16e}", c.t0, c.t1, e);
        }
        out
    }
}

/// `Lu(t) - f(t)` for every component.
pub fn residual_at(problem: &OdeProblem, candidate: &Candidate, t: f64) -> Result<Vec<Complex64>> {
    check_dims(problem, candidate)?;
    let jets = candidate.jet_eval(t, problem.order())?;
    residual_from_jets(problem, &jets, t)
}

fn residual_from_jets(problem: &OdeProblem, jets: &[crate::jet::ComplexJet], t: f64) -> Result<Vec<Complex64>> {
    let lu = problem.apply_operator(jets, t)?;
    Ok(lu.into_iter().zip(problem.forcing_at(t)).map(|(a, f)| a - f).collect())
}

fn check_dims(problem: &OdeProblem, candidate: &Candidate) -> Result<()> {
    if candidate.dim() != problem.dim() {
        return Err(CertifyError::DimensionMismatch { expected: problem.dim(), got: candidate.dim() });
    }
    Ok(())
}

/// Norm of a residual vector (modulus for scalar problems).
pub fn residual_norm(r: &[Complex64], norm: NormP) -> f64 {
    norm.vector_norm(r.iter().map(|z| z.norm()))
}

/// Residual norms at many times.
pub fn residual_norms(problem: &OdeProblem, candidate: &Candidate, ts: &[f64], norm: NormP) -> Result<Vec<f64>> {
    check_dims(problem, candidate)?;
    const CHUNK: usize = 1024;
    let order = problem.order();
    let eval_chunk = |chunk: &[f64]| -> Result<Vec<f64>> {
        let jets = candidate.eval_batch(chunk, order)?;
        chunk
            .iter()
            .zip(&jets)
            .map(|(&t, j)| Ok(residual_norm(&residual_from_jets(problem, j, t)?, norm)))
            .collect()
    };
    let chunks: Vec<&[f64]> = ts.chunks(CHUNK).collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Vec<f64>>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|c| eval_chunk(c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Vec<f64>>> = chunks.iter().map(|c| eval_chunk(c)).collect();
    let mut out = Vec::with_capacity(ts.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Max of the residual norm over a closed uniform grid of `grid_per_cell`
/// intervals on `cell`. A lower estimate of the true supremum.
pub fn sup_residual(
    problem: &OdeProblem,
    candidate: &Candidate,
    cell: Interval,
    grid_per_cell: usize,
    norm: NormP,
) -> Result<f64> {
    if grid_per_cell < 2 {
        return Err(CertifyError::InvalidProblem("grid_per_cell must be at least 2".into()));
    }
    let ts = cell.linspace(grid_per_cell + 1);
    Ok(residual_norms(problem, candidate, &ts, norm)?.into_iter().fold(0.0, f64::max))
}

/// Residual norms at the nodes of one uniform grid over the domain.
#[derive(Clone, Debug)]
pub struct ResidualSamples {
    pub interval: Interval,
    pub nodes: Vec<f64>,
    pub norms: Vec<f64>,
    pub norm_p: NormP,
}

impl ResidualSamples {
    pub fn collect(problem: &OdeProblem, candidate: &Candidate, n_intervals: usize, norm: NormP) -> Result<Self> {
        if n_intervals == 0 {
            return Err(CertifyError::InvalidProblem("grid needs at least one interval".into()));
        }
        let nodes = problem.domain.linspace(n_intervals + 1);
        let norms = residual_norms(problem, candidate, &nodes, norm)?;
        if norms.iter().any(|v| !v.is_finite()) {
            return Err(CertifyError::InvalidProblem("non-finite residual".into()));
        }
        Ok(Self { interval: problem.domain, nodes, norms, norm_p: norm })
    }

    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Profile over `n_cells` cells of the grid; cell `i` takes the max over
    /// its nodes, endpoints included, so shared nodes count for both cells.
    pub fn profile(&self, n_cells: usize) -> Result<ResidualProfile> {
        let n = self.n_intervals();
        if n_cells == 0 || !n.is_multiple_of(n_cells) {
            return Err(CertifyError::InvalidProblem(format!("{n_cells} cells do not divide a grid of {n} intervals")));
        }
        let g = n / n_cells;
        let cuts: Vec<f64> = (0..=n_cells).map(|i| self.nodes[i * g]).collect();
        let eps = (0..n_cells).map(|i| self.norms[i * g..=(i + 1) * g].iter().copied().fold(0.0, f64::max)).collect();
        ResidualProfile::new(Partition::new(self.interval, cuts)?, eps, self.norm_p, g)
    }

    /// Every `stride`-th node, as a coarser grid.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.n_intervals().is_multiple_of(stride) {
            return Err(CertifyError::InvalidProblem("stride must divide the grid".into()));
        }
        Ok(Self {
            interval: self.interval,
            nodes: self.nodes.iter().step_by(stride).copied().collect(),
            norms: self.norms.iter().step_by(stride).copied().collect(),
            norm_p: self.norm_p,
        })
    }
}

/// Uniform profile with `n_cells` cells and `grid_per_cell` intervals per cell.
pub fn residual_profile(
    problem: &OdeProblem,
    candidate: &Candidate,
    n_cells: usize,
    grid_per_cell: usize,
) -> Result<ResidualProfile> {
    if grid_per_cell < 2 {
        return Err(CertifyError::InvalidProblem("grid_per_cell must be at least 2".into()));
    }
    let samples = ResidualSamples::collect(problem, candidate, n_cells * grid_per_cell, problem.norm())?;
    samples.profile(n_cells)
}

/// Grid-sensitivity check: global epsilon at three grid densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDiagnostic {
    pub grid_sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub max_relative_change: f64,
    pub grid_sensitive: bool,
}

pub const GRID_SENSITIVITY_THRESHOLD: f64 = 0.01;

impl GridDiagnostic {
    /// Global epsilon of `dense` (which has `2 * base` intervals per cell of
    /// an `n_cells` partition) subsampled to `base / 2`, `base` and `2 base`.
    pub fn from_dense(dense: &ResidualSamples, base: usize) -> Result<Self> {
        let mut epsilons = Vec::new();
        for stride in [4, 2, 1] {
            epsilons.push(dense.subsample(stride)?.profile(1)?.global_epsilon());
        }
        let reference = epsilons[2];
        let max_relative_change = if reference > 0.0 {
            epsilons.iter().map(|e| (reference - e).abs() / reference).fold(0.0, f64::max)
        } else {
            0.0
        };
        Ok(Self {
            grid_sizes: vec![base / 2, base, base * 2],
            epsilons,
            max_relative_change,
            grid_sensitive: max_relative_change > GRID_SENSITIVITY_THRESHOLD,
        })
    }
}

/// Compares the global epsilon on `base/2`, `base` and `2 base` intervals per
/// cell of an `n_cells` partition.
pub fn grid_diagnostic(
    problem: &OdeProblem,
    candidate: &Candidate,
    n_cells: usize,
    base: usize,
) -> Result<GridDiagnostic> {
    if base < 2 || !base.is_multiple_of(2) {
        return Err(CertifyError::InvalidProblem("diagnostic base grid must be even".into()));
    }
    let dense = ResidualSamples::collect(problem, candidate, n_cells * base * 2, problem.norm())?;
    GridDiagnostic::from_dense(&dense, base)
}
