//! Regularization-strength grids, K-fold cross-validation on the held-out
//! risk, and the concentration-based lambda diagnostic.
//!
//! Cross-validation trains on each union of `K - 1` folds along the full
//! descending grid (warm-started), evaluates the same risk on the held-out
//! fold, and picks the grid value minimizing the mean held-out risk, with
//! ties broken toward the larger (sparser) lambda.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{LabeledDataset, PconfDataset};
use crate::error::{Error, Result};
use crate::penalty::PenaltySpec;
use crate::risk::SmoothRisk;
use crate::solver::{fit_path, SolverConfig};

/// Substream used for fold shuffling, so fold assignment never collides with
/// the data-generation streams of the same seed.
const FOLD_STREAM: u64 = 0xf01d;

/// Grid value used when the gradient at the origin is exactly zero and no
/// data-driven scale exists.
const DEGENERATE_LAMBDA: f64 = 1e-6;

pub const DEFAULT_GRID_POINTS: usize = 50;
pub const DEFAULT_GRID_RATIO: f64 = 0.01;

/// A strictly decreasing grid of positive penalty strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
    degenerate: bool,
}

impl LambdaGrid {
    /// Data-driven grid: 50 log-spaced values from
    /// `lambda_max = |grad R(0)|_inf` down to `0.01 * lambda_max`.
    pub fn auto<P: SmoothRisk>(problem: &P) -> Result<Self> {
        Self::auto_with(problem, DEFAULT_GRID_POINTS, DEFAULT_GRID_RATIO)
    }

    /// Data-driven grid with explicit point count and decay ratio.
    pub fn auto_with<P: SmoothRisk>(problem: &P, n_points: usize, ratio: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::config("grid needs at least 2 points"));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::config(format!("grid ratio must lie in (0, 1), got {ratio}")));
        }
        let grad0 = problem.gradient(&Array1::zeros(problem.dim()))?;
        let lambda_max = grad0.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if lambda_max == 0.0 {
            return Ok(LambdaGrid {
                values: vec![DEGENERATE_LAMBDA],
                degenerate: true,
            });
        }
        let values = (0..n_points)
            .map(|i| lambda_max * ratio.powf(i as f64 / (n_points - 1) as f64))
            .collect();
        Ok(LambdaGrid { values, degenerate: false })
    }

    /// Explicit grid; must be strictly decreasing and positive.
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("empty lambda grid"));
        }
        for v in &values {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::config(format!("grid values must be positive, got {v}")));
            }
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("grid values must be strictly decreasing"));
        }
        Ok(LambdaGrid { values, degenerate: false })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when the gradient at the origin vanished and the grid fell back
    /// to a single nominal value.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Cross-validation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Held-out risk per (grid point, fold).
    pub per_lambda_risk: Array2<f64>,
    /// Mean held-out risk per grid point.
    pub cv_curve: Vec<f64>,
    /// Grid value minimizing `cv_curve` (ties go to the larger lambda).
    pub lambda_opt: f64,
    /// Index of `lambda_opt` in the grid.
    pub lambda_opt_index: usize,
    /// Seed used for fold assignment; `None` when folds were given explicitly.
    pub fold_assignment_seed: Option<u64>,
}

/// Deterministic fold assignment: a seeded shuffle of `0..n` cut into `k`
/// contiguous blocks whose sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::config(format!(
            "cannot split {n} samples into {k} folds without an empty fold"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FOLD_STREAM);
    order.shuffle(&mut rng);

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

fn validate_folds(n: usize, folds: &[Vec<usize>]) -> Result<()> {
    if folds.len() < 2 {
        return Err(Error::config("need at least 2 folds"));
    }
    if folds.iter().any(|f| f.is_empty()) {
        return Err(Error::config("empty cross-validation fold"));
    }
    let mut seen = vec![false; n];
    for &i in folds.iter().flatten() {
        if i >= n {
            return Err(Error::shape(format!("fold index {i} out of range for {n} samples")));
        }
        if seen[i] {
            return Err(Error::config(format!("sample {i} appears in two folds")));
        }
        seen[i] = true;
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::config("every sample must appear in exactly one fold"));
    }
    Ok(())
}

fn select_lambda(grid: &LambdaGrid, cv_curve: &[f64]) -> (usize, f64) {
    // Grid is descending, so scanning in order with a strict "<" keeps the
    // largest lambda among exact ties.
    let mut best = 0;
    for (i, &v) in cv_curve.iter().enumerate() {
        if v < cv_curve[best] {
            best = i;
        }
    }
    (best, grid.values()[best])
}

pub(crate) fn cv_core<P: SmoothRisk>(
    data: &P,
    proto: &PenaltySpec,
    grid: &LambdaGrid,
    folds: &[Vec<usize>],
    cfg: &SolverConfig,
    seed: Option<u64>,
    warm_path: bool,
) -> Result<CvReport> {
    validate_folds(data.n_samples(), folds)?;
    let n = data.n_samples();
    let k = folds.len();
    let mut per_lambda_risk = Array2::zeros((grid.len(), k));

    for (fold_idx, holdout) in folds.iter().enumerate() {
        let in_fold: Vec<bool> = {
            let mut mask = vec![false; n];
            for &i in holdout {
                mask[i] = true;
            }
            mask
        };
        let train_rows: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
        let train = data.select_rows(&train_rows)?;
        let validation = data.select_rows(holdout)?;

        let path = if warm_path {
            fit_path(&train, proto, grid.values(), cfg)?
        } else {
            crate::solver::fit_path_independent(&train, proto, grid.values(), cfg)?
        };
        for (li, fitres) in path.iter().enumerate() {
            per_lambda_risk[[li, fold_idx]] = validation.risk(fitres.beta.as_array())?;
        }
    }

    let cv_curve: Vec<f64> = (0..grid.len())
        .map(|li| per_lambda_risk.row(li).sum() / k as f64)
        .collect();
    let (lambda_opt_index, lambda_opt) = select_lambda(grid, &cv_curve);

    Ok(CvReport {
        per_lambda_risk,
        cv_curve,
        lambda_opt,
        lambda_opt_index,
        fold_assignment_seed: seed,
    })
}

/// K-fold cross-validation of the penalized Pconf fit, scoring each grid
/// value by the held-out Pconf risk.
pub fn cross_validate(
    data: &PconfDataset,
    proto: &PenaltySpec,
    grid: &LambdaGrid,
    k: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<CvReport> {
    let folds = fold_assignment(data.n_samples(), k, seed)?;
    cv_core(data, proto, grid, &folds, cfg, Some(seed), true)
}

/// Cross-validation with caller-supplied folds (each sample exactly once).
pub fn cross_validate_with_folds(
    data: &PconfDataset,
    proto: &PenaltySpec,
    grid: &LambdaGrid,
    folds: &[Vec<usize>],
    cfg: &SolverConfig,
) -> Result<CvReport> {
    cv_core(data, proto, grid, folds, cfg, None, true)
}

/// Supervised-baseline analogue scored by the held-out logistic risk.
pub fn cross_validate_supervised(
    data: &LabeledDataset,
    proto: &PenaltySpec,
    grid: &LambdaGrid,
    k: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<CvReport> {
    let folds = fold_assignment(data.n_samples(), k, seed)?;
    cv_core(data, proto, grid, &folds, cfg, Some(seed), true)
}

/// Concentration-based penalty level
/// `C_psi * B * sqrt(2 log(2 d / delta) / n)` with `C_psi = L1 (1 + W)`,
/// where `B` bounds `|x_ij|`, `L1` bounds `|l'|`, and `W` bounds the
/// confidence weights `(1 - r) / r`.
///
/// This is a diagnostic: its constants are user-supplied assumptions, and the
/// value is never applied to a fit automatically.
pub fn theoretical_lambda(
    b: f64,
    w: f64,
    l1: f64,
    n: usize,
    d: usize,
    delta: f64,
) -> Result<f64> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::domain(format!("B must be positive, got {b}")));
    }
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::domain(format!("W must be >= 0, got {w}")));
    }
    if !(l1 > 0.0 && l1.is_finite()) {
        return Err(Error::domain(format!("L1 must be positive, got {l1}")));
    }
    if n == 0 || d == 0 {
        return Err(Error::domain("n and d must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let c_psi = l1 * (1.0 + w);
    Ok(c_psi * b * (2.0 * (2.0 * d as f64 / delta).ln() / n as f64).sqrt())
}
