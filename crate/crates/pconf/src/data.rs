//! Datasets and coefficient vectors.
//!
//! Both dataset types are immutable after construction, so they can be shared
//! read-only across folds, grid points, and replications.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Confidence scores below this are clamped up at construction, which keeps
/// the weights `alpha = (1 - r) / r` bounded by `(1 - r_min) / r_min`.
pub const DEFAULT_R_MIN: f64 = 1e-3;

fn check_design(x: &Array2<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::config("dataset must have at least one sample"));
    }
    if x.ncols() == 0 {
        return Err(Error::config("dataset must have at least one feature"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("design matrix contains non-finite entries"));
    }
    Ok(())
}

fn select(x: &Array2<f64>, rows: &[usize]) -> Result<Array2<f64>> {
    if let Some(&bad) = rows.iter().find(|&&i| i >= x.nrows()) {
        return Err(Error::shape(format!(
            "row index {bad} out of range for {} samples",
            x.nrows()
        )));
    }
    Ok(x.select(Axis(0), rows))
}

/// Positive-only training data: design matrix, per-sample confidence scores
/// `r_i`, and the cached weights `alpha_i = (1 - r_i) / r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PconfDataset {
    x: Array2<f64>,
    r: Array1<f64>,
    alpha: Array1<f64>,
    r_min: f64,
}

impl PconfDataset {
    /// Builds a dataset, clamping confidences to `[DEFAULT_R_MIN, 1]`.
    pub fn new(x: Array2<f64>, r: Array1<f64>) -> Result<Self> {
        Self::with_r_min(x, r, DEFAULT_R_MIN)
    }

    /// Builds a dataset with an explicit clamping floor `r_min in (0, 1]`.
    pub fn with_r_min(x: Array2<f64>, r: Array1<f64>, r_min: f64) -> Result<Self> {
        check_design(&x)?;
        if r.len() != x.nrows() {
            return Err(Error::shape(format!(
                "{} confidence scores for {} samples",
                r.len(),
                x.nrows()
            )));
        }
        if !(r_min > 0.0 && r_min <= 1.0) {
            return Err(Error::config(format!("r_min must lie in (0, 1], got {r_min}")));
        }
        for (i, &ri) in r.iter().enumerate() {
            if !ri.is_finite() || ri <= 0.0 || ri > 1.0 {
                return Err(Error::domain(format!(
                    "confidence r[{i}] = {ri} outside (0, 1]"
                )));
            }
        }
        let r = r.mapv(|ri| ri.max(r_min));
        let alpha = r.mapv(|ri| (1.0 - ri) / ri);
        Ok(Self { x, r, alpha, r_min })
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn confidences(&self) -> &Array1<f64> {
        &self.r
    }

    pub fn alpha(&self) -> &Array1<f64> {
        &self.alpha
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// New dataset holding the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = select(&self.x, rows)?;
        let r = Array1::from_iter(rows.iter().map(|&i| self.r[i]));
        Self::with_r_min(x, r, self.r_min)
    }
}

/// Fully labeled data with labels in `{+1, -1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: Array2<f64>,
    y: Array1<f64>,
}

impl LabeledDataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        check_design(&x)?;
        if y.len() != x.nrows() {
            return Err(Error::shape(format!(
                "{} labels for {} samples",
                y.len(),
                x.nrows()
            )));
        }
        for (i, &yi) in y.iter().enumerate() {
            if yi != 1.0 && yi != -1.0 {
                return Err(Error::domain(format!(
                    "label y[{i}] = {yi} is not +1 or -1"
                )));
            }
        }
        Ok(Self { x, y })
    }

    pub fn design(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let x = select(&self.x, rows)?;
        let y = Array1::from_iter(rows.iter().map(|&i| self.y[i]));
        Self::new(x, y)
    }
}

/// Coefficient vector of a linear classifier `g(x) = beta' x` (no intercept;
/// prepend a constant column if one is wanted).
///
/// Proximal updates produce exact zeros, so the support is read off with an
/// exact comparison rather than an epsilon threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(Array1<f64>);

impl Coefficients {
    pub fn new(beta: Array1<f64>) -> Self {
        Coefficients(beta)
    }

    pub fn zeros(dim: usize) -> Self {
        Coefficients(Array1::zeros(dim))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices of exactly nonzero coordinates.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| (b != 0.0).then_some(j))
            .collect()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array1<f64> {
        self.0
    }
}

impl From<Array1<f64>> for Coefficients {
    fn from(beta: Array1<f64>) -> Self {
        Coefficients(beta)
    }
}

impl From<Vec<f64>> for Coefficients {
    fn from(beta: Vec<f64>) -> Self {
        Coefficients(Array1::from_vec(beta))
    }
}

impl std::ops::Deref for Coefficients {
    type Target = Array1<f64>;

    fn deref(&self) -> &Array1<f64> {
        &self.0
    }
}
