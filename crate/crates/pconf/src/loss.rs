//! Scalar surrogate losses.
//!
//! Only the logistic loss is implemented; [`LossKind`] exists so that the
//! risk layer has an explicit extension point without committing to one.

use crate::error::{Error, Result};

/// Surrogate loss family used by the risk functions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum LossKind {
    #[default]
    Logistic,
}

impl LossKind {
    /// Loss value at margin `z`.
    pub fn value(self, z: f64) -> Result<f64> {
        match self {
            LossKind::Logistic => logistic_loss(z),
        }
    }

    /// Derivative with respect to the margin.
    pub fn derivative(self, z: f64) -> Result<f64> {
        match self {
            LossKind::Logistic => Ok(-sigmoid(-z)?),
        }
    }
}

/// Logistic loss `log(1 + exp(-z))`, evaluated without overflow.
///
/// For `z >= 0` the direct form `log1p(exp(-z))` is safe; for `z < 0` the
/// rearrangement `-z + log1p(exp(z))` avoids `exp` overflow near `z = -710`.
pub fn logistic_loss(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!("logistic_loss: non-finite input {z}")));
    }
    Ok(logistic_loss_raw(z))
}

#[inline(always)]
pub(crate) fn logistic_loss_raw(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Sigmoid `1 / (1 + exp(-z))`, evaluated without overflow.
pub fn sigmoid(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!("sigmoid: non-finite input {z}")));
    }
    Ok(sigmoid_raw(z))
}

#[inline(always)]
pub(crate) fn sigmoid_raw(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
