//! Sparsity penalties and their closed-form proximal operators.
//!
//! All three families act componentwise. The proximal map of a penalty `P`
//! with step `eta` is `z -> argmin_u (1/(2 eta)) (u - z)^2 + P(u)`; for L1
//! this is soft-thresholding, and SCAD/MCP have piecewise closed forms whose
//! subproblems stay convex as long as the step respects `eta < a - 1` (SCAD)
//! and `eta < gamma` (MCP).

use ndarray::Array1;

use crate::error::{Error, Result};

/// Default SCAD shape parameter `a`.
pub const SCAD_DEFAULT_A: f64 = 3.7;
/// Default MCP concavity parameter `gamma`.
pub const MCP_DEFAULT_GAMMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyFamily {
    L1,
    Scad,
    Mcp,
}

impl PenaltyFamily {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyFamily::L1 => "l1",
            PenaltyFamily::Scad => "scad",
            PenaltyFamily::Mcp => "mcp",
        }
    }
}

impl std::str::FromStr for PenaltyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "lasso" => Ok(PenaltyFamily::L1),
            "scad" => Ok(PenaltyFamily::Scad),
            "mcp" => Ok(PenaltyFamily::Mcp),
            other => Err(Error::config(format!("unknown penalty family '{other}'"))),
        }
    }
}

/// A penalty family with strength `lambda` and shape parameter
/// (SCAD `a`, MCP `gamma`; unused for L1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    family: PenaltyFamily,
    lambda: f64,
    shape: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, shape: f64) -> Result<Self> {
        let spec = PenaltySpec { family, lambda, shape };
        spec.validate()?;
        Ok(spec)
    }

    /// L1 (lasso) penalty `lambda * |beta|_1`.
    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::L1, lambda, f64::NAN)
    }

    /// SCAD with the customary shape `a = 3.7`.
    pub fn scad(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Scad, lambda, SCAD_DEFAULT_A)
    }

    pub fn scad_with_shape(lambda: f64, a: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Scad, lambda, a)
    }

    /// MCP with the customary concavity `gamma = 3`.
    pub fn mcp(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Mcp, lambda, MCP_DEFAULT_GAMMA)
    }

    pub fn mcp_with_shape(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Mcp, lambda, gamma)
    }

    fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::domain(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        match self.family {
            PenaltyFamily::L1 => {}
            PenaltyFamily::Scad => {
                if !(self.shape > 2.0) {
                    return Err(Error::config(format!(
                        "SCAD requires a > 2, got {}",
                        self.shape
                    )));
                }
            }
            PenaltyFamily::Mcp => {
                if !(self.shape > 0.0) {
                    return Err(Error::config(format!(
                        "MCP requires gamma > 0, got {}",
                        self.shape
                    )));
                }
            }
        }
        Ok(())
    }

    /// Same family and shape at a different strength.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, lambda, self.shape)
    }

    pub fn family(&self) -> PenaltyFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// Supremum of admissible proximal step sizes for this family.
    pub fn max_step(&self) -> f64 {
        match self.family {
            PenaltyFamily::L1 => f64::INFINITY,
            PenaltyFamily::Scad => self.shape - 1.0,
            PenaltyFamily::Mcp => self.shape,
        }
    }

    /// Checks that `eta` keeps the proximal subproblem convex.
    pub fn validate_step(&self, eta: f64) -> Result<()> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::config(format!("step size must be positive, got {eta}")));
        }
        if eta >= self.max_step() {
            return Err(Error::config(format!(
                "step {eta} is not admissible for {} with shape {} (requires eta < {})",
                self.family.name(),
                self.shape,
                self.max_step()
            )));
        }
        Ok(())
    }

    fn scalar_value(&self, b: f64) -> f64 {
        let lam = self.lambda;
        let ab = b.abs();
        match self.family {
            PenaltyFamily::L1 => lam * ab,
            PenaltyFamily::Scad => {
                let a = self.shape;
                if ab <= lam {
                    lam * ab
                } else if ab <= a * lam {
                    (-ab * ab + 2.0 * a * lam * ab - lam * lam) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * lam * lam / 2.0
                }
            }
            PenaltyFamily::Mcp => {
                let gamma = self.shape;
                if ab <= gamma * lam {
                    lam * ab - ab * ab / (2.0 * gamma)
                } else {
                    gamma * lam * lam / 2.0
                }
            }
        }
    }
}

/// Total penalty `sum_j P_lambda(beta_j)`.
pub fn penalty_value(spec: &PenaltySpec, beta: &Array1<f64>) -> f64 {
    beta.iter().map(|&b| spec.scalar_value(b)).sum()
}

#[inline(always)]
fn soft_threshold(z: f64, t: f64) -> f64 {
    let az = z.abs();
    if az <= t {
        0.0
    } else {
        z.signum() * (az - t)
    }
}

/// Soft-thresholding: the proximal map of `t * |u|` with unit step.
pub fn prox_l1(z: f64, t: f64) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("threshold must be >= 0, got {t}")));
    }
    Ok(soft_threshold(z, t))
}

#[inline(always)]
fn prox_scad_raw(z: f64, lambda: f64, eta: f64, a: f64) -> f64 {
    let az = z.abs();
    if az <= lambda * (1.0 + eta) {
        soft_threshold(z, eta * lambda)
    } else if az <= a * lambda {
        ((a - 1.0) * z - z.signum() * a * lambda * eta) / (a - 1.0 - eta)
    } else {
        z
    }
}

/// SCAD proximal map with step `eta`: soft-thresholding up to
/// `|z| <= lambda (1 + eta)`, a linear interpolation up to `a lambda`, and
/// the identity beyond.
pub fn prox_scad(z: f64, lambda: f64, eta: f64, a: f64) -> Result<f64> {
    if !(a > 2.0) {
        return Err(Error::config(format!("SCAD requires a > 2, got {a}")));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::config(format!("step size must be positive, got {eta}")));
    }
    if eta >= a - 1.0 {
        return Err(Error::config(format!(
            "SCAD proximal step requires eta < a - 1 = {}, got {eta}",
            a - 1.0
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(prox_scad_raw(z, lambda, eta, a))
}

#[inline(always)]
fn prox_mcp_raw(z: f64, lambda: f64, eta: f64, a: f64) -> f64 {
    if z.abs() <= a * lambda {
        soft_threshold(z, eta * lambda) / (1.0 - eta / a)
    } else {
        z
    }
}

/// MCP proximal map with step `eta`: soft-threshold then inflate by
/// `1/(1 - eta/a)` inside `|z| <= a lambda`, identity beyond.
pub fn prox_mcp(z: f64, lambda: f64, eta: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::config(format!("MCP requires gamma > 0, got {a}")));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::config(format!("step size must be positive, got {eta}")));
    }
    if eta >= a {
        return Err(Error::config(format!(
            "MCP proximal step requires eta < gamma = {a}, got {eta} (subproblem would be non-convex)"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(prox_mcp_raw(z, lambda, eta, a))
}

/// Componentwise proximal map of the whole penalty with step `eta`.
pub fn prox(spec: &PenaltySpec, z: &Array1<f64>, eta: f64) -> Result<Array1<f64>> {
    spec.validate_step(eta)?;
    let mut out = z.clone();
    prox_in_place(spec, &mut out, eta);
    Ok(out)
}

/// Hot-path variant: assumes `spec.validate_step(eta)` has already passed.
pub(crate) fn prox_in_place(spec: &PenaltySpec, z: &mut Array1<f64>, eta: f64) {
    let lam = spec.lambda;
    match spec.family {
        PenaltyFamily::L1 => {
            let t = eta * lam;
            z.mapv_inplace(|v| soft_threshold(v, t));
        }
        PenaltyFamily::Scad => {
            let a = spec.shape;
            z.mapv_inplace(|v| prox_scad_raw(v, lam, eta, a));
        }
        PenaltyFamily::Mcp => {
            let a = spec.shape;
            z.mapv_inplace(|v| prox_mcp_raw(v, lam, eta, a));
        }
    }
}
