//! Sparse positive-confidence (Pconf) classification.
//!
//! Pconf learning trains a binary classifier from positive samples only,
//! each paired with a confidence score `r_i = p(y = +1 | x_i)`; no negative
//! data is observed. This crate implements the confidence-weighted empirical
//! risk, L1/SCAD/MCP penalties with closed-form proximal operators, a
//! proximal gradient solver, cross-validated regularization selection, a
//! supervised logistic baseline on the same engine, and a Monte Carlo
//! simulation harness with support-recovery metrics.
//!
//! # Quick start
//!
//! ```
//! use ndarray::{array, Array1};
//! use pconf::{fit, LambdaGrid, PconfDataset, PenaltySpec, SolverConfig};
//!
//! # fn main() -> pconf::Result<()> {
//! let x = array![[1.2, 0.1], [0.8, -0.4], [1.5, 0.3], [0.9, 0.9]];
//! let r = Array1::from_vec(vec![0.9, 0.7, 0.95, 0.6]);
//! let data = PconfDataset::new(x, r)?;
//!
//! let spec = PenaltySpec::l1(0.05)?;
//! let result = fit(&data, &spec, &SolverConfig::default())?;
//! assert_eq!(result.beta.len(), 2);
//!
//! let grid = LambdaGrid::auto(&data)?;
//! assert!(!grid.is_empty());
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod error;
pub mod loss;
pub mod model_selection;
pub mod penalty;
pub mod risk;
pub mod sim;
pub mod solver;

pub use data::{Coefficients, LabeledDataset, PconfDataset, DEFAULT_R_MIN};
pub use error::{Error, Result};
pub use loss::{logistic_loss, sigmoid, LossKind};
pub use model_selection::{
    cross_validate, cross_validate_supervised, cross_validate_with_folds, fold_assignment,
    theoretical_lambda, CvReport, LambdaGrid,
};
pub use penalty::{
    penalty_value, prox, prox_l1, prox_mcp, prox_scad, PenaltyFamily, PenaltySpec,
};
pub use risk::{
    pconf_gradient, pconf_risk, predict, supervised_gradient, supervised_risk, SmoothRisk,
};
pub use sim::{
    evaluate, generate_pconf_training, generate_test, run_experiment, run_replication,
    sample_mvn_ar1, AggregateRow, ExperimentConfig, ExperimentReport, Link, Method, MetricRow,
    SimDesign, TestLabelRule,
};
pub use solver::{
    composite_objective, fit, fit_path, fit_problem, fit_supervised, lipschitz_estimate,
    FitResult, Init, SolverConfig, StepSize,
};
