//! Synthetic-data generation, evaluation metrics, and Monte Carlo
//! experiment orchestration.
//!
//! # Reproducibility
//!
//! All randomness flows through ChaCha8, a portable counter-based generator
//! with 2^64 independent substreams per seed. Replication `r` of an
//! experiment derives its seed as `base_seed + r` and splits purposes across
//! substreams:
//!
//! * stream 0: training data (stream 1 if the first draw has no positives),
//! * stream 2: test data,
//! * fold shuffling uses its own reserved stream inside `fold_assignment`.
//!
//! Two runs with the same design and base seed therefore produce bitwise
//! identical reports, regardless of thread scheduling: replications are
//! reduced by index, never by completion order.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{Coefficients, LabeledDataset, PconfDataset};
use crate::error::{Error, Result};
use crate::model_selection::{LambdaGrid, DEFAULT_GRID_POINTS, DEFAULT_GRID_RATIO};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::risk::predict;
use crate::solver::{fit_path, fit_problem, SolverConfig};

const STREAM_TRAIN: u64 = 0;
const STREAM_TEST: u64 = 2;

/// Link mapping the linear predictor to the positive-class probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Logistic,
    Probit,
}

impl Link {
    fn probability(self, eta: f64) -> f64 {
        match self {
            Link::Logistic => crate::loss::sigmoid_raw(eta),
            Link::Probit => 0.5 * statrs::function::erf::erfc(-eta / std::f64::consts::SQRT_2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Logistic => "logistic",
            Link::Probit => "probit",
        }
    }
}

impl std::str::FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" => Ok(Link::Logistic),
            "probit" => Ok(Link::Probit),
            other => Err(Error::config(format!("unknown link '{other}'"))),
        }
    }
}

/// How test labels are assigned from the true discriminant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestLabelRule {
    /// `+1` iff `x' beta_star >= 0`; isolates boundary recovery.
    Deterministic,
    /// `+1` iff `x' beta_star + eps >= 0` with `eps ~ N(0, sigma^2)`.
    NoisyThreshold { sigma: f64 },
}

impl TestLabelRule {
    pub fn noisy() -> Self {
        TestLabelRule::NoisyThreshold { sigma: 1.0 }
    }
}

/// A Monte Carlo design: data-generating process plus replication plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub n: usize,
    pub d: usize,
    /// AR(1) correlation of the covariates, in `[0, 1)`.
    pub rho_x: f64,
    pub link: Link,
    pub beta_star: Array1<f64>,
    pub n_test: usize,
    pub test_label_rule: TestLabelRule,
    pub replications: usize,
    pub base_seed: u64,
}

impl SimDesign {
    /// Sparse default truth `(1, -1, 0.5, 0, ..., 0)`.
    pub fn default_beta_star(d: usize) -> Array1<f64> {
        let mut b = Array1::zeros(d);
        b[0] = 1.0;
        b[1] = -1.0;
        b[2] = 0.5;
        b
    }

    pub fn new(n: usize, d: usize, rho_x: f64, link: Link) -> Result<Self> {
        if d < 3 {
            return Err(Error::config(
                "the default beta_star needs at least 3 features; set beta_star explicitly",
            ));
        }
        let design = SimDesign {
            n,
            d,
            rho_x,
            link,
            beta_star: Self::default_beta_star(d),
            n_test: 5000,
            test_label_rule: TestLabelRule::Deterministic,
            replications: 100,
            base_seed: 0,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::config("n and d must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho_x) {
            return Err(Error::domain(format!(
                "rho_x must lie in [0, 1), got {}",
                self.rho_x
            )));
        }
        if self.beta_star.len() != self.d {
            return Err(Error::shape(format!(
                "beta_star has length {}, design has {} features",
                self.beta_star.len(),
                self.d
            )));
        }
        if self.n_test == 0 {
            return Err(Error::config("n_test must be positive"));
        }
        if self.replications == 0 {
            return Err(Error::config("need at least one replication"));
        }
        if let TestLabelRule::NoisyThreshold { sigma } = self.test_label_rule {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::config(format!("noise sigma must be >= 0, got {sigma}")));
            }
        }
        Ok(())
    }

    /// Compact identifier used in report files.
    pub fn id(&self) -> String {
        let noise = match self.test_label_rule {
            TestLabelRule::Deterministic => "",
            TestLabelRule::NoisyThreshold { .. } => "_noisy",
        };
        format!(
            "n{}_p{}_rho{}_{}{}",
            self.n,
            self.d,
            self.rho_x,
            self.link.name(),
            noise
        )
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        self.base_seed.wrapping_add(replication as u64)
    }
}

/// Estimators compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Unpenalized Pconf empirical risk minimization.
    Pconf,
    PconfLasso,
    PconfScad,
    PconfMcp,
    /// Supervised baselines on the fully labeled sample.
    Lasso,
    Scad,
    Mcp,
}

impl Method {
    pub fn all() -> [Method; 7] {
        [
            Method::Pconf,
            Method::PconfLasso,
            Method::PconfScad,
            Method::PconfMcp,
            Method::Lasso,
            Method::Scad,
            Method::Mcp,
        ]
    }

    pub fn pconf_methods() -> [Method; 4] {
        [Method::Pconf, Method::PconfLasso, Method::PconfScad, Method::PconfMcp]
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Pconf => "Pconf",
            Method::PconfLasso => "Pconf-Lasso",
            Method::PconfScad => "Pconf-SCAD",
            Method::PconfMcp => "Pconf-MCP",
            Method::Lasso => "Lasso",
            Method::Scad => "SCAD",
            Method::Mcp => "MCP",
        }
    }

    pub fn uses_pconf_data(self) -> bool {
        matches!(
            self,
            Method::Pconf | Method::PconfLasso | Method::PconfScad | Method::PconfMcp
        )
    }

    /// Penalty family, or `None` for the unpenalized estimator.
    pub fn family(self) -> Option<PenaltyFamily> {
        match self {
            Method::Pconf => None,
            Method::PconfLasso | Method::Lasso => Some(PenaltyFamily::L1),
            Method::PconfScad | Method::Scad => Some(PenaltyFamily::Scad),
            Method::PconfMcp | Method::Mcp => Some(PenaltyFamily::Mcp),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pconf" => Ok(Method::Pconf),
            "pconf-lasso" | "pconf-l1" => Ok(Method::PconfLasso),
            "pconf-scad" => Ok(Method::PconfScad),
            "pconf-mcp" => Ok(Method::PconfMcp),
            "lasso" | "l1" => Ok(Method::Lasso),
            "scad" => Ok(Method::Scad),
            "mcp" => Ok(Method::Mcp),
            other => Err(Error::config(format!("unknown method '{other}'"))),
        }
    }
}

/// Per-replication metrics for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: String,
    /// Test-set classification accuracy.
    pub prediction: f64,
    /// Squared l2 estimation error against the truth.
    pub l2_sq_error: f64,
    /// TP / (TP + FN) over selected-vs-true supports; 0/0 counts as 0.
    pub tpr: f64,
    /// FP / (TP + FP); 0/0 counts as 0.
    pub fdr: f64,
    /// Number of exactly nonzero estimated coefficients.
    pub model_size: usize,
}

/// Mean and across-replication sample standard deviation per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: String,
    pub prediction_mean: f64,
    pub prediction_sd: f64,
    pub l2sq_mean: f64,
    pub l2sq_sd: f64,
    pub tpr_mean: f64,
    pub tpr_sd: f64,
    pub fdr_mean: f64,
    pub fdr_sd: f64,
    pub size_mean: f64,
    pub size_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepFailure {
    pub replication: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub design_id: String,
    pub methods: Vec<Method>,
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<RepFailure>,
    pub aggregate: Vec<AggregateRow>,
}

/// Fixed epoch budget of the benchmark protocol (see
/// [`ExperimentConfig::default`]).
pub const BENCHMARK_EPOCH_BUDGET: usize = 100;
/// Init scale of the benchmark protocol.
pub const BENCHMARK_INIT_SIGMA: f64 = 0.01;

/// Tuning knobs shared by every replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub grid_points: usize,
    pub grid_ratio: f64,
    pub solver: SolverConfig,
    /// Warm-start fits along the lambda grid instead of restarting each one
    /// from the configured init.
    pub warm_path: bool,
}

impl Default for ExperimentConfig {
    /// The benchmark protocol: every fit starts from a small Gaussian init
    /// (re-seeded per replication) and runs a fixed epoch budget, with each
    /// grid value fit independently rather than warm-started.
    ///
    /// The budget is the protocol's implicit regularizer: the estimator is
    /// defined as the iterate after `BENCHMARK_EPOCH_BUDGET` proximal steps,
    /// not as the exact penalized minimizer. At these benchmark designs the
    /// confidences carry the exact margins, so exact minimizers interpolate
    /// them and the budgeted iterate is the better-behaved (and historically
    /// reported) estimator. Fully converged fits are available by raising
    /// `max_epochs` and warm-starting.
    fn default() -> Self {
        ExperimentConfig {
            folds: 5,
            grid_points: DEFAULT_GRID_POINTS,
            grid_ratio: DEFAULT_GRID_RATIO,
            solver: SolverConfig {
                step: crate::solver::StepSize::Auto,
                max_epochs: BENCHMARK_EPOCH_BUDGET,
                tol: 1e-8,
                init: crate::solver::Init::Gaussian { sigma: BENCHMARK_INIT_SIGMA, seed: 0 },
            },
            warm_path: false,
        }
    }
}

impl ExperimentConfig {
    /// Fully converging configuration: zero init, default tolerance and
    /// epoch allowance, warm starts along the grid.
    pub fn converged() -> Self {
        ExperimentConfig {
            folds: 5,
            grid_points: DEFAULT_GRID_POINTS,
            grid_ratio: DEFAULT_GRID_RATIO,
            solver: SolverConfig::default(),
            warm_path: true,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rows i.i.d. `N(0, Sigma)` with `Sigma_jk = rho^{|j-k|}`, generated by the
/// exact AR(1) recurrence `x_1 = z_1`, `x_j = rho x_{j-1} + sqrt(1-rho^2) z_j`.
pub fn sample_mvn_ar1(n: usize, d: usize, rho: f64, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::domain(format!("rho must lie in [0, 1), got {rho}")));
    }
    let innovation = (1.0 - rho * rho).sqrt();
    let mut x = Array2::zeros((n, d));
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            let value = if j == 0 { z } else { rho * prev + innovation * z };
            x[[i, j]] = value;
            prev = value;
        }
    }
    Ok(x)
}

fn draw_training(
    design: &SimDesign,
    rng: &mut ChaCha8Rng,
) -> Result<(PconfDataset, LabeledDataset)> {
    let x = sample_mvn_ar1(design.n, design.d, design.rho_x, rng)?;
    let eta = x.dot(&design.beta_star);
    let r = eta.mapv(|e| design.link.probability(e));
    let y = Array1::from_shape_fn(design.n, |i| {
        if rng.random::<f64>() < r[i] {
            1.0
        } else {
            -1.0
        }
    });
    let positives: Vec<usize> = (0..design.n).filter(|&i| y[i] > 0.0).collect();
    if positives.is_empty() {
        return Err(Error::EmptyPositiveSet);
    }
    let x_pos = x.select(Axis(0), &positives);
    let r_pos = Array1::from_iter(positives.iter().map(|&i| r[i]));
    let pconf = PconfDataset::new(x_pos, r_pos)?;
    let full = LabeledDataset::new(x, y)?;
    Ok((pconf, full))
}

/// Draws the training sample: covariates, true confidences through the
/// design's link, and Bernoulli labels. Returns the positive rows with their
/// true confidences (the Pconf training set) together with the fully labeled
/// sample for supervised baselines.
///
/// If no positive labels come up, the draw is retried once on the next RNG
/// substream; a second empty draw is an error.
pub fn generate_pconf_training(
    design: &SimDesign,
    rng: &mut ChaCha8Rng,
) -> Result<(PconfDataset, LabeledDataset)> {
    design.validate()?;
    match draw_training(design, rng) {
        Err(Error::EmptyPositiveSet) => {
            let next = rng.get_stream().wrapping_add(1);
            rng.set_stream(next);
            rng.set_word_pos(0);
            draw_training(design, rng)
        }
        other => other,
    }
}

/// Draws the independent test set and labels it from the true discriminant
/// per the design's label rule (`>= 0` maps to `+1`, matching `predict`).
pub fn generate_test(design: &SimDesign, rng: &mut ChaCha8Rng) -> Result<LabeledDataset> {
    design.validate()?;
    let x = sample_mvn_ar1(design.n_test, design.d, design.rho_x, rng)?;
    let eta = x.dot(&design.beta_star);
    let y = match design.test_label_rule {
        TestLabelRule::Deterministic => eta.mapv(|e| if e >= 0.0 { 1.0 } else { -1.0 }),
        TestLabelRule::NoisyThreshold { sigma } => Array1::from_shape_fn(design.n_test, |i| {
            let noise: f64 = StandardNormal.sample(rng);
            if eta[i] + sigma * noise >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }),
    };
    LabeledDataset::new(x, y)
}

/// Test accuracy, squared l2 estimation error, and support-recovery counts
/// of an estimate against the truth.
pub fn evaluate(
    method: &str,
    beta_hat: &Coefficients,
    beta_star: &Array1<f64>,
    test: &LabeledDataset,
) -> Result<MetricRow> {
    if beta_hat.len() != beta_star.len() {
        return Err(Error::shape(format!(
            "estimate has length {}, truth has length {}",
            beta_hat.len(),
            beta_star.len()
        )));
    }
    let labels = predict(test.design(), beta_hat)?;
    let hits = labels
        .iter()
        .zip(test.labels())
        .filter(|(a, b)| a == b)
        .count();
    let prediction = hits as f64 / test.n_samples() as f64;

    let l2_sq_error = beta_hat
        .iter()
        .zip(beta_star.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for j in 0..beta_star.len() {
        let selected = beta_hat[j] != 0.0;
        let active = beta_star[j] != 0.0;
        match (selected, active) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };

    Ok(MetricRow {
        method: method.to_string(),
        prediction,
        l2_sq_error,
        tpr: ratio(tp, tp + fn_),
        fdr: ratio(fp, tp + fp),
        model_size: tp + fp,
    })
}

fn proto_spec(family: PenaltyFamily) -> PenaltySpec {
    match family {
        PenaltyFamily::L1 => PenaltySpec::l1(0.0),
        PenaltyFamily::Scad => PenaltySpec::scad(0.0),
        PenaltyFamily::Mcp => PenaltySpec::mcp(0.0),
    }
    .expect("zero lambda with default shape is always valid")
}

fn fit_method<P: CvDispatch>(
    method: Method,
    data: &P,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<Coefficients> {
    match method.family() {
        None => {
            let spec = PenaltySpec::l1(0.0)?;
            Ok(fit_problem(data, &spec, &cfg.solver)?.beta)
        }
        Some(family) => {
            let proto = proto_spec(family);
            let grid = LambdaGrid::auto_with(data, cfg.grid_points, cfg.grid_ratio)?;
            let opt_index = if grid.len() == 1 {
                0
            } else {
                data.cv(&proto, &grid, cfg, seed)?.lambda_opt_index
            };
            // Refit on the full data at the selected strength: warm-started
            // down the grid when paths are warm, otherwise a single run of
            // the same protocol as the CV fits.
            let refit_lambdas: &[f64] = if cfg.warm_path {
                &grid.values()[..=opt_index]
            } else {
                &grid.values()[opt_index..=opt_index]
            };
            let path = if cfg.warm_path {
                fit_path(data, &proto, refit_lambdas, &cfg.solver)?
            } else {
                crate::solver::fit_path_independent(data, &proto, refit_lambdas, &cfg.solver)?
            };
            Ok(path
                .into_iter()
                .next_back()
                .expect("non-empty path")
                .beta)
        }
    }
}

// Small helper so `fit_method` stays generic over the dataset type.
trait CvDispatch: crate::risk::SmoothRisk {
    fn cv(
        &self,
        proto: &PenaltySpec,
        grid: &LambdaGrid,
        cfg: &ExperimentConfig,
        seed: u64,
    ) -> Result<crate::model_selection::CvReport>;
}

impl CvDispatch for PconfDataset {
    fn cv(
        &self,
        proto: &PenaltySpec,
        grid: &LambdaGrid,
        cfg: &ExperimentConfig,
        seed: u64,
    ) -> Result<crate::model_selection::CvReport> {
        let folds = crate::model_selection::fold_assignment(self.n_samples(), cfg.folds, seed)?;
        crate::model_selection::cv_core(
            self,
            proto,
            grid,
            &folds,
            &cfg.solver,
            Some(seed),
            cfg.warm_path,
        )
    }
}

impl CvDispatch for LabeledDataset {
    fn cv(
        &self,
        proto: &PenaltySpec,
        grid: &LambdaGrid,
        cfg: &ExperimentConfig,
        seed: u64,
    ) -> Result<crate::model_selection::CvReport> {
        let folds = crate::model_selection::fold_assignment(self.n_samples(), cfg.folds, seed)?;
        crate::model_selection::cv_core(
            self,
            proto,
            grid,
            &folds,
            &cfg.solver,
            Some(seed),
            cfg.warm_path,
        )
    }
}

/// Runs one replication: generate data, select lambda by cross-validation,
/// fit each method, and evaluate on the shared test set.
pub fn run_replication(
    design: &SimDesign,
    methods: &[Method],
    cfg: &ExperimentConfig,
    replication: usize,
) -> Result<Vec<MetricRow>> {
    let seed = design.replication_seed(replication);

    let mut train_rng = rng_for(seed, STREAM_TRAIN);
    let (pconf_data, labeled_data) = generate_pconf_training(design, &mut train_rng)?;

    let mut test_rng = rng_for(seed, STREAM_TEST);
    let test = generate_test(design, &mut test_rng)?;

    // A Gaussian init draws a fresh vector per replication, like redrawing
    // beta^(0) on every run; the derived seed keeps it reproducible.
    let mut cfg = cfg.clone();
    if let crate::solver::Init::Gaussian { sigma, .. } = cfg.solver.init {
        cfg.solver.init = crate::solver::Init::Gaussian {
            sigma,
            seed: seed ^ 0x1217_5d41_9b1c_0fe3,
        };
    }

    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let beta = if method.uses_pconf_data() {
            fit_method(method, &pconf_data, seed, &cfg)?
        } else {
            fit_method(method, &labeled_data, seed, &cfg)?
        };
        rows.push(evaluate(method.label(), &beta, &design.beta_star, &test)?);
    }
    Ok(rows)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn aggregate(methods: &[Method], records: &[ReplicationRecord]) -> Vec<AggregateRow> {
    methods
        .iter()
        .map(|m| {
            let label = m.label();
            let collect = |f: &dyn Fn(&MetricRow) -> f64| -> Vec<f64> {
                records
                    .iter()
                    .flat_map(|rec| rec.rows.iter().filter(|r| r.method == label).map(f))
                    .collect()
            };
            let (prediction_mean, prediction_sd) = mean_sd(&collect(&|r| r.prediction));
            let (l2sq_mean, l2sq_sd) = mean_sd(&collect(&|r| r.l2_sq_error));
            let (tpr_mean, tpr_sd) = mean_sd(&collect(&|r| r.tpr));
            let (fdr_mean, fdr_sd) = mean_sd(&collect(&|r| r.fdr));
            let (size_mean, size_sd) = mean_sd(&collect(&|r| r.model_size as f64));
            AggregateRow {
                method: label.to_string(),
                prediction_mean,
                prediction_sd,
                l2sq_mean,
                l2sq_sd,
                tpr_mean,
                tpr_sd,
                fdr_mean,
                fdr_sd,
                size_mean,
                size_sd,
            }
        })
        .collect()
}

/// Runs all replications (in parallel) and aggregates.
///
/// A failed replication is recorded with its seed and excluded, as long as
/// failures stay under 5% of the requested replications; otherwise the whole
/// experiment aborts with [`Error::TooManyFailures`].
pub fn run_experiment(
    design: &SimDesign,
    methods: &[Method],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    design.validate()?;
    if methods.is_empty() {
        return Err(Error::config("no methods requested"));
    }

    let outcomes: Vec<(usize, std::result::Result<Vec<MetricRow>, Error>)> = (0..design
        .replications)
        .into_par_iter()
        .map(|rep| (rep, run_replication(design, methods, cfg, rep)))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes {
        let seed = design.replication_seed(rep);
        match outcome {
            Ok(rows) => records.push(ReplicationRecord { replication: rep, seed, rows }),
            Err(err) => failures.push(RepFailure {
                replication: rep,
                seed,
                reason: err.to_string(),
            }),
        }
    }

    let total = design.replications;
    if (failures.len() as f64) / (total as f64) >= 0.05 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            seeds: failures.iter().map(|f| f.seed).collect(),
        });
    }

    let aggregate = aggregate(methods, &records);
    Ok(ExperimentReport {
        design_id: design.id(),
        methods: methods.to_vec(),
        records,
        failures,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_design() -> SimDesign {
        let mut d = SimDesign::new(60, 5, 0.0, Link::Logistic).unwrap();
        d.n_test = 400;
        d.replications = 3;
        d.base_seed = 7;
        d
    }

    #[test]
    fn ar1_sampler_matches_target_covariance() {
        let mut rng = rng_for(100, 0);
        let n = 100_000;
        let x = sample_mvn_ar1(n, 3, 0.0, &mut rng).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let cov = x.column(j).dot(&x.column(k)) / n as f64;
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((cov - target).abs() < 0.02, "cov[{j},{k}] = {cov}");
            }
        }

        let mut rng = rng_for(101, 0);
        let x = sample_mvn_ar1(n, 3, 0.5, &mut rng).unwrap();
        let c02 = x.column(0).dot(&x.column(2)) / n as f64;
        assert!((c02 - 0.25).abs() < 0.02, "lag-2 covariance {c02}");
        let c01 = x.column(0).dot(&x.column(1)) / n as f64;
        assert!((c01 - 0.5).abs() < 0.02);
    }

    #[test]
    fn ar1_sampler_is_deterministic_and_validates_rho() {
        let a = sample_mvn_ar1(5, 4, 0.3, &mut rng_for(9, 2)).unwrap();
        let b = sample_mvn_ar1(5, 4, 0.3, &mut rng_for(9, 2)).unwrap();
        assert_eq!(a, b);
        let bits_equal = a
            .iter()
            .zip(b.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        assert!(bits_equal);
        assert!(sample_mvn_ar1(5, 4, 1.0, &mut rng_for(9, 2)).is_err());
        assert!(sample_mvn_ar1(5, 4, -0.1, &mut rng_for(9, 2)).is_err());
    }

    #[test]
    fn zero_truth_gives_half_confidence_under_logistic() {
        let mut design = toy_design();
        design.beta_star = Array1::zeros(5);
        let (pconf, full) = generate_pconf_training(&design, &mut rng_for(3, 0)).unwrap();
        assert!(pconf.confidences().iter().all(|&r| r == 0.5));
        assert_eq!(full.n_samples(), 60);
    }

    #[test]
    fn positive_rows_match_full_sample_labels() {
        let design = toy_design();
        let mut rng = rng_for(design.replication_seed(0), STREAM_TRAIN);
        let (pconf, full) = generate_pconf_training(&design, &mut rng).unwrap();
        let positives: Vec<usize> = (0..full.n_samples())
            .filter(|&i| full.labels()[i] > 0.0)
            .collect();
        assert_eq!(pconf.n_samples(), positives.len());
        for (row, &i) in positives.iter().enumerate() {
            assert_eq!(pconf.design().row(row), full.design().row(i));
        }
    }

    #[test]
    fn positive_fraction_is_near_half_by_symmetry() {
        let mut design = SimDesign::new(10_000, 5, 0.0, Link::Logistic).unwrap();
        design.n_test = 10;
        let (pconf, _) = generate_pconf_training(&design, &mut rng_for(12, 0)).unwrap();
        let fraction = pconf.n_samples() as f64 / design.n as f64;
        assert!((fraction - 0.5).abs() < 0.03, "positive fraction {fraction}");
    }

    #[test]
    fn probit_link_uses_normal_cdf() {
        assert!((Link::Probit.probability(0.0) - 0.5).abs() < 1e-12);
        assert!((Link::Probit.probability(1.96) - 0.975).abs() < 1e-3);
        assert!(Link::Probit.probability(-8.0) < 1e-10);
        // Probit is steeper than logistic at matched argument.
        assert!(Link::Probit.probability(1.0) > Link::Logistic.probability(1.0));
    }

    #[test]
    fn empty_positive_set_retries_next_substream_then_errors() {
        // With n = 2 and a 50/50 link, a quarter of draws have no positives,
        // so both branches are easy to hit by scanning seeds.
        let mut design = SimDesign::new(2, 3, 0.0, Link::Logistic).unwrap();
        design.beta_star = Array1::zeros(3);
        design.n_test = 10;

        let mut saw_retry_success = false;
        let mut saw_double_failure = false;
        for seed in 0..200 {
            let all_negative = |stream: u64| {
                let mut rng = rng_for(seed, stream);
                draw_training(&design, &mut rng).is_err()
            };
            let first_empty = all_negative(STREAM_TRAIN);
            let second_empty = all_negative(STREAM_TRAIN + 1);

            let mut rng = rng_for(seed, STREAM_TRAIN);
            let outcome = generate_pconf_training(&design, &mut rng);
            match (first_empty, second_empty) {
                (true, true) => {
                    assert!(matches!(outcome, Err(Error::EmptyPositiveSet)));
                    saw_double_failure = true;
                }
                (true, false) => {
                    assert!(outcome.is_ok());
                    saw_retry_success = true;
                }
                _ => assert!(outcome.is_ok()),
            }
            if saw_retry_success && saw_double_failure {
                break;
            }
        }
        assert!(saw_retry_success, "no seed exercised the successful retry");
        assert!(saw_double_failure, "no seed exercised the double failure");
    }

    #[test]
    fn deterministic_test_labels_are_scale_invariant() {
        let design = toy_design();
        let a = generate_test(&design, &mut rng_for(5, STREAM_TEST)).unwrap();

        let mut scaled = design.clone();
        scaled.beta_star = 3.0 * &design.beta_star;
        let b = generate_test(&scaled, &mut rng_for(5, STREAM_TEST)).unwrap();
        assert_eq!(a.labels(), b.labels());

        // Same seed, same bytes.
        let c = generate_test(&design, &mut rng_for(5, STREAM_TEST)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn deterministic_test_labels_are_balanced_at_rho_zero() {
        let design = toy_design();
        let mut big = design;
        big.n_test = 5000;
        let test = generate_test(&big, &mut rng_for(17, STREAM_TEST)).unwrap();
        let positive =
            test.labels().iter().filter(|&&y| y > 0.0).count() as f64 / 5000.0;
        assert!((positive - 0.5).abs() < 0.02, "positive fraction {positive}");
    }

    #[test]
    fn evaluate_oracle_and_zero_estimates() {
        let design = toy_design();
        let test = generate_test(&design, &mut rng_for(21, STREAM_TEST)).unwrap();

        let oracle = Coefficients::new(design.beta_star.clone());
        let row = evaluate("oracle", &oracle, &design.beta_star, &test).unwrap();
        assert_eq!(row.prediction, 1.0);
        assert_eq!(row.l2_sq_error, 0.0);
        assert_eq!(row.tpr, 1.0);
        assert_eq!(row.fdr, 0.0);
        assert_eq!(row.model_size, 3);

        let zero = Coefficients::zeros(5);
        let row = evaluate("zero", &zero, &design.beta_star, &test).unwrap();
        assert_eq!(row.tpr, 0.0);
        assert_eq!(row.fdr, 0.0);
        assert_eq!(row.model_size, 0);
        assert!((row.l2_sq_error - 2.25).abs() < 1e-12);
    }

    #[test]
    fn evaluate_counts_support_overlap() {
        let design = toy_design();
        let test = generate_test(&design, &mut rng_for(22, STREAM_TEST)).unwrap();
        // Selected {0, 1, 3} vs true {0, 1, 2}: TP = 2, FP = 1, FN = 1.
        let est = Coefficients::from(vec![0.4, -0.2, 0.0, 0.9, 0.0]);
        let row = evaluate("hand", &est, &design.beta_star, &test).unwrap();
        assert!((row.tpr - 2.0 / 3.0).abs() < 1e-15);
        assert!((row.fdr - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(row.model_size, 3);
    }

    #[test]
    fn evaluate_rejects_shape_mismatch() {
        let design = toy_design();
        let test = generate_test(&design, &mut rng_for(23, STREAM_TEST)).unwrap();
        let est = Coefficients::zeros(4);
        assert!(evaluate("bad", &est, &design.beta_star, &test).is_err());
    }

    #[test]
    fn experiment_is_reproducible_and_bounded() {
        let design = toy_design();
        let methods = [Method::Pconf, Method::PconfLasso, Method::Lasso];
        let mut cfg = ExperimentConfig::default();
        cfg.grid_points = 8;
        cfg.folds = 3;

        let a = run_experiment(&design, &methods, &cfg).unwrap();
        let b = run_experiment(&design, &methods, &cfg).unwrap();
        assert_eq!(a, b);

        assert_eq!(a.records.len(), 3);
        assert!(a.failures.is_empty());
        for rec in &a.records {
            for row in &rec.rows {
                assert!((0.0..=1.0).contains(&row.prediction));
                assert!((0.0..=1.0).contains(&row.tpr));
                assert!((0.0..=1.0).contains(&row.fdr));
                assert!(row.model_size <= design.d);
                assert!(row.l2_sq_error >= 0.0);
            }
        }
        assert_eq!(a.aggregate.len(), 3);
        for agg in &a.aggregate {
            assert!(agg.prediction_sd >= 0.0);
            assert!(agg.size_mean <= design.d as f64);
        }
    }

    // A replication of the n = 2 balanced design fails when both substreams
    // draw no positives; scanning base seeds for a target failure count keeps
    // the failure-handling tests deterministic.
    fn base_seed_with_failures(design: &SimDesign, reps: usize, want: impl Fn(usize) -> bool) -> u64 {
        'seed: for base in 0..5_000u64 {
            let mut failures = 0;
            for rep in 0..reps {
                let seed = base.wrapping_add(rep as u64);
                let mut rng = rng_for(seed, STREAM_TRAIN);
                if generate_pconf_training(design, &mut rng).is_err() {
                    failures += 1;
                }
                if failures > 10 {
                    continue 'seed;
                }
            }
            if want(failures) {
                return base;
            }
        }
        panic!("no base seed with the requested failure count in range");
    }

    fn fragile_design() -> SimDesign {
        let mut design = SimDesign::new(2, 3, 0.0, Link::Logistic).unwrap();
        design.beta_star = Array1::zeros(3);
        design.n_test = 10;
        design
    }

    #[test]
    fn excessive_failures_abort_with_seeds() {
        let mut design = fragile_design();
        design.replications = 60;
        design.base_seed = base_seed_with_failures(&design, 60, |f| f >= 3);
        let cfg = ExperimentConfig {
            grid_points: 3,
            folds: 2,
            ..ExperimentConfig::default()
        };
        match run_experiment(&design, &[Method::Pconf], &cfg) {
            Err(Error::TooManyFailures { failed, total, seeds }) => {
                assert_eq!(total, 60);
                assert!(failed >= 3);
                assert_eq!(seeds.len(), failed);
            }
            other => panic!("expected TooManyFailures, got {other:?}"),
        }
    }

    #[test]
    fn isolated_failures_are_recorded_and_excluded() {
        let mut design = fragile_design();
        design.replications = 40;
        design.base_seed = base_seed_with_failures(&design, 40, |f| f == 1);
        let cfg = ExperimentConfig {
            grid_points: 3,
            folds: 2,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(&design, &[Method::Pconf], &cfg).unwrap();
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.records.len(), 39);
        let failure = &report.failures[0];
        assert_eq!(failure.seed, design.replication_seed(failure.replication));
        assert!(failure.reason.contains("positively labeled"));
        // The aggregate is over the surviving replications only.
        assert_eq!(report.aggregate.len(), 1);
        assert!(report.aggregate[0].prediction_mean.is_finite());
    }
}
