//! Empirical risks, their gradients, and the sign classifier.
//!
//! The Pconf risk over positive-only data with confidences `r_i` is
//!
//! ```text
//! R(beta) = (1/n) sum_i [ l(x_i' beta) + alpha_i l(-x_i' beta) ],
//! alpha_i = (1 - r_i) / r_i,
//! ```
//!
//! with `l` the logistic loss. Its gradient is `(1/n) X' d` with margin
//! multipliers `d_i = -sigmoid(-g_i) + alpha_i * sigmoid(g_i)`. The
//! supervised risk is the ordinary logistic risk over labels in `{+1, -1}`.

use ndarray::{Array1, Array2};

use crate::data::{Coefficients, LabeledDataset, PconfDataset};
use crate::error::{Error, Result};
use crate::loss::{logistic_loss_raw, sigmoid_raw};

fn check_dim(expected: usize, beta: &Array1<f64>) -> Result<()> {
    if beta.len() != expected {
        return Err(Error::shape(format!(
            "coefficient vector has length {}, dataset has {} features",
            beta.len(),
            expected
        )));
    }
    Ok(())
}

/// A smooth empirical risk over a row-indexed dataset.
///
/// Implemented by both dataset types so the proximal solver, the Lipschitz
/// estimate, and cross-validation are written once.
pub trait SmoothRisk: Sized + Sync {
    fn n_samples(&self) -> usize;

    fn dim(&self) -> usize;

    fn design(&self) -> &Array2<f64>;

    /// Per-sample weights `w_i` in the curvature bound `(1/4n) X' diag(w) X`
    /// on the risk Hessian (`1 + alpha_i` for Pconf, `1` for supervised).
    fn curvature_weights(&self) -> Array1<f64>;

    /// Risk value at `beta`.
    fn risk(&self, beta: &Array1<f64>) -> Result<f64>;

    /// Risk value and gradient at `beta`, sharing one margin pass.
    fn risk_and_gradient(&self, beta: &Array1<f64>) -> Result<(f64, Array1<f64>)>;

    fn gradient(&self, beta: &Array1<f64>) -> Result<Array1<f64>> {
        Ok(self.risk_and_gradient(beta)?.1)
    }

    /// New problem restricted to the given rows.
    fn select_rows(&self, rows: &[usize]) -> Result<Self>;
}

impl SmoothRisk for PconfDataset {
    fn n_samples(&self) -> usize {
        PconfDataset::n_samples(self)
    }

    fn dim(&self) -> usize {
        PconfDataset::dim(self)
    }

    fn design(&self) -> &Array2<f64> {
        PconfDataset::design(self)
    }

    fn curvature_weights(&self) -> Array1<f64> {
        self.alpha().mapv(|a| 1.0 + a)
    }

    fn risk(&self, beta: &Array1<f64>) -> Result<f64> {
        check_dim(self.dim(), beta)?;
        let g = self.design().dot(beta);
        let n = self.n_samples() as f64;
        let mut acc = 0.0;
        for (gi, &ai) in g.iter().zip(self.alpha()) {
            acc += logistic_loss_raw(*gi) + ai * logistic_loss_raw(-*gi);
        }
        Ok(acc / n)
    }

    fn risk_and_gradient(&self, beta: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
        check_dim(self.dim(), beta)?;
        let g = self.design().dot(beta);
        let n = self.n_samples() as f64;
        let mut acc = 0.0;
        let mut d = Array1::zeros(g.len());
        for (i, (gi, &ai)) in g.iter().zip(self.alpha()).enumerate() {
            acc += logistic_loss_raw(*gi) + ai * logistic_loss_raw(-*gi);
            d[i] = -sigmoid_raw(-*gi) + ai * sigmoid_raw(*gi);
        }
        let grad = self.design().t().dot(&d) / n;
        Ok((acc / n, grad))
    }

    fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        PconfDataset::select_rows(self, rows)
    }
}

impl SmoothRisk for LabeledDataset {
    fn n_samples(&self) -> usize {
        LabeledDataset::n_samples(self)
    }

    fn dim(&self) -> usize {
        LabeledDataset::dim(self)
    }

    fn design(&self) -> &Array2<f64> {
        LabeledDataset::design(self)
    }

    fn curvature_weights(&self) -> Array1<f64> {
        Array1::ones(self.n_samples())
    }

    fn risk(&self, beta: &Array1<f64>) -> Result<f64> {
        check_dim(self.dim(), beta)?;
        let g = self.design().dot(beta);
        let n = self.n_samples() as f64;
        let mut acc = 0.0;
        for (gi, &yi) in g.iter().zip(self.labels()) {
            acc += logistic_loss_raw(yi * *gi);
        }
        Ok(acc / n)
    }

    fn risk_and_gradient(&self, beta: &Array1<f64>) -> Result<(f64, Array1<f64>)> {
        check_dim(self.dim(), beta)?;
        let g = self.design().dot(beta);
        let n = self.n_samples() as f64;
        let mut acc = 0.0;
        let mut d = Array1::zeros(g.len());
        for (i, (gi, &yi)) in g.iter().zip(self.labels()).enumerate() {
            acc += logistic_loss_raw(yi * *gi);
            d[i] = -yi * sigmoid_raw(-yi * *gi);
        }
        let grad = self.design().t().dot(&d) / n;
        Ok((acc / n, grad))
    }

    fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        LabeledDataset::select_rows(self, rows)
    }
}

/// Empirical Pconf risk `(1/n) sum_i [ l(g_i) + alpha_i l(-g_i) ]`.
pub fn pconf_risk(data: &PconfDataset, beta: &Coefficients) -> Result<f64> {
    data.risk(beta.as_array())
}

/// Gradient `(1/n) X' d` of the Pconf risk.
pub fn pconf_gradient(data: &PconfDataset, beta: &Coefficients) -> Result<Array1<f64>> {
    data.gradient(beta.as_array())
}

/// Supervised logistic risk `(1/n) sum_i l(y_i g_i)`.
pub fn supervised_risk(data: &LabeledDataset, beta: &Coefficients) -> Result<f64> {
    data.risk(beta.as_array())
}

/// Gradient of the supervised logistic risk.
pub fn supervised_gradient(data: &LabeledDataset, beta: &Coefficients) -> Result<Array1<f64>> {
    data.gradient(beta.as_array())
}

/// Sign classifier: `+1` where `x_i' beta >= 0`, `-1` otherwise.
pub fn predict(x: &Array2<f64>, beta: &Coefficients) -> Result<Array1<f64>> {
    if x.ncols() != beta.len() {
        return Err(Error::shape(format!(
            "{} feature columns but {} coefficients",
            x.ncols(),
            beta.len()
        )));
    }
    let g = x.dot(beta.as_array());
    Ok(g.mapv(|gi| if gi >= 0.0 { 1.0 } else { -1.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal))
    }

    fn random_beta(rng: &mut ChaCha8Rng, d: usize) -> Coefficients {
        Coefficients::from(Array1::from_shape_fn(d, |_| {
            rng.sample::<f64, _>(StandardNormal)
        }))
    }

    fn random_pconf(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PconfDataset {
        let x = random_matrix(rng, n, d);
        let r = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 0.99 + 0.01);
        PconfDataset::new(x, r).unwrap()
    }

    // Independent scalar-loop reference for the Pconf risk.
    fn pconf_risk_reference(data: &PconfDataset, beta: &Coefficients) -> f64 {
        let x = data.design();
        let n = data.n_samples();
        let mut total = 0.0;
        for i in 0..n {
            let mut g = 0.0;
            for j in 0..data.dim() {
                g += x[[i, j]] * beta[j];
            }
            let r = data.confidences()[i];
            let a = (1.0 - r) / r;
            total += (1.0 + (-g).exp()).ln() + a * (1.0 + g.exp()).ln();
        }
        total / n as f64
    }

    fn supervised_risk_reference(data: &LabeledDataset, beta: &Coefficients) -> f64 {
        let x = data.design();
        let n = data.n_samples();
        let mut total = 0.0;
        for i in 0..n {
            let mut g = 0.0;
            for j in 0..data.dim() {
                g += x[[i, j]] * beta[j];
            }
            total += (1.0 + (-data.labels()[i] * g).exp()).ln();
        }
        total / n as f64
    }

    fn central_difference(f: impl Fn(&Coefficients) -> f64, beta: &Coefficients) -> Array1<f64> {
        let h = 1e-6;
        let mut grad = Array1::zeros(beta.len());
        for j in 0..beta.len() {
            let mut up = beta.as_array().clone();
            let mut dn = beta.as_array().clone();
            up[j] += h;
            dn[j] -= h;
            grad[j] = (f(&Coefficients::from(up)) - f(&Coefficients::from(dn))) / (2.0 * h);
        }
        grad
    }

    #[test]
    fn pconf_risk_at_zero_with_half_confidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 7, 4);
        let data = PconfDataset::new(x, Array1::from_elem(7, 0.5)).unwrap();
        let v = pconf_risk(&data, &Coefficients::zeros(4)).unwrap();
        assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn unit_confidence_drops_the_negative_term() {
        let x = array![[0.3, -1.2, 0.5]];
        let data = PconfDataset::new(x.clone(), array![1.0]).unwrap();
        let beta = Coefficients::from(vec![1.0, 0.2, -0.4]);
        let g = x.dot(beta.as_array())[0];
        let v = pconf_risk(&data, &beta).unwrap();
        assert!((v - crate::loss::logistic_loss(g).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn pconf_risk_matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_pconf(&mut rng, 5, 3);
        let beta = random_beta(&mut rng, 3);
        let v = pconf_risk(&data, &beta).unwrap();
        assert!((v - pconf_risk_reference(&data, &beta)).abs() < 1e-12);
    }

    #[test]
    fn pconf_risk_at_origin_identity() {
        // R(0) = log 2 * (1/n) sum_i 1/r_i, since l(0) = log 2 and 1 + alpha_i = 1/r_i.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let data = random_pconf(&mut rng, 9, 4);
            let v = pconf_risk(&data, &Coefficients::zeros(4)).unwrap();
            let expected = std::f64::consts::LN_2
                * data.confidences().iter().map(|r| 1.0 / r).sum::<f64>()
                / data.n_samples() as f64;
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_confidence_equals_all_positive_supervised_risk() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_matrix(&mut rng, 8, 3);
        let pconf = PconfDataset::new(x.clone(), Array1::ones(8)).unwrap();
        let sup = LabeledDataset::new(x, Array1::ones(8)).unwrap();
        for _ in 0..5 {
            let beta = random_beta(&mut rng, 3);
            let a = pconf_risk(&pconf, &beta).unwrap();
            let b = supervised_risk(&sup, &beta).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pconf_risk_is_convex_along_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let data = random_pconf(&mut rng, 6, 3);
            let b1 = random_beta(&mut rng, 3);
            let b2 = random_beta(&mut rng, 3);
            let t: f64 = rng.random();
            let mid = Coefficients::from(
                t * b1.as_array() + (1.0 - t) * b2.as_array(),
            );
            let risk = |b: &Coefficients| pconf_risk(&data, b).unwrap();
            assert!(risk(&mid) <= t * risk(&b1) + (1.0 - t) * risk(&b2) + 1e-10);
        }
    }

    #[test]
    fn pconf_gradient_zero_at_origin_for_half_confidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_matrix(&mut rng, 5, 4);
        let data = PconfDataset::new(x, Array1::from_elem(5, 0.5)).unwrap();
        let g = pconf_gradient(&data, &Coefficients::zeros(4)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pconf_gradient_hand_case() {
        // n = 1, x = (1, 0): at beta = 0, d = -1/2 + alpha/2.
        let x = array![[1.0, 0.0]];
        let half = PconfDataset::new(x.clone(), array![0.5]).unwrap();
        let g = pconf_gradient(&half, &Coefficients::zeros(2)).unwrap();
        assert_eq!(g.to_vec(), vec![0.0, 0.0]);

        let d8 = PconfDataset::new(x, array![0.8]).unwrap();
        let g = pconf_gradient(&d8, &Coefficients::zeros(2)).unwrap();
        assert!((g[0] - (-0.375)).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn pconf_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let data = random_pconf(&mut rng, 6, 4);
            let beta = random_beta(&mut rng, 4);
            let grad = pconf_gradient(&data, &beta).unwrap();
            let fd = central_difference(|b| pconf_risk(&data, b).unwrap(), &beta);
            let scale = fd.iter().fold(1e-8f64, |m, v| m.max(v.abs()));
            for j in 0..4 {
                assert!(
                    (grad[j] - fd[j]).abs() / scale < 1e-5,
                    "coordinate {j}: analytic {} vs fd {}",
                    grad[j],
                    fd[j]
                );
            }
        }
    }

    #[test]
    fn supervised_risk_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 6, 3);
        let y = Array1::from_vec(vec![1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        let data = LabeledDataset::new(x.clone(), y.clone()).unwrap();

        let at_zero = supervised_risk(&data, &Coefficients::zeros(3)).unwrap();
        assert!((at_zero - std::f64::consts::LN_2).abs() < 1e-15);

        // Flipping labels and negating beta leaves l(y g) unchanged.
        let beta = random_beta(&mut rng, 3);
        let flipped = LabeledDataset::new(x, y.mapv(|v| -v)).unwrap();
        let negated = Coefficients::from(beta.as_array().mapv(|v| -v));
        let a = supervised_risk(&data, &beta).unwrap();
        let b = supervised_risk(&flipped, &negated).unwrap();
        assert!((a - b).abs() < 1e-15);

        assert!((a - supervised_risk_reference(&data, &beta)).abs() < 1e-12);
    }

    #[test]
    fn supervised_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = random_matrix(&mut rng, 6, 4);
            let y = Array1::from_shape_fn(6, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
            let data = LabeledDataset::new(x, y).unwrap();
            let beta = random_beta(&mut rng, 4);
            let grad = supervised_gradient(&data, &beta).unwrap();
            let fd = central_difference(|b| supervised_risk(&data, b).unwrap(), &beta);
            let scale = fd.iter().fold(1e-8f64, |m, v| m.max(v.abs()));
            for j in 0..4 {
                assert!((grad[j] - fd[j]).abs() / scale < 1e-5);
            }
        }
    }

    #[test]
    fn margins_are_invariant_to_compensating_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_matrix(&mut rng, 5, 3);
        let y = Array1::from_shape_fn(5, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        let beta = random_beta(&mut rng, 3);

        let data = LabeledDataset::new(x.clone(), y.clone()).unwrap();
        let doubled = LabeledDataset::new(2.0 * &x, y).unwrap();
        let halved = Coefficients::from(beta.as_array() / 2.0);

        let r1 = supervised_risk(&data, &beta).unwrap();
        let r2 = supervised_risk(&doubled, &halved).unwrap();
        assert!((r1 - r2).abs() < 1e-12);

        // Same margins, doubled design: the gradient doubles.
        let g1 = supervised_gradient(&data, &beta).unwrap();
        let g2 = supervised_gradient(&doubled, &halved).unwrap();
        for j in 0..3 {
            assert!((g2[j] - 2.0 * g1[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_sign_rule_and_tie_break() {
        let x = array![[1.0, -1.0], [0.0, 0.0]];
        let plus = predict(&x, &Coefficients::from(vec![1.0, 0.0])).unwrap();
        assert_eq!(plus.to_vec(), vec![1.0, 1.0]);
        let minus = predict(&x, &Coefficients::from(vec![-1.0, 0.0])).unwrap();
        assert_eq!(minus.to_vec(), vec![-1.0, 1.0]);
        let zero = predict(&x, &Coefficients::zeros(2)).unwrap();
        assert_eq!(zero.to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn predict_matches_reference_loop_and_positive_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_matrix(&mut rng, 20, 5);
        let beta = random_beta(&mut rng, 5);
        let labels = predict(&x, &beta).unwrap();
        for i in 0..20 {
            let mut g = 0.0;
            for j in 0..5 {
                g += x[[i, j]] * beta[j];
            }
            let want = if g >= 0.0 { 1.0 } else { -1.0 };
            assert_eq!(labels[i], want);
        }
        let scaled = Coefficients::from(beta.as_array() * 3.5);
        assert_eq!(predict(&x, &scaled).unwrap(), labels);
    }

    #[test]
    fn shape_mismatches_are_reported() {
        let x = array![[1.0, 2.0]];
        let data = PconfDataset::new(x.clone(), array![0.5]).unwrap();
        assert!(pconf_risk(&data, &Coefficients::zeros(3)).is_err());
        assert!(pconf_gradient(&data, &Coefficients::zeros(1)).is_err());
        assert!(predict(&x, &Coefficients::zeros(3)).is_err());
    }
}
