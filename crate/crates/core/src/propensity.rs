//! Nominal propensity scores: linear logistic regression and prediction.
//!
//! The nominal propensity `e₁(x) = P(T=1 | X=x)` is the observable half of
//! treatment selection — the half a sensitivity analysis takes as given while
//! it stress-tests the unobservable half. When the score is not known by
//! design it is fitted here by linear logistic regression.
//!
//! The fitter maximizes the Bernoulli log-likelihood with a small ridge
//! penalty on the slope coefficients (never the intercept) by iteratively
//! reweighted least squares: repeatedly solve the Newton system
//! `(XᵀWX + R)Δ = Xᵀ(T − p) − Rβ` with `W = diag(p(1−p))`, until the largest
//! parameter update falls below tolerance. The ridge is small enough to be
//! statistically invisible yet keeps the optimum finite under perfect
//! separation, which would otherwise send coefficients to infinity.
//!
//! Predicted probabilities are clamped to `[1e-6, 1 − 1e-6]`: downstream
//! sensitivity brackets divide by the propensity, so exact 0/1 predictions
//! must never escape this module.

use nalgebra::{DMatrix, DVector};

use crate::data::ObsDataset;
use crate::error::{Error, Result};

/// Probabilities are clamped this far away from 0 and 1.
pub const PROPENSITY_CLAMP: f64 = 1e-6;

/// A fitted linear logistic propensity model.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// Intercept of the linear score.
    pub intercept: f64,
    /// Slope per covariate.
    pub coef: Vec<f64>,
}

/// Options of the iteratively reweighted least squares fitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Maximum Newton iterations before giving up.
    pub max_iter: usize,
    /// Convergence threshold on the largest absolute parameter update.
    pub tol: f64,
    /// Ridge penalty on slope coefficients (the intercept is never penalized).
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-8, ridge: 1e-6 }
    }
}

/// Numerically stable sigmoid `σ(z) = 1/(1+e^{−z})`.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fits `P(T=1 | X=x) = σ(intercept + coef·x)` on the row-major `n×d` matrix
/// `x` by ridge-penalized iteratively reweighted least squares.
///
/// Converges when every parameter moves by less than `tol` in one Newton
/// step; otherwise errors with the final penalized gradient norm. Perfect
/// separation is not an error — the ridge keeps the optimum finite.
pub fn fit_logistic(x: &[f64], d: usize, t: &[u8], options: &FitOptions) -> Result<LogisticModel> {
    let n = t.len();
    if d == 0 {
        return Err(Error::Validation("logistic fit needs at least one covariate".into()));
    }
    if x.len() != n * d {
        return Err(Error::Validation(format!(
            "covariate matrix has {} entries, expected {n}×{d} = {}",
            x.len(),
            n * d
        )));
    }
    if n < d + 1 {
        return Err(Error::Validation(format!(
            "logistic fit needs at least d+1 = {} rows, got {n}",
            d + 1
        )));
    }
    if !t.iter().any(|&ti| ti == 0) || !t.iter().any(|&ti| ti == 1) {
        return Err(Error::Validation(
            "logistic fit needs both treatment classes present".into(),
        ));
    }
    if !(options.tol > 0.0 && options.ridge >= 0.0 && options.max_iter >= 1) {
        return Err(Error::Validation("invalid fit options".into()));
    }

    let p1 = d + 1; // parameters: intercept + d slopes
    let mut beta = DVector::<f64>::zeros(p1);
    let mut grad = DVector::<f64>::zeros(p1);
    let mut hess = DMatrix::<f64>::zeros(p1, p1);

    for _ in 0..options.max_iter {
        grad.fill(0.0);
        hess.fill(0.0);
        for i in 0..n {
            let row = &x[i * d..(i + 1) * d];
            let eta = beta[0] + row.iter().zip(beta.iter().skip(1)).map(|(x, b)| x * b).sum::<f64>();
            let p = sigmoid(eta);
            let r = t[i] as f64 - p;
            let w = p * (1.0 - p);
            grad[0] += r;
            hess[(0, 0)] += w;
            for a in 0..d {
                grad[a + 1] += r * row[a];
                let wa = w * row[a];
                hess[(a + 1, 0)] += wa;
                for b in 0..=a {
                    hess[(a + 1, b + 1)] += wa * row[b];
                }
            }
        }
        for a in 1..p1 {
            grad[a] -= options.ridge * beta[a];
            hess[(a, a)] += options.ridge;
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        let Some(chol) = hess.clone().cholesky() else {
            return Err(Error::NonConvergence {
                model: "logistic regression".into(),
                gradient_norm: grad.norm(),
            });
        };
        let delta = chol.solve(&grad);
        beta += &delta;
        if delta.amax() < options.tol {
            return Ok(LogisticModel {
                intercept: beta[0],
                coef: beta.iter().skip(1).copied().collect(),
            });
        }
    }

    // Recompute the penalized gradient at the final iterate for the report.
    let mut g = vec![0.0; p1];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let eta = beta[0] + row.iter().zip(beta.iter().skip(1)).map(|(x, b)| x * b).sum::<f64>();
        let r = t[i] as f64 - sigmoid(eta);
        g[0] += r;
        for a in 0..d {
            g[a + 1] += r * row[a];
        }
    }
    for a in 1..p1 {
        g[a] -= options.ridge * beta[a];
    }
    Err(Error::NonConvergence {
        model: "logistic regression".into(),
        gradient_norm: g.iter().map(|v| v * v).sum::<f64>().sqrt(),
    })
}

/// Predicted treatment probability `σ(intercept + coef·x)`, clamped to
/// `[1e-6, 1 − 1e-6]`.
///
/// Panics if `x` does not match the model dimension (a caller bug, not a
/// data condition).
pub fn predict_e1(model: &LogisticModel, x: &[f64]) -> f64 {
    assert_eq!(
        x.len(),
        model.coef.len(),
        "propensity model has {} covariates, point has {}",
        model.coef.len(),
        x.len()
    );
    let eta = model.intercept + model.coef.iter().zip(x).map(|(c, x)| c * x).sum::<f64>();
    sigmoid(eta).clamp(PROPENSITY_CLAMP, 1.0 - PROPENSITY_CLAMP)
}

/// Where downstream estimators get their nominal propensities from.
#[derive(Debug, Clone, Copy)]
pub enum PropensitySource<'a> {
    /// Use the dataset's known-propensity column (by-design randomization
    /// probabilities or simulated truth).
    Known,
    /// Evaluate a fitted logistic model at each observation's covariates.
    Model(&'a LogisticModel),
}

impl PropensitySource<'_> {
    /// The nominal `P(T=1 | X_i)` for every row of `data`.
    pub fn resolve(&self, data: &ObsDataset) -> Result<Vec<f64>> {
        match self {
            PropensitySource::Known => data
                .e1_known()
                .map(<[f64]>::to_vec)
                .ok_or_else(|| {
                    Error::Validation(
                        "known propensities requested but the dataset has no propensity column"
                            .into(),
                    )
                }),
            PropensitySource::Model(model) => {
                if model.coef.len() != data.d() {
                    return Err(Error::Validation(format!(
                        "propensity model has {} covariates but the dataset has {}",
                        model.coef.len(),
                        data.d()
                    )));
                }
                Ok((0..data.n()).map(|i| predict_e1(model, data.x_row(i))).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn uniform_x(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()
    }

    #[test]
    fn coin_flip_treatments_give_a_flat_model() {
        let n = 10000;
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let x = uniform_x(&mut rng, n);
        let t: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let model = fit_logistic(&x, 1, &t, &FitOptions::default()).unwrap();
        let t_mean = t.iter().map(|&ti| ti as f64).sum::<f64>() / n as f64;
        assert!(model.coef[0].abs() < 0.1, "coef {}", model.coef[0]);
        assert!((sigmoid(model.intercept) - t_mean).abs() < 0.02);
    }

    #[test]
    fn recovers_a_known_linear_logistic_law() {
        // T ~ Bernoulli(σ(0.75 x + 0.5)) on x ~ U[−2,2].
        let n = 20000;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x = uniform_x(&mut rng, n);
        let t: Vec<u8> = x
            .iter()
            .map(|&xi| u8::from(rng.random::<f64>() < sigmoid(0.75 * xi + 0.5)))
            .collect();
        let model = fit_logistic(&x, 1, &t, &FitOptions::default()).unwrap();
        assert!((model.intercept - 0.5).abs() < 0.05, "intercept {}", model.intercept);
        assert!((model.coef[0] - 0.75).abs() < 0.05, "coef {}", model.coef[0]);
    }

    #[test]
    fn one_class_only_is_rejected() {
        let x = vec![0.0, 1.0, 2.0];
        let err = fit_logistic(&x, 1, &[1, 1, 1], &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn score_equations_hold_at_the_optimum() {
        let n = 4000;
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut x = Vec::with_capacity(n * 2);
        let mut t = Vec::with_capacity(n);
        for _ in 0..n {
            let a = rng.random::<f64>() * 4.0 - 2.0;
            let b = rng.random::<f64>() * 4.0 - 2.0;
            x.push(a);
            x.push(b);
            t.push(u8::from(rng.random::<f64>() < sigmoid(0.3 * a - 0.8 * b + 0.1)));
        }
        let opts = FitOptions::default();
        let model = fit_logistic(&x, 2, &t, &opts).unwrap();
        let mut score = [0.0; 3];
        for i in 0..n {
            let row = [x[2 * i], x[2 * i + 1]];
            let p = sigmoid(model.intercept + model.coef[0] * row[0] + model.coef[1] * row[1]);
            let r = t[i] as f64 - p;
            score[0] += r;
            score[1] += r * row[0];
            score[2] += r * row[1];
        }
        assert!(score[0].abs() <= 1e-5 * n as f64);
        assert!((score[1] - opts.ridge * model.coef[0]).abs() <= 1e-5 * n as f64);
        assert!((score[2] - opts.ridge * model.coef[1]).abs() <= 1e-5 * n as f64);
    }

    #[test]
    fn perfect_separation_is_absorbed_by_the_ridge() {
        // Sign of x determines t exactly; the ridge keeps the optimum finite.
        let x: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let t: Vec<u8> = (0..40).map(|i| u8::from(i % 2 == 1)).collect();
        let model = fit_logistic(&x, 1, &t, &FitOptions::default()).unwrap();
        assert!(model.coef[0].is_finite());
        assert!(model.coef[0] > 5.0, "coef {}", model.coef[0]);
        let p = predict_e1(&model, &[1.0]);
        assert!(p < 1.0 && p >= 1.0 - PROPENSITY_CLAMP);
    }

    #[test]
    fn prediction_examples() {
        let zero = LogisticModel { intercept: 0.0, coef: vec![0.0] };
        assert_eq!(predict_e1(&zero, &[3.7]), 0.5);
        let m = LogisticModel { intercept: 0.5, coef: vec![0.75] };
        assert_relative_eq!(predict_e1(&m, &[0.0]), 0.62246, max_relative = 1e-4);
        let extreme = LogisticModel { intercept: 50.0, coef: vec![0.0] };
        assert_eq!(predict_e1(&extreme, &[0.0]), 1.0 - PROPENSITY_CLAMP);
        let extreme_lo = LogisticModel { intercept: -50.0, coef: vec![0.0] };
        assert_eq!(predict_e1(&extreme_lo, &[0.0]), PROPENSITY_CLAMP);
    }

    #[test]
    fn prediction_is_monotone_with_the_coefficient_sign() {
        let m = LogisticModel { intercept: 0.1, coef: vec![0.75, -1.2] };
        let base = predict_e1(&m, &[0.0, 0.0]);
        assert!(predict_e1(&m, &[0.5, 0.0]) > base);
        assert!(predict_e1(&m, &[-0.5, 0.0]) < base);
        assert!(predict_e1(&m, &[0.0, 0.5]) < base);
        assert!(predict_e1(&m, &[0.0, -0.5]) > base);
    }

    #[test]
    fn too_few_rows_is_rejected() {
        let err = fit_logistic(&[0.0, 1.0], 2, &[0], &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }
}
