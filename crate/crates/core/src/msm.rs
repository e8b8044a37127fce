//! The marginal sensitivity model: weight brackets and data-driven
//! calibration of the sensitivity parameter.
//!
//! Unconfoundedness fails when treatment assignment listened to something the
//! covariates do not record. The marginal sensitivity model quantifies *how
//! much* it may have listened: for a sensitivity parameter `Γ ≥ 1`, the odds
//! of treatment given covariates **and** the hidden factor may differ from the
//! nominal odds given covariates alone by at most a factor `Γ` in either
//! direction. `Γ = 1` recovers unconfoundedness exactly.
//!
//! Every identified quantity in this crate flows through the *inverse
//! complete propensity* `w_t = 1/P(T=t | X, hidden)`. Under the model, `w_t`
//! is trapped in a bracket determined by the nominal propensity `e_t(x)`
//! alone:
//!
//! ```text
//! α_t(x; Γ) = 1/(Γ e_t) + 1 − 1/Γ   ≤   w_t   ≤   Γ/e_t + 1 − Γ = β_t(x; Γ)
//! ```
//!
//! with `1 ≤ α_t ≤ 1/e_t ≤ β_t`, equality throughout iff `Γ = 1`, and
//! brackets that nest as `Γ` grows.
//!
//! Since `Γ` is an assumption, not an estimate, [`calibrate_gamma`] offers a
//! reality check: refit the propensity model with each observed covariate
//! deleted in turn and record the odds shift each deletion induces. If
//! dropping a *measured* confounder moves the odds by at most some factor,
//! an *unmeasured* confounder of comparable strength motivates that factor
//! as a plausible `Γ`.

use rayon::prelude::*;

use crate::data::ObsDataset;
use crate::error::{Error, Result};
use crate::propensity::{fit_logistic, predict_e1, FitOptions, LogisticModel};

/// The sensitivity parameter of the marginal sensitivity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsmParams {
    gamma: f64,
}

impl MsmParams {
    /// A sensitivity level `Γ ≥ 1`; `Γ = 1` asserts unconfoundedness.
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 1.0) {
            return Err(Error::Validation(format!(
                "sensitivity parameter must satisfy Γ ≥ 1, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    /// The sensitivity level.
    pub fn gamma(self) -> f64 {
        self.gamma
    }
}

/// Bounds on the inverse complete propensity `w_t = 1/P(T=t | X, hidden)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityBracket {
    /// Lower bound `α_t`; at least 1.
    pub alpha: f64,
    /// Upper bound `β_t`; at least `α_t`, equal iff `Γ = 1`.
    pub beta: f64,
}

/// The weight bracket implied by nominal propensity `e_t` at sensitivity `Γ`.
///
/// `e_t` is the nominal probability of the treatment *actually received*, so
/// for a control observation pass `1 − e₁(x)`.
pub fn bracket(e_t: f64, params: MsmParams) -> Result<SensitivityBracket> {
    if !(e_t > 0.0 && e_t < 1.0) {
        return Err(Error::Domain(format!(
            "nominal propensity must lie strictly in (0,1), got {e_t}"
        )));
    }
    let gamma = params.gamma;
    Ok(SensitivityBracket {
        alpha: 1.0 / (gamma * e_t) + 1.0 - 1.0 / gamma,
        beta: gamma / e_t + 1.0 - gamma,
    })
}

/// Instance-wise odds shifts from deleting one covariate at a time, the
/// empirical evidence behind a choice of `Γ`.
#[derive(Debug, Clone)]
pub struct GammaCalibration {
    n: usize,
    d: usize,
    gammas: Vec<f64>, // n×d row-major: Γ_{i,j} for unit i, dropped column j
    /// `(level, value)` for the 0.5, 0.9 and 0.99 quantiles of all Γ_{i,j}.
    pub quantiles: [(f64, f64); 3],
    /// Largest raw Γ_{i,j} over all units and columns.
    pub max: f64,
    /// Per dropped column `j`: `max_i max(Γ_{i,j}, 1/Γ_{i,j})`, which treats
    /// shifts toward and away from treatment symmetrically.
    pub folded_max_by_column: Vec<f64>,
}

impl GammaCalibration {
    /// Number of units.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of covariate columns (one drop-one fit each).
    pub fn d(&self) -> usize {
        self.d
    }

    /// Raw odds shift `Γ_{i,j}` for unit `i` when column `j` is deleted.
    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        self.gammas[i * self.d + j]
    }

    /// All raw shifts, row-major by unit.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }
}

/// Linear-interpolation quantile of an unsorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

fn rename_fit_error(err: Error, model: &str) -> Error {
    match err {
        Error::NonConvergence { gradient_norm, .. } => {
            Error::NonConvergence { model: model.into(), gradient_norm }
        }
        other => other,
    }
}

/// Calibrates plausible sensitivity levels by covariate dropping.
///
/// Fits a full-covariate logistic propensity model and, for each column `j`,
/// a model with that column deleted. For unit `i` with received treatment
/// `t_i`, the recorded shift is the odds ratio
///
/// ```text
/// Γ_{i,j} = [e_drop/(1−e_drop)] / [e_full/(1−e_full)]
/// ```
///
/// where both probabilities refer to the received treatment. Values near 1
/// mean the column carried little selection information; values far from 1
/// on either side mean a confounder as informative as that column would
/// violate unconfoundedness by about that factor.
///
/// Requires `d ≥ 2` (dropping the only covariate leaves nothing to fit).
pub fn calibrate_gamma(data: &ObsDataset, options: &FitOptions) -> Result<GammaCalibration> {
    let n = data.n();
    let d = data.d();
    if d < 2 {
        return Err(Error::Validation(
            "sensitivity calibration needs at least two covariate columns".into(),
        ));
    }

    let full = fit_logistic(data.x(), d, data.t(), options)
        .map_err(|e| rename_fit_error(e, "full propensity model"))?;

    let drop_models: Vec<LogisticModel> = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut xs = Vec::with_capacity(n * (d - 1));
            for i in 0..n {
                let row = data.x_row(i);
                for (c, &v) in row.iter().enumerate() {
                    if c != j {
                        xs.push(v);
                    }
                }
            }
            fit_logistic(&xs, d - 1, data.t(), options)
                .map_err(|e| rename_fit_error(e, &format!("propensity model without x{j}")))
        })
        .collect::<Result<_>>()?;

    let odds = |p: f64| p / (1.0 - p);
    let mut gammas = vec![0.0; n * d];
    for i in 0..n {
        let row = data.x_row(i);
        let p1_full = predict_e1(&full, row);
        let e_full = if data.t()[i] == 1 { p1_full } else { 1.0 - p1_full };
        for j in 0..d {
            let dropped: Vec<f64> = row
                .iter()
                .enumerate()
                .filter_map(|(c, &v)| (c != j).then_some(v))
                .collect();
            let p1_drop = predict_e1(&drop_models[j], &dropped);
            let e_drop = if data.t()[i] == 1 { p1_drop } else { 1.0 - p1_drop };
            gammas[i * d + j] = odds(e_drop) / odds(e_full);
        }
    }

    let mut sorted = gammas.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let quantiles = [
        (0.5, quantile(&sorted, 0.5)),
        (0.9, quantile(&sorted, 0.9)),
        (0.99, quantile(&sorted, 0.99)),
    ];
    let max = sorted[sorted.len() - 1];
    let folded_max_by_column = (0..d)
        .map(|j| {
            (0..n)
                .map(|i| {
                    let g = gammas[i * d + j];
                    g.max(1.0 / g)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    Ok(GammaCalibration { n, d, gammas, quantiles, max, folded_max_by_column })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn bracket_closed_forms() {
        let b = bracket(0.4, MsmParams::new(1.0).unwrap()).unwrap();
        assert_eq!((b.alpha, b.beta), (2.5, 2.5));
        let b = bracket(0.5, MsmParams::new(2.0).unwrap()).unwrap();
        assert_eq!((b.alpha, b.beta), (1.5, 3.0));
        let b = bracket(0.25, MsmParams::new(2.0).unwrap()).unwrap();
        assert_eq!((b.alpha, b.beta), (2.5, 7.0));
    }

    #[test]
    fn bracket_rejects_degenerate_propensities() {
        let p = MsmParams::new(2.0).unwrap();
        for e in [0.0, 1.0, -0.1, 1.1, f64::NAN] {
            assert!(matches!(bracket(e, p), Err(Error::Domain(_))), "e = {e}");
        }
        assert!(MsmParams::new(0.5).is_err());
        assert!(MsmParams::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn bracket_respects_ordering_and_nesting(
            e in 0.01f64..0.99,
            gamma in 1.0f64..10.0,
            wider in 0.0f64..5.0,
        ) {
            let b = bracket(e, MsmParams::new(gamma).unwrap()).unwrap();
            prop_assert!(b.alpha >= 1.0 - 1e-12);
            prop_assert!(b.alpha <= 1.0 / e + 1e-12);
            prop_assert!(1.0 / e <= b.beta + 1e-12);
            prop_assert!(e * b.alpha <= 1.0 + 1e-12);
            prop_assert!(1.0 <= e * b.beta + 1e-12);
            // Nesting: a larger Γ can only widen the bracket.
            let w = bracket(e, MsmParams::new(gamma + wider).unwrap()).unwrap();
            prop_assert!(w.alpha <= b.alpha + 1e-12);
            prop_assert!(w.beta >= b.beta - 1e-12);
        }

        #[test]
        fn unit_gamma_collapses_the_bracket(e in 0.01f64..0.99) {
            let b = bracket(e, MsmParams::new(1.0).unwrap()).unwrap();
            prop_assert_eq!(b.alpha, b.beta);
        }
    }

    fn sigmoid(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }

    /// Treatments from a linear logistic model on uniform covariates; the
    /// outcome column is a placeholder (calibration never reads it).
    fn logistic_selection_data(
        n: usize,
        coefs: &[f64],
        intercept: f64,
        duplicate_first: bool,
        seed: u64,
    ) -> ObsDataset {
        let d = coefs.len();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n * d);
        let mut t = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            if duplicate_first {
                row[1] = row[0];
            }
            let z: f64 = intercept + row.iter().zip(coefs).map(|(x, c)| x * c).sum::<f64>();
            t.push(u8::from(rng.random::<f64>() < sigmoid(z)));
            x.extend_from_slice(&row);
        }
        let y: Vec<f64> = t.iter().map(|&ti| ti as f64).collect();
        ObsDataset::from_parts(x, d, t, y, None, None).unwrap()
    }

    #[test]
    fn uninformative_column_concentrates_near_one() {
        // x1 never influences treatment, so deleting it barely moves the odds.
        let data = logistic_selection_data(5000, &[0.75, 0.0], 0.5, false, 11);
        let cal = calibrate_gamma(&data, &FitOptions::default()).unwrap();
        let mut col: Vec<f64> = (0..cal.n()).map(|i| cal.gamma(i, 1)).collect();
        col.sort_by(|a, b| a.total_cmp(b));
        let median = quantile(&col, 0.5);
        assert!((0.95..=1.05).contains(&median), "median {median}");
    }

    #[test]
    fn dropping_the_selection_driver_shows_up() {
        let data = logistic_selection_data(5000, &[0.75, 0.0], 0.5, false, 11);
        let cal = calibrate_gamma(&data, &FitOptions::default()).unwrap();
        assert!(
            cal.folded_max_by_column[0] > 1.1,
            "folded max {}",
            cal.folded_max_by_column[0]
        );
    }

    #[test]
    fn duplicate_columns_are_fully_redundant() {
        // With x1 an exact copy of x0, deleting either column changes no
        // fitted probability, so every shift sits at 1 up to fit tolerance.
        let data = logistic_selection_data(2000, &[0.4, 0.35], 0.5, true, 7);
        let cal = calibrate_gamma(&data, &FitOptions::default()).unwrap();
        for i in 0..cal.n() {
            for j in 0..2 {
                assert!((cal.gamma(i, j) - 1.0).abs() < 5e-3, "Γ[{i},{j}] = {}", cal.gamma(i, j));
            }
        }
    }

    #[test]
    fn calibration_is_column_order_invariant() {
        let data = logistic_selection_data(1500, &[0.75, -0.4], 0.2, false, 23);
        let swapped = {
            let mut x = Vec::with_capacity(data.n() * 2);
            for i in 0..data.n() {
                let row = data.x_row(i);
                x.push(row[1]);
                x.push(row[0]);
            }
            ObsDataset::from_parts(x, 2, data.t().to_vec(), data.y().to_vec(), None, None).unwrap()
        };
        let a = calibrate_gamma(&data, &FitOptions::default()).unwrap();
        let b = calibrate_gamma(&swapped, &FitOptions::default()).unwrap();
        for (qa, qb) in a.quantiles.iter().zip(&b.quantiles) {
            assert!((qa.1 - qb.1).abs() < 1e-9, "{} vs {}", qa.1, qb.1);
        }
        assert!((a.folded_max_by_column[0] - b.folded_max_by_column[1]).abs() < 1e-9);
        assert!((a.folded_max_by_column[1] - b.folded_max_by_column[0]).abs() < 1e-9);
    }

    #[test]
    fn single_column_data_is_rejected() {
        let data = logistic_selection_data(100, &[0.75], 0.5, false, 3);
        let err = calibrate_gamma(&data, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }
}
