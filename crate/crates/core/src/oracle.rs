//! Independent verification engines for the interval estimator.
//!
//! Two oracles check the solver from opposite ends of the asymptotic range:
//!
//! * [`vertex_enumeration_bound`] — for tiny sample problems, the weighted
//!   ratio is maximized at a vertex of the weight box, so trying all `2^m`
//!   assignments `W_i ∈ {α_i, β_i}` gives the exact answer by sheer force.
//!   The fast line-search solver must agree with it to near machine
//!   precision on every random instance.
//!
//! * [`population_bounds`] — at the population level (`n = ∞`), the extremal
//!   conditional mean under the sensitivity model has a threshold
//!   characterization: the worst-case weighting jumps from the low to the
//!   high bracket end at a single outcome cutpoint. Because the simulated
//!   designs expose their joint law `f(y, T=t | x)` as a closed-form
//!   Gaussian mixture over the confounder ([`crate::simulate::arm_mixture`]),
//!   the sub-density can be integrated by Simpson quadrature and the cutpoint
//!   swept over every grid level — no density estimation, no dual problem.
//!   The resulting population intervals are what the sample estimator must
//!   approach as `n` grows.
//!
//! The quadrature truncates the outcome axis a fixed number of noise
//! standard deviations beyond the extreme mixture means (default 8, where
//! the neglected Gaussian tail is ~1e-15, far below the 1e-6 normalization
//! tolerance the oracle enforces on itself).

use crate::bounds::ArmProblem;
use crate::error::{Error, Result};
use crate::msm::{bracket, MsmParams};
use crate::simulate::DgpSpec;

/// Which end of the interval an oracle call computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// The supremum of the weighted mean over the weight box.
    Upper,
    /// The infimum.
    Lower,
}

/// Largest per-arm size accepted by the exhaustive oracle.
pub const VERTEX_ENUMERATION_LIMIT: usize = 20;

/// Exact extremum of the ratio `Σ W_i Y_i c_i / Σ W_i c_i` over all `2^m`
/// vertex assignments `W_i ∈ {a_i, b_i}` — exponential, verification only.
pub fn vertex_enumeration_bound(problem: &ArmProblem, direction: Direction) -> Result<f64> {
    let m = problem.len();
    if m > VERTEX_ENUMERATION_LIMIT {
        return Err(Error::TooLarge { m, max: VERTEX_ENUMERATION_LIMIT });
    }
    let y = problem.y();
    let a = problem.a();
    let b = problem.b();
    let mut best = match direction {
        Direction::Upper => f64::NEG_INFINITY,
        Direction::Lower => f64::INFINITY,
    };
    for mask in 0u32..(1u32 << m) {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..m {
            let w = if mask & (1 << i) != 0 { b[i] } else { a[i] };
            num += w * y[i];
            den += w;
        }
        let v = num / den;
        best = match direction {
            Direction::Upper => best.max(v),
            Direction::Lower => best.min(v),
        };
    }
    Ok(best)
}

/// One Gaussian component of an arm's joint outcome–treatment sub-density:
/// `weight · N(y; mean, sd²)`, with `weight = P(u) · P(T=t | x, u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussComponent {
    /// Mixture weight; the arm's components sum to `P(T=t | x)`.
    pub weight: f64,
    /// Component mean.
    pub mean: f64,
    /// Component standard deviation (1 for the built-in designs).
    pub sd: f64,
}

type E1Fn<'a> = dyn Fn(&[f64]) -> Result<f64> + Sync + Send + 'a;
type MixtureFn<'a> = dyn Fn(&[f64], u8) -> Result<Vec<GaussComponent>> + Sync + Send + 'a;

/// A population-level bound computation: nominal propensity and closed-form
/// arm sub-densities, plus the sensitivity level and quadrature controls.
pub struct PopulationProblem<'a> {
    e1: Box<E1Fn<'a>>,
    mixture: Box<MixtureFn<'a>>,
    gamma: f64,
    grid_points: usize,
    span: f64,
}

impl<'a> PopulationProblem<'a> {
    /// A problem from explicit closures: `e1(x)` and the per-arm Gaussian
    /// mixture `f(y, T=t | x)`.
    pub fn new(
        e1: impl Fn(&[f64]) -> Result<f64> + Sync + Send + 'a,
        mixture: impl Fn(&[f64], u8) -> Result<Vec<GaussComponent>> + Sync + Send + 'a,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 1.0) {
            return Err(Error::Validation(format!(
                "sensitivity parameter must satisfy Γ ≥ 1, got {gamma}"
            )));
        }
        Ok(Self { e1: Box::new(e1), mixture: Box::new(mixture), gamma, grid_points: 2001, span: 8.0 })
    }

    /// A problem wired to a simulated design's closed-form law.
    pub fn from_dgp(spec: &DgpSpec, gamma: f64) -> Result<PopulationProblem<'static>> {
        let spec_e1 = *spec;
        let spec_mix = *spec;
        PopulationProblem::new(
            move |x| crate::simulate::nominal_e1(&spec_e1, x),
            move |x, arm| {
                Ok(crate::simulate::arm_mixture(&spec_mix, x, arm)?
                    .into_iter()
                    .map(|c| GaussComponent { weight: c.weight, mean: c.mean, sd: 1.0 })
                    .collect())
            },
            gamma,
        )
    }

    /// Overrides the quadrature grid size (odd, at least 3; default 2001).
    pub fn with_grid_points(mut self, g: usize) -> Result<Self> {
        if g < 3 || g % 2 == 0 {
            return Err(Error::Validation(format!(
                "quadrature grid must be odd and at least 3, got {g}"
            )));
        }
        self.grid_points = g;
        Ok(self)
    }

    /// Overrides how many standard deviations beyond the extreme component
    /// means the outcome grid extends (default 8).
    pub fn with_span(mut self, span: f64) -> Result<Self> {
        if !(span.is_finite() && span > 0.0) {
            return Err(Error::Validation(format!("span must be positive, got {span}")));
        }
        self.span = span;
        Ok(self)
    }

    /// The sensitivity level.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn npdf(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Sharp population interval `[mu_lo, mu_hi]` for `E[Y(t) | X=x]` under the
/// sensitivity model, with brackets taken at the nominal propensity.
///
/// Discretizes the outcome axis with Simpson weights and sweeps a threshold
/// over every grid level: the upper bound puts the low bracket end `α` on
/// mass below the threshold and `β` above (the extremal weighting is a
/// monotone step in the outcome), the lower bound mirrors it. Errors if the
/// quadrature mass disagrees with the mixture's total weight by more than
/// 1e-6 — the self-check that the grid covered the density.
pub fn population_bounds(problem: &PopulationProblem<'_>, x: &[f64], t: u8) -> Result<(f64, f64)> {
    let comps = (problem.mixture)(x, t)?;
    if comps.is_empty() {
        return Err(Error::Validation("arm mixture has no components".into()));
    }
    for c in &comps {
        if !(c.weight >= 0.0 && c.weight.is_finite() && c.sd > 0.0 && c.mean.is_finite()) {
            return Err(Error::Validation(format!(
                "invalid mixture component (weight {}, mean {}, sd {})",
                c.weight, c.mean, c.sd
            )));
        }
    }
    let e1 = (problem.e1)(x)?;
    let e_t = if t == 1 { e1 } else { 1.0 - e1 };
    let br = bracket(e_t, MsmParams::new(problem.gamma)?)?;

    let lo = comps.iter().map(|c| c.mean - problem.span * c.sd).fold(f64::INFINITY, f64::min);
    let hi = comps.iter().map(|c| c.mean + problem.span * c.sd).fold(f64::NEG_INFINITY, f64::max);
    let g = problem.grid_points;
    let step = (hi - lo) / (g - 1) as f64;

    // Simpson-weighted sub-density and its first moment, then prefix sums so
    // every threshold is a pair of O(1) lookups.
    let mut cum_f = Vec::with_capacity(g + 1);
    let mut cum_yf = Vec::with_capacity(g + 1);
    cum_f.push(0.0);
    cum_yf.push(0.0);
    let mut tot_f = 0.0;
    let mut tot_yf = 0.0;
    for i in 0..g {
        let y = lo + step * i as f64;
        let simpson = if i == 0 || i == g - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let f: f64 = comps.iter().map(|c| c.weight * npdf(y, c.mean, c.sd)).sum();
        let fw = f * simpson * step / 3.0;
        tot_f += fw;
        tot_yf += y * fw;
        cum_f.push(tot_f);
        cum_yf.push(tot_yf);
    }

    let expected: f64 = comps.iter().map(|c| c.weight).sum();
    if (tot_f - expected).abs() > 1e-6 {
        return Err(Error::DensityNormalization { expected, got: tot_f });
    }

    let (a, b) = (br.alpha, br.beta);
    let mut mu_hi = f64::NEG_INFINITY;
    let mut mu_lo = f64::INFINITY;
    for k in 0..=g {
        let below_f = cum_f[k];
        let below_yf = cum_yf[k];
        let above_f = tot_f - below_f;
        let above_yf = tot_yf - below_yf;
        let hi_val = (a * below_yf + b * above_yf) / (a * below_f + b * above_f);
        let lo_val = (b * below_yf + a * above_yf) / (b * below_f + a * above_f);
        mu_hi = mu_hi.max(hi_val);
        mu_lo = mu_lo.min(lo_val);
    }
    Ok((mu_lo, mu_hi))
}

/// Sharp population effect interval: treated upper minus control lower and
/// vice versa.
pub fn population_cate_interval(problem: &PopulationProblem<'_>, x: &[f64]) -> Result<(f64, f64)> {
    let (lo1, hi1) = population_bounds(problem, x, 1)?;
    let (lo0, hi0) = population_bounds(problem, x, 0)?;
    Ok((lo1 - hi0, hi1 - lo0))
}
