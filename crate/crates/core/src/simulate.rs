//! Synthetic data generators with known ground truth.
//!
//! Each generator builds a world where hidden confounding is *exactly* as
//! strong as a chosen sensitivity level `Γ* = exp(log_gamma_star)`: a binary
//! confounder `u ~ Bernoulli(1/2)` pushes the complete treatment probability
//! onto the extremal ends of the sensitivity bracket around the nominal
//! propensity. Interval estimators can then be graded against closed-form
//! answers — the true effect, the confounded naive contrast, and population
//! bounds — none of which are available for real data.
//!
//! Three designs are provided:
//!
//! * `sin1d` — one covariate `X ~ U[−2,2]`, nominal propensity
//!   `σ(0.75x + 0.5)`, outcomes
//!   `Y(t) = (2t−1)(x+1) − 2·sin(2(2t−1)x) − 2(2u−1)(1 + x/2) + ε_t`,
//!   giving the sinusoidal effect `τ(x) = 2 + 2x − 4·sin(2x)`;
//! * `pcate3d` — three covariates on `[−1,1]³`, the same effect driven by the
//!   first coordinate only, plus an arm-invariant linear term `0.5·Σx_j`;
//!   made for subset-conditional (first coordinate) estimation;
//! * `appendix_logistic` — like `sin1d` but the confounder enters the
//!   treatment model *additively on the logit scale*
//!   (`σ(0.75x + 0.5 ± log Γ*)`) and no nominal propensity is revealed: the
//!   analyst must fit one, as with real data.
//!
//! Noise `ε_0, ε_1` is standard normal, drawn independently per arm.
//! Generation is seed-deterministic; replication ensembles should step the
//! seed, not reuse it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::data::{ObsDataset, SimTruth};
use crate::error::{Error, Result};
use crate::msm::{bracket, MsmParams};
use crate::propensity::sigmoid;

/// The three synthetic designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DgpName {
    /// 1D sinusoidal effect, extremal confounding, nominal propensity known.
    Sin1d,
    /// 3D variant with effect heterogeneity in the first coordinate only.
    Pcate3d,
    /// 1D variant with a logit-additive confounder and no revealed propensity.
    AppendixLogistic,
}

impl FromStr for DgpName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin1d" => Ok(DgpName::Sin1d),
            "pcate3d" => Ok(DgpName::Pcate3d),
            "appendix" | "appendix_logistic" => Ok(DgpName::AppendixLogistic),
            other => Err(Error::Validation(format!(
                "unknown data-generating process `{other}` (expected sin1d, pcate3d or appendix)"
            ))),
        }
    }
}

impl fmt::Display for DgpName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DgpName::Sin1d => "sin1d",
            DgpName::Pcate3d => "pcate3d",
            DgpName::AppendixLogistic => "appendix_logistic",
        })
    }
}

impl DgpName {
    /// Covariate dimension of the design.
    pub fn dim(self) -> usize {
        match self {
            DgpName::Sin1d | DgpName::AppendixLogistic => 1,
            DgpName::Pcate3d => 3,
        }
    }

    /// Per-coordinate covariate support.
    pub fn domain(self) -> Vec<(f64, f64)> {
        match self {
            DgpName::Sin1d | DgpName::AppendixLogistic => vec![(-2.0, 2.0)],
            DgpName::Pcate3d => vec![(-1.0, 1.0); 3],
        }
    }
}

/// A fully specified simulation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    /// Which design.
    pub name: DgpName,
    /// Confounding strength on the log scale; 0 means unconfounded.
    pub log_gamma_star: f64,
    /// Number of rows.
    pub n: usize,
    /// RNG seed; equal specs generate byte-identical data.
    pub seed: u64,
}

impl DgpSpec {
    /// Validates `log_gamma_star ≥ 0` and `n ≥ 1`.
    pub fn new(name: DgpName, log_gamma_star: f64, n: usize, seed: u64) -> Result<Self> {
        if !(log_gamma_star.is_finite() && log_gamma_star >= 0.0) {
            return Err(Error::Validation(format!(
                "log_gamma_star must be finite and ≥ 0, got {log_gamma_star}"
            )));
        }
        if n == 0 {
            return Err(Error::Validation("simulation needs n ≥ 1".into()));
        }
        Ok(Self { name, log_gamma_star, n, seed })
    }
}

/// Effect-driving coordinate transform shared by every design.
fn g(x_s: f64) -> f64 {
    x_s + 1.0 - 2.0 * (2.0 * x_s).sin()
}

fn check_dim(name: DgpName, x: &[f64]) -> Result<()> {
    if x.len() != name.dim() {
        return Err(Error::Validation(format!(
            "{name} expects {} covariate(s), got {}",
            name.dim(),
            x.len()
        )));
    }
    Ok(())
}

/// The design's nominal propensity `P(T=1 | X=x)`.
///
/// For `sin1d`/`pcate3d` this is the *specified* logistic score — the one
/// handed to estimators — even though the extremal construction makes the
/// realized marginal differ slightly. For `appendix_logistic`, which
/// specifies no nominal score, it is the true marginal, averaging the
/// complete propensity over the confounder.
pub fn nominal_e1(spec: &DgpSpec, x: &[f64]) -> Result<f64> {
    check_dim(spec.name, x)?;
    Ok(match spec.name {
        DgpName::Sin1d => sigmoid(0.75 * x[0] + 0.5),
        DgpName::Pcate3d => sigmoid(0.75 * x[0] - 0.5 * x[1] + 0.5 * x[2] + 0.5),
        DgpName::AppendixLogistic => {
            0.5 * (complete_propensity(spec, x, 1)? + complete_propensity(spec, x, 0)?)
        }
    })
}

/// The complete treatment probability `P(T=1 | X=x, u)`.
///
/// For `sin1d`/`pcate3d` the two confounder states land exactly on the ends
/// of the sensitivity bracket at `Γ*`: `u=1 → 1/α₁`, `u=0 → 1/β₁`. For
/// `appendix_logistic` the confounder shifts the logit by `± log Γ*`.
pub fn complete_propensity(spec: &DgpSpec, x: &[f64], u: u8) -> Result<f64> {
    check_dim(spec.name, x)?;
    match spec.name {
        DgpName::Sin1d | DgpName::Pcate3d => {
            let e1 = nominal_e1(spec, x)?;
            let br = bracket(e1, MsmParams::new(spec.log_gamma_star.exp())?)?;
            Ok(if u == 1 { 1.0 / br.alpha } else { 1.0 / br.beta })
        }
        DgpName::AppendixLogistic => {
            let shift = (2.0 * u as f64 - 1.0) * spec.log_gamma_star;
            Ok(sigmoid(0.75 * x[0] + 0.5 + shift))
        }
    }
}

/// Mean of the potential outcome `Y(t)` given covariates and confounder
/// (the noise is standard normal around this).
pub fn outcome_mean(name: DgpName, x: &[f64], u: u8, t: u8) -> f64 {
    let s = 2.0 * t as f64 - 1.0;
    let x_s = x[0];
    let mut mean =
        s * x_s + s - 2.0 * (2.0 * s * x_s).sin() - 2.0 * (2.0 * u as f64 - 1.0) * (1.0 + 0.5 * x_s);
    if name == DgpName::Pcate3d {
        mean += 0.5 * (x[0] + x[1] + x[2]);
    }
    mean
}

/// One Gaussian component of the joint outcome–treatment law at `x`:
/// the sub-density `f(y, T=t | X=x) = Σ_u weight_u · N(y; mean_u, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    /// `P(u) · P(T=t | x, u)`; the components sum to `P(T=t | x)` over `u`.
    pub weight: f64,
    /// `E[Y(t) | x, u]`; the outcome noise is standard normal around it.
    pub mean: f64,
}

/// The two-component Gaussian mixture representing `f(y, T=t | X=x)`,
/// one component per confounder state. This closed form feeds the population
/// oracle; no density estimation is ever involved.
pub fn arm_mixture(spec: &DgpSpec, x: &[f64], arm: u8) -> Result<Vec<MixtureComponent>> {
    check_dim(spec.name, x)?;
    let mut parts = Vec::with_capacity(2);
    for u in [0u8, 1u8] {
        let e_c = complete_propensity(spec, x, u)?;
        let p_t = if arm == 1 { e_c } else { 1.0 - e_c };
        parts.push(MixtureComponent {
            weight: 0.5 * p_t,
            mean: outcome_mean(spec.name, x, u, arm),
        });
    }
    Ok(parts)
}

/// Draws a dataset from the design: covariates, confounder, treatment,
/// both potential outcomes (kept as ground truth) and the observed outcome.
///
/// `sin1d`/`pcate3d` datasets carry the specified nominal propensity in the
/// known-propensity column; `appendix_logistic` leaves it empty by design.
pub fn generate(spec: &DgpSpec) -> Result<ObsDataset> {
    let d = spec.name.dim();
    let domain = spec.name.domain();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut x = Vec::with_capacity(spec.n * d);
    let mut t = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    let mut e1 = Vec::with_capacity(spec.n);
    let mut y0 = Vec::with_capacity(spec.n);
    let mut y1 = Vec::with_capacity(spec.n);
    let mut us = Vec::with_capacity(spec.n);

    let mut row = vec![0.0; d];
    for _ in 0..spec.n {
        for j in 0..d {
            let (lo, hi) = domain[j];
            row[j] = lo + (hi - lo) * rng.random::<f64>();
        }
        let u = u8::from(rng.random::<f64>() < 0.5);
        let e_c = complete_propensity(spec, &row, u)?;
        let ti = u8::from(rng.random::<f64>() < e_c);
        let eps1: f64 = rng.sample(StandardNormal);
        let eps0: f64 = rng.sample(StandardNormal);
        let y1i = outcome_mean(spec.name, &row, u, 1) + eps1;
        let y0i = outcome_mean(spec.name, &row, u, 0) + eps0;
        x.extend_from_slice(&row);
        us.push(u);
        t.push(ti);
        y1.push(y1i);
        y0.push(y0i);
        y.push(if ti == 1 { y1i } else { y0i });
        if spec.name != DgpName::AppendixLogistic {
            e1.push(nominal_e1(spec, &row)?);
        }
    }

    let e1_known = (spec.name != DgpName::AppendixLogistic).then_some(e1);
    ObsDataset::from_parts(x, d, t, y, e1_known, Some(SimTruth { y0, y1, u: us }))
}

/// The true conditional effect `τ(x_S) = 2 + 2x_S − 4·sin(2x_S)`.
///
/// The confounder and the arm-invariant terms cancel between arms, so the
/// same closed form serves every design; for `pcate3d` pass the first
/// coordinate.
pub fn true_cate(_name: DgpName, x_s: f64) -> f64 {
    2.0 * g(x_s)
}

/// What a naive arm-contrast regression converges to on `sin1d`: the true
/// effect plus the confounding distortion
/// `−2(2+x)·(P[u=1 | x, T=1] − P[u=1 | x, T=0])`, with the conditional
/// confounder probabilities obtained from Bayes' rule.
pub fn confounded_cate(spec: &DgpSpec, x: f64) -> Result<f64> {
    if spec.name != DgpName::Sin1d {
        return Err(Error::Validation(format!(
            "the confounded-contrast closed form is defined for sin1d only, not {}",
            spec.name
        )));
    }
    let xv = [x];
    let e_u1 = complete_propensity(spec, &xv, 1)?;
    let e_u0 = complete_propensity(spec, &xv, 0)?;
    let marginal = 0.5 * (e_u1 + e_u0);
    let p1 = 0.5 * e_u1 / marginal; // P[u=1 | x, T=1]
    let p0 = 0.5 * (1.0 - e_u1) / (1.0 - marginal); // P[u=1 | x, T=0]
    Ok(true_cate(spec.name, x) - 2.0 * (2.0 + x) * (p1 - p0))
}
