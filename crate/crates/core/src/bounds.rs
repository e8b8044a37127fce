//! Adversarially weighted kernel regression: sharp interval estimates for
//! conditional means and treatment-effect contrasts.
//!
//! Under the marginal sensitivity model the inverse complete propensity of
//! each observation is only known to lie in a bracket `[α_i, β_i]`
//! ([`crate::msm::bracket`]). The estimand at a point `x` is therefore an
//! *interval*: the range of the weighted kernel regression
//!
//! ```text
//! μ̂_t(W; x) = Σ K_i W_i Y_i / Σ K_i W_i     over W_i ∈ [α_i, β_i]
//! ```
//!
//! as the adversary sweeps the weight box. Although the box has `2^m`
//! vertices, the optimum has a one-dimensional structure: sort the arm's
//! outcomes ascending; the maximizing weight vector puts the low coefficient
//! `ã_i = α_i K_i` on every outcome below some threshold index `k` and the
//! high coefficient `b̃_i = β_i K_i` on every outcome above it. Scanning the
//! objective
//!
//! ```text
//! λ(k) = (Σ_{i≤k} ã_i Y_i + Σ_{i>k} b̃_i Y_i) / (Σ_{i≤k} ã_i + Σ_{i>k} b̃_i)
//! ```
//!
//! over `k = 1..m` with prefix sums finds the exact maximum in `O(m)` after
//! the sort; the minimum swaps the roles of `ã` and `b̃`. We take the argmax
//! over the whole profile rather than stopping at the first non-increase:
//! the two are identical in exact arithmetic (the profile is unimodal), but
//! when kernel weights span many orders of magnitude, adjacent `λ` values can
//! collide in floating point and a first-stop rule can halt at a spurious
//! plateau far below the true optimum.
//!
//! Treatment-effect intervals combine per-arm intervals pessimistically:
//! the upper bound is the treated arm's maximum minus the control arm's
//! minimum, and vice versa. Conditioning on a subset of covariates works the
//! same way — the kernel sees only the selected coordinates while the
//! sensitivity brackets keep using every covariate through the full
//! propensity — and conditioning on *all* covariates is exactly the plain
//! estimator.

use rayon::prelude::*;

use crate::data::ObsDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::msm::{bracket, MsmParams};
use crate::propensity::PropensitySource;

/// Smallest denominator the ratio estimator accepts before declaring the
/// effective sample empty.
const MIN_MASS: f64 = 1e-300;

/// The weighted ratio `Σ 1{T_i=t} K_i W_i Y_i / Σ 1{T_i=t} K_i W_i`.
///
/// Invariant to positive rescaling of `W`. Errors when the denominator
/// carries no mass.
pub fn weighted_mu(t: &[u8], arm: u8, k: &[f64], w: &[f64], y: &[f64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..t.len() {
        if t[i] == arm {
            let kw = k[i] * w[i];
            num += kw * y[i];
            den += kw;
        }
    }
    if den <= MIN_MASS {
        return Err(Error::NoEffectiveSample { arm, at: "weighted mean".into() });
    }
    Ok(num / den)
}

/// One arm's extremal-mean problem: outcomes sorted ascending with their
/// low-side and high-side coefficients `ã_i = α_i K_i` and `b̃_i = β_i K_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmProblem {
    y: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ArmProblem {
    /// Builds the problem, sorting by outcome (stably) and validating that
    /// every low coefficient is positive and no high coefficient is smaller.
    pub fn new(y: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let m = y.len();
        if m == 0 {
            return Err(Error::Validation("arm problem needs at least one observation".into()));
        }
        if a.len() != m || b.len() != m {
            return Err(Error::Validation(format!(
                "arm problem arrays disagree in length: {m}, {}, {}",
                a.len(),
                b.len()
            )));
        }
        for i in 0..m {
            if !(y[i].is_finite() && a[i].is_finite() && b[i].is_finite()) {
                return Err(Error::Validation(format!(
                    "arm problem entries must be finite (index {i})"
                )));
            }
            if !(a[i] > 0.0) {
                return Err(Error::Validation(format!(
                    "low coefficient must be positive, got {} at index {i}",
                    a[i]
                )));
            }
            if b[i] < a[i] {
                return Err(Error::Validation(format!(
                    "high coefficient {} below low coefficient {} at index {i}",
                    b[i], a[i]
                )));
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| y[i].total_cmp(&y[j])); // stable
        Ok(Self {
            y: order.iter().map(|&i| y[i]).collect(),
            a: order.iter().map(|&i| a[i]).collect(),
            b: order.iter().map(|&i| b[i]).collect(),
        })
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    /// Always false: construction requires at least one observation.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Outcomes, ascending.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Low-side coefficients, in outcome order.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// High-side coefficients, in outcome order.
    pub fn b(&self) -> &[f64] {
        &self.b
    }
}

/// The threshold objective `λ(k)` for `k = 0..=m`, with the low-side
/// coefficient on outcomes up to `k` and the high-side coefficient above.
///
/// `upper = true` puts `ã` low / `b̃` high (whose maximum is the upper
/// bound); `upper = false` swaps them (whose minimum is the lower bound).
/// Exposed for diagnostics and for asserting unimodality in tests.
pub fn lambda_profile(p: &ArmProblem, upper: bool) -> Vec<f64> {
    let (lo, hi) = if upper { (&p.a, &p.b) } else { (&p.b, &p.a) };
    let m = p.y.len();
    let mut tot_hi = 0.0;
    let mut tot_hiy = 0.0;
    for i in 0..m {
        tot_hi += hi[i];
        tot_hiy += hi[i] * p.y[i];
    }
    let mut out = Vec::with_capacity(m + 1);
    out.push(tot_hiy / tot_hi);
    let (mut acc_lo, mut acc_loy, mut acc_hi, mut acc_hiy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..m {
        acc_lo += lo[i];
        acc_loy += lo[i] * p.y[i];
        acc_hi += hi[i];
        acc_hiy += hi[i] * p.y[i];
        let den = acc_lo + (tot_hi - acc_hi);
        debug_assert!(den > MIN_MASS);
        out.push((acc_loy + (tot_hiy - acc_hiy)) / den);
    }
    out
}

fn extremal(p: &ArmProblem, upper: bool) -> f64 {
    let (lo, hi) = if upper { (&p.a, &p.b) } else { (&p.b, &p.a) };
    let m = p.y.len();
    let mut tot_hi = 0.0;
    let mut tot_hiy = 0.0;
    for i in 0..m {
        tot_hi += hi[i];
        tot_hiy += hi[i] * p.y[i];
    }
    let (mut acc_lo, mut acc_loy, mut acc_hi, mut acc_hiy) = (0.0, 0.0, 0.0, 0.0);
    let mut best = if upper { f64::NEG_INFINITY } else { f64::INFINITY };
    for i in 0..m {
        acc_lo += lo[i];
        acc_loy += lo[i] * p.y[i];
        acc_hi += hi[i];
        acc_hiy += hi[i] * p.y[i];
        let den = acc_lo + (tot_hi - acc_hi);
        debug_assert!(den > MIN_MASS);
        let lam = (acc_loy + (tot_hiy - acc_hiy)) / den;
        if (upper && lam > best) || (!upper && lam < best) {
            best = lam;
        }
    }
    best
}

/// The largest weighted mean attainable over the weight box: `max_k λ̄(k)`.
pub fn mu_upper(p: &ArmProblem) -> f64 {
    extremal(p, true)
}

/// The smallest weighted mean attainable over the weight box: `min_k λ̲(k)`.
pub fn mu_lower(p: &ArmProblem) -> f64 {
    extremal(p, false)
}

/// Per-arm mean intervals and the induced treatment-effect interval at one
/// evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    /// `(lo, hi)` for the control-arm conditional mean.
    pub mu0: (f64, f64),
    /// `(lo, hi)` for the treated-arm conditional mean.
    pub mu1: (f64, f64),
    /// `(lo, hi)` for the effect: `tau_lo = mu1_lo − mu0_hi`,
    /// `tau_hi = mu1_hi − mu0_lo`.
    pub tau: (f64, f64),
}

/// One arm's effective sample at an evaluation point: outcomes, kernel
/// weights, and nominal received-treatment propensities.
struct ArmSlice {
    y: Vec<f64>,
    kw: Vec<f64>,
    e_rec: Vec<f64>,
}

/// Collects, per arm, the observations with positive kernel weight at `x_s`
/// (kernel over the `subset` coordinates only).
fn collect_arms(
    data: &ObsDataset,
    e1: &[f64],
    subset: &[usize],
    spec: &KernelSpec,
    x_s: &[f64],
) -> [ArmSlice; 2] {
    let mut arms = [
        ArmSlice { y: Vec::new(), kw: Vec::new(), e_rec: Vec::new() },
        ArmSlice { y: Vec::new(), kw: Vec::new(), e_rec: Vec::new() },
    ];
    let mut xi_s = vec![0.0; subset.len()];
    for i in 0..data.n() {
        let row = data.x_row(i);
        for (c, &j) in subset.iter().enumerate() {
            xi_s[c] = row[j];
        }
        let kw = spec.kernel_weight(&xi_s, x_s);
        if kw > 0.0 {
            let t = data.t()[i];
            let arm = &mut arms[t as usize];
            arm.y.push(data.y()[i]);
            arm.kw.push(kw);
            arm.e_rec.push(if t == 1 { e1[i] } else { 1.0 - e1[i] });
        }
    }
    arms
}

/// Solves both arms at one point and combines them into effect bands.
fn bands_from_slices(arms: &[ArmSlice; 2], params: MsmParams, at: &str) -> Result<Bands> {
    let mut mu = [(0.0, 0.0); 2];
    for (arm, slice) in arms.iter().enumerate() {
        if slice.y.is_empty() || slice.kw.iter().sum::<f64>() <= MIN_MASS {
            return Err(Error::NoEffectiveSample { arm: arm as u8, at: at.to_string() });
        }
        let m = slice.y.len();
        let mut a = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        for i in 0..m {
            let br = bracket(slice.e_rec[i], params)?;
            a.push(br.alpha * slice.kw[i]);
            b.push(br.beta * slice.kw[i]);
        }
        let problem = ArmProblem::new(slice.y.clone(), a, b)?;
        mu[arm] = (mu_lower(&problem), mu_upper(&problem));
    }
    Ok(Bands {
        mu0: mu[0],
        mu1: mu[1],
        tau: (mu[1].0 - mu[0].1, mu[1].1 - mu[0].0),
    })
}

fn format_point(x: &[f64]) -> String {
    let coords: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", coords.join(", "))
}

fn validate_subset(d: usize, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::Validation("covariate subset must be nonempty".into()));
    }
    for &j in subset {
        if j >= d {
            return Err(Error::Validation(format!(
                "covariate subset index {j} out of range for d = {d}"
            )));
        }
    }
    let mut seen = subset.to_vec();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Validation("covariate subset has duplicate indices".into()));
    }
    Ok(())
}

/// Interval estimate of the effect conditioned on a covariate *subset* `S`:
/// the kernel smooths only over the columns in `subset` (matched to `x_s`),
/// while the sensitivity brackets keep using each observation's full
/// propensity `e_t(X_i)`.
pub fn pcate_interval(
    data: &ObsDataset,
    x_s: &[f64],
    subset: &[usize],
    params: MsmParams,
    spec: &KernelSpec,
    propensity: PropensitySource<'_>,
) -> Result<Bands> {
    validate_subset(data.d(), subset)?;
    if spec.bandwidths().len() != subset.len() {
        return Err(Error::Validation(format!(
            "kernel has {} bandwidths but the subset has {} coordinates",
            spec.bandwidths().len(),
            subset.len()
        )));
    }
    if x_s.len() != subset.len() {
        return Err(Error::Validation(format!(
            "evaluation point has {} coordinates but the subset has {}",
            x_s.len(),
            subset.len()
        )));
    }
    let e1 = propensity.resolve(data)?;
    let arms = collect_arms(data, &e1, subset, spec, x_s);
    bands_from_slices(&arms, params, &format_point(x_s))
}

/// Interval estimate of the effect conditioned on the full covariate vector:
/// the subset case with `S` = every column.
pub fn cate_interval(
    data: &ObsDataset,
    x: &[f64],
    params: MsmParams,
    spec: &KernelSpec,
    propensity: PropensitySource<'_>,
) -> Result<Bands> {
    let all: Vec<usize> = (0..data.d()).collect();
    pcate_interval(data, x, &all, params, spec, propensity)
}

/// A grid point whose evaluation failed, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFailure {
    /// The evaluation point.
    pub point: Vec<f64>,
    /// Human-readable failure reason.
    pub message: String,
}

/// Interval estimates over a grid of evaluation points and a ladder of
/// sensitivity levels.
///
/// Cells are stored grid-major with Γ ascending; a point whose evaluation
/// failed has `None` cells and an entry in [`IntervalCurve::failures`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCurve {
    grid: Vec<Vec<f64>>,
    gammas: Vec<f64>,
    cells: Vec<Option<Bands>>,
    failures: Vec<CurveFailure>,
}

impl IntervalCurve {
    /// Assembles a curve from parts, validating shapes and cell invariants
    /// (`lo ≤ hi` per arm and the effect-combination identities).
    pub fn from_cells(
        grid: Vec<Vec<f64>>,
        gammas: Vec<f64>,
        cells: Vec<Option<Bands>>,
        failures: Vec<CurveFailure>,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Validation("interval curve needs a nonempty grid".into()));
        }
        let k = grid[0].len();
        if k == 0 || grid.iter().any(|p| p.len() != k) {
            return Err(Error::Validation(
                "interval curve grid points must share one positive dimension".into(),
            ));
        }
        if gammas.is_empty() {
            return Err(Error::Validation("interval curve needs at least one Γ".into()));
        }
        if gammas.iter().any(|&g| !(g.is_finite() && g >= 1.0)) {
            return Err(Error::Validation("sensitivity levels must satisfy Γ ≥ 1".into()));
        }
        if gammas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("sensitivity levels must be strictly ascending".into()));
        }
        if cells.len() != grid.len() * gammas.len() {
            return Err(Error::Validation(format!(
                "curve has {} cells, expected {}×{} = {}",
                cells.len(),
                grid.len(),
                gammas.len(),
                grid.len() * gammas.len()
            )));
        }
        for bands in cells.iter().flatten() {
            let ordered = bands.mu0.0 <= bands.mu0.1 + 1e-12 && bands.mu1.0 <= bands.mu1.1 + 1e-12;
            let combined = (bands.tau.0 - (bands.mu1.0 - bands.mu0.1)).abs() <= 1e-9
                && (bands.tau.1 - (bands.mu1.1 - bands.mu0.0)).abs() <= 1e-9;
            if !(ordered && combined) {
                return Err(Error::Validation(
                    "interval curve cell violates lo ≤ hi or the effect-combination identity"
                        .into(),
                ));
            }
        }
        Ok(Self { grid, gammas, cells, failures })
    }

    /// Evaluation points, in output order.
    pub fn grid(&self) -> &[Vec<f64>] {
        &self.grid
    }

    /// Sensitivity levels, ascending.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// The bands at grid index `p` and Γ index `g`, if that evaluation
    /// succeeded.
    pub fn cell(&self, p: usize, g: usize) -> Option<&Bands> {
        self.cells[p * self.gammas.len() + g].as_ref()
    }

    /// Failed grid points with reasons.
    pub fn failures(&self) -> &[CurveFailure] {
        &self.failures
    }

    /// Index of an exact sensitivity level, or a descriptive error listing
    /// the levels the curve actually holds.
    pub fn gamma_index(&self, gamma: f64) -> Result<usize> {
        self.gammas
            .iter()
            .position(|&g| g == gamma)
            .ok_or(Error::GammaAbsent { gamma })
    }
}

/// Sweeps [`pcate_interval`] over a grid of points and a ladder of Γ values.
///
/// Kernel weights are computed once per point and shared across the Γ
/// ladder. Points evaluate independently (in parallel); a point that fails —
/// typically because one arm has no kernel mass there — is recorded in the
/// curve's failure list instead of aborting the sweep. Configuration errors
/// (bad subset, mismatched dimensions, missing propensities) abort
/// immediately.
pub fn interval_curve(
    data: &ObsDataset,
    grid: &[Vec<f64>],
    gammas: &[f64],
    spec: &KernelSpec,
    propensity: PropensitySource<'_>,
    subset: Option<&[usize]>,
) -> Result<IntervalCurve> {
    let all: Vec<usize>;
    let subset = match subset {
        Some(s) => s,
        None => {
            all = (0..data.d()).collect();
            &all
        }
    };
    validate_subset(data.d(), subset)?;
    if spec.bandwidths().len() != subset.len() {
        return Err(Error::Validation(format!(
            "kernel has {} bandwidths but the subset has {} coordinates",
            spec.bandwidths().len(),
            subset.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::Validation("interval curve needs a nonempty grid".into()));
    }
    for point in grid {
        if point.len() != subset.len() {
            return Err(Error::Validation(format!(
                "grid point {} has {} coordinates but the subset has {}",
                format_point(point),
                point.len(),
                subset.len()
            )));
        }
    }
    let mut sorted_gammas = gammas.to_vec();
    sorted_gammas.sort_by(|x, y| x.total_cmp(y));
    sorted_gammas.dedup();
    let params: Vec<MsmParams> =
        sorted_gammas.iter().map(|&g| MsmParams::new(g)).collect::<Result<_>>()?;
    let e1 = propensity.resolve(data)?;

    let per_point: Vec<(Vec<Option<Bands>>, Option<CurveFailure>)> = grid
        .par_iter()
        .map(|point| {
            let arms = collect_arms(data, &e1, subset, spec, point);
            let at = format_point(point);
            let mut cells = Vec::with_capacity(params.len());
            let mut failure = None;
            for &p in &params {
                match bands_from_slices(&arms, p, &at) {
                    Ok(bands) => cells.push(Some(bands)),
                    Err(err) => {
                        if failure.is_none() {
                            failure = Some(CurveFailure {
                                point: point.clone(),
                                message: err.to_string(),
                            });
                        }
                        cells.push(None);
                    }
                }
            }
            (cells, failure)
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len() * params.len());
    let mut failures = Vec::new();
    for (point_cells, failure) in per_point {
        cells.extend(point_cells);
        failures.extend(failure);
    }
    IntervalCurve::from_cells(grid.to_vec(), sorted_gammas, cells, failures)
}
