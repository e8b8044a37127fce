//! Minimax-regret treatment policies from interval estimates.
//!
//! When the effect of treating at `x` is only known to an interval
//! `[τ̲(x), τ̄(x)]`, no policy can be graded by its true risk — but it can be
//! graded by its worst-case *regret* against a default policy `π₀`: the most
//! the switch from `π₀` to `π` could cost if an adversary picked the true
//! effect inside the band. Outcomes here are losses (lower is better), so
//! treating helps exactly where the effect is negative.
//!
//! The worst case decomposes pointwise — the adversary tortures each `x`
//! independently — which makes the minimax solution a three-way rule:
//!
//! * the whole band is ≤ 0: treating can't hurt and may help → **treat**;
//! * the whole band is ≥ 0: treating can't help and may hurt → **control**;
//! * the band straddles 0: evidence is genuinely ambiguous, and any
//!   deviation from the default could be regretted → **follow `π₀`**.
//!
//! [`minimax_policy`] applies this rule to an estimated interval curve;
//! [`worst_case_regret`] evaluates any policy's regret against a supplied
//! population band by Monte Carlo over the covariate law; and
//! [`policy_risk_mc`] scores a policy on a simulated design using the
//! ground-truth potential outcomes directly.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::bounds::IntervalCurve;
use crate::error::{Error, Result};
use crate::simulate::{generate, DgpName, DgpSpec};

/// The three-way minimax decision at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// The whole band is ≤ 0: treat.
    Treat,
    /// The whole band is ≥ 0 (and reaches above): hold control.
    Control,
    /// The band straddles 0: defer to the default policy.
    Default,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Treat => "treat",
            Action::Control => "control",
            Action::Default => "default",
        })
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "treat" => Ok(Action::Treat),
            "control" => Ok(Action::Control),
            "default" => Ok(Action::Default),
            other => Err(Error::Validation(format!("unknown action `{other}`"))),
        }
    }
}

/// What the straddle case falls back to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DefaultRule {
    /// Never treat (`π₀ ≡ 0`).
    Never,
    /// Always treat (`π₀ ≡ 1`).
    Always,
    /// Per-grid-point defaults, aligned with the curve's grid order.
    PerPoint(Vec<u8>),
}

impl DefaultRule {
    fn at(&self, idx: usize) -> u8 {
        match self {
            DefaultRule::Never => 0,
            DefaultRule::Always => 1,
            DefaultRule::PerPoint(v) => v[idx],
        }
    }
}

/// One decided grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRow {
    /// The evaluation point.
    pub point: Vec<f64>,
    /// The three-way decision.
    pub action: Action,
    /// The binary action after resolving `Default` through `π₀`.
    pub resolved: u8,
    /// The effect band that produced the decision.
    pub tau: (f64, f64),
}

/// A minimax policy tabulated over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    gamma: f64,
    rows: Vec<PolicyRow>,
}

impl PolicyTable {
    /// Sensitivity level the policy was derived at.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Decided points, in grid order.
    pub fn rows(&self) -> &[PolicyRow] {
        &self.rows
    }

    /// A policy function assigning any point the resolved action of its
    /// nearest tabulated grid point (Euclidean distance).
    pub fn nearest_rule(&self) -> impl Fn(&[f64]) -> u8 + '_ {
        move |x: &[f64]| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, row) in self.rows.iter().enumerate() {
                let d: f64 =
                    row.point.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            self.rows[best].resolved
        }
    }
}

/// Applies the minimax rule to an interval curve at sensitivity `gamma`.
///
/// Decision per point: treat if `τ̄ ≤ 0`; otherwise control if `τ̲ ≥ 0`;
/// otherwise follow the default. (When the band is exactly `[0, 0]` both
/// one-sided conditions hold and the treat branch wins — deviating is then
/// costless either way.) Grid points whose interval evaluation failed are
/// omitted from the table.
pub fn minimax_policy(
    curve: &IntervalCurve,
    gamma: f64,
    default_rule: &DefaultRule,
) -> Result<PolicyTable> {
    let g = curve.gamma_index(gamma)?;
    if let DefaultRule::PerPoint(v) = default_rule {
        if v.len() != curve.grid().len() {
            return Err(Error::Validation(format!(
                "per-point default has {} entries but the grid has {}",
                v.len(),
                curve.grid().len()
            )));
        }
        if v.iter().any(|&a| a > 1) {
            return Err(Error::Validation("per-point defaults must be 0 or 1".into()));
        }
    }
    let mut rows = Vec::with_capacity(curve.grid().len());
    for (p, point) in curve.grid().iter().enumerate() {
        let Some(bands) = curve.cell(p, g) else { continue };
        let (tau_lo, tau_hi) = bands.tau;
        let (action, resolved) = if tau_hi <= 0.0 {
            (Action::Treat, 1)
        } else if tau_lo >= 0.0 {
            (Action::Control, 0)
        } else {
            (Action::Default, default_rule.at(p))
        };
        rows.push(PolicyRow { point: point.clone(), action, resolved, tau: (tau_lo, tau_hi) });
    }
    Ok(PolicyTable { gamma, rows })
}

/// Worst-case regret of `policy` against `default_rule` under the band:
/// the Monte Carlo average over `m` covariate draws of
/// `max((π−π₀)·τ̲, (π−π₀)·τ̄)` — the adversary's pointwise best response.
pub fn worst_case_regret<P, D, B, S>(
    policy: P,
    default_rule: D,
    band: B,
    sampler: S,
    m: usize,
    seed: u64,
) -> Result<f64>
where
    P: Fn(&[f64]) -> u8,
    D: Fn(&[f64]) -> u8,
    B: Fn(&[f64]) -> Result<(f64, f64)>,
    S: Fn(&mut ChaCha12Rng) -> Vec<f64>,
{
    if m == 0 {
        return Err(Error::Validation("worst-case regret needs at least one draw".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..m {
        let x = sampler(&mut rng);
        let diff = policy(&x) as f64 - default_rule(&x) as f64;
        let (tau_lo, tau_hi) = band(&x)?;
        acc += (diff * tau_lo).max(diff * tau_hi);
    }
    Ok(acc / m as f64)
}

/// Independent uniform draws over a rectangular domain — the covariate law
/// of every built-in design.
pub fn uniform_sampler(domain: Vec<(f64, f64)>) -> impl Fn(&mut ChaCha12Rng) -> Vec<f64> {
    move |rng: &mut ChaCha12Rng| {
        domain.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
    }
}

/// Monte Carlo estimate of the policy value `V(π) = E[π Y(1) + (1−π) Y(0)]`
/// on a simulated design, with a normal-approximation 95% confidence
/// half-width. Ground-truth potential outcomes are read directly from the
/// simulator; requires `m ≥ 1000`.
pub fn policy_risk_mc<P>(
    policy: P,
    name: DgpName,
    log_gamma_star: f64,
    m: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    P: Fn(&[f64]) -> u8,
{
    if m < 1000 {
        return Err(Error::Validation(format!(
            "policy risk estimation needs at least 1000 draws, got {m}"
        )));
    }
    let data = generate(&DgpSpec::new(name, log_gamma_star, m, seed)?)?;
    let truth = data.truth().expect("simulated data always carries ground truth");
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for i in 0..m {
        let pi = policy(data.x_row(i)) as f64;
        let v = pi * truth.y1[i] + (1.0 - pi) * truth.y0[i];
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / m as f64;
    let var = (sumsq / m as f64 - mean * mean).max(0.0) * m as f64 / (m - 1) as f64;
    Ok((mean, 1.96 * (var / m as f64).sqrt()))
}

/// Writes a policy table as CSV:
/// `x0..x{k-1},action,resolved,tau_lo,tau_hi`.
pub fn write_policy_csv(table: &PolicyTable, path: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::Validation("cannot write an empty policy table".into()));
    }
    let k = table.rows[0].point.len();
    let mut out = String::new();
    for j in 0..k {
        let _ = write!(out, "x{j},");
    }
    out.push_str("action,resolved,tau_lo,tau_hi\n");
    for row in &table.rows {
        for coord in &row.point {
            let _ = write!(out, "{coord},");
        }
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.action, row.resolved, row.tau.0, row.tau.1
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a policy table written by [`write_policy_csv`]. The sensitivity
/// level is not stored in the CSV; supply the one the table was built at.
pub fn load_policy_csv(path: &Path, gamma: f64) -> Result<PolicyTable> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut k = 0;
    while headers.iter().any(|h| h == format!("x{k}")) {
        k += 1;
    }
    if k == 0 {
        return Err(Error::Schema { column: "x0".into() });
    }
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema { column: name.into() })
    };
    let cols: Vec<usize> = (0..k)
        .map(|j| col(&format!("x{j}")))
        .collect::<Result<_>>()?;
    let action_col = col("action")?;
    let resolved_col = col("resolved")?;
    let tau_lo_col = col("tau_lo")?;
    let tau_hi_col = col("tau_hi")?;

    let parse = |raw: &str, row: usize, what: &str| -> Result<f64> {
        raw.parse::<f64>().map_err(|_| Error::Parse {
            row,
            message: format!("column `{what}`: cannot parse `{raw}`"),
        })
    };
    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1;
        let record = record?;
        let cell = |idx: usize| -> &str { record.get(idx).unwrap_or("") };
        let point: Vec<f64> = cols
            .iter()
            .map(|&c| parse(cell(c), row, &headers[c]))
            .collect::<Result<_>>()?;
        let action: Action = cell(action_col).parse()?;
        let resolved = match cell(resolved_col) {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::Parse {
                    row,
                    message: format!("column `resolved` must be 0 or 1, got `{other}`"),
                })
            }
        };
        let tau = (parse(cell(tau_lo_col), row, "tau_lo")?, parse(cell(tau_hi_col), row, "tau_hi")?);
        rows.push(PolicyRow { point, action, resolved, tau });
    }
    if rows.is_empty() {
        return Err(Error::Validation("policy CSV contains no rows".into()));
    }
    Ok(PolicyTable { gamma, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::Bands;
    use crate::oracle::{population_cate_interval, PopulationProblem};
    use crate::simulate::true_cate;
    use approx::assert_relative_eq;
    use tempfile::tempdir;

    /// A one-Γ curve whose τ bands are given directly (μ bands chosen to
    /// satisfy the combination identity).
    fn curve_from_taus(taus: &[Option<(f64, f64)>], gamma: f64) -> IntervalCurve {
        let grid: Vec<Vec<f64>> = (0..taus.len()).map(|i| vec![i as f64]).collect();
        let cells: Vec<Option<Bands>> = taus
            .iter()
            .map(|t| t.map(|tau| Bands { mu0: (0.0, 0.0), mu1: tau, tau }))
            .collect();
        IntervalCurve::from_cells(grid, vec![gamma], cells, Vec::new()).unwrap()
    }

    #[test]
    fn three_way_rule_and_double_zero_precedence() {
        let curve = curve_from_taus(
            &[
                Some((-0.5, -0.1)), // treat
                Some((0.2, 0.6)),   // control
                Some((-0.3, 0.4)),  // straddle
                Some((0.0, 0.0)),   // both conditions hold: treat wins
                Some((-0.7, 0.0)),  // τ̄ = 0 boundary: treat
                Some((0.0, 0.4)),   // τ̲ = 0 boundary: control
            ],
            2.0,
        );
        for default in [DefaultRule::Never, DefaultRule::Always] {
            let table = minimax_policy(&curve, 2.0, &default).unwrap();
            let acts: Vec<Action> = table.rows().iter().map(|r| r.action).collect();
            assert_eq!(
                acts,
                vec![
                    Action::Treat,
                    Action::Control,
                    Action::Default,
                    Action::Treat,
                    Action::Treat,
                    Action::Control,
                ]
            );
            let straddle = &table.rows()[2];
            let expected = if default == DefaultRule::Always { 1 } else { 0 };
            assert_eq!(straddle.resolved, expected);
            assert_eq!(table.rows()[0].resolved, 1);
            assert_eq!(table.rows()[1].resolved, 0);
        }
    }

    #[test]
    fn per_point_defaults_apply_by_grid_index() {
        let curve = curve_from_taus(&[Some((-1.0, 1.0)), Some((-1.0, 1.0))], 1.5);
        let table =
            minimax_policy(&curve, 1.5, &DefaultRule::PerPoint(vec![1, 0])).unwrap();
        assert_eq!(table.rows()[0].resolved, 1);
        assert_eq!(table.rows()[1].resolved, 0);
        // Misaligned defaults are refused.
        assert!(minimax_policy(&curve, 1.5, &DefaultRule::PerPoint(vec![1])).is_err());
        assert!(minimax_policy(&curve, 1.5, &DefaultRule::PerPoint(vec![1, 2])).is_err());
    }

    #[test]
    fn absent_gamma_is_reported() {
        let curve = curve_from_taus(&[Some((-1.0, 1.0))], 1.5);
        let err = minimax_policy(&curve, 2.0, &DefaultRule::Never).unwrap_err();
        assert!(matches!(err, Error::GammaAbsent { gamma } if gamma == 2.0), "{err}");
    }

    #[test]
    fn failed_grid_points_are_omitted() {
        let curve = curve_from_taus(&[Some((-0.5, -0.1)), None, Some((0.1, 0.2))], 1.5);
        let table = minimax_policy(&curve, 1.5, &DefaultRule::Never).unwrap();
        assert_eq!(table.rows().len(), 2);
        assert_eq!(table.rows()[0].point, vec![0.0]);
        assert_eq!(table.rows()[1].point, vec![2.0]);
    }

    #[test]
    fn decisions_are_scale_invariant() {
        let taus = [Some((-0.5, -0.1)), Some((0.2, 0.6)), Some((-0.3, 0.4))];
        let scaled: Vec<Option<(f64, f64)>> =
            taus.iter().map(|t| t.map(|(lo, hi)| (7.0 * lo, 7.0 * hi))).collect();
        let a = minimax_policy(&curve_from_taus(&taus, 2.0), 2.0, &DefaultRule::Never).unwrap();
        let b = minimax_policy(&curve_from_taus(&scaled, 2.0), 2.0, &DefaultRule::Never).unwrap();
        let acts = |t: &PolicyTable| t.rows().iter().map(|r| r.action).collect::<Vec<_>>();
        assert_eq!(acts(&a), acts(&b));
    }

    #[test]
    fn regret_of_the_default_is_zero() {
        let sampler = uniform_sampler(vec![(-2.0, 2.0)]);
        let regret = worst_case_regret(
            |x| u8::from(x[0] > 0.0),
            |x| u8::from(x[0] > 0.0),
            |_| Ok((-1.0, 1.0)),
            sampler,
            10_000,
            3,
        )
        .unwrap();
        assert_eq!(regret, 0.0);
    }

    #[test]
    fn regret_is_lower_bounded_by_confident_mass() {
        // π treats the right half, where the band lies entirely at +0.6;
        // against never-treat the regret is the half-mass times 0.6.
        let sampler = uniform_sampler(vec![(-2.0, 2.0)]);
        let regret = worst_case_regret(
            |x| u8::from(x[0] > 0.0),
            |_| 0,
            |x| Ok(if x[0] > 0.0 { (0.6, 0.6) } else { (-1.0, 1.0) }),
            sampler,
            100_000,
            4,
        )
        .unwrap();
        assert!(regret >= 0.29, "{regret}");
        assert!((regret - 0.3).abs() < 0.01, "{regret}");
    }

    /// Population effect bands of the 1D design tabulated on a grid; lookup
    /// by nearest grid point keeps regret evaluations cheap.
    fn tabulated_band(gamma: f64) -> (Vec<f64>, Vec<(f64, f64)>) {
        let spec = DgpSpec::new(DgpName::Sin1d, 1.0, 1, 0).unwrap();
        let problem = PopulationProblem::from_dgp(&spec, gamma).unwrap();
        let grid: Vec<f64> = (0..101).map(|k| -2.0 + 4.0 * k as f64 / 100.0).collect();
        let bands: Vec<(f64, f64)> = grid
            .iter()
            .map(|&x| population_cate_interval(&problem, &[x]).unwrap())
            .collect();
        (grid, bands)
    }

    fn nearest(grid: &[f64], x: f64) -> usize {
        let step = grid[1] - grid[0];
        (((x - grid[0]) / step).round() as isize).clamp(0, grid.len() as isize - 1) as usize
    }

    #[test]
    fn minimax_rule_beats_a_family_of_threshold_policies() {
        let (grid, bands) = tabulated_band(std::f64::consts::E);
        let band = |x: &[f64]| Ok(bands[nearest(&grid, x[0])]);
        let star = |x: &[f64]| u8::from(bands[nearest(&grid, x[0])].1 <= 0.0);
        let sampler = uniform_sampler(vec![(-2.0, 2.0)]);
        let star_regret =
            worst_case_regret(star, |_| 0, band, &sampler, 5000, 7).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..50 {
            let c = rng.random::<f64>() * 4.0 - 2.0;
            let flip = rng.random::<f64>() < 0.5;
            let other = move |x: &[f64]| u8::from(if_flip(x[0], c, flip));
            let other_regret =
                worst_case_regret(other, |_| 0, band, &sampler, 5000, 7).unwrap();
            assert!(
                star_regret <= other_regret + 1e-12,
                "threshold {c} flip {flip}: {star_regret} vs {other_regret}"
            );
        }
    }

    fn if_flip(x: f64, c: f64, flip: bool) -> bool {
        if flip {
            x > c
        } else {
            x <= c
        }
    }

    #[test]
    fn always_control_risk_matches_the_closed_form_mean() {
        // E[Y(0)] = E[−g(X)] = −1 on X ~ U[−2,2]: the sine integrates to
        // zero by symmetry and E[X] = 0.
        let (risk, ci) = policy_risk_mc(|_| 0, DgpName::Sin1d, 1.0, 50_000, 5).unwrap();
        assert!(ci > 0.0 && ci < 0.05);
        assert!((risk + 1.0).abs() < 0.05, "{risk} ± {ci}");
    }

    #[test]
    fn oracle_policy_risk_matches_the_closed_form() {
        // π = 1{τ(x) < 0} earns V = −E|g(X)| on the 1D design (the
        // confounder and noise are mean-zero given X).
        let policy = |x: &[f64]| u8::from(true_cate(DgpName::Sin1d, x[0]) < 0.0);
        let (risk, ci) = policy_risk_mc(policy, DgpName::Sin1d, 1.0, 50_000, 6).unwrap();
        assert!((risk - (-1.40798)).abs() < 0.05, "{risk} ± {ci}");
    }

    #[test]
    fn complementary_policies_sum_to_both_arm_means() {
        let p = |x: &[f64]| u8::from(x[0] > 0.3);
        let q = |x: &[f64]| 1 - u8::from(x[0] > 0.3);
        let (a, _) = policy_risk_mc(p, DgpName::Sin1d, 1.0, 20_000, 8).unwrap();
        let (b, _) = policy_risk_mc(q, DgpName::Sin1d, 1.0, 20_000, 8).unwrap();
        let data = generate(&DgpSpec::new(DgpName::Sin1d, 1.0, 20_000, 8).unwrap()).unwrap();
        let truth = data.truth().unwrap();
        let both: f64 = truth
            .y0
            .iter()
            .zip(&truth.y1)
            .map(|(y0, y1)| y0 + y1)
            .sum::<f64>()
            / data.n() as f64;
        assert_relative_eq!(a + b, both, epsilon = 1e-10);
    }

    #[test]
    fn small_sample_requests_are_rejected() {
        assert!(policy_risk_mc(|_| 0, DgpName::Sin1d, 1.0, 999, 0).is_err());
        assert!(worst_case_regret(
            |_| 0,
            |_| 0,
            |_| Ok((0.0, 0.0)),
            uniform_sampler(vec![(-1.0, 1.0)]),
            0,
            0
        )
        .is_err());
    }

    #[test]
    fn policy_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("policy.csv");
        let curve = curve_from_taus(
            &[Some((-0.5, -0.125)), Some((0.25, 0.5)), Some((-0.75, 0.375))],
            2.0,
        );
        let table = minimax_policy(&curve, 2.0, &DefaultRule::Never).unwrap();
        write_policy_csv(&table, &path).unwrap();
        let back = load_policy_csv(&path, 2.0).unwrap();
        assert_eq!(table, back);
        // The nearest-grid rule reproduces the tabulated decisions.
        let rule = back.nearest_rule();
        assert_eq!(rule(&[0.1]), table.rows()[0].resolved);
        assert_eq!(rule(&[1.9]), table.rows()[2].resolved);
    }
}
