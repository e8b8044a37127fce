//! Kernel weights for local averaging, with boundary renormalization and
//! leave-one-out bandwidth selection.
//!
//! All estimators in this crate are local averages: the influence of
//! observation `X_i` on an estimate at a point `x` is a kernel weight
//! `K((x − X_i)/h)`, taken as a product over coordinates with a per-coordinate
//! bandwidth. Kernels are deliberately *unnormalized* — `exp(−u²/2)` for the
//! Gaussian family, `1{|u| ≤ 1/2}` for the uniform family — because every
//! estimator is a ratio of weighted sums and constant factors cancel.
//!
//! Near the edge of a bounded covariate domain a kernel centred at an
//! observation loses mass outside the domain, which biases plain local
//! averages toward the interior. When the domain is known we divide each
//! observation's weight by the integral of its kernel over the domain
//! (evaluated *at the observation*), so that every observation contributes
//! unit total mass no matter how close to the edge it sits. A constant
//! response is then reproduced exactly even at the boundary.
//!
//! Bandwidths are chosen by leave-one-out cross-validation of the plain
//! (uniformly weighted) local-average regression within one treatment arm:
//! each candidate is scored by the mean squared leave-one-out prediction
//! error, candidates that leave any point with zero kernel mass are
//! disqualified, and exact ties resolve to the larger bandwidth (smoother
//! fits are the safer default).

use crate::data::ObsDataset;
use crate::error::{Error, Result};

/// Kernel shape. Both are unnormalized; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// `K(u) = exp(−u²/2)` — strictly positive everywhere.
    Gaussian,
    /// `K(u) = 1{|u| ≤ 1/2}` — a box of width one bandwidth.
    Uniform,
}

impl KernelFamily {
    /// The one-dimensional kernel value at scaled distance `u`.
    pub fn base(self, u: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * u * u).exp(),
            KernelFamily::Uniform => {
                if u.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Integral of the kernel centred at `xi` with bandwidth `h` over `[lo, hi]`:
/// `∫ K((s − xi)/h) ds`. This is the per-coordinate boundary normalizer.
pub fn boundary_normalizer(family: KernelFamily, xi: f64, h: f64, lo: f64, hi: f64) -> f64 {
    match family {
        KernelFamily::Gaussian => {
            let s = h * (std::f64::consts::PI / 2.0).sqrt();
            let z = h * std::f64::consts::SQRT_2;
            s * (libm::erf((hi - xi) / z) - libm::erf((lo - xi) / z))
        }
        KernelFamily::Uniform => {
            let overlap = (hi.min(xi + 0.5 * h) - lo.max(xi - 0.5 * h)).max(0.0);
            overlap
        }
    }
}

/// A fully specified kernel: family, per-coordinate bandwidths, and an
/// optional rectangular domain for boundary renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    h: Vec<f64>,
    domain: Option<Vec<(f64, f64)>>,
}

impl KernelSpec {
    /// A kernel with one bandwidth per coordinate and no domain correction.
    pub fn new(family: KernelFamily, h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::Validation("kernel needs at least one bandwidth".into()));
        }
        for &hj in &h {
            if !(hj.is_finite() && hj > 0.0) {
                return Err(Error::Validation(format!(
                    "bandwidths must be positive and finite, got {hj}"
                )));
            }
        }
        Ok(Self { family, h, domain: None })
    }

    /// A kernel with one scalar bandwidth broadcast over `d` coordinates.
    pub fn scalar(family: KernelFamily, h: f64, d: usize) -> Result<Self> {
        Self::new(family, vec![h; d])
    }

    /// Attaches a rectangular domain; weights are thereafter renormalized by
    /// each observation's kernel mass inside the domain.
    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Result<Self> {
        if domain.len() != self.h.len() {
            return Err(Error::Validation(format!(
                "domain has {} coordinates but the kernel has {}",
                domain.len(),
                self.h.len()
            )));
        }
        for &(lo, hi) in &domain {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Validation(format!(
                    "domain sides must be finite with lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        self.domain = Some(domain);
        Ok(self)
    }

    /// Kernel family.
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Per-coordinate bandwidths.
    pub fn bandwidths(&self) -> &[f64] {
        &self.h
    }

    /// The renormalization domain, if one was attached.
    pub fn domain(&self) -> Option<&[(f64, f64)]> {
        self.domain.as_deref()
    }

    /// Total kernel mass of an observation at `obs` inside the domain
    /// (product over coordinates); 1 when no domain is attached.
    pub fn normalizer(&self, obs: &[f64]) -> f64 {
        match &self.domain {
            None => 1.0,
            Some(domain) => {
                let mut norm = 1.0;
                for j in 0..self.h.len() {
                    let (lo, hi) = domain[j];
                    norm *= boundary_normalizer(self.family, obs[j], self.h[j], lo, hi);
                }
                norm
            }
        }
    }

    /// Weight of the observation at `obs` for an estimate at `target`:
    /// the product kernel divided by the observation's domain normalizer.
    ///
    /// An observation whose kernel carries no mass inside the domain gets
    /// weight zero rather than an undefined ratio.
    pub fn kernel_weight(&self, obs: &[f64], target: &[f64]) -> f64 {
        debug_assert_eq!(obs.len(), self.h.len());
        debug_assert_eq!(target.len(), self.h.len());
        let mut base = 1.0;
        for j in 0..self.h.len() {
            base *= self.family.base((target[j] - obs[j]) / self.h[j]);
            if base == 0.0 {
                return 0.0;
            }
        }
        let norm = self.normalizer(obs);
        if norm > 0.0 {
            base / norm
        } else {
            0.0
        }
    }
}

/// Default bandwidth candidates: 20 log-spaced values between 1% and 100% of
/// the covariate range (the largest per-coordinate range when `d > 1`).
pub fn default_candidates(data: &ObsDataset) -> Result<Vec<f64>> {
    let mut range: f64 = 0.0;
    for j in 0..data.d() {
        let (lo, hi) = data.column_range(j);
        range = range.max(hi - lo);
    }
    if range <= 0.0 {
        return Err(Error::Domain(
            "cannot propose bandwidths: all covariate values are identical".into(),
        ));
    }
    let lo = 0.01 * range;
    let hi = range;
    let k = 20;
    let ratio = (hi / lo).powf(1.0 / (k - 1) as f64);
    Ok((0..k).map(|i| lo * ratio.powi(i as i32)).collect())
}

/// Selects a scalar bandwidth for one treatment arm by leave-one-out
/// cross-validation of the plain local-average regression.
///
/// Each candidate `h` is broadcast over all coordinates and scored by the
/// mean squared leave-one-out error over the arm. A candidate that leaves any
/// point with zero kernel mass is disqualified; exact ties in the score go to
/// the larger bandwidth. Errors if no candidate yields positive mass at every
/// point of the arm.
pub fn loocv_bandwidth(
    data: &ObsDataset,
    arm: u8,
    candidates: &[f64],
    family: KernelFamily,
    domain: Option<&[(f64, f64)]>,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Validation("bandwidth candidate list is empty".into()));
    }
    for &h in candidates {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Validation(format!(
                "bandwidth candidates must be positive and finite, got {h}"
            )));
        }
    }
    let idx = data.arm_indices(arm);
    let m = idx.len();
    if m < 2 {
        return Err(Error::NoEffectiveSample { arm, at: "bandwidth selection".into() });
    }
    let d = data.d();
    let xs: Vec<f64> = idx.iter().flat_map(|&i| data.x_row(i).iter().copied()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| data.y()[i]).collect();

    let mut ascending: Vec<f64> = candidates.to_vec();
    ascending.sort_by(|a, b| a.total_cmp(b));

    let mut best: Option<(f64, f64)> = None; // (score, h)
    for &h in &ascending {
        let spec = match domain {
            Some(dom) => KernelSpec::scalar(family, h, d)?.with_domain(dom.to_vec())?,
            None => KernelSpec::scalar(family, h, d)?,
        };
        // Inverse normalizer of each observation, shared by every pair.
        let inv_norm: Vec<f64> = (0..m)
            .map(|i| {
                let norm = spec.normalizer(&xs[i * d..(i + 1) * d]);
                if norm > 0.0 {
                    1.0 / norm
                } else {
                    0.0
                }
            })
            .collect();
        // The raw product kernel is symmetric in the pair, so compute it once
        // and split it between the two leave-one-out regressions.
        let mut num = vec![0.0; m];
        let mut den = vec![0.0; m];
        for i in 0..m {
            let xi = &xs[i * d..(i + 1) * d];
            for j in (i + 1)..m {
                let xj = &xs[j * d..(j + 1) * d];
                let mut base = 1.0;
                for c in 0..d {
                    base *= family.base((xi[c] - xj[c]) / h);
                    if base == 0.0 {
                        break;
                    }
                }
                if base == 0.0 {
                    continue;
                }
                let w_ji = base * inv_norm[j]; // observation j predicting point i
                let w_ij = base * inv_norm[i]; // observation i predicting point j
                num[i] += w_ji * ys[j];
                den[i] += w_ji;
                num[j] += w_ij * ys[i];
                den[j] += w_ij;
            }
        }
        if den.iter().any(|&v| v <= 0.0) {
            continue; // disqualified: some point sees no neighbours at this h
        }
        let mut sse = 0.0;
        for i in 0..m {
            let resid = ys[i] - num[i] / den[i];
            sse += resid * resid;
        }
        let score = sse / m as f64;
        match best {
            Some((s, _)) if score > s => {}
            _ => best = Some((score, h)), // `<=` keeps the larger h on ties
        }
    }
    best.map(|(_, h)| h)
        .ok_or_else(|| Error::NoEffectiveSample { arm, at: "bandwidth selection".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Simpson-rule integral of the kernel over [lo, hi] — an independent
    /// check on the closed-form normalizer.
    fn simpson_normalizer(family: KernelFamily, xi: f64, h: f64, lo: f64, hi: f64) -> f64 {
        let g = 4001; // odd
        let step = (hi - lo) / (g - 1) as f64;
        let mut acc = 0.0;
        for i in 0..g {
            let s = lo + step * i as f64;
            let w = if i == 0 || i == g - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * family.base((s - xi) / h);
        }
        acc * step / 3.0
    }

    #[test]
    fn gaussian_normalizer_matches_quadrature_and_pinned_value() {
        let norm = boundary_normalizer(KernelFamily::Gaussian, 0.0, 1.0, -2.0, 2.0);
        assert_relative_eq!(norm, 2.39258, max_relative = 1e-5);
        assert_relative_eq!(
            norm,
            simpson_normalizer(KernelFamily::Gaussian, 0.0, 1.0, -2.0, 2.0),
            max_relative = 1e-10
        );
    }

    #[test]
    fn uniform_normalizer_at_the_edge_is_half_a_window() {
        // Centre at the left edge: only the right half of the box overlaps.
        let norm = boundary_normalizer(KernelFamily::Uniform, -2.0, 1.0, -2.0, 2.0);
        assert_eq!(norm, 0.5);
        // Interior centre: the whole box fits.
        assert_eq!(boundary_normalizer(KernelFamily::Uniform, 0.0, 1.0, -2.0, 2.0), 1.0);
    }

    #[test]
    fn unnormalized_weights_without_domain() {
        let spec = KernelSpec::scalar(KernelFamily::Gaussian, 2.0, 1).unwrap();
        let w = spec.kernel_weight(&[1.0], &[0.0]);
        assert_relative_eq!(w, (-0.5f64 * 0.25).exp(), max_relative = 1e-15);
        let unif = KernelSpec::scalar(KernelFamily::Uniform, 2.0, 1).unwrap();
        assert_eq!(unif.kernel_weight(&[1.0], &[0.0]), 1.0);
        assert_eq!(unif.kernel_weight(&[1.01], &[0.0]), 0.0);
    }

    #[test]
    fn product_kernel_over_coordinates() {
        let spec = KernelSpec::new(KernelFamily::Gaussian, vec![1.0, 0.5]).unwrap();
        let w = spec.kernel_weight(&[1.0, 0.25], &[0.0, 0.0]);
        let expected = (-0.5f64).exp() * (-0.5f64 * 0.25).exp();
        assert_relative_eq!(w, expected, max_relative = 1e-15);
    }

    #[test]
    fn scalar_broadcast_matches_explicit_vector() {
        let a = KernelSpec::scalar(KernelFamily::Gaussian, 0.7, 3).unwrap();
        let b = KernelSpec::new(KernelFamily::Gaussian, vec![0.7, 0.7, 0.7]).unwrap();
        let obs = [0.1, -0.4, 0.9];
        let target = [0.0, 0.0, 0.0];
        assert_eq!(a.kernel_weight(&obs, &target), b.kernel_weight(&obs, &target));
    }

    #[test]
    fn renormalized_constant_average_is_exact_at_the_boundary() {
        // With domain renormalization, a local average of a constant response
        // equals that constant exactly, even at the domain edge.
        let spec = KernelSpec::scalar(KernelFamily::Gaussian, 1.0, 1)
            .unwrap()
            .with_domain(vec![(-2.0, 2.0)])
            .unwrap();
        let obs: Vec<f64> = (0..17).map(|i| -2.0 + 0.25 * i as f64).collect();
        let c = 2.0; // a power of two scales exactly through the sums
        for target in [-2.0, 2.0, -1.9] {
            let mut num = 0.0;
            let mut den = 0.0;
            for &o in &obs {
                let w = spec.kernel_weight(&[o], &[target]);
                num += w * c;
                den += w;
            }
            assert_eq!(num / den, c);
        }
    }

    #[test]
    fn loocv_breaks_exact_ties_toward_larger_bandwidth() {
        // Every candidate box is wide enough to cover the whole arm, so all
        // weights are exactly 1, all scores are bitwise equal, and the tie
        // must resolve to the largest bandwidth.
        let data = ObsDataset::from_parts(
            vec![0.0, 0.5, 1.0, 0.4],
            1,
            vec![1, 1, 1, 0],
            vec![2.0, 3.0, 2.5, 0.0],
            None,
            None,
        )
        .unwrap();
        let h = loocv_bandwidth(&data, 1, &[10.0, 20.0, 40.0], KernelFamily::Uniform, None).unwrap();
        assert_eq!(h, 40.0);
    }

    #[test]
    fn loocv_disqualifies_zero_mass_candidates() {
        // Two treated points 10 apart: a uniform kernel narrower than 20
        // leaves each with no neighbour, so only h = 25 survives.
        let data = ObsDataset::from_parts(
            vec![-5.0, 5.0, 0.0, 1.0],
            1,
            vec![1, 1, 0, 0],
            vec![1.0, 2.0, 0.0, 0.0],
            None,
            None,
        )
        .unwrap();
        let h =
            loocv_bandwidth(&data, 1, &[0.5, 2.0, 25.0], KernelFamily::Uniform, None).unwrap();
        assert_eq!(h, 25.0);
        let err = loocv_bandwidth(&data, 1, &[0.5, 2.0], KernelFamily::Uniform, None).unwrap_err();
        assert!(matches!(err, Error::NoEffectiveSample { arm: 1, .. }), "{err}");
    }

    #[test]
    fn loocv_prefers_small_bandwidth_on_steep_signal() {
        // A steep noiseless line is fit best by tight neighbourhoods.
        let n = 40;
        let mut x = Vec::new();
        let mut t = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let xi = -2.0 + 4.0 * (i as f64 + 0.5) / n as f64;
            x.push(xi);
            t.push(u8::from(i % 2 == 0));
            y.push(5.0 * xi);
        }
        let data = ObsDataset::from_parts(x, 1, t, y, None, None).unwrap();
        let h = loocv_bandwidth(&data, 1, &[0.3, 1.0, 4.0], KernelFamily::Gaussian, None).unwrap();
        assert_eq!(h, 0.3);
    }

    #[test]
    fn default_candidates_span_the_covariate_range() {
        let data = ObsDataset::from_parts(
            vec![-2.0, 2.0, 0.0, 1.0],
            1,
            vec![0, 1, 0, 1],
            vec![0.0, 1.0, 2.0, 3.0],
            None,
            None,
        )
        .unwrap();
        let c = default_candidates(&data).unwrap();
        assert_eq!(c.len(), 20);
        assert_relative_eq!(c[0], 0.04, max_relative = 1e-12); // 1% of range 4
        assert_relative_eq!(c[19], 4.0, max_relative = 1e-12);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn normalizer_agrees_with_quadrature(
            xi in -3.0f64..3.0,
            h in 0.1f64..3.0,
            lo in -4.0f64..-1.0,
            width in 1.0f64..6.0,
        ) {
            let hi = lo + width;
            for family in [KernelFamily::Gaussian, KernelFamily::Uniform] {
                let closed = boundary_normalizer(family, xi, h, lo, hi);
                let quad = simpson_normalizer(family, xi, h, lo, hi);
                // The box kernel has jump discontinuities, so quadrature is
                // only accurate to about one grid cell there.
                let tol = match family {
                    KernelFamily::Gaussian => 1e-8,
                    KernelFamily::Uniform => 2.0 * width / 4000.0,
                };
                prop_assert!((closed - quad).abs() <= tol,
                    "{family:?}: closed {closed} vs quadrature {quad}");
            }
        }

        #[test]
        fn weights_are_nonnegative_and_bounded_by_inverse_normalizer(
            obs in -2.0f64..2.0,
            target in -2.0f64..2.0,
            h in 0.05f64..2.0,
        ) {
            let spec = KernelSpec::scalar(KernelFamily::Gaussian, h, 1)
                .unwrap()
                .with_domain(vec![(-2.0, 2.0)])
                .unwrap();
            let w = spec.kernel_weight(&[obs], &[target]);
            let norm = spec.normalizer(&[obs]);
            prop_assert!(w >= 0.0);
            prop_assert!(w <= 1.0 / norm + 1e-12);
        }
    }
}
