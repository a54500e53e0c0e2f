//! Conditional expectiles and expectile-based tail-index estimators.
//!
//! The kernel expectile `e_n(alpha|x)` is the generalized inverse
//! `inf { y : Gbar_n(y|x) <= 1 - alpha }`. Cross-multiplying,
//! `Gbar_n(y|x) <= 1 - alpha` holds exactly when
//!
//! ```text
//! D(y) = alpha * sum_i w_i (Y_i - y)^+ - (1 - alpha) * sum_i w_i (y - Y_i)^+ <= 0,
//! ```
//!
//! which is the first-order condition of the kernel-weighted asymmetric
//! squared loss. `D` is continuous, piecewise linear with knots at the
//! responses, and strictly decreasing, so the infimum is its unique root.

use crate::error::{invalid, Error, Result};
use crate::kernel::{KernelSpec, Neighborhood};
use crate::sample::Sample;
use crate::sum::NeumaierSum;

/// Bisection cap.
pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Root tolerance `1e-10 * (1 + |theta|)`.
fn root_tolerance(theta: f64) -> f64 {
    1e-10 * (1.0 + theta.abs())
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("level must lie in (0, 1), got {alpha}")))
    }
}

/// Weight sequence `1 = tau_1 > tau_2 > ... > tau_J > 0`, `J >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Taus(Vec<f64>);

impl Taus {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.len() < 2 {
            return Err(invalid(format!("need J >= 2 weights, got {}", taus.len())));
        }
        if taus[0] != 1.0 {
            return Err(invalid(format!("tau_1 must equal 1, got {}", taus[0])));
        }
        for w in taus.windows(2) {
            if !(w[1] < w[0]) {
                return Err(invalid("weights must be strictly decreasing"));
            }
        }
        let last = taus[taus.len() - 1];
        if !(last > 0.0) {
            return Err(invalid("weights must be positive"));
        }
        Ok(Self(taus))
    }

    /// `tau_j = 1 / j`, `j = 1..=J`.
    pub fn harmonic(j: usize) -> Result<Self> {
        Self::new((1..=j).map(|i| 1.0 / i as f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `J`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `sum_j log(1 / tau_j)`, positive by construction.
    pub fn log_sum(&self) -> f64 {
        self.0.iter().map(|t| -t.ln()).sum()
    }

    /// Levels `1 - tau_j (1 - alpha)`; the first is `alpha` itself.
    pub fn levels(&self, alpha: f64) -> Vec<f64> {
        std::iter::once(alpha)
            .chain(self.0[1..].iter().map(|t| 1.0 - t * (1.0 - alpha)))
            .collect()
    }
}

impl Default for Taus {
    fn default() -> Self {
        Self::harmonic(2).expect("J = 2 is valid")
    }
}

/// Level, weights, bandwidth and moment order for one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct TailConfig {
    pub alpha: f64,
    pub taus: Taus,
    pub h: f64,
    pub k: f64,
}

impl TailConfig {
    pub fn new(alpha: f64, taus: Taus, h: f64, k: f64) -> Result<Self> {
        check_level(alpha)?;
        crate::kernel::check_bandwidth(h)?;
        if !(k.is_finite() && k >= 0.0) {
            return Err(invalid(format!("moment order must be nonnegative, got {k}")));
        }
        Ok(Self { alpha, taus, h, k })
    }
}

/// Result of the generalized inversion of `Gbar_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectileEstimate {
    pub value: f64,
    pub alpha: f64,
    pub x: Vec<f64>,
    /// Final bracket `(lo, hi)` of the solver.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

impl Neighborhood {
    /// `D(y)` from the module documentation, unnormalised.
    fn foc(&self, alpha: f64, y: f64) -> f64 {
        let (above, below) = self.signed_excess(y);
        alpha * above - (1.0 - alpha) * below
    }

    /// `e_n(alpha|x) = inf { y : Gbar_n(y|x) <= 1 - alpha }`.
    pub fn expectile(&self, alpha: f64) -> Result<ExpectileEstimate> {
        check_level(alpha)?;
        let ymin = self.min_response()?;
        let ymax = self.max_response()?;
        let mean = self.mean()?;
        let done = |value: f64, bracket: (f64, f64), iterations: usize| ExpectileEstimate {
            value,
            alpha,
            x: self.point().to_vec(),
            bracket,
            iterations,
        };
        if ymin == ymax {
            return Ok(done(ymin, (ymin, ymax), 0));
        }
        if alpha == 0.5 {
            return Ok(done(mean, (mean, mean), 0));
        }
        // Gbar(m1) = 1/2, so the root sits above the mean for alpha > 1/2.
        let (mut lo, mut hi) = if alpha > 0.5 { (mean, ymax) } else { (ymin, mean) };
        if self.foc(alpha, lo) <= 0.0 {
            return Ok(done(lo, (lo, lo), 0));
        }
        let mut iterations = 0;
        while hi - lo > root_tolerance(lo.abs().max(hi.abs())) {
            if iterations == MAX_BISECTION_ITERATIONS {
                return Err(Error::NoConvergence { iterations });
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.foc(alpha, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        let value = self.polish(alpha, lo, hi);
        Ok(done(value, (lo, hi), iterations))
    }

    /// Exact root of `D` inside a bracket with `D(lo) > 0 >= D(hi)`.
    ///
    /// Splits at any response strictly inside the bracket, then solves the
    /// remaining affine piece. The returned point satisfies `D <= 0`.
    fn polish(&self, alpha: f64, mut lo: f64, mut hi: f64) -> f64 {
        loop {
            let start = self.points().partition_point(|p| p.response <= lo);
            match self.points().get(start) {
                Some(p) if p.response < hi => {
                    if self.foc(alpha, p.response) > 0.0 {
                        lo = p.response;
                    } else {
                        hi = p.response;
                    }
                }
                _ => break,
            }
        }
        let (d_lo, d_hi) = (self.foc(alpha, lo), self.foc(alpha, hi));
        let mut root = if d_lo > d_hi {
            (lo + d_lo * (hi - lo) / (d_lo - d_hi)).clamp(lo, hi)
        } else {
            hi
        };
        let mut steps = 0;
        while root < hi && self.foc(alpha, root) > 0.0 && steps < 64 {
            root = root.next_up();
            steps += 1;
        }
        if self.foc(alpha, root) > 0.0 {
            hi
        } else {
            root
        }
    }

    /// Expectiles at the levels `1 - tau_j (1 - alpha)` and the two tail
    /// index estimators built from them.
    pub fn tail_index(&self, alpha: f64, taus: &Taus) -> Result<TailIndexFit> {
        check_level(alpha)?;
        let levels = taus.levels(alpha);
        let expectiles = levels
            .iter()
            .map(|&level| self.expectile(level).map(|e| e.value))
            .collect::<Result<Vec<_>>>()?;
        for (&level, &value) in levels.iter().zip(&expectiles) {
            if !(value > 0.0) {
                return Err(Error::NonPositiveExpectile {
                    alpha: level,
                    value,
                });
            }
        }
        let gamma_hat = hill_from_expectiles(&expectiles, taus)?;
        let mean = self.mean()?;
        let gamma_tilde = bias_reduce(gamma_hat, mean, expectiles[0], taus)?;
        Ok(TailIndexFit {
            alpha,
            levels,
            expectiles,
            mean,
            gamma_hat,
            gamma_tilde,
        })
    }
}

/// Everything computed on the way to the bias-reduced tail index.
#[derive(Debug, Clone, PartialEq)]
pub struct TailIndexFit {
    pub alpha: f64,
    /// `1 - tau_j (1 - alpha)`, `j = 1..=J`.
    pub levels: Vec<f64>,
    /// `e_n(level_j | x)`.
    pub expectiles: Vec<f64>,
    /// `m1_n(x)`.
    pub mean: f64,
    pub gamma_hat: f64,
    pub gamma_tilde: f64,
}

impl TailIndexFit {
    /// `e_n(alpha|x)`.
    pub fn expectile(&self) -> f64 {
        self.expectiles[0]
    }
}

/// Hill-type log-spacing estimator from expectiles at the levels
/// `1 - tau_j (1 - alpha)`, `j = 1..=J`, in that order.
pub fn hill_from_expectiles(expectiles: &[f64], taus: &Taus) -> Result<f64> {
    if expectiles.len() != taus.len() {
        return Err(invalid(format!(
            "{} expectiles for J = {}",
            expectiles.len(),
            taus.len()
        )));
    }
    if let Some(&bad) = expectiles.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::NonPositiveExpectile {
            alpha: f64::NAN,
            value: bad,
        });
    }
    let base = expectiles[0].ln();
    // The j = 1 spacing is identically zero.
    let mut acc = NeumaierSum::new();
    for e in &expectiles[1..] {
        acc.add(e.ln() - base);
    }
    Ok(acc.total() / taus.log_sum())
}

/// `gamma_hat * (1 - m1 * sum_j (tau_j^gamma_hat - 1) / (e * sum_j log(1/tau_j)))`.
pub fn bias_reduce(gamma_hat: f64, mean: f64, expectile: f64, taus: &Taus) -> Result<f64> {
    if expectile == 0.0 || !expectile.is_finite() {
        return Err(Error::Domain(format!(
            "bias correction divides by the expectile, got {expectile}"
        )));
    }
    if mean == 0.0 {
        return Ok(gamma_hat);
    }
    let shift: f64 = taus.as_slice().iter().map(|t| t.powf(gamma_hat) - 1.0).sum();
    Ok(gamma_hat * (1.0 - mean * shift / (expectile * taus.log_sum())))
}

/// `e_n(alpha|x)`.
pub fn expectile_hat(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    alpha: f64,
    x: &[f64],
) -> Result<ExpectileEstimate> {
    check_level(alpha)?;
    Neighborhood::new(sample, spec, h, x)?.expectile(alpha)
}

/// Expectile-based Hill-type estimator `gamma_hat_n(x)`.
pub fn gamma_hat(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    alpha: f64,
    taus: &Taus,
    x: &[f64],
) -> Result<f64> {
    Ok(Neighborhood::new(sample, spec, h, x)?
        .tail_index(alpha, taus)?
        .gamma_hat)
}

/// Bias-reduced estimator `gamma_tilde_n(x)`.
pub fn gamma_tilde(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    alpha: f64,
    taus: &Taus,
    x: &[f64],
) -> Result<f64> {
    Ok(Neighborhood::new(sample, spec, h, x)?
        .tail_index(alpha, taus)?
        .gamma_tilde)
}

/// Minimiser of `sum_i w_i eta_alpha(Y_i - theta)` with
/// `eta_alpha(u) = |alpha - 1{u <= 0}| u^2`.
///
/// Bisects the first-order condition
/// `alpha sum w_i (Y_i - theta)^+ = (1 - alpha) sum w_i (theta - Y_i)^+`
/// on `[min Y, max Y]` until the bracket can no longer be halved.
pub fn empirical_weighted_expectile(weights: &[f64], responses: &[f64], alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    if weights.len() != responses.len() || weights.is_empty() {
        return Err(invalid("weights and responses must be non-empty and equally long"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(invalid("weights must be finite and nonnegative"));
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(invalid("weights are all zero"));
    }
    let active: Vec<(f64, f64)> = weights
        .iter()
        .zip(responses)
        .filter(|(w, _)| **w > 0.0)
        .map(|(&w, &y)| (w, y))
        .collect();
    let foc = |theta: f64| {
        let mut up = NeumaierSum::new();
        let mut down = NeumaierSum::new();
        for &(w, y) in &active {
            if y > theta {
                up.add(w * (y - theta));
            } else {
                down.add(w * (theta - y));
            }
        }
        alpha * up.total() - (1.0 - alpha) * down.total()
    };
    let mut lo = active.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut hi = active.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(lo);
    }
    for _ in 0..2100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if foc(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if foc(lo).abs() < foc(hi).abs() { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bq() -> KernelSpec {
        KernelSpec::biquadratic(1).unwrap()
    }

    fn common_x(ys: Vec<f64>) -> Sample {
        Sample::univariate(vec![0.0; ys.len()], ys).unwrap()
    }

    #[test]
    fn taus_validation() {
        assert!(Taus::new(vec![1.0]).is_err());
        assert!(Taus::new(vec![0.9, 0.5]).is_err());
        assert!(Taus::new(vec![1.0, 1.0]).is_err());
        assert!(Taus::new(vec![1.0, 0.5, 0.6]).is_err());
        assert!(Taus::new(vec![1.0, 0.0]).is_err());
        let t = Taus::harmonic(3).unwrap();
        assert_eq!(t.as_slice(), &[1.0, 0.5, 1.0 / 3.0]);
        assert!((t.log_sum() - 6f64.ln()).abs() < 1e-15);
        let levels = t.levels(0.95);
        assert_eq!(levels[0], 0.95);
        assert!((levels[1] - 0.975).abs() < 1e-15);
        assert!(TailConfig::new(1.0, t.clone(), 0.1, 1.0).is_err());
        assert!(TailConfig::new(0.9, t.clone(), 0.0, 1.0).is_err());
        assert!(TailConfig::new(0.9, t, 0.1, -1.0).is_err());
    }

    #[test]
    fn weighted_expectile_hand_cases() {
        let m = empirical_weighted_expectile(&[1.0, 3.0], &[0.0, 4.0], 0.5).unwrap();
        assert!((m - 3.0).abs() < 1e-14);
        let e = empirical_weighted_expectile(&[1.0, 1.0], &[0.0, 1.0], 0.8).unwrap();
        assert!((e - 0.8).abs() < 1e-14);
        for a in [0.01, 0.3, 0.99] {
            assert_eq!(empirical_weighted_expectile(&[2.0], &[5.5], a).unwrap(), 5.5);
        }
        assert!(empirical_weighted_expectile(&[0.0, 0.0], &[1.0, 2.0], 0.5).is_err());
        assert!(empirical_weighted_expectile(&[1.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn median_level_gives_mean() {
        let s = Sample::univariate(
            vec![0.0, 0.1, -0.2, 0.3, 0.05],
            vec![1.0, 5.0, -2.0, 8.0, 0.5],
        )
        .unwrap();
        let nb = Neighborhood::new(&s, &bq(), 0.5, &[0.0]).unwrap();
        let e = nb.expectile(0.5).unwrap();
        assert_eq!(e.value, nb.mean().unwrap());
    }

    #[test]
    fn two_point_expectile() {
        let s = common_x(vec![0.0, 1.0]);
        let e = expectile_hat(&s, &bq(), 1.0, 0.8, &[0.0]).unwrap();
        assert!((e.value - 0.8).abs() < 1e-14, "{}", e.value);
        assert!(e.iterations <= MAX_BISECTION_ITERATIONS);
        assert!(e.bracket.0 <= e.value && e.value <= e.bracket.1);
    }

    #[test]
    fn uniform_population_expectile() {
        let n = 20_001;
        let s = common_x((0..n).map(|i| i as f64 / (n - 1) as f64).collect());
        let e = expectile_hat(&s, &bq(), 1.0, 0.8, &[0.0]).unwrap();
        assert!((e.value - 2.0 / 3.0).abs() < 1e-4, "{}", e.value);
    }

    #[test]
    fn low_levels_and_degenerate_neighborhoods() {
        let s = common_x(vec![0.0, 1.0, 3.0]);
        let e = expectile_hat(&s, &bq(), 1.0, 0.2, &[0.0]).unwrap();
        let oracle = empirical_weighted_expectile(&[1.0; 3], &[0.0, 1.0, 3.0], 0.2).unwrap();
        assert!((e.value - oracle).abs() < 1e-12);
        assert!(e.value < 4.0 / 3.0);

        let s = common_x(vec![2.0, 2.0]);
        assert_eq!(expectile_hat(&s, &bq(), 1.0, 0.9, &[0.0]).unwrap().value, 2.0);
        assert!(matches!(
            expectile_hat(&s, &bq(), 1.0, 0.9, &[3.0]),
            Err(Error::EmptyNeighborhood { .. })
        ));
        assert!(expectile_hat(&s, &bq(), 1.0, 0.0, &[0.0]).is_err());
        assert!(expectile_hat(&s, &bq(), 1.0, 1.5, &[0.0]).is_err());
    }

    #[test]
    fn hill_constructed_inputs() {
        let taus = Taus::harmonic(2).unwrap();
        let g = hill_from_expectiles(&[2.0, 2.0 * 2f64.powf(0.3)], &taus).unwrap();
        assert!((g - 0.3).abs() < 1e-14);
        assert_eq!(hill_from_expectiles(&[3.0, 3.0], &taus).unwrap(), 0.0);
        assert!(matches!(
            hill_from_expectiles(&[-1.0, 2.0], &taus),
            Err(Error::NonPositiveExpectile { .. })
        ));
        assert!(hill_from_expectiles(&[1.0, 2.0, 3.0], &taus).is_err());
    }

    #[test]
    fn bias_reduction_constructed_inputs() {
        let taus = Taus::harmonic(2).unwrap();
        assert_eq!(bias_reduce(0.25, 0.0, 10.0, &taus).unwrap(), 0.25);
        let v = bias_reduce(0.25, 1.0, 10.0, &taus).unwrap();
        // Independent evaluation: sum over j = 1, 2 of (tau^g - 1) and log(1/tau).
        let expected = 0.25 * (1.0 - (0.0 + (0.5f64.powf(0.25) - 1.0)) / (10.0 * (0.0 + 2f64.ln())));
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.25 * 1.022_953).abs() < 1e-6);
        assert!(bias_reduce(0.25, 1.0, 0.0, &taus).is_err());
    }

    #[test]
    fn gamma_with_nonpositive_expectile_fails() {
        let s = common_x(vec![-5.0, -4.0, -3.0, -1.0]);
        let taus = Taus::harmonic(2).unwrap();
        assert!(matches!(
            gamma_hat(&s, &bq(), 1.0, 0.9, &taus, &[0.0]),
            Err(Error::NonPositiveExpectile { .. })
        ));
    }

    #[test]
    fn centered_neighborhood_has_no_correction() {
        // Symmetric responses with equal weights: m1 = 0 exactly.
        let s = common_x(vec![-4.0, -2.0, -1.0, 1.0, 2.0, 4.0]);
        let taus = Taus::harmonic(2).unwrap();
        let nb = Neighborhood::new(&s, &bq(), 1.0, &[0.0]).unwrap();
        let fit = nb.tail_index(0.8, &taus).unwrap();
        assert_eq!(fit.mean, 0.0);
        assert_eq!(fit.gamma_tilde, fit.gamma_hat);
    }

    fn sample_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(-50.0f64..50.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn generalized_inverse_property((xs, ys) in sample_strategy(), alpha in 0.05f64..0.995) {
            let s = Sample::univariate(xs, ys).unwrap();
            let nb = Neighborhood::new(&s, &bq(), 0.8, &[0.0]).unwrap();
            prop_assume!(!nb.is_empty());
            prop_assume!(nb.min_response().unwrap() < nb.max_response().unwrap());
            let e = nb.expectile(alpha).unwrap();
            let eps = 1e-6 * (1.0 + e.value.abs());
            prop_assert!(nb.gbar(e.value).unwrap() <= 1.0 - alpha + 1e-12);
            prop_assert!(nb.gbar(e.value - eps).unwrap() > 1.0 - alpha);
        }

        #[test]
        fn monotone_in_level((xs, ys) in sample_strategy(), a in 0.05f64..0.99, b in 0.05f64..0.99) {
            let s = Sample::univariate(xs, ys).unwrap();
            let nb = Neighborhood::new(&s, &bq(), 0.8, &[0.1]).unwrap();
            prop_assume!(!nb.is_empty());
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let e_lo = nb.expectile(lo).unwrap().value;
            let e_hi = nb.expectile(hi).unwrap().value;
            prop_assert!(e_lo <= e_hi + root_tolerance(e_hi));
        }

        #[test]
        fn location_scale_equivariance(
            (xs, ys) in sample_strategy(),
            alpha in 0.1f64..0.99,
            a in 0.1f64..20.0,
            b in -100.0f64..100.0,
        ) {
            let s = Sample::univariate(xs, ys).unwrap();
            let t = s.map_responses(|y| a * y + b).unwrap();
            let k = bq();
            let Ok(e) = expectile_hat(&s, &k, 0.8, alpha, &[0.0]) else { return Ok(()) };
            let et = expectile_hat(&t, &k, 0.8, alpha, &[0.0]).unwrap();
            let target = a * e.value + b;
            prop_assert!((et.value - target).abs() <= 1e-10 * (1.0 + target.abs()) + 1e-12 * a * 50.0,
                "{} vs {}", et.value, target);
        }

        #[test]
        fn gamma_hat_scale_invariant(
            ys in proptest::collection::vec(0.1f64..100.0, 5..40),
            a in 0.01f64..100.0,
            alpha in 0.6f64..0.95,
        ) {
            let n = ys.len();
            let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 - 0.5).collect();
            let s = Sample::univariate(xs, ys).unwrap();
            let t = s.map_responses(|y| a * y).unwrap();
            let taus = Taus::harmonic(3).unwrap();
            let g = gamma_hat(&s, &bq(), 1.0, alpha, &taus, &[0.0]).unwrap();
            let gt = gamma_hat(&t, &bq(), 1.0, alpha, &taus, &[0.0]).unwrap();
            prop_assert!((g - gt).abs() < 1e-10, "{g} vs {gt}");
        }
    }
}
