//! Kernel profiles and the raw kernel estimators.
//!
//! With `K_h(u) = K(u / h) / h^p` the estimators are
//!
//! ```text
//! g(x)        = n^-1 sum_i K_h(x - X_i)
//! m1(x)       = sum_i K_h(x - X_i) Y_i / sum_i K_h(x - X_i)
//! psi_k(y|x)  = n^-1 sum_i K_h(x - X_i) (Y_i - y)^k 1{Y_i > y}
//! Gbar(y|x)   = psi_1(y|x) / (2 psi_1(y|x) + (y - m1(x)) g(x))
//! ```
//!
//! Every estimator only sees observations within distance `h` of `x`
//! (Euclidean norm), so [`Neighborhood`] collects those once and answers all
//! of the queries above.

use crate::error::{invalid, Error, Result};
use crate::sample::Sample;
use crate::sum::NeumaierSum;

/// Radial kernel shapes supported on the closed unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelProfile {
    /// `c_p (1 - |u|^2)^2`, with `c_1 = 15/16`.
    Biquadratic,
    /// `c_p (1 - |u|^2)`, with `c_1 = 3/4`.
    Epanechnikov,
    /// `1 / vol(B_p)`, with `1/2` on `[-1, 1]`.
    Uniform,
}

impl KernelProfile {
    pub fn name(self) -> &'static str {
        match self {
            Self::Biquadratic => "biquadratic",
            Self::Epanechnikov => "epanechnikov",
            Self::Uniform => "uniform",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "biquadratic" | "biweight" | "quartic" => Some(Self::Biquadratic),
            "epanechnikov" => Some(Self::Epanechnikov),
            "uniform" | "box" => Some(Self::Uniform),
            _ => None,
        }
    }
}

/// A kernel density on `R^p` supported in the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    profile: KernelProfile,
    dim: usize,
    norm_const: f64,
    l2_norm_sq: f64,
}

/// Volume of the Euclidean unit ball in `R^p`, `pi^(p/2) / Gamma(p/2 + 1)`.
fn unit_ball_volume(dim: usize) -> f64 {
    // Gamma(p/2 + 1) by the recursion Gamma(z + 1) = z Gamma(z), started at
    // Gamma(1) = 1 for even p and Gamma(1/2) = sqrt(pi) for odd p.
    let mut gamma = if dim.is_multiple_of(2) {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut z = if dim.is_multiple_of(2) { 1.0 } else { 0.5 };
    let target = dim as f64 / 2.0 + 1.0;
    while z < target - 0.25 {
        gamma *= z;
        z += 1.0;
    }
    std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma
}

impl KernelSpec {
    pub fn new(profile: KernelProfile, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel dimension must be at least 1"));
        }
        let p = dim as f64;
        let vol = unit_ball_volume(dim);
        // Radial integrals over the unit ball: int (1-r^2)^a dV = vol * p * B(p/2, a+1) / 2.
        let (norm_const, l2_norm_sq) = match profile {
            KernelProfile::Biquadratic => (
                (p + 2.0) * (p + 4.0) / (8.0 * vol),
                6.0 * (p + 2.0) * (p + 4.0) / (vol * (p + 6.0) * (p + 8.0)),
            ),
            KernelProfile::Epanechnikov => (
                (p + 2.0) / (2.0 * vol),
                2.0 * (p + 2.0) / (vol * (p + 4.0)),
            ),
            KernelProfile::Uniform => (1.0 / vol, 1.0 / vol),
        };
        Ok(Self {
            profile,
            dim,
            norm_const,
            l2_norm_sq,
        })
    }

    /// The bi-quadratic kernel `15/16 (1 - x^2)^2 1{|x| <= 1}` and its
    /// radial extension to `p > 1`.
    pub fn biquadratic(dim: usize) -> Result<Self> {
        Self::new(KernelProfile::Biquadratic, dim)
    }

    pub fn profile(&self) -> KernelProfile {
        self.profile
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_radius(&self) -> f64 {
        1.0
    }

    /// `||K||_2^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_norm_sq
    }

    /// Kernel value as a function of the Euclidean norm `r = |u|`.
    #[inline]
    pub fn eval_radius(&self, r: f64) -> f64 {
        if !(r <= 1.0) {
            return 0.0;
        }
        let s = 1.0 - r * r;
        match self.profile {
            KernelProfile::Biquadratic => self.norm_const * s * s,
            KernelProfile::Epanechnikov => self.norm_const * s,
            KernelProfile::Uniform => self.norm_const,
        }
    }

    /// `K(u)`.
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(invalid(format!(
                "argument has dimension {}, kernel has dimension {}",
                u.len(),
                self.dim
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(invalid("kernel argument must be finite"));
        }
        Ok(self.eval_radius(u.iter().map(|v| v * v).sum::<f64>().sqrt()))
    }

    /// `K_h(x - xi) = K((x - xi) / h) / h^p`, zero outside the ball of radius `h`.
    #[inline]
    pub fn scaled_weight(&self, x: &[f64], xi: &[f64], h: f64) -> f64 {
        let d2: f64 = x.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
        if d2 > h * h {
            return 0.0;
        }
        self.eval_radius(d2.sqrt() / h) / h.powi(self.dim as i32)
    }
}

/// `K(u)` for the given kernel.
pub fn kernel_eval(spec: &KernelSpec, u: &[f64]) -> Result<f64> {
    spec.eval(u)
}

/// `||K||_2^2` for the given kernel.
pub fn kernel_l2norm_sq(spec: &KernelSpec) -> f64 {
    spec.l2_norm_sq()
}

pub(crate) fn check_bandwidth(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("bandwidth must be positive and finite, got {h}")))
    }
}

pub(crate) fn check_point(sample: &Sample, spec: &KernelSpec, x: &[f64]) -> Result<()> {
    if x.len() != sample.dim() || spec.dim() != sample.dim() {
        return Err(invalid(format!(
            "dimension mismatch: point {}, sample {}, kernel {}",
            x.len(),
            sample.dim(),
            spec.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("evaluation point must be finite"));
    }
    Ok(())
}

/// A response with its kernel weight `K_h(x - X_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedResponse {
    pub response: f64,
    pub weight: f64,
}

/// Observations with positive kernel weight at a fixed covariate point.
///
/// Responses are kept sorted ascending. Sums are compensated.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    x: Vec<f64>,
    n: usize,
    points: Vec<WeightedResponse>,
    total_weight: f64,
    mean: Option<f64>,
}

impl Neighborhood {
    pub fn new(sample: &Sample, spec: &KernelSpec, h: f64, x: &[f64]) -> Result<Self> {
        check_bandwidth(h)?;
        check_point(sample, spec, x)?;
        let mut points: Vec<WeightedResponse> = sample
            .iter()
            .filter_map(|(xi, yi)| {
                let w = spec.scaled_weight(x, xi, h);
                (w > 0.0).then_some(WeightedResponse {
                    response: yi,
                    weight: w,
                })
            })
            .collect();
        points.sort_by(|a, b| a.response.total_cmp(&b.response));
        Ok(Self::from_sorted(x.to_vec(), sample.len(), points))
    }

    /// Builds a neighborhood directly from weights, bypassing the kernel.
    ///
    /// `n` is the normalising sample size of `g` and `psi`. Zero weights are
    /// dropped.
    pub fn from_weights(n: usize, weights: &[f64], responses: &[f64]) -> Result<Self> {
        if weights.len() != responses.len() {
            return Err(invalid("weights and responses differ in length"));
        }
        if n == 0 {
            return Err(invalid("normalising sample size must be positive"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(invalid("responses must be finite"));
        }
        let mut points: Vec<WeightedResponse> = weights
            .iter()
            .zip(responses)
            .filter(|(w, _)| **w > 0.0)
            .map(|(&weight, &response)| WeightedResponse { response, weight })
            .collect();
        points.sort_by(|a, b| a.response.total_cmp(&b.response));
        Ok(Self::from_sorted(Vec::new(), n, points))
    }

    fn from_sorted(x: Vec<f64>, n: usize, points: Vec<WeightedResponse>) -> Self {
        let mut total = NeumaierSum::new();
        let mut weighted = NeumaierSum::new();
        for p in &points {
            total.add(p.weight);
            weighted.add(p.weight * p.response);
        }
        let total_weight = total.total();
        let mean = (total_weight > 0.0).then(|| {
            let m = weighted.total() / total_weight;
            // A weighted mean lies in the hull of the responses; clamp away rounding.
            m.clamp(points[0].response, points[points.len() - 1].response)
        });
        Self {
            x,
            n,
            points,
            total_weight,
            mean,
        }
    }

    pub fn point(&self) -> &[f64] {
        &self.x
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    /// Number of observations with positive weight.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[WeightedResponse] {
        &self.points
    }

    /// `sum_i K_h(x - X_i)`, not divided by `n`.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    fn empty_error(&self) -> Error {
        Error::EmptyNeighborhood { x: self.x.clone() }
    }

    /// `g_n(x)`.
    pub fn density(&self) -> f64 {
        self.total_weight / self.n as f64
    }

    /// `m1_n(x)`.
    pub fn mean(&self) -> Result<f64> {
        self.mean.ok_or_else(|| self.empty_error())
    }

    pub fn min_response(&self) -> Result<f64> {
        self.points
            .first()
            .map(|p| p.response)
            .ok_or_else(|| self.empty_error())
    }

    pub fn max_response(&self) -> Result<f64> {
        self.points
            .last()
            .map(|p| p.response)
            .ok_or_else(|| self.empty_error())
    }

    /// `psi_k(y|x)`.
    pub fn psi(&self, k: u32, y: f64) -> f64 {
        let start = self.points.partition_point(|p| p.response <= y);
        let mut acc = NeumaierSum::new();
        for p in &self.points[start..] {
            acc.add(p.weight * (p.response - y).powi(k as i32));
        }
        acc.total() / self.n as f64
    }

    /// `(sum_i w_i (Y_i - y)^+, sum_i w_i (y - Y_i)^+)`, unnormalised.
    pub(crate) fn signed_excess(&self, y: f64) -> (f64, f64) {
        let split = self.points.partition_point(|p| p.response <= y);
        let mut below = NeumaierSum::new();
        for p in &self.points[..split] {
            below.add(p.weight * (y - p.response));
        }
        let mut above = NeumaierSum::new();
        for p in &self.points[split..] {
            above.add(p.weight * (p.response - y));
        }
        (above.total(), below.total())
    }

    /// `Gbar_n(y|x)`.
    ///
    /// Since `(y - m1) g = n^-1 sum_i w_i (y - Y_i)`, the denominator equals
    /// `n^-1 sum_i w_i |Y_i - y|`; it is evaluated in that form, which has no
    /// cancellation and shows that `Gbar` is nonincreasing in `y`.
    pub fn gbar(&self, y: f64) -> Result<f64> {
        if self.points.is_empty() {
            return Err(self.empty_error());
        }
        let (above, below) = self.signed_excess(y);
        let denom = above + below;
        if denom <= 0.0 {
            return Err(Error::DegeneratePoint { y });
        }
        Ok(above / denom)
    }
}

/// `g_n(x)`. Zero when no observation lies within distance `h` of `x`.
pub fn density_estimate(sample: &Sample, spec: &KernelSpec, h: f64, x: &[f64]) -> Result<f64> {
    check_bandwidth(h)?;
    check_point(sample, spec, x)?;
    let mut acc = NeumaierSum::new();
    for (xi, _) in sample.iter() {
        acc.add(spec.scaled_weight(x, xi, h));
    }
    Ok(acc.total() / sample.len() as f64)
}

/// `m1_n(x)`, the kernel-weighted mean response.
pub fn conditional_mean_estimate(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    x: &[f64],
) -> Result<f64> {
    Neighborhood::new(sample, spec, h, x)?.mean()
}

/// `psi_k(y|x)`.
pub fn psi_estimate(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    k: u32,
    y: f64,
    x: &[f64],
) -> Result<f64> {
    if y.is_nan() {
        return Err(invalid("threshold must not be NaN"));
    }
    Ok(Neighborhood::new(sample, spec, h, x)?.psi(k, y))
}

/// `Gbar_n(y|x)`.
pub fn gbar_estimate(sample: &Sample, spec: &KernelSpec, h: f64, y: f64, x: &[f64]) -> Result<f64> {
    if y.is_nan() {
        return Err(invalid("threshold must not be NaN"));
    }
    Neighborhood::new(sample, spec, h, x)?.gbar(y)
}

/// Leave-one-out survival value with its empty-neighborhood flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooSurvival {
    pub value: f64,
    /// Set when no `j != i` has positive weight; `value` is then 0.
    pub empty: bool,
}

/// `sum_{j != i} K_h(x - X_j) 1{Y_j > y} / sum_{j != i} K_h(x - X_j)`.
pub fn loo_survival(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    y: f64,
    x: &[f64],
    exclude_index: usize,
) -> Result<LooSurvival> {
    check_bandwidth(h)?;
    check_point(sample, spec, x)?;
    if exclude_index >= sample.len() {
        return Err(invalid(format!(
            "excluded index {exclude_index} out of range for n = {}",
            sample.len()
        )));
    }
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for (j, (xj, yj)) in sample.iter().enumerate() {
        if j == exclude_index {
            continue;
        }
        let w = spec.scaled_weight(x, xj, h);
        if w > 0.0 {
            den.add(w);
            if yj > y {
                num.add(w);
            }
        }
    }
    let den = den.total();
    if den > 0.0 {
        Ok(LooSurvival {
            value: (num.total() / den).min(1.0),
            empty: false,
        })
    } else {
        Ok(LooSurvival {
            value: 0.0,
            empty: true,
        })
    }
}
