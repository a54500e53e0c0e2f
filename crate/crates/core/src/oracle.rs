//! Burr data-generating process with a covariate-dependent tail index and
//! quadrature-based ground truth for its conditional expectiles and tail
//! moments.
//!
//! Given `X = x`, `Y` has survival function `(1 + y^(1/gamma(x)))^-1` on
//! `y > 0`, with `gamma(x) = 1/4 + sin(2 pi x) / 20` by default and `X`
//! uniform on `[0, 1]`.
//!
//! Tail integrals are computed after substituting `w = Fbar(y|x)`, which maps
//! the polynomial tail to a bounded interval, followed by `z = w^(1 - c)`
//! which removes the remaining `w^-c` endpoint singularity. For
//! `E[Y^k 1{Y > t} | x]` this gives
//!
//! ```text
//! (1 / (1 - k gamma)) * int_0^{S^(1 - k gamma)} (1 - z^(1 / (1 - k gamma)))^(k gamma) dz,   S = Fbar(t|x),
//! ```
//!
//! an integral of a bounded function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_with, QuadOptions};
use crate::sample::Sample;

const QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-300,
    rel_tol: 1e-13,
    max_subdivisions: 4000,
};

/// Second-order parameter of the Burr family: `Fbar(y) = y^(-1/gamma) (1 + y^(-1/gamma))^-1`,
/// so the relative correction decays like `Fbar` itself.
pub const BURR_RHO: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurrOracle {
    /// `gamma(x) = base + amplitude * sin(2 pi x)`.
    pub base: f64,
    pub amplitude: f64,
}

impl Default for BurrOracle {
    fn default() -> Self {
        Self {
            base: 0.25,
            amplitude: 0.05,
        }
    }
}

/// Generator for replication `replication` of a run seeded with `seed`.
///
/// Each replication reads its own ChaCha stream of the same key, so draws do
/// not depend on execution order.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

impl BurrOracle {
    pub fn gamma(&self, x: f64) -> f64 {
        self.base + self.amplitude * (2.0 * std::f64::consts::PI * x).sin()
    }

    pub fn rho(&self) -> f64 {
        BURR_RHO
    }

    /// `Fbar(y|x)`.
    pub fn survival(&self, y: f64, x: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        1.0 / (1.0 + y.powf(1.0 / self.gamma(x)))
    }

    pub fn cdf(&self, y: f64, x: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let t = y.powf(1.0 / self.gamma(x));
        t / (1.0 + t)
    }

    /// `q(alpha|x) = (alpha / (1 - alpha))^gamma(x)`.
    pub fn true_quantile(&self, alpha: f64, x: f64) -> Result<f64> {
        check_level(alpha)?;
        Ok((alpha / (1.0 - alpha)).powf(self.gamma(x)))
    }

    /// Draws `n` pairs: `X ~ U[0,1]`, `Y = (1/(1-U) - 1)^gamma(X)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        self.sample_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Sample> {
        if n == 0 {
            return Err(invalid("sample size must be at least 1"));
        }
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.random();
            let u: f64 = rng.random();
            xs.push(x);
            ys.push((1.0 / (1.0 - u) - 1.0).powf(self.gamma(x)));
        }
        Sample::univariate(xs, ys)
    }

    /// `E[Y | X = x] = Gamma(1 + gamma) Gamma(1 - gamma) = pi gamma / sin(pi gamma)`.
    pub fn mean_closed_form(&self, x: f64) -> f64 {
        let g = self.gamma(x);
        std::f64::consts::PI * g / (std::f64::consts::PI * g).sin()
    }

    /// `E[Y | X = x]` by quadrature.
    pub fn conditional_mean(&self, x: f64) -> Result<f64> {
        self.tail_moment(1.0, 0.0, x)
    }

    /// `E[Y^k 1{Y > t} | X = x]`, `k >= 0`, `k gamma(x) < 1`.
    pub fn tail_moment(&self, k: f64, t: f64, x: f64) -> Result<f64> {
        let g = self.gamma(x);
        if !(k >= 0.0 && k * g < 1.0) {
            return Err(Error::MomentNonexistence { k, gamma: g });
        }
        let s = self.survival(t, x);
        if k == 0.0 {
            return Ok(s);
        }
        let a = 1.0 - k * g;
        let upper = s.powf(a);
        let v = integrate_with(
            |z: f64| (1.0 - z.powf(1.0 / a)).max(0.0).powf(k * g),
            0.0,
            upper,
            QUAD,
        )?;
        Ok(v / a)
    }

    /// `E[(Y - t)^+ | X = x]`.
    pub fn excess(&self, t: f64, x: f64) -> Result<f64> {
        let g = self.gamma(x);
        if t <= 0.0 {
            return Ok(self.conditional_mean(x)? - t);
        }
        if t < 1.0 {
            // m - t + int_0^t F(y) dy, smooth on [0, t].
            let lower = integrate_with(|y| self.cdf(y, x), 0.0, t, QUAD)?;
            return Ok(self.conditional_mean(x)? - t + lower);
        }
        // int_t^inf Fbar(y) dy = gamma/(1-gamma) int_0^{S^(1-gamma)} (1 - w)^(gamma-1) dz,
        // w = z^(1/(1-gamma)).
        let a = 1.0 - g;
        let upper = self.survival(t, x).powf(a);
        let v = integrate_with(
            |z: f64| (1.0 - z.powf(1.0 / a)).powf(g - 1.0),
            0.0,
            upper,
            QUAD,
        )?;
        Ok(g / a * v)
    }

    /// Population `Gbar(y|x) = psi1 / (2 psi1 + (y - m1) g)`; `g` cancels.
    pub fn gbar(&self, y: f64, x: f64) -> Result<f64> {
        let psi = self.excess(y, x)?;
        let m = self.conditional_mean(x)?;
        Ok(psi / (2.0 * psi + (y - m)))
    }

    /// `e(alpha|x)`: root of `(2 alpha - 1) E[(Y - e)^+] = (1 - alpha) (e - m)`,
    /// the first-order condition of the asymmetric squared loss.
    pub fn true_expectile(&self, alpha: f64, x: f64) -> Result<f64> {
        check_level(alpha)?;
        let m = self.conditional_mean(x)?;
        if alpha == 0.5 {
            return Ok(m);
        }
        let f = |e: f64| -> Result<f64> {
            Ok((2.0 * alpha - 1.0) * self.excess(e, x)? - (1.0 - alpha) * (e - m))
        };
        let (mut lo, mut hi) = if alpha > 0.5 {
            let mut hi = 2.0 * self.true_quantile(alpha, x)?.max(m);
            let mut tries = 0;
            while f(hi)? > 0.0 {
                hi *= 2.0;
                tries += 1;
                if tries > 200 {
                    return Err(Error::OracleFailure("could not bracket expectile".into()));
                }
            }
            (m, hi)
        } else {
            (0.0, m)
        };
        for _ in 0..200 {
            if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if f(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `E[Y^k | Y > e(alpha|x), X = x]`.
    pub fn true_rectm(&self, k: f64, alpha: f64, x: f64) -> Result<f64> {
        let g = self.gamma(x);
        if !(k >= 0.0 && k * g < 1.0) {
            return Err(Error::MomentNonexistence { k, gamma: g });
        }
        if k == 0.0 {
            check_level(alpha)?;
            return Ok(1.0);
        }
        let e = self.true_expectile(alpha, x)?;
        Ok(self.tail_moment(k, e, x)? / self.survival(e, x))
    }

    /// `E[Y^k | Y > t, X = x] / t^k`.
    pub fn conditional_tail_ratio(&self, k: f64, t: f64, x: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(invalid("threshold must be positive"));
        }
        Ok(self.tail_moment(k, t, x)? / (self.survival(t, x) * t.powf(k)))
    }

    /// `E[Y^k | Y > t, X = x] / t^k - 1 / (1 - k gamma(x))` without cancellation.
    ///
    /// With `T = t^(1/gamma)` and `z = s^(-1/gamma)` the gap equals
    /// `k gamma int_0^1 z^(-k gamma) (1 - z) / (z + T) dz`, which is positive
    /// and of order `1/T`; `z = y^(1/(1 - k gamma))` removes the endpoint
    /// singularity.
    pub fn conditional_tail_gap(&self, k: f64, t: f64, x: f64) -> Result<f64> {
        let g = self.gamma(x);
        if !(k > 0.0 && k * g < 1.0) {
            return Err(Error::MomentNonexistence { k, gamma: g });
        }
        if !(t > 0.0) {
            return Err(invalid("threshold must be positive"));
        }
        let big_t = t.powf(1.0 / g);
        let a = 1.0 - k * g;
        let v = integrate_with(
            |y: f64| {
                let z = y.powf(1.0 / a);
                (1.0 - z) / (z + big_t)
            },
            0.0,
            1.0,
            QUAD,
        )?;
        Ok(k * g / a * v)
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("level must lie in (0, 1), got {alpha}")))
    }
}

/// `n` Burr pairs from the default oracle.
pub fn burr_sample(n: usize, seed: u64) -> Result<Sample> {
    BurrOracle::default().sample(n, seed)
}

/// `q(alpha|x)` under the default oracle.
pub fn true_quantile(alpha: f64, x: f64) -> Result<f64> {
    BurrOracle::default().true_quantile(alpha, x)
}

/// `e(alpha|x)` under the default oracle.
pub fn true_expectile(alpha: f64, x: f64) -> Result<f64> {
    BurrOracle::default().true_expectile(alpha, x)
}

/// `RECTM_k(alpha|x)` under the default oracle.
pub fn true_rectm(k: f64, alpha: f64, x: f64) -> Result<f64> {
    BurrOracle::default().true_rectm(k, alpha, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_range() {
        let o = BurrOracle::default();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=1000 {
            let g = o.gamma(i as f64 / 1000.0);
            lo = lo.min(g);
            hi = hi.max(g);
        }
        assert!(lo >= 0.2 - 1e-15 && hi <= 0.3 + 1e-15);
        assert!((lo - 0.2).abs() < 1e-12 && (hi - 0.3).abs() < 1e-12);
    }

    #[test]
    fn quantile_round_trip() {
        let o = BurrOracle::default();
        assert_eq!(o.true_quantile(0.5, 0.37).unwrap(), 1.0);
        let q = o.true_quantile(0.99, 0.0).unwrap();
        assert!((q - 99f64.powf(0.25)).abs() < 1e-12);
        assert!((q - 3.154_342).abs() < 1e-6);
        for &a in &[0.1, 0.5, 0.9, 0.999] {
            for &x in &[0.0, 0.25, 0.6] {
                let q = o.true_quantile(a, x).unwrap();
                assert!((o.survival(q, x) - (1.0 - a)).abs() < 1e-12);
            }
        }
        assert!(o.true_quantile(1.0, 0.5).is_err());
    }

    #[test]
    fn mean_by_quadrature_matches_beta_identity() {
        let o = BurrOracle::default();
        for &x in &[0.0, 0.25, 0.5, 0.75, 0.9] {
            let q = o.conditional_mean(x).unwrap();
            let c = o.mean_closed_form(x);
            assert!((q - c).abs() < 1e-8, "{x}: {q} vs {c}");
            assert!((o.true_expectile(0.5, x).unwrap() - c).abs() < 1e-8);
        }
    }

    #[test]
    fn excess_branches_agree_with_direct_quadrature() {
        let o = BurrOracle::default();
        let x = 0.3;
        for &t in &[0.2, 0.9, 1.0, 1.5, 4.0] {
            let direct = crate::quadrature::integrate(|y| o.survival(y, x), t, 2e4, 1e-12).unwrap()
                + {
                    // Tail beyond 2e4: Fbar ~ y^(-1/gamma).
                    let g = o.gamma(x);
                    2e4f64.powf(1.0 - 1.0 / g) / (1.0 / g - 1.0)
                };
            let v = o.excess(t, x).unwrap();
            assert!((v - direct).abs() < 1e-8, "{t}: {v} vs {direct}");
        }
    }

    #[test]
    fn expectile_identity_and_monotonicity() {
        let o = BurrOracle::default();
        let mut prev = f64::NEG_INFINITY;
        for &a in &[0.1, 0.3, 0.5, 0.8, 0.95, 0.99, 0.999] {
            let e = o.true_expectile(a, 0.5).unwrap();
            assert!(e > prev);
            prev = e;
            assert!((o.gbar(e, 0.5).unwrap() - (1.0 - a)).abs() < 1e-8, "{a}");
        }
    }

    #[test]
    fn rectm_basics() {
        let o = BurrOracle::default();
        assert_eq!(o.true_rectm(0.0, 0.9, 0.5).unwrap(), 1.0);
        assert!(matches!(
            o.true_rectm(4.0, 0.9, 0.5),
            Err(Error::MomentNonexistence { .. })
        ));
        // First moment above the expectile exceeds the expectile.
        let e = o.true_expectile(0.9, 0.5).unwrap();
        assert!(o.true_rectm(1.0, 0.9, 0.5).unwrap() > e);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = burr_sample(500, 42).unwrap();
        let b = burr_sample(500, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, burr_sample(500, 43).unwrap());
        assert!(a.covariates().iter().all(|x| (0.0..1.0).contains(x)));
        assert!(a.responses().iter().all(|&y| y >= 0.0));
        let r0: Vec<f64> = {
            let mut rng = replication_rng(7, 0);
            (0..3).map(|_| rng.random()).collect()
        };
        let r1: Vec<f64> = {
            let mut rng = replication_rng(7, 1);
            (0..3).map(|_| rng.random()).collect()
        };
        assert_ne!(r0, r1);
    }

    #[test]
    fn tail_gap_matches_the_plain_difference() {
        let o = BurrOracle::default();
        for (k, t, x) in [(1.0, 3.0, 0.25), (0.5, 10.0, 0.5), (2.0, 5.0, 0.75)] {
            let direct = o.conditional_tail_ratio(k, t, x).unwrap() - 1.0 / (1.0 - k * o.gamma(x));
            let gap = o.conditional_tail_gap(k, t, x).unwrap();
            assert!(((gap - direct) / gap).abs() < 1e-8, "{gap} vs {direct}");
        }
        assert!(o.conditional_tail_gap(1.0 / o.gamma(0.75), 3.0, 0.75).is_err());
    }
}
