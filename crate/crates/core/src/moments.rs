//! Plug-in and Weissman-extrapolated tail moment estimators.
//!
//! The plug-in estimator at an intermediate level is `e^k / (1 - k gamma)`;
//! the extrapolated one multiplies it by `((1 - alpha) / (1 - beta))^(k gamma)`.
//! Both optionally take an externally supplied tail index in place of the
//! bias-reduced estimate.

use crate::error::{invalid, Error, Result};
use crate::expectile::Taus;
use crate::kernel::{KernelSpec, Neighborhood};
use crate::sample::Sample;

#[derive(Debug, Clone, PartialEq)]
pub struct RectmEstimate {
    pub value: f64,
    pub k: f64,
    /// `alpha` for the plug-in estimator, `beta` when extrapolated.
    pub level: f64,
    pub gamma_used: f64,
    pub expectile_used: f64,
    pub extrapolated: bool,
    pub extrapolation_factor: f64,
}

fn check_order(k: f64) -> Result<()> {
    if k.is_finite() && k >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("moment order must be nonnegative and finite, got {k}")))
    }
}

/// `e^k / (1 - k gamma)` at `level`.
pub fn plugin_from_parts(expectile: f64, gamma: f64, k: f64, level: f64) -> Result<RectmEstimate> {
    check_order(k)?;
    if k == 0.0 {
        return Ok(RectmEstimate {
            value: 1.0,
            k,
            level,
            gamma_used: gamma,
            expectile_used: expectile,
            extrapolated: false,
            extrapolation_factor: 1.0,
        });
    }
    if !gamma.is_finite() {
        return Err(invalid(format!("tail index must be finite, got {gamma}")));
    }
    if k * gamma >= 1.0 {
        return Err(Error::MomentNonexistence { k, gamma });
    }
    let power = if expectile >= 0.0 {
        expectile.powf(k)
    } else if k.fract() == 0.0 && k <= i32::MAX as f64 {
        expectile.powi(k as i32)
    } else {
        return Err(Error::Domain(format!(
            "fractional power {k} of negative expectile {expectile}"
        )));
    };
    Ok(RectmEstimate {
        value: power / (1.0 - k * gamma),
        k,
        level,
        gamma_used: gamma,
        expectile_used: expectile,
        extrapolated: false,
        extrapolation_factor: 1.0,
    })
}

/// Extrapolates a plug-in estimate at `alpha` to `beta >= alpha`.
pub fn extrapolate(plugin: &RectmEstimate, alpha: f64, beta: f64) -> Result<RectmEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(beta >= alpha && beta < 1.0) {
        return Err(invalid(format!(
            "extrapolation level must satisfy alpha <= beta < 1, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let factor = if plugin.k == 0.0 {
        1.0
    } else {
        ((1.0 - alpha) / (1.0 - beta)).powf(plugin.k * plugin.gamma_used)
    };
    Ok(RectmEstimate {
        value: plugin.value * factor,
        level: beta,
        extrapolated: beta > alpha,
        extrapolation_factor: factor,
        ..plugin.clone()
    })
}

impl Neighborhood {
    /// Plug-in tail moment at `alpha`; `gamma` overrides the bias-reduced
    /// tail index when given.
    pub fn rectm_plugin(
        &self,
        alpha: f64,
        taus: &Taus,
        k: f64,
        gamma: Option<f64>,
    ) -> Result<RectmEstimate> {
        check_order(k)?;
        let expectile = self.expectile(alpha)?.value;
        let gamma = match gamma {
            Some(g) => g,
            // The zeroth moment does not depend on the tail index.
            None if k == 0.0 => self
                .tail_index(alpha, taus)
                .map(|fit| fit.gamma_tilde)
                .unwrap_or(f64::NAN),
            None => self.tail_index(alpha, taus)?.gamma_tilde,
        };
        plugin_from_parts(expectile, gamma, k, alpha)
    }

    /// Weissman-type estimator at `beta` from the plug-in estimator at `alpha`.
    pub fn rectm_weissman(
        &self,
        alpha: f64,
        beta: f64,
        taus: &Taus,
        k: f64,
        gamma: Option<f64>,
    ) -> Result<RectmEstimate> {
        if !(beta >= alpha && beta < 1.0) {
            return Err(invalid(format!(
                "extrapolation level must satisfy alpha <= beta < 1, got alpha = {alpha}, beta = {beta}"
            )));
        }
        let plugin = self.rectm_plugin(alpha, taus, k, gamma)?;
        extrapolate(&plugin, alpha, beta)
    }
}

/// Plug-in tail moment estimate at `(alpha, x)`.
#[allow(clippy::too_many_arguments)]
pub fn rectm_plugin(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    alpha: f64,
    taus: &Taus,
    k: f64,
    x: &[f64],
    gamma: Option<f64>,
) -> Result<RectmEstimate> {
    Neighborhood::new(sample, spec, h, x)?.rectm_plugin(alpha, taus, k, gamma)
}

/// Extrapolated tail moment estimate at `(beta, x)`.
#[allow(clippy::too_many_arguments)]
pub fn rectm_weissman(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    alpha: f64,
    beta: f64,
    taus: &Taus,
    k: f64,
    x: &[f64],
    gamma: Option<f64>,
) -> Result<RectmEstimate> {
    Neighborhood::new(sample, spec, h, x)?.rectm_weissman(alpha, beta, taus, k, gamma)
}
