//! Semi-parametric estimation of expectile-based conditional tail moments
//! for heavy-tailed responses observed together with covariates.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel`]: kernel profiles and the raw kernel estimators (density,
//!   conditional mean, censored moments, the expectile survival ratio and
//!   the leave-one-out survival used by cross-validation).
//! - [`expectile`]: conditional expectiles by generalized inversion, the
//!   expectile-based Hill-type tail index and its bias-reduced variant.
//! - [`moments`]: plug-in and Weissman-extrapolated tail moments.
//! - [`asymptotics`]: closed-form asymptotic covariance entries, bias term
//!   and pointwise confidence intervals.
//! - [`selection`]: cross-validated bandwidth and level selection.
//! - [`oracle`]: the Burr data-generating process and quadrature-based
//!   ground truth.
//! - [`simulation`]: seeded Monte-Carlo replication harness and report export.

pub mod asymptotics;
mod error;
pub mod export;
pub mod expectile;
pub mod kernel;
pub mod moments;
pub mod oracle;
pub mod quadrature;
mod sample;
pub mod selection;
pub mod simulation;
pub mod sum;

pub use error::{Error, Result};
pub use expectile::{ExpectileEstimate, TailConfig, TailIndexFit, Taus};
pub use kernel::{KernelProfile, KernelSpec, Neighborhood};
pub use moments::RectmEstimate;
pub use sample::Sample;
