//! Seeded Monte-Carlo replications on the Burr model.
//!
//! Replication `r` draws its sample from [`replication_rng`]`(seed, r)`, so a
//! report depends only on its configuration, never on thread scheduling.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::expectile::Taus;
use crate::export::{format_decimal, format_optional, write_csv, write_json};
use crate::kernel::{KernelProfile, KernelSpec, Neighborhood};
use crate::oracle::{replication_rng, BurrOracle};
use crate::selection::{cv_alpha, cv_bandwidth, default_bandwidths, default_levels, default_probes};

pub const REPLICATIONS_SCHEMA: &str = "rectm.simulation.replications/v1";
pub const SUMMARY_SCHEMA: &str = "rectm.simulation.summary/v1";

/// Fixed value or cross-validated per replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    Fixed(f64),
    CrossValidated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    GammaHat,
    GammaTilde,
    RectmPlugin,
    RectmWeissman,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Self::GammaHat,
        Self::GammaTilde,
        Self::RectmPlugin,
        Self::RectmWeissman,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GammaHat => "gamma_hat",
            Self::GammaTilde => "gamma_tilde",
            Self::RectmPlugin => "rectm_plugin",
            Self::RectmWeissman => "rectm_weissman",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n: usize,
    pub replications: usize,
    pub x_grid: Vec<f64>,
    pub bandwidth: Tuning,
    pub alpha: Tuning,
    /// Target level; `1 - 1/n` when `None`.
    pub beta: Option<f64>,
    /// Numbers of harmonic weights to evaluate.
    pub j_values: Vec<usize>,
    pub k: f64,
    pub seed: u64,
    pub kernel: KernelProfile,
    pub oracle: BurrOracle,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            replications: 50,
            x_grid: (1..=20).map(|i| i as f64 * 0.05).collect(),
            bandwidth: Tuning::Fixed(0.1),
            alpha: Tuning::Fixed(0.95),
            beta: None,
            j_values: vec![2],
            k: 1.0,
            seed: 0,
            kernel: KernelProfile::Biquadratic,
            oracle: BurrOracle::default(),
        }
    }
}

impl SimulationConfig {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(1.0 - 1.0 / self.n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("sample size must be at least 2"));
        }
        if self.replications == 0 {
            return Err(invalid("need at least one replication"));
        }
        if self.x_grid.iter().any(|x| !x.is_finite()) {
            return Err(invalid("grid points must be finite"));
        }
        if let Tuning::Fixed(h) = self.bandwidth {
            crate::kernel::check_bandwidth(h)?;
        }
        let beta = self.beta();
        if let Tuning::Fixed(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(invalid(format!("alpha must lie in (0, 1), got {a}")));
            }
            if !(beta >= a && beta < 1.0) {
                return Err(invalid(format!("beta must lie in [alpha, 1), got {beta}")));
            }
        } else if !(beta > 0.96 && beta < 1.0) {
            return Err(invalid(format!(
                "beta must exceed the largest selectable alpha 0.96, got {beta}"
            )));
        }
        if self.j_values.is_empty() {
            return Err(invalid("need at least one J"));
        }
        for &j in &self.j_values {
            Taus::harmonic(j)?;
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(invalid("moment order must be nonnegative"));
        }
        Ok(())
    }
}

/// Boxplot-style summary of the successful estimates in one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellSummary {
    pub count: usize,
    pub failures: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    /// Most extreme estimates within 1.5 IQR of the quartiles.
    pub whisker_lo: Option<f64>,
    pub whisker_hi: Option<f64>,
    pub mean_abs_error: Option<f64>,
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

impl CellSummary {
    pub fn new(values: &[Option<f64>], truth: Option<f64>) -> Self {
        let mut ok: Vec<f64> = values.iter().flatten().copied().collect();
        ok.sort_by(f64::total_cmp);
        let failures = values.len() - ok.len();
        let q1 = quantile_sorted(&ok, 0.25);
        let q3 = quantile_sorted(&ok, 0.75);
        let (whisker_lo, whisker_hi) = match (q1, q3) {
            (Some(a), Some(b)) => {
                let reach = 1.5 * (b - a);
                (
                    ok.iter().copied().find(|&v| v >= a - reach),
                    ok.iter().rev().copied().find(|&v| v <= b + reach),
                )
            }
            _ => (None, None),
        };
        let mean_abs_error = truth.filter(|_| !ok.is_empty()).map(|t| {
            crate::sum::sum(ok.iter().map(|v| (v - t).abs())) / ok.len() as f64
        });
        Self {
            count: ok.len(),
            failures,
            median: quantile_sorted(&ok, 0.5),
            q1,
            q3,
            whisker_lo,
            whisker_hi,
            mean_abs_error,
        }
    }

    pub fn iqr(&self) -> Option<f64> {
        Some(self.q3? - self.q1?)
    }
}

/// All replications of one estimator at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub x: f64,
    pub estimator: Estimator,
    pub j: usize,
    pub truth: Option<f64>,
    /// One entry per replication; `None` records an estimator failure.
    #[serde(skip)]
    pub values: Vec<Option<f64>>,
    pub summary: CellSummary,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("{}_J{}", self.estimator.name(), self.j)
    }

    pub fn successes(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }
}

/// Bandwidth and level actually used by one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationTuning {
    pub replication: usize,
    pub h: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub n: usize,
    pub replications: usize,
    pub bandwidth: Tuning,
    pub alpha: Tuning,
    pub beta: f64,
    pub j_values: Vec<usize>,
    pub k: f64,
    pub seed: u64,
    pub kernel: &'static str,
    pub gamma_base: f64,
    pub gamma_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub schema: &'static str,
    pub metadata: ReportMetadata,
    pub tuning: Vec<ReplicationTuning>,
    pub cells: Vec<Cell>,
}

impl ReplicationReport {
    pub fn cell(&self, x: f64, estimator: Estimator, j: usize) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.x == x && c.estimator == estimator && c.j == j)
    }
}

struct ReplicationOutcome {
    tuning: ReplicationTuning,
    /// Indexed like the report cells.
    values: Vec<Option<f64>>,
}

fn run_replication(config: &SimulationConfig, spec: &KernelSpec, r: usize) -> Result<ReplicationOutcome> {
    let sample = config
        .oracle
        .sample_with(config.n, &mut replication_rng(config.seed, r as u64))?;
    let width = config.x_grid.len() * config.j_values.len() * Estimator::ALL.len();
    let h = match config.bandwidth {
        Tuning::Fixed(h) => Some(h),
        Tuning::CrossValidated => cv_bandwidth(&sample, spec, &default_bandwidths())
            .ok()
            .map(|s| s.selected),
    };
    let alpha = match (config.alpha, h) {
        (Tuning::Fixed(a), _) => Some(a),
        (Tuning::CrossValidated, Some(h)) => {
            cv_alpha(&sample, spec, h, &default_levels(), &default_probes(0.0, 1.0))
                .ok()
                .map(|s| s.selected)
        }
        (Tuning::CrossValidated, None) => None,
    };
    let tuning = ReplicationTuning {
        replication: r,
        h,
        alpha,
    };
    let (Some(h), Some(alpha)) = (h, alpha) else {
        return Ok(ReplicationOutcome {
            tuning,
            values: vec![None; width],
        });
    };
    let beta = config.beta();
    let mut values = Vec::with_capacity(width);
    for &x in &config.x_grid {
        let nb = Neighborhood::new(&sample, spec, h, &[x])?;
        for &j in &config.j_values {
            let taus = Taus::harmonic(j)?;
            let fit = nb.tail_index(alpha, &taus).ok();
            values.push(fit.as_ref().map(|f| f.gamma_hat));
            values.push(fit.as_ref().map(|f| f.gamma_tilde));
            values.push(
                nb.rectm_plugin(beta, &taus, config.k, None)
                    .ok()
                    .map(|e| e.value),
            );
            values.push(fit.as_ref().and_then(|f| {
                nb.rectm_weissman(alpha, beta, &taus, config.k, Some(f.gamma_tilde))
                    .ok()
                    .map(|e| e.value)
            }));
        }
    }
    Ok(ReplicationOutcome { tuning, values })
}

/// Runs all replications and aggregates them per `(x, J, estimator)`.
pub fn run_simulation(config: &SimulationConfig) -> Result<ReplicationReport> {
    config.validate()?;
    let spec = KernelSpec::new(config.kernel, 1)?;
    let outcomes = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, &spec, r))
        .collect::<Result<Vec<_>>>()?;
    let beta = config.beta();
    let mut cells = Vec::new();
    let mut index = 0;
    for &x in &config.x_grid {
        let gamma = config.oracle.gamma(x);
        let rectm_truth = config.oracle.true_rectm(config.k, beta, x).ok();
        for &j in &config.j_values {
            for estimator in Estimator::ALL {
                let truth = match estimator {
                    Estimator::GammaHat | Estimator::GammaTilde => Some(gamma),
                    Estimator::RectmPlugin | Estimator::RectmWeissman => rectm_truth,
                };
                let values: Vec<Option<f64>> = outcomes.iter().map(|o| o.values[index]).collect();
                let summary = CellSummary::new(&values, truth);
                cells.push(Cell {
                    x,
                    estimator,
                    j,
                    truth,
                    values,
                    summary,
                });
                index += 1;
            }
        }
    }
    Ok(ReplicationReport {
        schema: SUMMARY_SCHEMA,
        metadata: ReportMetadata {
            n: config.n,
            replications: config.replications,
            bandwidth: config.bandwidth,
            alpha: config.alpha,
            beta,
            j_values: config.j_values.clone(),
            k: config.k,
            seed: config.seed,
            kernel: config.kernel.name(),
            gamma_base: config.oracle.base,
            gamma_amplitude: config.oracle.amplitude,
        },
        tuning: outcomes.into_iter().map(|o| o.tuning).collect(),
        cells,
    })
}

/// Writes `replications.csv` (long format: x, estimator, replication, value;
/// failures as empty values) and `summary.json` into `dir`.
pub fn export_report(report: &ReplicationReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for cell in &report.cells {
        let label = cell.label();
        for (r, v) in cell.values.iter().enumerate() {
            rows.push(vec![
                format_decimal(cell.x),
                label.clone(),
                r.to_string(),
                format_optional(*v),
            ]);
        }
    }
    write_csv(
        &dir.join("replications.csv"),
        REPLICATIONS_SCHEMA,
        &["x", "estimator", "replication", "value"],
        &rows,
    )?;
    write_json(&dir.join("summary.json"), report)
}
