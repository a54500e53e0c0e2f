//! Cross-validated choice of the bandwidth `h` and the intermediate level
//! `alpha`.
//!
//! The bandwidth minimises
//!
//! ```text
//! sum_i sum_j ( 1{Y_i >= Y_j} - Fbar_{n,-i}(Y_j | X_i) )^2
//! ```
//!
//! over a grid, with the leave-one-out survival evaluated at the data points.
//! The level minimises the squared disagreement between the bias-reduced
//! tail index computed with `J = 2` and `J = 3` harmonic weights, summed
//! over probe points.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::expectile::Taus;
use crate::export::{format_decimal, write_csv};
use crate::kernel::{check_bandwidth, KernelSpec, Neighborhood};
use crate::sample::Sample;
use crate::sum::NeumaierSum;

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

fn check_increasing(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(invalid(format!("{what} grid is empty")));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrid {
    pub h_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub x_probe_points: Vec<Vec<f64>>,
}

impl SelectionGrid {
    pub fn new(h_values: Vec<f64>, alpha_values: Vec<f64>, x_probe_points: Vec<Vec<f64>>) -> Result<Self> {
        check_increasing(&h_values, "bandwidth")?;
        if h_values.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(invalid("bandwidths must be positive"));
        }
        check_increasing(&alpha_values, "level")?;
        if alpha_values.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(invalid("levels must lie in (0, 1)"));
        }
        if x_probe_points.is_empty() {
            return Err(invalid("need at least one probe point"));
        }
        Ok(Self {
            h_values,
            alpha_values,
            x_probe_points,
        })
    }

    /// 20 bandwidths on `[0.05, 0.5]`, 20 levels on `[0.9, 0.96]`, and 9
    /// equispaced interior probe points of the covariate range.
    ///
    /// Probe defaults need a one-dimensional covariate.
    pub fn default_for(sample: &Sample) -> Result<Self> {
        if sample.dim() != 1 {
            return Err(invalid("default probe points need p = 1; supply them explicitly"));
        }
        let (lo, hi) = sample.covariate_range();
        Self::new(
            default_bandwidths(),
            default_levels(),
            default_probes(lo, hi),
        )
    }
}

pub fn default_bandwidths() -> Vec<f64> {
    linspace(0.05, 0.5, 20)
}

pub fn default_levels() -> Vec<f64> {
    linspace(0.9, 0.96, 20)
}

/// `lo + (hi - lo) t / 10` for `t = 1..=9`.
pub fn default_probes(lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (1..=9)
        .map(|t| vec![lo + (hi - lo) * t as f64 / 10.0])
        .collect()
}

/// One grid value with its criterion and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreRow {
    pub value: f64,
    pub score: f64,
    /// Empty leave-one-out neighborhoods (bandwidth) or failed probe points
    /// (level).
    pub diagnostics: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub selected: f64,
    pub table: Vec<ScoreRow>,
}

/// Smallest finite score; ties go to the earlier (smaller) grid value.
fn argmin(table: &[ScoreRow]) -> Option<f64> {
    let mut best: Option<ScoreRow> = None;
    for row in table.iter().filter(|r| r.score.is_finite()) {
        if best.is_none_or(|b| row.score < b.score) {
            best = Some(*row);
        }
    }
    best.map(|r| r.value)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Observations in a canonical order (covariates, then response), so the
/// criterion does not depend on how the sample was listed.
struct Canonical {
    order: Vec<usize>,
    first_coord: Vec<f64>,
    responses_desc: Vec<f64>,
}

impl Canonical {
    fn new(sample: &Sample) -> Self {
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.sort_by(|&a, &b| {
            lexicographic(sample.covariate(a), sample.covariate(b))
                .then(sample.response(a).total_cmp(&sample.response(b)))
        });
        let first_coord = order.iter().map(|&i| sample.covariate(i)[0]).collect();
        let mut responses_desc = sample.responses().to_vec();
        responses_desc.sort_by(|a, b| b.total_cmp(a));
        Self {
            order,
            first_coord,
            responses_desc,
        }
    }

    /// Canonical positions that may lie within `h` of canonical position `pos`.
    fn candidates(&self, sample: &Sample, pos: usize, h: f64) -> std::ops::Range<usize> {
        if sample.dim() == 1 {
            let x = self.first_coord[pos];
            let lo = self.first_coord.partition_point(|&v| v < x - h);
            let hi = self.first_coord.partition_point(|&v| v <= x + h);
            lo..hi
        } else {
            0..self.order.len()
        }
    }
}

/// Criterion value and empty-neighborhood count for one bandwidth.
fn cv_score(sample: &Sample, spec: &KernelSpec, canon: &Canonical, h: f64) -> (f64, usize) {
    let mut score = NeumaierSum::new();
    let mut empty = 0;
    let mut neighbors: Vec<(f64, f64)> = Vec::new();
    for pos in 0..canon.order.len() {
        let i = canon.order[pos];
        let xi = sample.covariate(i);
        let yi = sample.response(i);
        neighbors.clear();
        for other in canon.candidates(sample, pos, h) {
            if other == pos {
                continue;
            }
            let l = canon.order[other];
            let w = spec.scaled_weight(xi, sample.covariate(l), h);
            if w > 0.0 {
                neighbors.push((sample.response(l), w));
            }
        }
        neighbors.sort_by(|a, b| b.0.total_cmp(&a.0));
        let total = {
            let mut acc = NeumaierSum::new();
            acc.extend(neighbors.iter().map(|n| n.1));
            acc.total()
        };
        if !(total > 0.0) {
            empty += 1;
        }
        let mut above = NeumaierSum::new();
        let mut next = 0;
        for &yj in &canon.responses_desc {
            while next < neighbors.len() && neighbors[next].0 > yj {
                above.add(neighbors[next].1);
                next += 1;
            }
            let survival = if total > 0.0 {
                (above.total() / total).min(1.0)
            } else {
                0.0
            };
            let indicator = if yi >= yj { 1.0 } else { 0.0 };
            let d = indicator - survival;
            score.add(d * d);
        }
    }
    (score.total(), empty)
}

/// Cross-validated bandwidth over `h_values`.
pub fn cv_bandwidth(sample: &Sample, spec: &KernelSpec, h_values: &[f64]) -> Result<Selection> {
    if sample.len() < 2 {
        return Err(invalid("bandwidth cross-validation needs n >= 2"));
    }
    if spec.dim() != sample.dim() {
        return Err(invalid("kernel and sample dimensions differ"));
    }
    check_increasing(h_values, "bandwidth")?;
    for &h in h_values {
        check_bandwidth(h)?;
    }
    let canon = Canonical::new(sample);
    let table: Vec<ScoreRow> = h_values
        .par_iter()
        .map(|&h| {
            let (score, diagnostics) = cv_score(sample, spec, &canon, h);
            ScoreRow {
                value: h,
                score,
                diagnostics,
            }
        })
        .collect();
    let selected = argmin(&table)
        .ok_or_else(|| Error::SelectionFailure("no bandwidth has a finite score".into()))?;
    Ok(Selection { selected, table })
}

/// Cross-validated level over `alpha_values` at bandwidth `h`.
pub fn cv_alpha(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    alpha_values: &[f64],
    probes: &[Vec<f64>],
) -> Result<Selection> {
    check_bandwidth(h)?;
    check_increasing(alpha_values, "level")?;
    if probes.is_empty() {
        return Err(invalid("need at least one probe point"));
    }
    let hoods = probes
        .iter()
        .map(|x| Neighborhood::new(sample, spec, h, x))
        .collect::<Result<Vec<_>>>()?;
    let (two, three) = (Taus::harmonic(2)?, Taus::harmonic(3)?);
    let table: Vec<ScoreRow> = alpha_values
        .par_iter()
        .map(|&alpha| {
            let mut score = NeumaierSum::new();
            let mut failures = 0;
            for nb in &hoods {
                match (nb.tail_index(alpha, &two), nb.tail_index(alpha, &three)) {
                    (Ok(a), Ok(b)) if a.gamma_tilde.is_finite() && b.gamma_tilde.is_finite() => {
                        let d = a.gamma_tilde - b.gamma_tilde;
                        score.add(d * d);
                    }
                    _ => failures += 1,
                }
            }
            ScoreRow {
                value: alpha,
                score: if failures == hoods.len() {
                    f64::NAN
                } else {
                    score.total()
                },
                diagnostics: failures,
            }
        })
        .collect();
    let selected = argmin(&table).ok_or_else(|| {
        Error::SelectionFailure("tail index estimation failed at every probe point and level".into())
    })?;
    Ok(Selection { selected, table })
}

/// Score table as CSV: grid value, score, diagnostics count.
pub fn write_score_table(path: &Path, schema: &str, value_name: &str, table: &[ScoreRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                format_decimal(r.value),
                format_decimal(r.score),
                r.diagnostics.to_string(),
            ]
        })
        .collect();
    write_csv(path, schema, &[value_name, "score", "diagnostics"], &rows)
}
