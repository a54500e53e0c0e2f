//! The four commands. Each writes schema-tagged files into the output directory.

use std::path::Path;

use rectm::asymptotics::{confidence_interval, lambda22_plugin, CiInputs, CiOutcome};
use rectm::export::{format_decimal, format_optional, write_csv, write_json};
use rectm::oracle::BurrOracle;
use rectm::selection::{
    cv_alpha, cv_bandwidth, default_bandwidths, default_levels, default_probes, linspace,
    write_score_table, Selection,
};
use rectm::simulation::{export_report, run_simulation, SimulationConfig, Tuning};
use rectm::{KernelSpec, Neighborhood, Sample, Taus};
use serde::Serialize;

use crate::config::{Command, DataSource, RunConfig, Tune};
use crate::ingest::{ingest_csv, ColumnMapping, IngestReport, Transforms};
use crate::CliError;

pub const ESTIMATES_SCHEMA: &str = "rectm.estimates/v1";
pub const CI_SCHEMA: &str = "rectm.estimates_ci/v1";
pub const RUN_SCHEMA: &str = "rectm.run/v1";
pub const BANDWIDTH_SCORES_SCHEMA: &str = "rectm.cv_bandwidth/v1";
pub const LEVEL_SCORES_SCHEMA: &str = "rectm.cv_alpha/v1";
pub const SELECTION_SCHEMA: &str = "rectm.selection/v1";

fn data_err(e: rectm::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn output_err(e: rectm::Error) -> CliError {
    CliError::Output(e.to_string())
}

/// Dispatches on the configured command.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.out)
        .map_err(|e| CliError::Output(format!("{}: {e}", config.out.display())))?;
    match config.command {
        Command::Estimate | Command::Ci => run_estimate(config),
        Command::Select => run_select(config),
        Command::Simulate => run_simulate(config),
    }
}

/// Loads the sample; the generator draws with the configured seed.
pub fn load_sample(config: &RunConfig) -> Result<(Sample, Option<IngestReport>), CliError> {
    match &config.source {
        DataSource::Burr { n } => {
            let sample = BurrOracle::default().sample(*n, config.seed).map_err(data_err)?;
            Ok((sample, None))
        }
        DataSource::File {
            path,
            x_col,
            y_col,
            log_x,
            x_range,
            delimiter,
        } => {
            let mapping = ColumnMapping {
                x_col: x_col.clone(),
                y_col: y_col.clone(),
            };
            let (sample, report) = ingest_csv(
                path,
                &mapping,
                Transforms { log_x: *log_x },
                *x_range,
                *delimiter as u8,
            )?;
            for row in &report.rejected {
                eprintln!("rectm: {}:{}: dropped: {}", path.display(), row.line, row.reason);
            }
            Ok((sample, Some(report)))
        }
    }
}

fn default_grid(config: &RunConfig, sample: &Sample) -> Vec<f64> {
    if let Some(grid) = &config.grid {
        return grid.clone();
    }
    match config.source {
        DataSource::Burr { .. } => (1..=20).map(|i| i as f64 * 0.05).collect(),
        DataSource::File { .. } => {
            let (lo, hi) = sample.covariate_range();
            linspace(lo, hi, 20)
        }
    }
}

/// Bandwidth and level, cross-validated where requested.
pub struct Tuned {
    pub h: f64,
    pub alpha: f64,
    pub h_selection: Option<Selection>,
    pub alpha_selection: Option<Selection>,
}

pub fn tune(config: &RunConfig, sample: &Sample, spec: &KernelSpec) -> Result<Tuned, CliError> {
    let (h, h_selection) = match config.h {
        Tune::Fixed(h) => (h, None),
        Tune::Cv => {
            let s = cv_bandwidth(sample, spec, &default_bandwidths()).map_err(data_err)?;
            (s.selected, Some(s))
        }
    };
    let (alpha, alpha_selection) = match config.alpha {
        Tune::Fixed(a) => (a, None),
        Tune::Cv => {
            let (lo, hi) = sample.covariate_range();
            let s = cv_alpha(sample, spec, h, &default_levels(), &default_probes(lo, hi))
                .map_err(data_err)?;
            (s.selected, Some(s))
        }
    };
    Ok(Tuned {
        h,
        alpha,
        h_selection,
        alpha_selection,
    })
}

#[derive(Serialize)]
struct RunRecord<'a> {
    schema: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    n: usize,
    ingest: Option<&'a IngestReport>,
    h: f64,
    h_cross_validated: bool,
    alpha: f64,
    alpha_cross_validated: bool,
    beta: f64,
    rows: usize,
    flagged_rows: usize,
}

/// Everything computed at one grid point; failures leave `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub x: f64,
    pub status: &'static str,
    pub density: Option<f64>,
    pub mean: Option<f64>,
    pub expectile: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub gamma_tilde: Option<f64>,
    pub rectm_plugin: Option<f64>,
    pub rectm_weissman: Option<f64>,
    pub lambda22_hat: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub ci_status: &'static str,
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_at(
    sample: &Sample,
    spec: &KernelSpec,
    h: f64,
    alpha: f64,
    beta: f64,
    taus: &Taus,
    k: f64,
    theta: f64,
    x: f64,
) -> EstimateRow {
    let mut row = EstimateRow {
        x,
        status: "ok",
        density: None,
        mean: None,
        expectile: None,
        gamma_hat: None,
        gamma_tilde: None,
        rectm_plugin: None,
        rectm_weissman: None,
        lambda22_hat: None,
        ci: None,
        ci_status: "no_estimate",
    };
    let nb = match Neighborhood::new(sample, spec, h, &[x]) {
        Ok(nb) => nb,
        Err(e) => {
            row.status = e.code();
            return row;
        }
    };
    let mut first_error = None;
    let mut note = |e: &rectm::Error| {
        first_error.get_or_insert(e.code());
    };
    row.density = Some(nb.density());
    row.mean = nb.mean().map_err(|e| note(&e)).ok();
    row.expectile = nb.expectile(alpha).map_err(|e| note(&e)).ok().map(|e| e.value);
    let fit = nb.tail_index(alpha, taus).map_err(|e| note(&e)).ok();
    row.gamma_hat = fit.as_ref().map(|f| f.gamma_hat);
    row.gamma_tilde = fit.as_ref().map(|f| f.gamma_tilde);
    let plugin = nb
        .rectm_plugin(alpha, taus, k, row.gamma_tilde)
        .map_err(|e| note(&e))
        .ok();
    row.rectm_plugin = plugin.as_ref().map(|p| p.value);
    let weissman = nb
        .rectm_weissman(alpha, beta, taus, k, row.gamma_tilde)
        .map_err(|e| note(&e))
        .ok();
    row.rectm_weissman = weissman.as_ref().map(|w| w.value);
    row.status = first_error.unwrap_or("ok");

    if let (Some(w), Some(gamma)) = (&weissman, row.gamma_tilde) {
        let lambda22_hat = lambda22_plugin(gamma, taus);
        row.lambda22_hat = Some(lambda22_hat);
        let inputs = CiInputs {
            gamma,
            g_hat: nb.density(),
            n: sample.len(),
            h,
            p: sample.dim(),
            alpha,
            beta,
            theta,
            lambda22_hat,
        };
        match confidence_interval(w, spec, &inputs) {
            Ok(outcome) => {
                row.ci = outcome.bounds();
                if let CiOutcome::Unbounded { lo } = outcome {
                    row.ci = Some((lo, f64::INFINITY));
                }
                row.ci_status = outcome.status();
            }
            Err(e) => row.ci_status = e.code(),
        }
    }
    row
}

fn beta_for(config: &RunConfig, n: usize, alpha: f64) -> Result<f64, CliError> {
    let beta = config.beta.unwrap_or(1.0 - 1.0 / n as f64);
    if beta < alpha {
        return Err(CliError::Config(format!(
            "beta {beta} lies below the level alpha {alpha}"
        )));
    }
    Ok(beta)
}

pub fn run_estimate(config: &RunConfig) -> Result<(), CliError> {
    let (sample, ingest) = load_sample(config)?;
    let spec = KernelSpec::new(config.kernel, 1).map_err(data_err)?;
    let taus = Taus::harmonic(config.j).map_err(|e| CliError::Config(e.to_string()))?;
    let tuned = tune(config, &sample, &spec)?;
    let beta = beta_for(config, sample.len(), tuned.alpha)?;
    let grid = default_grid(config, &sample);
    let rows: Vec<EstimateRow> = grid
        .iter()
        .map(|&x| {
            estimate_at(
                &sample,
                &spec,
                tuned.h,
                tuned.alpha,
                beta,
                &taus,
                config.k,
                config.theta,
                x,
            )
        })
        .collect();

    let with_ci = config.command == Command::Ci;
    let mut header = vec![
        "x",
        "status",
        "density",
        "mean",
        "expectile",
        "gamma_hat",
        "gamma_tilde",
        "rectm_plugin",
        "rectm_weissman",
    ];
    if with_ci {
        header.extend(["lambda22_hat", "ci_lo", "ci_hi", "ci_status"]);
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut fields = vec![
                format_decimal(r.x),
                r.status.to_string(),
                format_optional(r.density),
                format_optional(r.mean),
                format_optional(r.expectile),
                format_optional(r.gamma_hat),
                format_optional(r.gamma_tilde),
                format_optional(r.rectm_plugin),
                format_optional(r.rectm_weissman),
            ];
            if with_ci {
                fields.extend([
                    format_optional(r.lambda22_hat),
                    format_optional(r.ci.map(|c| c.0)),
                    format_optional(r.ci.map(|c| c.1)),
                    r.ci_status.to_string(),
                ]);
            }
            fields
        })
        .collect();
    let schema = if with_ci { CI_SCHEMA } else { ESTIMATES_SCHEMA };
    write_csv(&config.out.join("estimates.csv"), schema, &header, &table).map_err(output_err)?;
    write_selection_tables(&config.out, &tuned)?;
    let record = RunRecord {
        schema: RUN_SCHEMA,
        command: config.command.name(),
        config,
        n: sample.len(),
        ingest: ingest.as_ref(),
        h: tuned.h,
        h_cross_validated: tuned.h_selection.is_some(),
        alpha: tuned.alpha,
        alpha_cross_validated: tuned.alpha_selection.is_some(),
        beta,
        rows: rows.len(),
        flagged_rows: rows.iter().filter(|r| r.status != "ok").count(),
    };
    write_json(&config.out.join("run.json"), &record).map_err(output_err)
}

fn write_selection_tables(out: &Path, tuned: &Tuned) -> Result<(), CliError> {
    if let Some(s) = &tuned.h_selection {
        write_score_table(&out.join("bandwidth_scores.csv"), BANDWIDTH_SCORES_SCHEMA, "h", &s.table)
            .map_err(output_err)?;
    }
    if let Some(s) = &tuned.alpha_selection {
        write_score_table(&out.join("level_scores.csv"), LEVEL_SCORES_SCHEMA, "alpha", &s.table)
            .map_err(output_err)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SelectionRecord<'a> {
    schema: &'static str,
    config: &'a RunConfig,
    n: usize,
    ingest: Option<&'a IngestReport>,
    h: f64,
    h_cross_validated: bool,
    alpha: f64,
    alpha_cross_validated: bool,
}

pub fn run_select(config: &RunConfig) -> Result<(), CliError> {
    let (sample, ingest) = load_sample(config)?;
    let spec = KernelSpec::new(config.kernel, 1).map_err(data_err)?;
    let tuned = tune(config, &sample, &spec)?;
    write_selection_tables(&config.out, &tuned)?;
    let record = SelectionRecord {
        schema: SELECTION_SCHEMA,
        config,
        n: sample.len(),
        ingest: ingest.as_ref(),
        h: tuned.h,
        h_cross_validated: tuned.h_selection.is_some(),
        alpha: tuned.alpha,
        alpha_cross_validated: tuned.alpha_selection.is_some(),
    };
    write_json(&config.out.join("selection.json"), &record).map_err(output_err)
}

pub fn simulation_config(config: &RunConfig) -> Result<SimulationConfig, CliError> {
    let DataSource::Burr { n } = config.source else {
        return Err(CliError::Config("simulate needs the built-in generator".into()));
    };
    let tuning = |t: Tune| match t {
        Tune::Fixed(v) => Tuning::Fixed(v),
        Tune::Cv => Tuning::CrossValidated,
    };
    let sim = SimulationConfig {
        n,
        replications: config.replications,
        x_grid: config
            .grid
            .clone()
            .unwrap_or_else(|| (1..=20).map(|i| i as f64 * 0.05).collect()),
        bandwidth: tuning(config.h),
        alpha: tuning(config.alpha),
        beta: config.beta,
        j_values: vec![config.j],
        k: config.k,
        seed: config.seed,
        kernel: config.kernel,
        oracle: BurrOracle::default(),
    };
    sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(sim)
}

pub fn run_simulate(config: &RunConfig) -> Result<(), CliError> {
    let sim = simulation_config(config)?;
    let report = run_simulation(&sim).map_err(data_err)?;
    export_report(&report, &config.out).map_err(output_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeroth_moment_row() {
        let sample = BurrOracle::default().sample(500, 3).unwrap();
        let spec = KernelSpec::biquadratic(1).unwrap();
        let taus = Taus::harmonic(2).unwrap();
        let row = estimate_at(&sample, &spec, 0.2, 0.9, 0.998, &taus, 0.0, 0.05, 0.5);
        assert_eq!(row.status, "ok");
        assert_eq!(row.rectm_weissman, Some(1.0));
        assert_eq!(row.rectm_plugin, Some(1.0));
        assert_eq!(row.ci, Some((1.0, 1.0)));
    }

    #[test]
    fn empty_neighborhood_row_is_flagged() {
        let sample = Sample::univariate(vec![0.0, 0.1], vec![1.0, 2.0]).unwrap();
        let spec = KernelSpec::biquadratic(1).unwrap();
        let taus = Taus::harmonic(2).unwrap();
        let row = estimate_at(&sample, &spec, 0.05, 0.9, 0.95, &taus, 1.0, 0.05, 5.0);
        assert_eq!(row.status, "empty_neighborhood");
        assert_eq!(row.density, Some(0.0));
        assert_eq!(row.rectm_weissman, None);
        assert_eq!(row.ci_status, "no_estimate");
    }
}
