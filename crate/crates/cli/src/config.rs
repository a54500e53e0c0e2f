//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rectm::selection::linspace;
use rectm::KernelProfile;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Estimate,
    Select,
    Simulate,
    Ci,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Estimate => "estimate",
            Self::Select => "select",
            Self::Simulate => "simulate",
            Self::Ci => "ci",
        }
    }
}

/// A fixed value or `cv` for cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tune {
    Fixed(f64),
    Cv,
}

impl std::str::FromStr for Tune {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "cv" | "auto" => Ok(Self::Cv),
            t => t
                .parse()
                .map(Self::Fixed)
                .map_err(|_| format!("expected a number or `cv`, got `{s}`")),
        }
    }
}

impl<'de> Deserialize<'de> for Tune {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Self::Fixed(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Evaluation grid: explicit points or `lo:hi:count`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Points(Vec<f64>),
    Range { lo: f64, hi: f64, count: usize },
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Self::Points(p) => p.clone(),
            Self::Range { lo, hi, count } => linspace(*lo, *hi, *count),
        }
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected `lo:hi:count` or a comma-separated list, got `{s}`");
        if s.contains(':') {
            let parts: Vec<&str> = s.split(':').map(str::trim).collect();
            let [lo, hi, count] = parts.as_slice() else {
                return Err(bad());
            };
            return Ok(Self::Range {
                lo: lo.parse().map_err(|_| bad())?,
                hi: hi.parse().map_err(|_| bad())?,
                count: count.parse().map_err(|_| bad())?,
            });
        }
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()
            .map(Self::Points)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<f64>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) => Ok(Self::Points(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split([',', ':']).map(str::trim).collect();
    match parts.as_slice() {
        [lo, hi] => match (lo.parse(), hi.parse()) {
            (Ok(lo), Ok(hi)) => Ok((lo, hi)),
            _ => Err(format!("expected `lo,hi`, got `{s}`")),
        },
        _ => Err(format!("expected `lo,hi`, got `{s}`")),
    }
}

/// Every setting as it may appear in the configuration file. All optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub input: Option<PathBuf>,
    pub dgp: Option<String>,
    pub n: Option<usize>,
    pub x_col: Option<String>,
    pub y_col: Option<String>,
    pub log_x: Option<bool>,
    pub x_range: Option<(f64, f64)>,
    pub delimiter: Option<char>,
    pub kernel: Option<String>,
    pub h: Option<Tune>,
    pub alpha: Option<Tune>,
    pub beta: Option<f64>,
    pub k: Option<f64>,
    #[serde(rename = "J", alias = "j")]
    pub j: Option<usize>,
    pub theta: Option<f64>,
    pub grid: Option<GridSpec>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replications: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Estimation, selection and simulation for expectile-based conditional
/// tail moments.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "rectm", version)]
pub struct Flags {
    /// TOML file with default settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// Delimited input file with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Built-in data generator (`burr`) instead of an input file.
    #[arg(long)]
    pub dgp: Option<String>,
    /// Sample size drawn from the generator.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub x_col: Option<String>,
    #[arg(long)]
    pub y_col: Option<String>,
    /// Take the natural logarithm of the covariate.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub log_x: Option<bool>,
    /// Keep rows whose (transformed) covariate lies in `lo,hi`.
    #[arg(long, value_parser = parse_range)]
    pub x_range: Option<(f64, f64)>,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// biquadratic, epanechnikov or uniform.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Bandwidth, or `cv`.
    #[arg(long)]
    pub h: Option<Tune>,
    /// Intermediate level, or `cv`.
    #[arg(long)]
    pub alpha: Option<Tune>,
    /// Extreme level; defaults to 1 - 1/n.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Moment order.
    #[arg(long)]
    pub k: Option<f64>,
    /// Number of harmonic weights.
    #[arg(long = "J")]
    pub j: Option<usize>,
    /// Interval error level.
    #[arg(long)]
    pub theta: Option<f64>,
    /// `lo:hi:count` or comma-separated covariate points.
    #[arg(long)]
    pub grid: Option<GridSpec>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    File {
        path: PathBuf,
        x_col: String,
        y_col: String,
        log_x: bool,
        x_range: Option<(f64, f64)>,
        delimiter: char,
    },
    Burr {
        n: usize,
    },
}

/// Validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub source: DataSource,
    #[serde(serialize_with = "kernel_name")]
    pub kernel: KernelProfile,
    pub h: Tune,
    pub alpha: Tune,
    /// `None` means `1 - 1/n` with `n` the retained sample size.
    pub beta: Option<f64>,
    pub k: f64,
    pub j: usize,
    pub theta: f64,
    /// `None` means the default grid for the data source.
    pub grid: Option<Vec<f64>>,
    pub seed: u64,
    /// Left out of recorded metadata so that runs differing only in
    /// their output directory produce identical files.
    #[serde(skip)]
    pub out: PathBuf,
    pub replications: usize,
}

fn kernel_name<S: serde::Serializer>(k: &KernelProfile, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(k.name())
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    /// Loads the file named by `--config`, if any, and applies the flags.
    pub fn from_flags(flags: Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::resolve(file, flags)
    }

    pub fn resolve(file: FileConfig, flags: Flags) -> Result<Self, CliError> {
        let command = flags
            .command
            .or(file.command)
            .ok_or_else(|| config_err("no command given (estimate, select, simulate or ci)"))?;
        let input = flags.input.or(file.input);
        let dgp = flags.dgp.or(file.dgp);
        let n = flags.n.or(file.n);
        let source = match (input, dgp) {
            (Some(_), Some(_)) => return Err(config_err("give either an input file or a generator, not both")),
            (None, None) if command == Command::Simulate => DataSource::Burr { n: n.unwrap_or(2000) },
            (None, None) => return Err(config_err("no data source: give --input or --dgp")),
            (Some(path), None) => {
                if command == Command::Simulate {
                    return Err(config_err("simulate draws from the generator; drop --input"));
                }
                if n.is_some() {
                    return Err(config_err("--n applies only to the generator"));
                }
                let delimiter = flags.delimiter.or(file.delimiter).unwrap_or(',');
                if !delimiter.is_ascii() {
                    return Err(config_err("delimiter must be a single ASCII character"));
                }
                DataSource::File {
                    path,
                    x_col: flags
                        .x_col
                        .or(file.x_col)
                        .ok_or_else(|| config_err("--x-col is required with --input"))?,
                    y_col: flags
                        .y_col
                        .or(file.y_col)
                        .ok_or_else(|| config_err("--y-col is required with --input"))?,
                    log_x: flags.log_x.or(file.log_x).unwrap_or(false),
                    x_range: flags.x_range.or(file.x_range),
                    delimiter,
                }
            }
            (None, Some(name)) => {
                if name != "burr" {
                    return Err(config_err(format!("unknown generator `{name}`; only `burr` is built in")));
                }
                DataSource::Burr { n: n.unwrap_or(2000) }
            }
        };
        if let DataSource::Burr { n } = source {
            if n < 2 {
                return Err(config_err("generator sample size must be at least 2"));
            }
        }
        let kernel_text = flags.kernel.or(file.kernel).unwrap_or_else(|| "biquadratic".into());
        let kernel = KernelProfile::from_name(&kernel_text)
            .ok_or_else(|| config_err(format!("unknown kernel `{kernel_text}`")))?;
        let (default_h, default_alpha) = if command == Command::Simulate {
            (Tune::Fixed(0.1), Tune::Fixed(0.95))
        } else {
            (Tune::Cv, Tune::Cv)
        };
        let config = Self {
            command,
            source,
            kernel,
            h: flags.h.or(file.h).unwrap_or(default_h),
            alpha: flags.alpha.or(file.alpha).unwrap_or(default_alpha),
            beta: flags.beta.or(file.beta),
            k: flags.k.or(file.k).unwrap_or(1.0),
            j: flags.j.or(file.j).unwrap_or(2),
            theta: flags.theta.or(file.theta).unwrap_or(0.05),
            grid: flags.grid.or(file.grid).map(|g| g.points()),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("rectm-out")),
            replications: flags.replications.or(file.replications).unwrap_or(50),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if let Tune::Fixed(h) = self.h {
            if !(h.is_finite() && h > 0.0) {
                return Err(config_err(format!("bandwidth must be positive, got {h}")));
            }
        }
        if let Tune::Fixed(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(config_err(format!("alpha must lie in (0, 1), got {a}")));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b < 1.0) {
                return Err(config_err(format!("beta must lie in (0, 1), got {b}")));
            }
            if let Tune::Fixed(a) = self.alpha {
                if b < a {
                    return Err(config_err(format!("beta {b} is below alpha {a}")));
                }
            }
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(config_err(format!("k must be nonnegative, got {}", self.k)));
        }
        if self.j < 2 {
            return Err(config_err(format!("J must be at least 2, got {}", self.j)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(config_err(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if let Some(grid) = &self.grid {
            if grid.is_empty() && self.command != Command::Simulate {
                return Err(config_err("evaluation grid is empty"));
            }
            if grid.iter().any(|x| !x.is_finite()) {
                return Err(config_err("grid points must be finite"));
            }
        }
        if let DataSource::File { x_range: Some((lo, hi)), .. } = self.source {
            if !(lo <= hi) {
                return Err(config_err(format!("empty covariate range [{lo}, {hi}]")));
            }
        }
        if self.command == Command::Simulate && self.replications == 0 {
            return Err(config_err("need at least one replication"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(args: &[&str]) -> Flags {
        Flags::try_parse_from(std::iter::once("rectm").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str(
            "command = \"estimate\"\ndgp = \"burr\"\nh = 0.2\nalpha = \"cv\"\nJ = 3\ngrid = [0.25, 0.5]\n",
        )
        .unwrap();
        let c = RunConfig::resolve(file.clone(), flags(&["--h", "0.1", "--alpha", "0.9"])).unwrap();
        assert_eq!(c.h, Tune::Fixed(0.1));
        assert_eq!(c.alpha, Tune::Fixed(0.9));
        assert_eq!(c.j, 3);
        assert_eq!(c.grid, Some(vec![0.25, 0.5]));
        let c = RunConfig::resolve(file, Flags::default()).unwrap();
        assert_eq!(c.h, Tune::Fixed(0.2));
        assert_eq!(c.alpha, Tune::Cv);
    }

    #[test]
    fn grid_and_range_syntax() {
        assert_eq!(
            "0.05:1:20".parse::<GridSpec>().unwrap().points().len(),
            20
        );
        assert_eq!(
            "0.1, 0.2".parse::<GridSpec>().unwrap(),
            GridSpec::Points(vec![0.1, 0.2])
        );
        assert!("0.1:0.2".parse::<GridSpec>().is_err());
        assert_eq!(parse_range("2.9,3.9").unwrap(), (2.9, 3.9));
        assert_eq!("cv".parse::<Tune>().unwrap(), Tune::Cv);
        assert!("abc".parse::<Tune>().is_err());
    }

    #[test]
    fn rejects_bad_settings() {
        let bad = [
            vec!["--command", "estimate"],
            vec!["--command", "estimate", "--dgp", "burr", "--input", "a.csv"],
            vec!["--command", "estimate", "--dgp", "pareto"],
            vec!["--command", "estimate", "--dgp", "burr", "--alpha", "1.5"],
            vec!["--command", "estimate", "--dgp", "burr", "--alpha", "0.9", "--beta", "0.8"],
            vec!["--command", "estimate", "--dgp", "burr", "--J", "1"],
            vec!["--command", "estimate", "--dgp", "burr", "--kernel", "gauss"],
            vec!["--command", "estimate", "--input", "a.csv", "--x-col", "x"],
            vec!["--command", "simulate", "--input", "a.csv"],
        ];
        for args in bad {
            let err = RunConfig::resolve(FileConfig::default(), flags(&args)).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{args:?}");
        }
        let unknown: Result<FileConfig, _> = toml::from_str("bandwidth = 0.1");
        assert!(unknown.is_err());
    }

    #[test]
    fn simulate_defaults_are_fixed() {
        let c = RunConfig::resolve(FileConfig::default(), flags(&["--command", "simulate"])).unwrap();
        assert_eq!(c.h, Tune::Fixed(0.1));
        assert_eq!(c.alpha, Tune::Fixed(0.95));
        assert_eq!(c.source, DataSource::Burr { n: 2000 });
    }
}
