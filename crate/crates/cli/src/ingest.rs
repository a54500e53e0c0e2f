//! Delimited-text ingestion with per-row rejection.

use std::path::Path;

use rectm::Sample;
use serde::Serialize;

use crate::CliError;

/// Which columns hold the covariate and the response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub x_col: String,
    pub y_col: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Transforms {
    /// Natural logarithm of the covariate; nonpositive values are rejected.
    pub log_x: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRow {
    /// One-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub read: usize,
    pub kept: usize,
    /// Rows outside the covariate range.
    pub filtered: usize,
    pub rejected: Vec<RejectedRow>,
}

impl IngestReport {
    pub fn dropped(&self) -> usize {
        self.filtered + self.rejected.len()
    }
}

fn parse_field(record: &csv::StringRecord, index: usize, name: &str) -> Result<f64, String> {
    let text = record.get(index).ok_or_else(|| format!("missing field `{name}`"))?.trim();
    let v: f64 = text
        .parse()
        .map_err(|_| format!("`{name}` is not numeric: `{text}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{name}` is not finite: `{text}`"))
    }
}

/// Reads `(x, y)` pairs, applies the transforms and then the inclusive range
/// filter. Unparseable rows are rejected, not fatal.
pub fn ingest_csv(
    path: &Path,
    mapping: &ColumnMapping,
    transforms: Transforms,
    filter_range: Option<(f64, f64)>,
    delimiter: u8,
) -> Result<(Sample, IngestReport), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Config(format!("{}: no column named `{name}`", path.display())))
    };
    let (xi, yi) = (column(&mapping.x_col)?, column(&mapping.y_col)?);

    let mut report = IngestReport::default();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for result in reader.records() {
        report.read += 1;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.rejected.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        let parsed = parse_field(&record, xi, &mapping.x_col).and_then(|x| {
            let y = parse_field(&record, yi, &mapping.y_col)?;
            if !transforms.log_x {
                return Ok((x, y));
            }
            if x > 0.0 {
                Ok((x.ln(), y))
            } else {
                Err(format!("cannot take the log of covariate {x}"))
            }
        });
        match parsed {
            Ok((x, y)) => {
                if filter_range.is_some_and(|(lo, hi)| !(x >= lo && x <= hi)) {
                    report.filtered += 1;
                } else {
                    xs.push(x);
                    ys.push(y);
                }
            }
            Err(reason) => report.rejected.push(RejectedRow { line, reason }),
        }
    }
    report.kept = xs.len();
    if xs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no usable rows ({} read, {} rejected, {} outside the range)",
            path.display(),
            report.read,
            report.rejected.len(),
            report.filtered
        )));
    }
    let sample = Sample::univariate(xs, ys).map_err(|e| CliError::Data(e.to_string()))?;
    Ok((sample, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn mapping() -> ColumnMapping {
        ColumnMapping {
            x_col: "x".into(),
            y_col: "y".into(),
        }
    }

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn all_valid_rows() {
        let f = file("x,y\n0.1,1\n0.2,2\n0.3,3\n");
        let (s, r) = ingest_csv(f.path(), &mapping(), Transforms::default(), None, b',').unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(r.dropped(), 0);
        assert_eq!(s.response(2), 3.0);
    }

    #[test]
    fn bad_row_is_dropped() {
        let f = file("y;x;note\n1;0.1;a\noops;0.2;b\n3;0.3;c\n");
        let (s, r) = ingest_csv(f.path(), &mapping(), Transforms::default(), None, b';').unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(r.read, 3);
        assert_eq!(r.rejected.len(), 1);
        assert_eq!(r.rejected[0].line, 3);
        assert_eq!(r.dropped(), 1);
    }

    #[test]
    fn log_and_range() {
        let f = file("x,y\n1,1\n2.718281828459045,2\n0,3\n20,4\n");
        let (s, r) = ingest_csv(
            f.path(),
            &mapping(),
            Transforms { log_x: true },
            Some((0.5, 2.0)),
            b',',
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.covariate(0)[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.rejected.len(), 1);
        assert_eq!(r.filtered, 2);
    }

    #[test]
    fn error_kinds() {
        let f = file("x,y\n1,a\n");
        let missing_col = ingest_csv(
            f.path(),
            &ColumnMapping {
                x_col: "x".into(),
                y_col: "z".into(),
            },
            Transforms::default(),
            None,
            b',',
        );
        assert!(matches!(missing_col, Err(CliError::Config(_))));
        let empty = ingest_csv(f.path(), &mapping(), Transforms::default(), None, b',');
        assert!(matches!(empty, Err(CliError::Data(_))));
        let absent = ingest_csv(
            Path::new("/nonexistent/data.csv"),
            &mapping(),
            Transforms::default(),
            None,
            b',',
        );
        assert!(matches!(absent, Err(CliError::Config(_))));
    }
}
