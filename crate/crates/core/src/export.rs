//! Shared helpers for the CSV and JSON artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Decimal with 17 significant digits; enough to round-trip any `f64`.
pub fn format_decimal(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Empty for `None`.
pub fn format_optional(v: Option<f64>) -> String {
    v.map(format_decimal).unwrap_or_default()
}

/// Writes `# schema: <schema>`, then the header and rows as comma-separated
/// fields. Fields must not contain commas, quotes, or newlines.
pub fn write_csv(path: &Path, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "# schema: {schema}").map_err(io)?;
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE, 0.0] {
            let s = format_decimal(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_decimal(1.0), "1.0000000000000000e0");
        assert_eq!(format_optional(None), "");
        assert_eq!(format_decimal(f64::NAN), "NaN");
    }
}
