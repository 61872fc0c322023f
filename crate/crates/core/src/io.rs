//! Reading samples and writing density estimates.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::estimator::{DensityEstimate, Sample, Weight};

/// Reads one value per line, or column `column` (0-based) of a comma
/// separated file. Blank lines and lines starting with `#` are skipped; a
/// first line that does not parse is treated as a header.
pub fn read_values<R: BufRead>(reader: R, column: Option<usize>) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    let mut first = true;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let field = match column {
            Some(c) => trimmed.split(',').nth(c).map(str::trim).ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("no column {c}"),
            })?,
            None => trimmed,
        };
        let value: f64 = match field.parse() {
            Ok(v) => v,
            Err(_) if first && column.is_some() => {
                first = false;
                continue;
            }
            Err(_) => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("cannot parse '{field}' as a number"),
                })
            }
        };
        first = false;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("value {value} is not strictly positive"),
            });
        }
        values.push(value);
    }
    Ok(values)
}

pub fn read_sample<R: BufRead>(reader: R, column: Option<usize>, weight: Weight) -> Result<Sample> {
    Sample::with_weight(read_values(reader, column)?, weight)
}

pub fn read_sample_file(path: &std::path::Path, column: Option<usize>, weight: Weight) -> Result<Sample> {
    let file = std::fs::File::open(path)?;
    read_sample(std::io::BufReader::new(file), column, weight)
}

/// Two-column `y,fhat` CSV.
pub fn write_estimate<W: Write>(mut out: W, est: &DensityEstimate) -> Result<()> {
    writeln!(out, "y,fhat")?;
    for (y, f) in est.points() {
        writeln!(out, "{y},{f}")?;
    }
    Ok(())
}

/// One value per line.
pub fn write_values<W: Write>(mut out: W, values: &[f64]) -> Result<()> {
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}
