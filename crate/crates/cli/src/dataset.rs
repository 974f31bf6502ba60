use std::path::Path;

use dcorkit::PairedSample;
use ndarray::Array2;

use crate::{CliError, CliResult};

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub xdim: usize,
    pub ydim: usize,
    /// `None` detects a header: a first row with no numeric cell.
    pub header: Option<bool>,
    pub delimiter: char,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self { xdim: 1, ydim: 1, header: None, delimiter: ',' }
    }
}

fn is_number(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Reads `xdim` X columns followed by `ydim` Y columns. Errors name the
/// 1-based line of the offending row.
pub fn read_dataset(path: &Path, spec: &DatasetSpec) -> CliResult<PairedSample> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text, spec)
}

pub fn parse_dataset(text: &str, spec: &DatasetSpec) -> CliResult<PairedSample> {
    if spec.xdim == 0 || spec.ydim == 0 {
        return Err(CliError::Input("--xdim and --ydim must be at least 1".into()));
    }
    if !spec.delimiter.is_ascii() {
        return Err(CliError::Input("delimiter must be an ASCII character".into()));
    }
    let width = spec.xdim + spec.ydim;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(spec.delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| CliError::Input(format!("line {line}: {e}")))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if i == 0 {
            let skip = spec.header.unwrap_or_else(|| !record.iter().any(is_number));
            if skip {
                continue;
            }
        }
        if record.len() != width {
            return Err(CliError::Input(format!(
                "line {line}: expected {width} columns ({} X + {} Y), found {}",
                spec.xdim,
                spec.ydim,
                record.len()
            )));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| CliError::Input(format!("line {line}, column {}: '{cell}' is not a number", c + 1)))?;
            if !v.is_finite() {
                return Err(CliError::Input(format!("line {line}, column {}: non-finite value", c + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Input("dataset has no data rows".into()));
    }
    let all = Array2::from_shape_vec((rows, width), values).expect("row-major shape");
    let xs = all.slice(ndarray::s![.., ..spec.xdim]).to_owned();
    let ys = all.slice(ndarray::s![.., spec.xdim..]).to_owned();
    Ok(PairedSample::new(xs, ys)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detection() {
        let s = parse_dataset("x,y\n1,2\n3,4\n", &DatasetSpec::default()).unwrap();
        assert_eq!(s.n(), 2);
        let s = parse_dataset("1,2\n3,4\n", &DatasetSpec::default()).unwrap();
        assert_eq!(s.n(), 2);
    }

    #[test]
    fn row_numbered_errors() {
        let err = parse_dataset("x,y\n1,2\n3,oops\n", &DatasetSpec::default()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_dataset("1,2\n3\n", &DatasetSpec::default()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(parse_dataset("1,nan\n", &DatasetSpec::default()).is_err());
    }

    #[test]
    fn multivariate_split() {
        let spec = DatasetSpec { xdim: 2, ydim: 1, delimiter: ';', ..Default::default() };
        let s = parse_dataset("1;2;3\n4;5;6\n", &spec).unwrap();
        assert_eq!((s.p(), s.q()), (2, 1));
        assert_eq!(s.ys()[[1, 0]], 6.0);
    }
}
