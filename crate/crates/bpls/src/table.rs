//! CSV input and output.
//!
//! Row numbers in errors count data rows from 1 (the header is row 0);
//! columns count from 1.

use std::collections::HashSet;
use std::path::Path;

use bpls_core::data::RawDataset;
use bpls_core::predict::PredictiveResult;
use bpls_core::Matrix;

use crate::error::{CliError, Result};

/// Which columns of a file are responses.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvLayout {
    pub delimiter: u8,
    pub responses: Vec<String>,
}

impl CsvLayout {
    pub fn new(responses: Vec<String>) -> Self {
        CsvLayout { delimiter: b',', responses }
    }
}

struct Table {
    headers: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null")
}

fn read_table(path: &Path, delimiter: u8) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| CliError::Csv { path: path.into(), source })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| CliError::Csv { path: path.into(), source })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut seen = HashSet::new();
    for (j, h) in headers.iter().enumerate() {
        if !seen.insert(h.as_str()) {
            return Err(CliError::Parse { path: path.into(), row: 0, col: j + 1, message: format!("duplicate column `{h}`") });
        }
    }
    let mut cells = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|source| match source.kind() {
            csv::ErrorKind::UnequalLengths { len, expected_len, .. } => CliError::Parse {
                path: path.into(),
                row,
                col: (*len).min(*expected_len) as usize + 1,
                message: format!("{len} fields, header has {expected_len}"),
            },
            _ => CliError::Csv { path: path.into(), source },
        })?;
        let mut values = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                values.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(Some(v)),
                _ => {
                    return Err(CliError::Parse {
                        path: path.into(),
                        row,
                        col: j + 1,
                        message: format!("`{cell}` is not a finite number"),
                    })
                }
            }
        }
        cells.push(values);
    }
    Ok(Table { headers, cells })
}

impl Table {
    fn index_of(&self, path: &Path, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn { path: path.into(), name: name.to_string() })
    }

    /// Rows (1-based) with a missing cell in any of `cols`.
    fn incomplete_rows(&self, cols: &[usize]) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| cols.iter().any(|&j| self.cells[i][j].is_none())).map(|i| i + 1).collect()
    }

    fn matrix(&self, cols: &[usize]) -> Matrix {
        Matrix::from_fn(self.cells.len(), cols.len(), |i, j| self.cells[i][cols[j]].unwrap_or(f64::NAN))
    }
}

/// Loads a dataset whose responses are named by `layout`; every other
/// column is a predictor.
pub fn load_csv(path: &Path, layout: &CsvLayout) -> Result<RawDataset> {
    if layout.responses.is_empty() {
        return Err(CliError::Usage("at least one response column must be named".into()));
    }
    let table = read_table(path, layout.delimiter)?;
    let y_cols = layout.responses.iter().map(|n| table.index_of(path, n)).collect::<Result<Vec<_>>>()?;
    let x_cols: Vec<usize> = (0..table.headers.len()).filter(|j| !y_cols.contains(j)).collect();
    let all: Vec<usize> = x_cols.iter().chain(&y_cols).copied().collect();
    let bad = table.incomplete_rows(&all);
    if !bad.is_empty() {
        return Err(CliError::MissingCells { path: path.into(), rows: bad });
    }
    let x_names = x_cols.iter().map(|&j| table.headers[j].clone()).collect();
    Ok(RawDataset::new(table.matrix(&x_cols), table.matrix(&y_cols), x_names, layout.responses.clone())?)
}

/// Predictors for a fitted model, plus the responses when the file has them.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionInput {
    pub x: Matrix,
    pub y: Option<Matrix>,
}

/// Loads new predictors. Columns other than the known responses must match
/// `x_names` exactly, in order.
pub fn load_predictors(path: &Path, delimiter: u8, x_names: &[String], y_names: &[String]) -> Result<PredictionInput> {
    let table = read_table(path, delimiter)?;
    let x_cols: Vec<usize> = (0..table.headers.len()).filter(|&j| !y_names.contains(&table.headers[j])).collect();
    let found: Vec<&String> = x_cols.iter().map(|&j| &table.headers[j]).collect();
    if found.len() != x_names.len() {
        return Err(CliError::SchemaMismatch {
            expected: format!("{} predictor columns", x_names.len()),
            found: format!("{} in {}", found.len(), path.display()),
        });
    }
    if let Some(k) = (0..found.len()).find(|&k| *found[k] != x_names[k]) {
        return Err(CliError::SchemaMismatch {
            expected: format!("predictor {} named `{}`", k + 1, x_names[k]),
            found: format!("`{}`", found[k]),
        });
    }
    let y_cols: Option<Vec<usize>> = y_names.iter().map(|n| table.headers.iter().position(|h| h == n)).collect();
    let mut used = x_cols.clone();
    used.extend(y_cols.iter().flatten());
    let bad = table.incomplete_rows(&used);
    if !bad.is_empty() {
        return Err(CliError::MissingCells { path: path.into(), rows: bad });
    }
    if table.cells.is_empty() {
        return Err(CliError::Usage(format!("{} has no data rows", path.display())));
    }
    Ok(PredictionInput { x: table.matrix(&x_cols), y: y_cols.map(|c| table.matrix(&c)) })
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| CliError::Csv { path: path.into(), source })
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    let wrap = |source| CliError::Csv { path: path.into(), source };
    w.write_record(&header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One row per test sample: `<trait>_mean, <trait>_lo, <trait>_hi` on the
/// original scale, then `<trait>_mean_t, <trait>_var_t, <trait>_lo_t,
/// <trait>_hi_t` on the transformed scale when `transformed` is given.
pub fn write_predictions(
    path: &Path,
    y_names: &[String],
    original: &PredictiveResult,
    transformed: Option<&PredictiveResult>,
) -> Result<()> {
    let mut header = Vec::new();
    for n in y_names {
        header.extend([format!("{n}_mean"), format!("{n}_lo"), format!("{n}_hi")]);
    }
    if transformed.is_some() {
        for n in y_names {
            header.extend([format!("{n}_mean_t"), format!("{n}_var_t"), format!("{n}_lo_t"), format!("{n}_hi_t")]);
        }
    }
    let rows = (0..original.mean.rows()).map(|i| {
        let mut row = Vec::new();
        for r in 0..y_names.len() {
            row.extend([original.mean[(i, r)], original.lower[(i, r)], original.upper[(i, r)]].map(fmt_f64));
        }
        if let Some(t) = transformed {
            for r in 0..y_names.len() {
                let var = t.variance.as_ref().map_or(f64::NAN, |v| v[(i, r)]);
                row.extend([t.mean[(i, r)], var, t.lower[(i, r)], t.upper[(i, r)]].map(fmt_f64));
            }
        }
        row
    });
    write_rows(path, header, rows)
}

/// Predictors followed by responses, with their names as the header.
pub fn write_dataset(path: &Path, d: &RawDataset) -> Result<()> {
    let header: Vec<String> = d.x_names.iter().chain(&d.y_names).cloned().collect();
    let rows = (0..d.n()).map(|i| d.x.row(i).iter().chain(d.y.row(i)).map(|&v| fmt_f64(v)).collect());
    write_rows(path, header, rows)
}

/// A plain numeric matrix with the given header.
pub fn write_matrix(path: &Path, header: &[String], m: &Matrix) -> Result<()> {
    let rows = (0..m.rows()).map(|i| m.row(i).iter().map(|&v| fmt_f64(v)).collect());
    write_rows(path, header.to_vec(), rows)
}

/// Arbitrary string rows.
pub fn write_records(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_rows(path, header.iter().map(|s| s.to_string()).collect(), rows.iter().cloned())
}
