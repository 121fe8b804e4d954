//! Wide-format CSV ingestion: header row required, `.` decimal separator,
//! `NA` or empty cells drop the whole row (reported on stderr). Long-format
//! group data is rejected with a conversion hint.

use crate::CliError;

#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub columns: Vec<String>,
    /// Rectangular rows after NA dropping.
    pub rows: Vec<Vec<f64>>,
    /// Per-column values ignoring other columns' NAs (for independent,
    /// possibly unequal-size groups).
    pub column_values: Vec<Vec<f64>>,
    pub dropped_rows: usize,
    pub source: String,
}

fn is_na(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na")
}

pub fn load_csv(path: &str) -> Result<CsvDataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{path}: {e}")))?;
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("{path}: {e}")))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if columns.is_empty() {
        return Err(CliError::input(format!("{path}: no columns")));
    }
    let p = columns.len();
    let mut rows = Vec::new();
    let mut column_values = vec![Vec::new(); p];
    let mut dropped = 0usize;
    for (ridx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            CliError::input(format!(
                "{path}: row {} is malformed: {e} (wide format required; convert long-format group data to one column per group)",
                ridx + 2
            ))
        })?;
        if record.len() != p {
            return Err(CliError::input(format!(
                "{path}: row {} has {} cells, expected {} (wide format: one column per group/variable)",
                ridx + 2,
                record.len(),
                p
            )));
        }
        let mut row = Vec::with_capacity(p);
        let mut has_na = false;
        for (cidx, cell) in record.iter().enumerate() {
            if is_na(cell) {
                has_na = true;
                row.push(f64::NAN);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                CliError::input(format!(
                    "{path}: row {}, column '{}': cannot parse '{}' as a number",
                    ridx + 2,
                    self_or_index(&columns, cidx),
                    cell
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(format!(
                    "{path}: row {}, column '{}': non-finite value",
                    ridx + 2,
                    self_or_index(&columns, cidx)
                )));
            }
            column_values[cidx].push(v);
            row.push(v);
        }
        if has_na {
            dropped += 1;
        } else {
            rows.push(row);
        }
    }
    if dropped > 0 {
        eprintln!("warning: dropped {dropped} row(s) containing NA/empty cells from {path}");
    }
    Ok(CsvDataset {
        columns,
        rows,
        column_values,
        dropped_rows: dropped,
        source: path.to_string(),
    })
}

fn self_or_index(columns: &[String], idx: usize) -> String {
    columns
        .get(idx)
        .cloned()
        .unwrap_or_else(|| format!("#{idx}"))
}

impl CsvDataset {
    pub fn sample(&self) -> Result<artest_core::Sample, CliError> {
        artest_core::Sample::from_rows(&self.rows)
            .map_err(|e| CliError::input(format!("{}: {e}", self.source)))
    }
}
