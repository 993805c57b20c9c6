//! CSV datasets.

use std::path::Path;

use sparsefit_core::{Dataset, Family, Matrix};

use crate::error::{CliError, CliResult};

/// A dataset read from CSV together with its predictor column names.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub predictors: Vec<String>,
}

/// Reads a headed CSV file. `response` names the response column; every
/// other column is a predictor. All cells must parse as numbers.
pub fn load_csv(path: &Path, response: &str, family: Family, intercept: bool) -> CliResult<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("{}: bad header: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    let ycol = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| CliError::Data(format!("{}: no column named '{response}'", path.display())))?;
    let predictors: Vec<String> = headers.iter().enumerate().filter(|&(j, _)| j != ycol).map(|(_, h)| h.clone()).collect();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(predictors.len());
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: row {}, column '{}': '{cell}' is not a number",
                    path.display(),
                    i + 1,
                    headers[j]
                ))
            })?;
            if j == ycol {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let x = if predictors.is_empty() {
        Matrix::zeros(rows.len(), 0)
    } else {
        Matrix::from_rows(&rows)
    };
    let dataset = Dataset::new(x, y, family, intercept)?;
    Ok(LoadedData { dataset, predictors })
}
