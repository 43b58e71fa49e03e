use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{EcoError, Result};

/// How `load_csv` treats the final column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    /// Labels if every row ends in `-1` or `1` and there are at least two columns.
    #[default]
    Auto,
    /// The final column must hold `±1` labels.
    Last,
    /// Every column is a feature.
    None,
}

fn csv_error(path: &Path, line: usize, message: impl Into<String>) -> EcoError {
    EcoError::Csv {
        path: path.into(),
        line,
        message: message.into(),
    }
}

/// Reads comma-separated reals; a first line that does not parse is taken
/// as a header.
pub fn load_csv(path: impl AsRef<Path>, labels: LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            csv_error(path, line, e.to_string())
        })?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if k == 0 => continue,
            Err(_) => {
                let bad = record.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or("");
                return Err(csv_error(path, line, format!("non-numeric field {bad:?}")));
            }
        };
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(csv_error(path, line, format!("non-finite value {bad}")));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(csv_error(path, line, format!("expected {w} fields, found {}", row.len())));
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(EcoError::Empty("CSV file has no data rows"));
    }
    let is_label = |v: f64| v == 1.0 || v == -1.0;
    let labeled = match labels {
        LabelColumn::None => false,
        LabelColumn::Auto => rows[0].len() >= 2 && rows.iter().all(|r| is_label(r[r.len() - 1])),
        LabelColumn::Last => {
            if rows[0].len() < 2 {
                return Err(csv_error(path, 1, "a labeled row needs a feature and a label"));
            }
            if let Some(k) = rows.iter().position(|r| !is_label(r[r.len() - 1])) {
                let v = rows[k][rows[k].len() - 1];
                return Err(csv_error(path, k + 1, format!("label {v} is not -1 or 1")));
            }
            true
        }
    };
    if labeled {
        let t = rows.iter_mut().map(|r| r.pop().unwrap()).collect();
        Dataset::labeled(rows, t)
    } else {
        Dataset::unlabeled(rows)
    }
}

/// Writes `x1,…,xp[,label]` with a header; values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| csv_error(path.as_ref(), 0, e.to_string()))?;
    let mut header: Vec<String> = (1..=data.dim()).map(|k| format!("x{k}")).collect();
    if data.labels.is_some() {
        header.push("label".into());
    }
    let wrap = |e: csv::Error| csv_error(path.as_ref(), 0, e.to_string());
    w.write_record(&header).map_err(wrap)?;
    for (i, x) in data.points.iter().enumerate() {
        let mut fields: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        if let Some(l) = &data.labels {
            fields.push(l[i].to_string());
        }
        w.write_record(&fields).map_err(wrap)?;
    }
    w.flush()?;
    Ok(())
}
