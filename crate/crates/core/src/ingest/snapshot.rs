use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::Target;

/// One county row of a wide-format snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountyRow {
    pub state: String,
    pub admin2: String,
    /// Present only in the death file.
    pub population: Option<u64>,
    /// Cumulative counts, one per date column.
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSnapshot {
    pub target: Target,
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<CountyRow>,
}

/// Parses an `M/D/YY` header cell.
fn parse_header_date(cell: &str) -> Option<NaiveDate> {
    let mut parts = cell.trim().split('/');
    let m: u32 = parts.next()?.parse().ok()?;
    let d: u32 = parts.next()?.parse().ok()?;
    let y = parts.next()?;
    if parts.next().is_some() || y.len() != 2 {
        return None;
    }
    let y: i32 = y.parse().ok()?;
    NaiveDate::from_ymd_opt(2000 + y, m, d)
}

fn parse_count(cell: &str, row: usize, column: usize) -> Result<f64> {
    let err = |message: String| Error::Parse { row, column, message };
    let trimmed = cell.trim();
    let v: f64 = trimmed.parse().map_err(|_| err(format!("not a number: `{trimmed}`")))?;
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
        return Err(err(format!("expected a non-negative integer count, got `{trimmed}`")));
    }
    Ok(v)
}

/// Parses a JHU CSSE US time-series CSV.
///
/// Rows and columns in error locations are 1-based, with the header as row 1.
pub fn parse_snapshot(csv_text: &str, target: Target) -> Result<RawSnapshot> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            column: 0,
            message: e.to_string(),
        })?
        .clone();

    let state_col = headers
        .iter()
        .position(|h| h.trim() == "Province_State")
        .ok_or_else(|| Error::MissingColumn("Province_State".into()))?;
    let admin_col = headers.iter().position(|h| h.trim() == "Admin2");
    let pop_col = headers.iter().position(|h| h.trim() == "Population");

    let date_cols: Vec<(usize, NaiveDate)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| parse_header_date(h).map(|d| (i, d)))
        .collect();
    if date_cols.is_empty() {
        return Err(Error::MissingColumn("date columns (M/D/YY)".into()));
    }
    for w in date_cols.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(Error::Parse {
                row: 1,
                column: w[1].0 + 1,
                message: format!("date header not increasing: {} after {}", w[1].1, w[0].1),
            });
        }
    }

    let mut rows = Vec::new();
    for (ri, record) in reader.records().enumerate() {
        let row_no = ri + 2;
        let record = record.map_err(|e| Error::Parse {
            row: row_no,
            column: 0,
            message: e.to_string(),
        })?;
        let population = match pop_col {
            Some(c) => Some(parse_count(&record[c], row_no, c + 1)? as u64),
            None => None,
        };
        let counts = date_cols
            .iter()
            .map(|&(c, _)| parse_count(&record[c], row_no, c + 1))
            .collect::<Result<Vec<_>>>()?;
        rows.push(CountyRow {
            state: record[state_col].trim().to_string(),
            admin2: admin_col.map(|c| record[c].trim().to_string()).unwrap_or_default(),
            population,
            counts,
        });
    }

    Ok(RawSnapshot {
        target,
        dates: date_cols.into_iter().map(|(_, d)| d).collect(),
        rows,
    })
}
