//! Calendar-aligned univariate daily series and descriptive statistics.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moment convention used by [`summary_stats`], surfaced in reports.
pub const MOMENT_CONVENTION: &str = "variance: sample (n-1); skewness: adjusted Fisher-Pearson G1; \
kurtosis: bias-corrected excess G2; percentiles: linear interpolation between closest ranks";

/// A univariate daily series. Index `i` corresponds to `start + i` days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatedSeries {
    start: NaiveDate,
    values: Vec<f64>,
    label: String,
    /// Number of negative daily increments clamped to zero while deriving this series.
    #[serde(default)]
    clamped: usize,
}

impl DatedSeries {
    pub fn new(start: NaiveDate, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("series has no values".into()));
        }
        Ok(Self {
            start,
            values,
            label: label.into(),
            clamped: 0,
        })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start + Duration::days(index as i64)
    }

    /// Position of `date` in the series, if covered.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        if offset < 0 || offset as usize >= self.values.len() {
            None
        } else {
            Some(offset as usize)
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same dates and label, new values.
    pub fn map_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Mismatch {
                left: self.values.len(),
                right: values.len(),
            });
        }
        Ok(Self { values, ..self.clone() })
    }

    /// Inclusive sub-series `[start, end]`.
    pub fn slice_window(&self, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        let range_err = || Error::Range {
            start,
            end,
            cover_start: self.start,
            cover_end: self.end(),
        };
        if end < start {
            return Err(range_err());
        }
        let i0 = self.index_of(start).ok_or_else(range_err)?;
        let i1 = self.index_of(end).ok_or_else(range_err)?;
        Ok(Self {
            start,
            values: self.values[i0..=i1].to_vec(),
            label: self.label.clone(),
            clamped: 0,
        })
    }

    /// Appends a series that begins the day after `self` ends.
    pub fn concat(&self, next: &DatedSeries) -> Result<Self> {
        if next.start != self.end() + Duration::days(1) {
            return Err(Error::Invalid(format!(
                "series not adjacent: {} then {}",
                self.end(),
                next.start
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&next.values);
        Ok(Self {
            start: self.start,
            values,
            label: self.label.clone(),
            clamped: self.clamped + next.clamped,
        })
    }

    /// Daily increments of a cumulative series, negative corrections clamped to zero.
    pub fn cumulative_to_daily(&self) -> Result<Self> {
        if self.values.len() < 2 {
            return Err(Error::Length {
                needed: 2,
                got: self.values.len(),
            });
        }
        let mut clamped = 0;
        let values = self
            .values
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                if d < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    d
                }
            })
            .collect();
        Ok(Self {
            start: self.start + Duration::days(1),
            values,
            label: self.label.clone(),
            clamped,
        })
    }

    /// Running sum, seeded with `initial` before the first value.
    pub fn running_sum(&self, initial: f64) -> Self {
        let mut acc = initial;
        let values = self
            .values
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Self {
            start: self.start,
            values,
            label: self.label.clone(),
            clamped: 0,
        }
    }
}

/// Table-style descriptive statistics of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Percentile by linear interpolation between closest ranks (`q` in `[0, 1]`).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Descriptive statistics following [`MOMENT_CONVENTION`].
///
/// Skewness needs three values and kurtosis four; shorter inputs report NaN there.
/// A constant series reports zero skewness and kurtosis.
pub fn summary_stats(series: &DatedSeries) -> Result<SummaryStats> {
    summary_stats_of(series.values())
}

pub fn summary_stats_of(values: &[f64]) -> Result<SummaryStats> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Length { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;

    let variance = m2 * nf / (nf - 1.0);
    let (skewness, kurtosis) = if m2 == 0.0 {
        (0.0, 0.0)
    } else {
        let g1 = m3 / m2.powf(1.5);
        let g2 = m4 / (m2 * m2) - 3.0;
        let skew = if n >= 3 {
            g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
        } else {
            f64::NAN
        };
        let kurt = if n >= 4 {
            ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0))
        } else {
            f64::NAN
        };
        (skew, kurt)
    };

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(SummaryStats {
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        variance,
        p25: percentile_sorted(&sorted, 0.25),
        median: percentile_sorted(&sorted, 0.5),
        p75: percentile_sorted(&sorted, 0.75),
        skewness,
        kurtosis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn series(values: &[f64]) -> DatedSeries {
        DatedSeries::new(d(2020, 1, 22), values.to_vec(), "t").unwrap()
    }

    /// Moments computed term by term straight from the textbook definitions.
    fn oracle_moments(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let s = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let skew = n / ((n - 1.0) * (n - 2.0)) * x.iter().map(|v| ((v - mean) / s).powi(3)).sum::<f64>();
        let kurt = n * (n + 1.0) / ((n - 1.0) * (n - 2.0) * (n - 3.0))
            * x.iter().map(|v| ((v - mean) / s).powi(4)).sum::<f64>()
            - 3.0 * (n - 1.0).powi(2) / ((n - 2.0) * (n - 3.0));
        (skew, kurt)
    }

    #[test]
    fn constant_series_stats() {
        let s = summary_stats(&series(&[5.0; 4])).unwrap();
        assert_eq!(s.variance, 0.0);
        assert_eq!((s.min, s.max, s.mean), (5.0, 5.0, 5.0));
    }

    #[test]
    fn one_to_five() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let s = summary_stats(&series(&x)).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.median, 3.0);
        assert_eq!(s.p25, 2.0);
        assert_eq!(s.p75, 4.0);
        let (skew, kurt) = oracle_moments(&x);
        assert!((s.skewness - skew).abs() < 1e-12);
        assert!((s.kurtosis - kurt).abs() < 1e-12);
        assert!((s.kurtosis - (-1.2)).abs() < 1e-12);
    }

    #[test]
    fn skewed_sample_matches_oracle() {
        let x = [0.0, 0.0, 1.0, 3.0, 2.0, 59.0, 0.0, 4.0, 7.0, 1.0];
        let s = summary_stats(&series(&x)).unwrap();
        let (skew, kurt) = oracle_moments(&x);
        assert!((s.skewness - skew).abs() < 1e-12);
        assert!((s.kurtosis - kurt).abs() < 1e-10);
    }

    #[test]
    fn too_short() {
        assert!(matches!(summary_stats(&series(&[1.0])), Err(Error::Length { .. })));
    }

    #[test]
    fn daily_from_cumulative() {
        let daily = series(&[10.0, 15.0, 15.0, 30.0]).cumulative_to_daily().unwrap();
        assert_eq!(daily.values(), &[5.0, 0.0, 15.0]);
        assert_eq!(daily.start(), d(2020, 1, 23));
        assert_eq!(daily.clamped(), 0);

        let daily = series(&[10.0, 8.0, 12.0]).cumulative_to_daily().unwrap();
        assert_eq!(daily.values(), &[0.0, 4.0]);
        assert_eq!(daily.clamped(), 1);

        assert!(series(&[1.0]).cumulative_to_daily().is_err());
    }

    #[test]
    fn slicing() {
        let s = series(&(0..30).map(f64::from).collect::<Vec<_>>());
        let one = s.slice_window(d(2020, 1, 25), d(2020, 1, 25)).unwrap();
        assert_eq!(one.values(), &[3.0]);
        let a = s.slice_window(d(2020, 1, 23), d(2020, 2, 3)).unwrap();
        let again = a.slice_window(a.start(), a.end()).unwrap();
        assert_eq!(a, again);
        assert_eq!(a.len(), 12);
        assert!(s.slice_window(d(2020, 1, 1), d(2020, 1, 25)).is_err());
        assert!(s.slice_window(d(2020, 1, 25), d(2020, 3, 25)).is_err());
    }
}
