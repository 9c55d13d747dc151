//! The seven forecast-evaluation metrics.
//!
//! Degenerate inputs are reported, not rejected: MAPE skips zero actuals and counts them,
//! WAPE over all-zero actuals is NaN, and any non-finite score marks the report invalid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Metric identifiers in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Mae,
    Mse,
    Rmse,
    Mape,
    Wape,
    Rmsle,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Accuracy,
        Metric::Mae,
        Metric::Mse,
        Metric::Rmse,
        Metric::Mape,
        Metric::Wape,
        Metric::Rmsle,
    ];

    /// Accuracy is the only score where larger is better.
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Accuracy)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Mae => "MAE",
            Metric::Mse => "MSE",
            Metric::Rmse => "RMSE",
            Metric::Mape => "MAPE",
            Metric::Wape => "WAPE",
            Metric::Rmsle => "RMSLE",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown metric `{s}`")))
    }
}

/// Serializes non-finite floats as `null` and reads `null` back as NaN.
pub(crate) mod finite_or_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(with = "finite_or_null")]
    pub accuracy: f64,
    #[serde(with = "finite_or_null")]
    pub mape_pct: f64,
    #[serde(with = "finite_or_null")]
    pub wape_pct: f64,
    #[serde(with = "finite_or_null")]
    pub mae: f64,
    #[serde(with = "finite_or_null")]
    pub mse: f64,
    #[serde(with = "finite_or_null")]
    pub rmse: f64,
    #[serde(with = "finite_or_null")]
    pub rmsle: f64,
    pub mape_excluded_terms: usize,
    pub n: usize,
    pub valid: bool,
}

impl MetricReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Accuracy => self.accuracy,
            Metric::Mae => self.mae,
            Metric::Mse => self.mse,
            Metric::Rmse => self.rmse,
            Metric::Mape => self.mape_pct,
            Metric::Wape => self.wape_pct,
            Metric::Rmsle => self.rmsle,
        }
    }

    /// Score usable for comparison: non-finite scores, and MAPE computed over fewer
    /// than half of the points, yield `None`.
    pub fn usable(&self, metric: Metric) -> Option<f64> {
        let v = self.get(metric);
        if !v.is_finite() {
            return None;
        }
        if metric == Metric::Mape && 2 * self.mape_excluded_terms > self.n {
            return None;
        }
        Some(v)
    }
}

/// Scores `forecast` against `actual`. Actuals must be non-negative; forecasts are
/// expected to be clamped to non-negative by the caller.
pub fn evaluate(actual: &[f64], forecast: &[f64]) -> Result<MetricReport> {
    if actual.len() != forecast.len() {
        return Err(Error::Mismatch {
            left: actual.len(),
            right: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::Empty("metric evaluation needs at least one point".into()));
    }
    if actual.iter().any(|&y| y < 0.0) {
        return Err(Error::Invalid("actual values must be non-negative".into()));
    }
    let n = actual.len() as f64;
    let (mut rel_sq, mut abs_sum, mut sq_sum, mut log_sq, mut ape_sum, mut actual_sum) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut mape_terms = 0usize;
    for (&y, &f) in actual.iter().zip(forecast) {
        let e = y - f;
        rel_sq += (e / (y + 1.0)).powi(2);
        abs_sum += e.abs();
        sq_sum += e * e;
        log_sq += (f.ln_1p() - y.ln_1p()).powi(2);
        actual_sum += y.abs();
        if y != 0.0 {
            ape_sum += (e / y).abs();
            mape_terms += 1;
        }
    }
    let mse = sq_sum / n;
    let mape_pct = if mape_terms == 0 {
        f64::NAN
    } else {
        ape_sum / mape_terms as f64 * 100.0
    };
    let wape_pct = if actual_sum == 0.0 {
        f64::NAN
    } else {
        abs_sum / actual_sum * 100.0
    };
    let mut report = MetricReport {
        accuracy: 1.0 - (rel_sq / n).sqrt(),
        mape_pct,
        wape_pct,
        mae: abs_sum / n,
        mse,
        rmse: mse.sqrt(),
        rmsle: (log_sq / n).sqrt(),
        mape_excluded_terms: actual.len() - mape_terms,
        n: actual.len(),
        valid: true,
    };
    report.valid = Metric::ALL.iter().all(|m| report.get(*m).is_finite());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_forecast() {
        let y = [3.0, 0.0, 12.0, 7.0];
        let r = evaluate(&y, &y).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for m in [
            Metric::Mae,
            Metric::Mse,
            Metric::Rmse,
            Metric::Mape,
            Metric::Wape,
            Metric::Rmsle,
        ] {
            assert_eq!(r.get(m), 0.0, "{m}");
        }
        assert_eq!(r.mape_excluded_terms, 1);
    }

    #[test]
    fn worked_example() {
        let r = evaluate(&[2.0, 0.0, 4.0], &[1.0, 1.0, 4.0]).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(r.mae, 2.0 / 3.0));
        assert!(close(r.mse, 2.0 / 3.0));
        assert!(close(r.rmse, (2.0f64 / 3.0).sqrt()));
        assert!(close(r.wape_pct, 100.0 / 3.0));
        assert!(close(r.mape_pct, 25.0));
        assert_eq!(r.mape_excluded_terms, 1);
        let ln2 = 2f64.ln();
        let ln3 = 3f64.ln();
        assert!(close(r.rmsle, (((ln2 - ln3).powi(2) + ln2 * ln2) / 3.0).sqrt()));
        assert!(close(r.accuracy, 1.0 - ((1.0f64 / 9.0 + 1.0) / 3.0).sqrt()));
        assert!(r.valid);
    }

    #[test]
    fn single_zero_actual() {
        let r = evaluate(&[0.0], &[10.0]).unwrap();
        assert_eq!(r.accuracy, -9.0);
        assert!(r.mape_pct.is_nan());
        assert!(r.wape_pct.is_nan());
        assert!(!r.valid);
        assert_eq!(r.usable(Metric::Mape), None);
        assert_eq!(r.usable(Metric::Accuracy), Some(-9.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(evaluate(&[1.0], &[1.0, 2.0]), Err(Error::Mismatch { .. })));
        assert!(matches!(evaluate(&[], &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn json_null_for_nan() {
        let r = evaluate(&[0.0], &[10.0]).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"mape_pct\":null"));
        let back: MetricReport = serde_json::from_str(&s).unwrap();
        assert!(back.mape_pct.is_nan());
        assert_eq!(back.accuracy, -9.0);
    }
}
