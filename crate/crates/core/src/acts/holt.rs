use serde::{Deserialize, Serialize};

use super::tape::sigmoid;
use crate::error::{Error, Result};

/// Unconstrained Holt smoothing coefficients; the effective values are their sigmoids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoltState {
    pub alpha_raw: f64,
    pub beta_raw: f64,
}

impl HoltState {
    /// From effective coefficients in (0, 1).
    pub fn from_effective(alpha: f64, beta: f64) -> Self {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        Self {
            alpha_raw: logit(alpha),
            beta_raw: logit(beta),
        }
    }

    pub fn alpha(&self) -> f64 {
        sigmoid(self.alpha_raw)
    }

    pub fn beta(&self) -> f64 {
        sigmoid(self.beta_raw)
    }
}

impl Default for HoltState {
    fn default() -> Self {
        Self {
            alpha_raw: 0.0,
            beta_raw: -2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detrended {
    pub levels: Vec<f64>,
    pub trends: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `level_T + k trend_T` for `k = 1..=h`.
    pub trend_forecast: Vec<f64>,
}

/// Holt linear smoothing with level seeded at `y_0` and trend at `y_1 - y_0`.
pub fn detrend(holt: &HoltState, series: &[f64], h: usize) -> Result<Detrended> {
    if series.len() < 2 {
        return Err(Error::Length {
            needed: 2,
            got: series.len(),
        });
    }
    let (a, b) = (holt.alpha(), holt.beta());
    let n = series.len();
    let mut levels = vec![series[0]; n];
    let mut trends = vec![series[1] - series[0]; n];
    for t in 1..n {
        levels[t] = a * series[t] + (1.0 - a) * (levels[t - 1] + trends[t - 1]);
        trends[t] = b * (levels[t] - levels[t - 1]) + (1.0 - b) * trends[t - 1];
    }
    let residuals = series.iter().zip(&levels).map(|(y, l)| y - l).collect();
    let trend_forecast = (1..=h).map(|k| levels[n - 1] + k as f64 * trends[n - 1]).collect();
    Ok(Detrended {
        levels,
        trends,
        residuals,
        trend_forecast,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::tape::{Tape, Tensor};

    #[test]
    fn affine_series_is_reproduced() {
        let y: Vec<f64> = (0..40).map(|t| 2.0 * t as f64 + 1.0).collect();
        let one = HoltState {
            alpha_raw: 40.0,
            beta_raw: 40.0,
        };
        assert_eq!(one.alpha(), 1.0);
        let d = detrend(&one, &y, 5).unwrap();
        assert!(d.residuals.iter().all(|r| r.abs() < 1e-12));
        for (k, f) in d.trend_forecast.iter().enumerate() {
            assert_eq!(*f, 2.0 * (40 + k) as f64 + 1.0);
        }
    }

    #[test]
    fn constant_series_and_identity() {
        let d = detrend(&HoltState::from_effective(0.3, 0.7), &[4.0; 20], 7).unwrap();
        assert!(d.trend_forecast.iter().all(|f| *f == 4.0));

        let y: Vec<f64> = (0..50).map(|t| ((t * 37 % 11) as f64).sqrt() * 3.0).collect();
        let d = detrend(&HoltState::from_effective(0.4, 0.2), &y, 3).unwrap();
        for t in 0..y.len() {
            assert!((d.levels[t] + d.residuals[t] - y[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_moves_forecast_by_constant() {
        let y: Vec<f64> = (0..30).map(|t| (t as f64 * 0.4).sin() * 5.0 + t as f64).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 12.5).collect();
        let holt = HoltState {
            alpha_raw: 40.0,
            beta_raw: 0.3,
        };
        let a = detrend(&holt, &y, 7).unwrap();
        let b = detrend(&holt, &shifted, 7).unwrap();
        for (x, z) in a.trend_forecast.iter().zip(&b.trend_forecast) {
            assert!((z - x - 12.5).abs() < 1e-12);
        }
    }

    #[test]
    fn tape_op_matches_plain_recursion() {
        let y: Vec<f64> = (0..25).map(|t| (t as f64 * 0.9).cos() + 0.2 * t as f64).collect();
        let holt = HoltState::from_effective(0.35, 0.6);
        let d = detrend(&holt, &y, 1).unwrap();
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::scalar(holt.alpha_raw));
        let b = tape.leaf(Tensor::scalar(holt.beta_raw));
        let out = tape.holt(a, b, &y);
        let v = tape.value(out);
        for t in 0..y.len() {
            assert!((v.get(0, t) - d.levels[t]).abs() < 1e-12);
            assert!((v.get(1, t) - d.trends[t]).abs() < 1e-12);
        }
    }
}
