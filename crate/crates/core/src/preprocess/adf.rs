use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ols, Ols};

/// Test levels with their critical values for the constant-only regression.
pub const CRITICAL_VALUES: [(SignificanceLevel, f64); 3] = [
    (SignificanceLevel::OnePercent, -3.447),
    (SignificanceLevel::FivePercent, -2.869),
    (SignificanceLevel::TenPercent, -2.571),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignificanceLevel {
    #[serde(rename = "1%")]
    OnePercent,
    #[serde(rename = "5%")]
    FivePercent,
    #[serde(rename = "10%")]
    TenPercent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lags_used: usize,
    pub nobs: usize,
    /// Levels at which the unit root is rejected, strongest first.
    pub reject_at: Vec<SignificanceLevel>,
}

impl AdfResult {
    pub fn rejects(&self, level: SignificanceLevel) -> bool {
        self.reject_at.contains(&level)
    }
}

/// Regression of `Δy_t` on `[y_{t-1}, Δy_{t-1..t-lags}, 1]` over rows `first..diff.len()`.
fn regress(levels: &[f64], diff: &[f64], lags: usize, first: usize) -> Result<Ols> {
    let rows = diff.len() - first;
    let cols = lags + 2;
    let mut x = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for (r, j) in (first..diff.len()).enumerate() {
        y[r] = diff[j];
        x[(r, 0)] = levels[j];
        for l in 1..=lags {
            x[(r, l)] = diff[j - l];
        }
        x[(r, cols - 1)] = 1.0;
    }
    ols(&x, &y)
}

/// Augmented Dickey-Fuller test with a constant, lag order chosen by AIC.
///
/// The maximum lag is `floor(12 (n/100)^{1/4})`. Candidate lags are compared on a common
/// sample; the selected lag is then re-estimated on its full available sample.
pub fn adf_test(values: &[f64]) -> Result<AdfResult> {
    let n = values.len();
    if n < 20 {
        return Err(Error::Length { needed: 20, got: n });
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::Singular("constant series".into()));
    }
    let diff: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let cap = (n / 2).saturating_sub(3);
    let max_lag = ((12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize).min(cap);

    let mut best: Option<(usize, f64)> = None;
    for lag in 0..=max_lag {
        let fit = regress(values, &diff, lag, max_lag)?;
        let aic = fit.aic();
        if best.map_or(true, |(_, b)| aic < b) {
            best = Some((lag, aic));
        }
    }
    let (lag, _) = best.expect("at least lag 0 is evaluated");
    let fit = regress(values, &diff, lag, lag)?;
    let statistic = fit.t_stat(0);
    let reject_at = CRITICAL_VALUES
        .iter()
        .filter(|(_, cv)| statistic < *cv)
        .map(|(level, _)| *level)
        .collect();
    Ok(AdfResult {
        statistic,
        lags_used: lag,
        nobs: fit.nobs,
        reject_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejection_set_is_downward_closed() {
        let mut x = vec![0.0; 60];
        let mut state = 7u64;
        for v in x.iter_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *v = ((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
        }
        let r = adf_test(&x).unwrap();
        if r.rejects(SignificanceLevel::OnePercent) {
            assert!(r.rejects(SignificanceLevel::FivePercent));
        }
        if r.rejects(SignificanceLevel::FivePercent) {
            assert!(r.rejects(SignificanceLevel::TenPercent));
        }
    }

    #[test]
    fn constant_series_is_singular() {
        assert!(matches!(adf_test(&[3.0; 40]), Err(Error::Singular(_))));
        assert!(matches!(adf_test(&[1.0; 10]), Err(Error::Length { .. })));
    }
}
