use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::SarimaFit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Standardized one-step innovations.
    pub residuals: Vec<f64>,
    /// Autocorrelations at lags 1..=28.
    pub acf: Vec<f64>,
    /// `(theoretical normal quantile, empirical quantile)` at each order statistic.
    pub qq_pairs: Vec<(f64, f64)>,
}

pub fn diagnostics(fit: &SarimaFit) -> Result<ResidualReport> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let out = fit.filter()?;
    let s2 = out.sigma2();
    let residuals: Vec<f64> = out
        .innovations
        .iter()
        .zip(&out.variances)
        .map(|(v, f)| v / (f * s2).sqrt())
        .collect();
    let n = residuals.len();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let c0: f64 = residuals.iter().map(|r| (r - mean).powi(2)).sum();
    let acf = (1..=28)
        .map(|k| {
            if k >= n || c0 == 0.0 {
                return 0.0;
            }
            (k..n)
                .map(|t| (residuals[t] - mean) * (residuals[t - k] - mean))
                .sum::<f64>()
                / c0
        })
        .collect();
    let mut sorted = residuals.clone();
    sorted.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let qq_pairs = sorted
        .iter()
        .enumerate()
        .map(|(i, e)| (normal.inverse_cdf((i as f64 + 0.5) / n as f64), *e))
        .collect();
    Ok(ResidualReport {
        residuals,
        acf,
        qq_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{fit, FitOptions, SarimaOrder};
    use super::*;
    use crate::preprocess::BoxCoxTransform;
    use crate::synth::arma_series;

    #[test]
    fn correctly_specified_model_is_white() {
        // The 26-of-28 band rate is pooled over seeds; a single seed misses it about 1 time in 7.
        let mut inside = 0;
        for seed in 1..=5 {
            let x = arma_series(&[0.7], &[0.2], 1.0, 2000, seed);
            let f = fit(
                &x,
                SarimaOrder::weekly(1, 0, 1, 0, 0, 0).unwrap(),
                BoxCoxTransform::new(1.0, 0.0),
                &FitOptions::default(),
            )
            .unwrap();
            let r = diagnostics(&f).unwrap();
            let n = r.residuals.len() as f64;
            let bound = 2.0 / n.sqrt();
            assert_eq!(r.acf.len(), 28);
            inside += r.acf.iter().filter(|a| a.abs() < bound).count();
            // Extreme order statistics have a spread near 0.3 at this n, so the tight bound
            // applies between the 1st and 99th percentiles and a loose one everywhere.
            let dev: Vec<f64> = r.qq_pairs.iter().map(|(t, e)| (t - e).abs()).collect();
            let k = dev.len() / 100;
            let central = dev[k..dev.len() - k].iter().copied().fold(0.0, f64::max);
            let worst = dev.iter().copied().fold(0.0, f64::max);
            assert!(central < 0.2, "seed {seed}: central qq deviation {central}");
            assert!(worst < 1.0, "seed {seed}: qq deviation {worst}");
            let (_, raw) = f.one_step_predictions().unwrap();
            let mean = raw.iter().sum::<f64>() / n;
            assert!(mean.abs() < 3.0 * f.sigma2.sqrt() / n.sqrt());
        }
        assert!(inside >= 26 * 5, "{inside} of 140 inside");
    }
}
