//! Exact Gaussian likelihood of a zero-mean ARMA process by Kalman filtering.
//!
//! State-space form with `r = max(p, q + 1)`: transition `T` has the AR coefficients in
//! its first column and ones on the superdiagonal, the disturbance loading is
//! `R = (1, θ_1, ..., θ_{r-1})`, and the observation is the first state component.
//! The innovation variance is concentrated out, so the filter runs with unit variance.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ArmaStateSpace {
    phi: Vec<f64>,
    loading: Vec<f64>,
    r: usize,
}

/// Filter state after the last observation: one-step predicted mean and covariance (unit σ²).
#[derive(Debug, Clone)]
pub struct Predicted {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// Innovations `v_t = w_t - E[w_t | past]`.
    pub innovations: Vec<f64>,
    /// Innovation variances relative to σ².
    pub variances: Vec<f64>,
    pub sum_sq: f64,
    pub sum_log_f: f64,
    pub last: Predicted,
}

impl FilterOutput {
    /// Concentrated maximum-likelihood innovation variance.
    pub fn sigma2(&self) -> f64 {
        self.sum_sq / self.innovations.len() as f64
    }

    /// Gaussian log-likelihood with σ² concentrated out.
    pub fn loglik(&self) -> f64 {
        let m = self.innovations.len() as f64;
        let s2 = self.sigma2();
        -0.5 * m * ((2.0 * std::f64::consts::PI).ln() + s2.ln() + 1.0) - 0.5 * self.sum_log_f
    }
}

impl ArmaStateSpace {
    /// `ar` and `ma` are the expanded lag coefficients.
    pub fn new(ar: &[f64], ma: &[f64]) -> Self {
        let r = ar.len().max(ma.len() + 1);
        let mut phi = vec![0.0; r];
        phi[..ar.len()].copy_from_slice(ar);
        let mut loading = vec![0.0; r];
        loading[0] = 1.0;
        loading[1..=ma.len()].copy_from_slice(ma);
        Self { phi, loading, r }
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    /// `T x` for a vector.
    fn transition(&self, x: &[f64], out: &mut [f64]) {
        let r = self.r;
        for i in 0..r {
            out[i] = self.phi[i] * x[0] + if i + 1 < r { x[i + 1] } else { 0.0 };
        }
    }

    /// `T P T' + R R'` for a row-major symmetric matrix, using the companion structure.
    fn propagate(&self, p: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        let r = self.r;
        // tmp = T P
        for i in 0..r {
            for j in 0..r {
                let next = if i + 1 < r { p[(i + 1) * r + j] } else { 0.0 };
                tmp[i * r + j] = self.phi[i] * p[j] + next;
            }
        }
        // out = tmp T' + R R'
        for i in 0..r {
            for j in 0..r {
                let next = if j + 1 < r { tmp[i * r + j + 1] } else { 0.0 };
                out[i * r + j] = self.phi[j] * tmp[i * r] + next + self.loading[i] * self.loading[j];
            }
        }
    }

    /// Stationary state covariance solving `P = T P T' + R R'`, by the doubling algorithm.
    pub fn stationary_cov(&self) -> Result<Vec<f64>> {
        let r = self.r;
        let mut a = nalgebra::DMatrix::<f64>::zeros(r, r);
        for i in 0..r {
            a[(i, 0)] = self.phi[i];
            if i + 1 < r {
                a[(i, i + 1)] = 1.0;
            }
        }
        let rv = nalgebra::DVector::from_column_slice(&self.loading);
        let mut p = &rv * rv.transpose();
        for _ in 0..64 {
            let next = &p + &a * &p * a.transpose();
            a = &a * &a;
            let change = (&next - &p).abs().max();
            p = next;
            let scale = p.abs().max();
            if !scale.is_finite() {
                return Err(Error::FitFailed("non-stationary state covariance".into()));
            }
            if a.abs().max() < 1e-14 || change <= 1e-15 * scale {
                break;
            }
        }
        if !(a.abs().max() < 1e-6) {
            return Err(Error::FitFailed("state covariance did not converge".into()));
        }
        // Symmetrize against rounding.
        let mut out = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                out[i * r + j] = 0.5 * (p[(i, j)] + p[(j, i)]);
            }
        }
        Ok(out)
    }

    /// Runs the filter over `w` from the stationary initial distribution.
    pub fn filter(&self, w: &[f64]) -> Result<FilterOutput> {
        let r = self.r;
        let mut a = vec![0.0; r];
        let mut p = self.stationary_cov()?;
        let mut a_upd = vec![0.0; r];
        let mut tmp = vec![0.0; r * r];
        let mut p_next = vec![0.0; r * r];
        let mut col = vec![0.0; r];
        let mut innovations = Vec::with_capacity(w.len());
        let mut variances = Vec::with_capacity(w.len());
        let (mut sum_sq, mut sum_log_f) = (0.0, 0.0);
        for &wt in w {
            let v = wt - a[0];
            let f = p[0];
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::FitFailed("non-positive innovation variance".into()));
            }
            for i in 0..r {
                col[i] = p[i * r];
            }
            for i in 0..r {
                a_upd[i] = a[i] + col[i] * v / f;
            }
            for i in 0..r {
                for j in 0..r {
                    p[i * r + j] -= col[i] * col[j] / f;
                }
            }
            self.transition(&a_upd, &mut a);
            self.propagate(&p, &mut tmp, &mut p_next);
            std::mem::swap(&mut p, &mut p_next);
            innovations.push(v);
            variances.push(f);
            sum_sq += v * v / f;
            sum_log_f += f.ln();
        }
        if !sum_sq.is_finite() || !sum_log_f.is_finite() {
            return Err(Error::FitFailed("non-finite likelihood".into()));
        }
        Ok(FilterOutput {
            innovations,
            variances,
            sum_sq,
            sum_log_f,
            last: Predicted { mean: a, cov: p },
        })
    }

    /// Minimum-MSE forecasts `w_{n+1..n+h}` from the filter's final prediction.
    pub fn forecast(&self, last: &Predicted, h: usize) -> Vec<f64> {
        let mut a = last.mean.clone();
        let mut next = vec![0.0; self.r];
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            out.push(a[0]);
            self.transition(&a, &mut next);
            std::mem::swap(&mut a, &mut next);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Autocovariances of an ARMA process by truncated MA(∞) expansion.
    fn acvf(ar: &[f64], ma: &[f64], lags: usize) -> Vec<f64> {
        let m = 4000;
        let mut psi = vec![0.0; m];
        psi[0] = 1.0;
        for j in 1..m {
            let mut v = if j <= ma.len() { ma[j - 1] } else { 0.0 };
            for (k, a) in ar.iter().enumerate() {
                if j > k {
                    v += a * psi[j - k - 1];
                }
            }
            psi[j] = v;
        }
        (0..lags)
            .map(|h| (0..m - h).map(|j| psi[j] * psi[j + h]).sum())
            .collect()
    }

    /// Dense multivariate-normal log-likelihood with σ² profiled out.
    fn dense_loglik(ar: &[f64], ma: &[f64], w: &[f64]) -> f64 {
        let n = w.len();
        let g = acvf(ar, ma, n);
        let sigma = DMatrix::from_fn(n, n, |i, j| g[i.abs_diff(j)]);
        let chol = sigma.cholesky().unwrap();
        let x = DVector::from_column_slice(w);
        let q = x.dot(&chol.solve(&x));
        let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let s2 = q / n as f64;
        -0.5 * n as f64 * ((2.0 * std::f64::consts::PI).ln() + s2.ln() + 1.0) - 0.5 * logdet
    }

    #[test]
    fn matches_dense_likelihood() {
        let w = [0.3, -1.2, 0.8, 1.5, -0.4, 0.1, 2.0, -0.7, 0.9, -1.1, 0.2, 0.6];
        for (ar, ma) in [
            (vec![0.6], vec![]),
            (vec![], vec![0.4]),
            (vec![0.5, -0.2], vec![0.3]),
            (vec![0.0, 0.0, 0.5], vec![0.2, 0.0, -0.3, 0.1]),
        ] {
            let ss = ArmaStateSpace::new(&ar, &ma);
            let kf = ss.filter(&w).unwrap().loglik();
            let dense = dense_loglik(&ar, &ma, &w);
            assert!((kf - dense).abs() < 1e-8, "{ar:?} {ma:?}: {kf} vs {dense}");
        }
    }

    #[test]
    fn white_noise_is_sum_of_squares() {
        let w = [1.0, -2.0, 3.0];
        let out = ArmaStateSpace::new(&[], &[]).filter(&w).unwrap();
        assert!((out.sigma2() - 14.0 / 3.0).abs() < 1e-14);
        assert_eq!(out.innovations, w.to_vec());
    }

    #[test]
    fn ar1_forecast_recursion() {
        // After observing 8 with φ=0.5, forecasts halve each step.
        let ss = ArmaStateSpace::new(&[0.5], &[]);
        let out = ss.filter(&[1.0, 3.0, 8.0]).unwrap();
        let f = ss.forecast(&out.last, 4);
        for (a, b) in f.iter().zip([4.0, 2.0, 1.0, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
