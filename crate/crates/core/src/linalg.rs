//! Small dense least-squares helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordinary least squares fit.
#[derive(Debug, Clone)]
pub struct Ols {
    pub coef: Vec<f64>,
    pub std_err: Vec<f64>,
    pub ssr: f64,
    pub nobs: usize,
}

impl Ols {
    /// Gaussian log-likelihood at the OLS estimate.
    pub fn loglik(&self) -> f64 {
        let n = self.nobs as f64;
        -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (self.ssr / n).ln() + 1.0)
    }

    pub fn aic(&self) -> f64 {
        -2.0 * self.loglik() + 2.0 * self.coef.len() as f64
    }

    pub fn t_stat(&self, i: usize) -> f64 {
        self.coef[i] / self.std_err[i]
    }
}

/// Regresses `y` on the columns of `x` (row-major, `y.len()` rows).
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Ols> {
    let (n, k) = x.shape();
    if n <= k {
        return Err(Error::Singular(format!("{n} observations for {k} regressors")));
    }
    let xtx = x.transpose() * x;
    let scale = xtx
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("design matrix is not of full rank".into()))?;
    let inv = chol.inverse();
    // Reject numerically rank-deficient designs that Cholesky still accepts.
    if chol.l().diagonal().iter().any(|d| d * d < 1e-12 * scale) {
        return Err(Error::Singular("design matrix is not of full rank".into()));
    }
    let coef = &inv * (x.transpose() * y);
    let resid = y - x * &coef;
    let ssr = resid.dot(&resid);
    if !(ssr > 0.0) {
        return Err(Error::Singular("perfect fit leaves no residual variance".into()));
    }
    let s2 = ssr / (n - k) as f64;
    let std_err = (0..k).map(|i| (s2 * inv[(i, i)]).sqrt()).collect();
    Ok(Ols {
        coef: coef.iter().copied().collect(),
        std_err,
        ssr,
        nobs: n,
    })
}
