//! Seasonal ARIMA models fitted by exact maximum likelihood.
//!
//! The differenced series is modeled as a zero-mean multiplicative seasonal ARMA and its
//! likelihood is evaluated by Kalman filtering. Parameters are estimated in an unconstrained
//! space (partial autocorrelations through `tanh`) so every accepted fit is stationary and
//! invertible.

mod diagnostics;
mod grid;
mod kalman;
pub mod params;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use diagnostics::{diagnostics, ResidualReport};
pub use grid::{fit_and_forecast, full_space, grid_search, reduced_space, GridEntry, GridOptions, GridResult};
pub use kalman::{ArmaStateSpace, FilterOutput};

use crate::error::{Error, Result};
use crate::optim::{self, LbfgsOptions, Termination};
use crate::preprocess::{difference, undifference, BoxCoxTransform, DifferencingSpec};

/// Orders `(p,d,q)(P,D,Q)_s`. Field order gives the lexicographic tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub sp: usize,
    #[serde(rename = "D")]
    pub sd: usize,
    #[serde(rename = "Q")]
    pub sq: usize,
    pub s: usize,
}

impl SarimaOrder {
    /// Orders are limited to 4 for the ARMA terms and 2 for differencing.
    pub fn new(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize, s: usize) -> Result<Self> {
        if p > 4 || q > 4 || sp > 4 || sq > 4 || d > 2 || sd > 2 || s == 0 {
            return Err(Error::Invalid(format!(
                "order ({p},{d},{q})({sp},{sd},{sq})_{s} outside the supported space"
            )));
        }
        Ok(Self { p, d, q, sp, sd, sq, s })
    }

    /// Weekly-seasonal order.
    pub fn weekly(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize) -> Result<Self> {
        Self::new(p, d, q, sp, sd, sq, 7)
    }

    pub fn differencing(&self) -> DifferencingSpec {
        DifferencingSpec::new(self.d, self.sd, self.s)
    }

    pub fn n_params(&self) -> usize {
        self.p + self.q + self.sp + self.sq
    }

    /// Minimum series length accepted by [`fit`].
    pub fn min_length(&self) -> usize {
        let ar = self.p + self.sp * self.s;
        let ma = self.q + self.sq * self.s;
        self.d + self.sd * self.s + 2 * ar.max(ma) + 11
    }
}

impl fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{})_{}",
            self.p, self.d, self.q, self.sp, self.sd, self.sq, self.s
        )
    }
}

/// Parses `p,d,q,P,D,Q` with an optional seventh field for the period (default 7).
impl FromStr for SarimaOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Invalid(format!("bad order `{s}`")))?;
        match parts.as_slice() {
            [p, d, q, sp, sd, sq] => Self::weekly(*p, *d, *q, *sp, *sd, *sq),
            [p, d, q, sp, sd, sq, per] => Self::new(*p, *d, *q, *sp, *sd, *sq, *per),
            _ => Err(Error::Invalid(format!("order `{s}` needs 6 or 7 fields"))),
        }
    }
}

/// Estimated model. Coefficients follow `φ(B)Φ(B^s) w_t = θ(B)Θ(B^s) ε_t` with
/// `φ(B) = 1 - Σ φ_i B^i` and `θ(B) = 1 + Σ θ_j B^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarimaFit {
    pub order: SarimaOrder,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    #[serde(rename = "Phi")]
    pub seasonal_phi: Vec<f64>,
    #[serde(rename = "Theta")]
    pub seasonal_theta: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub transform: BoxCoxTransform,
    pub converged: bool,
    /// Log-likelihood at each multistart initialization.
    pub start_logliks: Vec<f64>,
    /// Transformed training series, kept for filtering and undifferencing.
    pub train: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub seed: u64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 500,
            grad_tol: 1e-6,
        }
    }
}

struct Layout {
    order: SarimaOrder,
}

impl Layout {
    /// Splits an unconstrained vector into constrained `(φ, θ, Φ, Θ)`.
    fn coefficients(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let o = &self.order;
        let (a, rest) = u.split_at(o.p);
        let (b, rest) = rest.split_at(o.q);
        let (c, e) = rest.split_at(o.sp);
        (
            params::constrain_ar(a),
            params::constrain_ma(b),
            params::constrain_ar(c),
            params::constrain_ma(e),
        )
    }

    fn state_space(&self, u: &[f64]) -> ArmaStateSpace {
        let (phi, theta, sphi, stheta) = self.coefficients(u);
        let s = self.order.s;
        ArmaStateSpace::new(
            &params::expand_ar(&phi, &sphi, s),
            &params::expand_ma(&theta, &stheta, s),
        )
    }

    /// Log-likelihood, or `-inf` where the filter fails.
    fn loglik(&self, u: &[f64], w: &[f64]) -> f64 {
        match self.state_space(u).filter(w) {
            Ok(out) => out.loglik(),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

fn autocorrelations(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (0..=max_lag)
        .map(|k| {
            if k >= n || c0 == 0.0 {
                return 0.0;
            }
            (k..n).map(|t| (x[t] - mean) * (x[t - k] - mean)).sum::<f64>() / c0
        })
        .collect()
}

/// Yule-Walker AR coefficients from autocorrelations `rho[0..=k]` by Levinson recursion.
fn levinson(rho: &[f64], k: usize) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::new();
    let mut v = rho[0];
    for j in 1..=k {
        if v <= 0.0 {
            phi.push(0.0);
            continue;
        }
        let acc: f64 = (1..j).map(|i| phi[i - 1] * rho[j - i]).sum();
        let r = ((rho[j] - acc) / v).clamp(-0.95, 0.95);
        let prev = phi.clone();
        for i in 1..j {
            phi[i - 1] = prev[i - 1] - r * prev[j - i - 1];
        }
        phi.push(r);
        v *= 1.0 - r * r;
    }
    phi
}

/// Yule-Walker starting point in the unconstrained space; MA terms start at zero.
fn yule_walker_start(order: &SarimaOrder, w: &[f64]) -> Vec<f64> {
    let max_lag = order.p.max(order.sp * order.s);
    let rho = autocorrelations(w, max_lag);
    let phi = levinson(&rho, order.p);
    let seasonal_rho: Vec<f64> = (0..=order.sp).map(|k| rho[k * order.s]).collect();
    let sphi = levinson(&seasonal_rho, order.sp);
    let mut u = params::unconstrain_ar(&phi);
    u.extend(vec![0.0; order.q]);
    u.extend(params::unconstrain_ar(&sphi));
    u.extend(vec![0.0; order.sq]);
    u
}

/// Smallest Hessian eigenvalue of a function at `x`, by central second differences.
fn min_hessian_eigenvalue(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
    let k = x.len();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(k, k);
    let mut xp = x.to_vec();
    for i in 0..k {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut eval = |di: f64, dj: f64| {
                xp[i] = x[i] + di;
                xp[j] = x[j] + dj;
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Fits a SARIMA model to a series already on the transformed scale.
pub fn fit(series: &[f64], order: SarimaOrder, transform: BoxCoxTransform, opts: &FitOptions) -> Result<SarimaFit> {
    let needed = order.min_length();
    if series.len() < needed {
        return Err(Error::Length {
            needed,
            got: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("series contains non-finite values".into()));
    }
    let w = difference(&order.differencing(), series)?;
    let m = w.len() as f64;
    let layout = Layout { order };
    let k = order.n_params();

    let mut objective = |u: &[f64]| -layout.loglik(u, &w) / m;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts = [
        vec![0.0; k],
        yule_walker_start(&order, &w),
        (0..k).map(|_| rng.gen_range(-0.3..0.3)).collect::<Vec<f64>>(),
    ];
    let lbfgs = LbfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        ..LbfgsOptions::default()
    };
    let fd_step = 1e-5;

    let mut start_logliks = Vec::with_capacity(starts.len());
    let mut best: Option<optim::Minimum> = None;
    for x0 in &starts {
        let f0 = objective(x0);
        start_logliks.push(-f0 * m);
        if !f0.is_finite() {
            continue;
        }
        let result = optim::minimize(
            |u| {
                let fu = objective(u);
                let g = optim::central_gradient(&mut objective, u, fd_step);
                (fu, g)
            },
            x0,
            None,
            &lbfgs,
        );
        if result.f.is_finite() && best.as_ref().map_or(true, |b| result.f < b.f) {
            best = Some(result);
        }
        if k == 0 {
            break;
        }
    }
    let Some(best) = best else {
        return Err(Error::FitFailed(format!(
            "{order}: non-finite likelihood at every start"
        )));
    };

    // A failed line search with a near-zero gradient is numerical stalling at the optimum.
    let mut converged =
        best.termination.converged() || (best.termination == Termination::LineSearchFailed && best.grad_norm() < 1e-4);
    if converged && k > 0 {
        let lambda = min_hessian_eigenvalue(&mut objective, &best.x, 1e-4);
        if lambda < -1e-4 {
            converged = false;
        }
    }
    let (phi, theta, seasonal_phi, seasonal_theta) = layout.coefficients(&best.x);
    let out = layout.state_space(&best.x).filter(&w)?;
    Ok(SarimaFit {
        order,
        phi,
        theta,
        seasonal_phi,
        seasonal_theta,
        sigma2: out.sigma2(),
        loglik: out.loglik(),
        transform,
        converged,
        start_logliks,
        train: series.to_vec(),
    })
}

impl SarimaFit {
    pub fn state_space(&self) -> ArmaStateSpace {
        let s = self.order.s;
        ArmaStateSpace::new(
            &params::expand_ar(&self.phi, &self.seasonal_phi, s),
            &params::expand_ma(&self.theta, &self.seasonal_theta, s),
        )
    }

    fn differenced(&self) -> Result<Vec<f64>> {
        difference(&self.order.differencing(), &self.train)
    }

    /// Kalman filter output over the differenced training series.
    pub fn filter(&self) -> Result<FilterOutput> {
        self.state_space().filter(&self.differenced()?)
    }

    /// One-step-ahead predictions of the differenced series.
    pub fn one_step_predictions(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let w = self.differenced()?;
        let out = self.state_space().filter(&w)?;
        let pred = w.iter().zip(&out.innovations).map(|(x, v)| x - v).collect();
        Ok((pred, out.innovations))
    }

    /// True when all four polynomials have roots strictly outside the unit circle.
    pub fn roots_ok(&self) -> bool {
        let neg = |c: &[f64]| c.iter().map(|v| -v).collect::<Vec<f64>>();
        params::min_root_modulus(&self.phi) > 1.0
            && params::min_root_modulus(&self.seasonal_phi) > 1.0
            && params::min_root_modulus(&neg(&self.theta)) > 1.0
            && params::min_root_modulus(&neg(&self.seasonal_theta)) > 1.0
    }
}

/// `h`-step forecasts on the transformed scale.
pub fn forecast(fit: &SarimaFit, h: usize) -> Result<Vec<f64>> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let ss = fit.state_space();
    let out = ss.filter(&fit.differenced()?)?;
    let w = ss.forecast(&out.last, h);
    let spec = fit.order.differencing();
    let head = &fit.train[fit.train.len() - spec.order()..];
    undifference(&spec, head, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::arma_series;

    fn fit_plain(x: &[f64], order: SarimaOrder) -> SarimaFit {
        fit(x, order, BoxCoxTransform::new(1.0, 0.0), &FitOptions::default()).unwrap()
    }

    #[test]
    fn ar1_recovers_yule_walker() {
        let x = arma_series(&[0.6], &[], 1.0, 2000, 42);
        let f = fit_plain(&x, SarimaOrder::weekly(1, 0, 0, 0, 0, 0).unwrap());
        assert!(f.converged);
        // Yule-Walker: lag-one sample autocorrelation.
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let num: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let den: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let yw = num / den;
        assert!((0.5..=0.7).contains(&f.phi[0]), "{}", f.phi[0]);
        assert!((f.phi[0] - yw).abs() < 0.02, "{} vs {yw}", f.phi[0]);
        assert!((f.sigma2 - 1.0).abs() < 0.1);
    }

    #[test]
    fn seasonal_ma_recovery_matches_lattice_scan() {
        let (theta, sphi) = (0.4, 0.5);
        let ar = params::expand_ar(&[], &[sphi], 7);
        let w = arma_series(&ar, &[theta], 1.0, 3000, 7);
        let f = fit_plain(&w, SarimaOrder::weekly(0, 0, 1, 1, 0, 0).unwrap());
        assert!(f.converged);
        // Lattice oracle on the conditional sum of squares.
        let css = |th: f64, ph: f64| {
            let mut e = vec![0.0; w.len()];
            let mut ss = 0.0;
            for t in 7..w.len() {
                e[t] = w[t] - ph * w[t - 7] - th * e[t - 1];
                ss += e[t] * e[t];
            }
            ss
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..99 {
            for j in 0..99 {
                let (th, ph) = (-0.98 + 0.02 * i as f64, -0.98 + 0.02 * j as f64);
                let v = css(th, ph);
                if v < best.0 {
                    best = (v, th, ph);
                }
            }
        }
        assert!((f.theta[0] - theta).abs() < 0.1 && (f.seasonal_phi[0] - sphi).abs() < 0.1);
        assert!((f.theta[0] - best.1).abs() <= 0.03, "{} vs {}", f.theta[0], best.1);
        assert!(
            (f.seasonal_phi[0] - best.2).abs() <= 0.03,
            "{} vs {}",
            f.seasonal_phi[0],
            best.2
        );
    }

    #[test]
    fn random_walk_sigma_closed_form() {
        let x: Vec<f64> = arma_series(&[], &[], 2.0, 300, 5)
            .iter()
            .scan(10.0, |acc, e| {
                *acc += e;
                Some(*acc)
            })
            .collect();
        let f = fit_plain(&x, SarimaOrder::weekly(0, 1, 0, 0, 0, 0).unwrap());
        let d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let ms = d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64;
        assert!((f.sigma2 - ms).abs() < 1e-10 * ms);
        let fc = forecast(&f, 5).unwrap();
        assert!(fc.iter().all(|v| *v == *x.last().unwrap()));
    }

    #[test]
    fn seasonal_persistence() {
        let x: Vec<f64> = (0..80).map(|t| ((t * 37) % 11) as f64 + (t / 7) as f64 * 0.0).collect();
        let f = fit_plain(&x, SarimaOrder::weekly(0, 0, 0, 0, 1, 0).unwrap());
        let fc = forecast(&f, 10).unwrap();
        let n = x.len();
        for (k, v) in fc.iter().enumerate() {
            let expect = if k < 7 { x[n - 7 + k] } else { fc[k - 7] };
            assert!((v - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_extrapolation_for_d2() {
        let x: Vec<f64> = (0..40).map(|t| 3.0 + 0.5 * t as f64 + ((t * 13) % 5) as f64).collect();
        let f = fit_plain(&x, SarimaOrder::weekly(0, 2, 0, 0, 0, 0).unwrap());
        let fc = forecast(&f, 4).unwrap();
        let n = x.len();
        let slope = x[n - 1] - x[n - 2];
        for (k, v) in fc.iter().enumerate() {
            let expect = x[n - 1] + slope * (k + 1) as f64;
            assert!((v - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn too_short_is_an_error() {
        let order = SarimaOrder::weekly(1, 1, 1, 1, 1, 1).unwrap();
        let x = vec![1.0; order.min_length() - 1];
        assert!(matches!(
            fit(&x, order, BoxCoxTransform::new(1.0, 0.0), &FitOptions::default()),
            Err(Error::Length { .. })
        ));
    }

    #[test]
    fn improves_on_every_start_and_reconstructs() {
        let x: Vec<f64> = arma_series(&[0.5], &[0.3], 1.0, 400, 8)
            .iter()
            .scan(0.0, |a, e| {
                *a += e;
                Some(*a)
            })
            .collect();
        let f = fit_plain(&x, SarimaOrder::weekly(1, 1, 1, 1, 0, 0).unwrap());
        assert!(f.roots_ok());
        for ll in &f.start_logliks {
            assert!(f.loglik >= *ll - 1e-9);
        }
        let (pred, resid) = f.one_step_predictions().unwrap();
        let w: Vec<f64> = pred.iter().zip(&resid).map(|(a, b)| a + b).collect();
        let spec = f.order.differencing();
        let rebuilt = undifference(&spec, &x[..spec.order()], &w).unwrap();
        for (a, b) in rebuilt.iter().zip(&x[spec.order()..]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn order_parsing() {
        let o: SarimaOrder = "0,1,0,0,0,0".parse().unwrap();
        assert_eq!(o, SarimaOrder::weekly(0, 1, 0, 0, 0, 0).unwrap());
        assert!("1,2".parse::<SarimaOrder>().is_err());
        assert!("5,1,0,0,0,0".parse::<SarimaOrder>().is_err());
        let json = serde_json::to_string(&o).unwrap();
        assert!(json.contains("\"P\":0"));
    }
}
