use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LAMBDA_MIN: f64 = -2.0;
const LAMBDA_MAX: f64 = 2.0;
const GRID_STEP: f64 = 0.01;

/// Box-Cox power transform of `y + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoxTransform {
    pub lambda: f64,
    pub shift: f64,
}

/// Output of [`BoxCoxTransform::invert`].
#[derive(Debug, Clone, PartialEq)]
pub struct Inverted {
    pub values: Vec<f64>,
    /// Number of inputs outside the transform's range that were clamped to its boundary.
    pub clamped: usize,
}

fn transform_one(y: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        y.ln()
    } else {
        (lambda * y.ln()).exp_m1() / lambda
    }
}

/// Profile log-likelihood of the Box-Cox parameter for positive data.
pub fn profile_loglik(values: &[f64], lambda: f64) -> f64 {
    let n = values.len() as f64;
    let log_sum: f64 = values.iter().map(|v| v.ln()).sum();
    let z: Vec<f64> = values.iter().map(|&v| transform_one(v, lambda)).collect();
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (lambda - 1.0) * log_sum - 0.5 * n * var.ln()
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

impl BoxCoxTransform {
    pub fn new(lambda: f64, shift: f64) -> Self {
        Self { lambda, shift }
    }

    /// Maximum-likelihood λ over `[-2, 2]`: a 0.01 grid refined by golden-section search.
    ///
    /// A shift of 1 is applied when any value is non-positive.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("Box-Cox fit needs data".into()));
        }
        let shift = if values.iter().any(|&v| v <= 0.0) { 1.0 } else { 0.0 };
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        if shifted.iter().any(|&v| v <= 0.0) {
            return Err(Error::Invalid("values below -1 cannot be Box-Cox transformed".into()));
        }
        let first = shifted[0];
        if shifted.iter().all(|&v| v == first) {
            return Ok(Self { lambda: 1.0, shift });
        }
        let steps = ((LAMBDA_MAX - LAMBDA_MIN) / GRID_STEP).round() as usize;
        let (best, _) = (0..=steps)
            .map(|i| LAMBDA_MIN + i as f64 * GRID_STEP)
            .map(|l| (l, profile_loglik(&shifted, l)))
            .filter(|(_, ll)| ll.is_finite())
            .fold(
                (1.0, f64::NEG_INFINITY),
                |acc, cur| if cur.1 > acc.1 { cur } else { acc },
            );
        let lo = (best - GRID_STEP).max(LAMBDA_MIN);
        let hi = (best + GRID_STEP).min(LAMBDA_MAX);
        let lambda = golden_section_max(|l| profile_loglik(&shifted, l), lo, hi, 1e-9);
        Ok(Self { lambda, shift })
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        values
            .iter()
            .map(|&v| {
                let y = v + self.shift;
                if y > 0.0 {
                    Ok(transform_one(y, self.lambda))
                } else {
                    Err(Error::Invalid(format!(
                        "Box-Cox input {v} + shift {} is not positive",
                        self.shift
                    )))
                }
            })
            .collect()
    }

    /// Exact inverse of [`apply`](Self::apply). Values with `1 + λz <= 0` are clamped to the boundary.
    pub fn invert(&self, values: &[f64]) -> Inverted {
        let mut clamped = 0;
        let out = values
            .iter()
            .map(|&z| {
                let y = if self.lambda == 0.0 {
                    z.exp()
                } else {
                    let mut base = self.lambda * z;
                    if base <= -1.0 {
                        clamped += 1;
                        base = -1.0 + f64::EPSILON;
                    }
                    (base.ln_1p() / self.lambda).exp()
                };
                y - self.shift
            })
            .collect();
        Inverted { values: out, clamped }
    }
}
