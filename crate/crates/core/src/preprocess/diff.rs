use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-seasonal and seasonal differencing orders, `(1-B)^d (1-B^s)^D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferencingSpec {
    pub d: usize,
    pub seasonal_d: usize,
    pub period: usize,
}

impl DifferencingSpec {
    pub fn new(d: usize, seasonal_d: usize, period: usize) -> Self {
        Self { d, seasonal_d, period }
    }

    /// Number of leading values consumed by differencing.
    pub fn order(&self) -> usize {
        self.d + self.seasonal_d * self.period
    }

    /// Coefficients `c_0..c_k` of the expanded differencing polynomial, `c_0 = 1`.
    pub fn polynomial(&self) -> Vec<f64> {
        let mut poly = vec![1.0];
        let mul = |poly: &[f64], lag: usize| {
            let mut out = vec![0.0; poly.len() + lag];
            for (i, &c) in poly.iter().enumerate() {
                out[i] += c;
                out[i + lag] -= c;
            }
            out
        };
        for _ in 0..self.d {
            poly = mul(&poly, 1);
        }
        for _ in 0..self.seasonal_d {
            poly = mul(&poly, self.period);
        }
        poly
    }
}

/// Applies the differencing operator; the output has `order()` fewer values.
pub fn difference(spec: &DifferencingSpec, values: &[f64]) -> Result<Vec<f64>> {
    if spec.seasonal_d > 0 && spec.period == 0 {
        return Err(Error::Invalid("seasonal period must be positive".into()));
    }
    let k = spec.order();
    if k >= values.len() {
        return Err(Error::Length {
            needed: k + 1,
            got: values.len(),
        });
    }
    let c = spec.polynomial();
    Ok((k..values.len())
        .map(|t| c.iter().enumerate().map(|(j, cj)| cj * values[t - j]).sum())
        .collect())
}

/// Inverts [`difference`]: given the `order()` values preceding `diffed`, rebuilds the
/// original values aligned with `diffed`.
pub fn undifference(spec: &DifferencingSpec, head: &[f64], diffed: &[f64]) -> Result<Vec<f64>> {
    let k = spec.order();
    if head.len() != k {
        return Err(Error::Mismatch {
            left: k,
            right: head.len(),
        });
    }
    let c = spec.polynomial();
    let mut full = head.to_vec();
    full.reserve(diffed.len());
    for (t, &w) in diffed.iter().enumerate() {
        let idx = k + t;
        let carry: f64 = (1..=k).map(|j| c[j] * full[idx - j]).sum();
        full.push(w - carry);
    }
    Ok(full.split_off(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_second_and_seasonal() {
        let x = [1.0, 4.0, 9.0, 16.0];
        assert_eq!(
            difference(&DifferencingSpec::new(1, 0, 7), &x).unwrap(),
            vec![3.0, 5.0, 7.0]
        );
        assert_eq!(difference(&DifferencingSpec::new(2, 0, 7), &x).unwrap(), vec![2.0, 2.0]);
        let y = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(difference(&DifferencingSpec::new(0, 1, 2), &y).unwrap(), vec![3.0, 6.0]);
    }

    #[test]
    fn too_short() {
        let spec = DifferencingSpec::new(1, 1, 7);
        assert!(matches!(difference(&spec, &[1.0; 8]), Err(Error::Length { .. })));
        assert!(difference(&spec, &[1.0; 9]).is_ok());
    }

    #[test]
    fn round_trip() {
        let spec = DifferencingSpec::new(2, 1, 7);
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin() * 10.0 + i as f64).collect();
        let w = difference(&spec, &x).unwrap();
        let back = undifference(&spec, &x[..spec.order()], &w).unwrap();
        for (a, b) in back.iter().zip(&x[spec.order()..]) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
