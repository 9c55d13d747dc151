//! Polynomial bookkeeping and the stationarity-enforcing reparameterization.

/// Maps unconstrained reals to the coefficients of a stationary AR polynomial
/// `1 - c_1 B - ... - c_k B^k`, via partial autocorrelations `tanh(u)` and Durbin-Levinson.
pub fn constrain_ar(u: &[f64]) -> Vec<f64> {
    let mut coef: Vec<f64> = Vec::with_capacity(u.len());
    for (j, &uj) in u.iter().enumerate() {
        let r = uj.tanh();
        let prev = coef.clone();
        for i in 0..j {
            coef[i] = prev[i] - r * prev[j - 1 - i];
        }
        coef.push(r);
    }
    coef
}

/// Inverse of [`constrain_ar`]. Partial autocorrelations are clipped just inside (-1, 1), so
/// non-stationary inputs map to a nearby stationary point.
pub fn unconstrain_ar(coef: &[f64]) -> Vec<f64> {
    let k = coef.len();
    let mut a = coef.to_vec();
    let mut u = vec![0.0; k];
    for j in (0..k).rev() {
        let r = a[j].clamp(-0.999_999, 0.999_999);
        u[j] = r.atanh();
        if j == 0 {
            break;
        }
        let denom = 1.0 - r * r;
        let prev = a.clone();
        for i in 0..j {
            a[i] = (prev[i] + r * prev[j - 1 - i]) / denom;
        }
    }
    u
}

/// MA polynomial `1 + c_1 B + ...`: invertible exactly when `1 - (-c_1) B - ...` is stationary.
pub fn constrain_ma(u: &[f64]) -> Vec<f64> {
    constrain_ar(u).into_iter().map(|c| -c).collect()
}

pub fn unconstrain_ma(coef: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = coef.iter().map(|c| -c).collect();
    unconstrain_ar(&neg)
}

/// Multiplies two polynomials given by coefficient vectors (constant term first).
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `1 - c_1 B^lag - c_2 B^{2 lag} - ...` as a dense coefficient vector.
pub fn lag_poly(coef: &[f64], lag: usize, sign: f64) -> Vec<f64> {
    let mut p = vec![0.0; coef.len() * lag + 1];
    p[0] = 1.0;
    for (i, c) in coef.iter().enumerate() {
        p[(i + 1) * lag] = sign * c;
    }
    p
}

/// Expanded AR lag coefficients `φ*_k` such that `w_t = Σ φ*_k w_{t-k} + ...`.
pub fn expand_ar(phi: &[f64], seasonal_phi: &[f64], s: usize) -> Vec<f64> {
    let poly = poly_mul(&lag_poly(phi, 1, -1.0), &lag_poly(seasonal_phi, s, -1.0));
    poly[1..].iter().map(|c| -c).collect()
}

/// Expanded MA lag coefficients `θ*_k` such that `w_t = ... + ε_t + Σ θ*_k ε_{t-k}`.
pub fn expand_ma(theta: &[f64], seasonal_theta: &[f64], s: usize) -> Vec<f64> {
    let poly = poly_mul(&lag_poly(theta, 1, 1.0), &lag_poly(seasonal_theta, s, 1.0));
    poly[1..].to_vec()
}

/// Moduli of the roots of `1 - Σ c_k z^k`, from the eigenvalues of its companion matrix
/// (which are the reciprocal roots).
pub fn min_root_modulus(ar_coef: &[f64]) -> f64 {
    let k = ar_coef.len();
    if k == 0 || ar_coef.iter().all(|c| *c == 0.0) {
        return f64::INFINITY;
    }
    let mut m = nalgebra::DMatrix::zeros(k, k);
    for j in 0..k {
        m[(0, j)] = ar_coef[j];
    }
    for i in 1..k {
        m[(i, i - 1)] = 1.0;
    }
    let eig = m.complex_eigenvalues();
    let max_recip = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max_recip == 0.0 {
        f64::INFINITY
    } else {
        1.0 / max_recip
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_and_two() {
        let c = constrain_ar(&[0.5f64.atanh()]);
        assert!((c[0] - 0.5).abs() < 1e-15);
        // Two partials r1, r2 give phi = (r1 (1 - r2), r2).
        let (r1, r2) = (0.6f64, -0.3f64);
        let c = constrain_ar(&[r1.atanh(), r2.atanh()]);
        assert!((c[0] - r1 * (1.0 - r2)).abs() < 1e-14);
        assert!((c[1] - r2).abs() < 1e-14);
    }

    #[test]
    fn round_trip_and_stationarity() {
        let mut state = 99u64;
        for _ in 0..200 {
            let k = 1 + (state % 5) as usize;
            let u: Vec<f64> = (0..k)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 4.0
                })
                .collect();
            let c = constrain_ar(&u);
            assert!(min_root_modulus(&c) > 1.0);
            let back = unconstrain_ar(&c);
            for (a, b) in back.iter().zip(&u) {
                assert!((a - b).abs() < 1e-7, "{a} vs {b}");
            }
            let m = constrain_ma(&u);
            let back = unconstrain_ma(&m);
            assert!((back[0] - u[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn multiplicative_expansion() {
        // (1 - 0.5B)(1 - 0.4B^2) = 1 - 0.5B - 0.4B^2 + 0.2B^3
        assert_eq!(expand_ar(&[0.5], &[0.4], 2), vec![0.5, 0.4, -0.2]);
        // (1 + 0.3B)(1 + 0.5B^3) = 1 + 0.3B + 0.5B^3 + 0.15B^4
        let m = expand_ma(&[0.3], &[0.5], 3);
        assert_eq!(m.len(), 4);
        assert!((m[3] - 0.15).abs() < 1e-15 && m[1] == 0.0);
    }
}
