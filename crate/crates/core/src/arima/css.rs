//! Lag polynomials, the stationarity-enforcing reparameterization and the
//! conditional sum of squares.

use super::{ArimaOrders, ArimaParams};
use crate::error::{Error, Result};

/// Coefficients a_k (k ≥ 1) with `1 - Σ a_k B^k = (1 - Σ φ_i B^i)(1 - Σ Φ_j B^{sj})`.
pub fn expand_ar(phi: &[f64], seasonal_phi: &[f64], season: usize) -> Vec<f64> {
    let mut left = vec![1.0];
    left.extend(phi.iter().map(|v| -v));
    let mut right = vec![0.0; seasonal_phi.len() * season + 1];
    right[0] = 1.0;
    for (j, v) in seasonal_phi.iter().enumerate() {
        right[(j + 1) * season] = -v;
    }
    poly_mul(&left, &right)[1..].iter().map(|v| -v).collect()
}

/// Coefficients b_k (k ≥ 1) with `1 + Σ b_k B^k = (1 + Σ θ_i B^i)(1 + Σ Θ_j B^{sj})`.
pub fn expand_ma(theta: &[f64], seasonal_theta: &[f64], season: usize) -> Vec<f64> {
    let mut left = vec![1.0];
    left.extend_from_slice(theta);
    let mut right = vec![0.0; seasonal_theta.len() * season + 1];
    right[0] = 1.0;
    for (j, v) in seasonal_theta.iter().enumerate() {
        right[(j + 1) * season] = *v;
    }
    poly_mul(&left, &right)[1..].to_vec()
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Partial autocorrelations of `1 - Σ c_k z^k` by Levinson step-down, or
/// `None` when some |r_k| ≥ 1 (a root on or inside the unit circle).
pub(crate) fn coeffs_to_pacf(coeffs: &[f64]) -> Option<Vec<f64>> {
    let mut cur = coeffs.to_vec();
    let mut r = vec![0.0; coeffs.len()];
    for k in (0..coeffs.len()).rev() {
        let rk = cur[k];
        if !rk.is_finite() || rk.abs() >= 1.0 {
            return None;
        }
        r[k] = rk;
        let denom = 1.0 - rk * rk;
        let prev: Vec<f64> = (0..k).map(|j| (cur[j] + rk * cur[k - 1 - j]) / denom).collect();
        cur = prev;
    }
    Some(r)
}

/// Inverse of [`coeffs_to_pacf`] (Durbin–Levinson).
pub(crate) fn pacf_to_coeffs(r: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(r.len());
    for (k, &rk) in r.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - rk * prev[k - 1 - j];
        }
        phi.push(rk);
    }
    phi
}

/// All roots of `1 - Σ c_k z^k` lie outside the unit circle.
pub fn is_stationary(coeffs: &[f64]) -> bool {
    coeffs_to_pacf(coeffs).is_some()
}

/// All roots of `1 + Σ θ_k z^k` lie outside the unit circle.
pub fn is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
    is_stationary(&neg)
}

/// All roots of `1 - Σ c_k z^k` lie outside the circle of radius `r`.
pub fn roots_outside(coeffs: &[f64], r: f64) -> bool {
    let scaled: Vec<f64> = coeffs.iter().enumerate().map(|(k, c)| c * r.powi(k as i32 + 1)).collect();
    is_stationary(&scaled)
}

/// Smallest modulus among the roots of `1 - Σ c_k z^k`, by bisection on
/// [`roots_outside`]; infinite for a constant polynomial.
pub fn min_root_modulus(coeffs: &[f64]) -> f64 {
    if coeffs.iter().all(|c| *c == 0.0) {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while roots_outside(coeffs, hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if roots_outside(coeffs, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unconstrained vector → AR coefficients (stationary by construction).
pub(crate) fn ar_from_free(alpha: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = alpha.iter().map(|a| a.tanh()).collect();
    pacf_to_coeffs(&r)
}

/// Unconstrained vector → MA coefficients (invertible by construction).
pub(crate) fn ma_from_free(alpha: &[f64]) -> Vec<f64> {
    ar_from_free(alpha).into_iter().map(|v| -v).collect()
}

/// Map possibly inadmissible starting coefficients into the free space,
/// shrinking toward zero until the step-down succeeds.
pub(crate) fn free_from_ar(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    for _ in 0..40 {
        if let Some(r) = coeffs_to_pacf(&c) {
            if r.iter().all(|v| v.abs() < 0.98) {
                return r.iter().map(|v| v.atanh()).collect();
            }
        }
        c.iter_mut().for_each(|v| *v *= 0.8);
    }
    vec![0.0; coeffs.len()]
}

pub(crate) fn free_from_ma(theta: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = theta.iter().map(|v| -v).collect();
    free_from_ar(&neg)
}

/// One-step errors `ε_t = w_t - Σ a_k w_{t-k} - Σ b_k ε_{t-k}` with zero
/// pre-sample values. `w` must already be centered.
pub(crate) fn arma_filter(w: &[f64], ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let n = w.len();
    let mut e = vec![0.0; n];
    for t in 0..n {
        let mut v = w[t];
        for (k, a) in ar.iter().enumerate() {
            if k < t {
                v -= a * w[t - k - 1];
            } else {
                break;
            }
        }
        for (k, b) in ma.iter().enumerate() {
            if k < t {
                v -= b * e[t - k - 1];
            } else {
                break;
            }
        }
        e[t] = v;
    }
    e
}

/// Residuals of the differenced series `yd` (minus `xb`, the regression part
/// when present) under `params`. Pre-sample deviations from the process mean
/// are zero. No admissibility check.
pub(crate) fn residuals_unchecked(yd: &[f64], xb: Option<&[f64]>, orders: &ArimaOrders, params: &ArimaParams) -> Vec<f64> {
    let ar = params.ar_poly(orders.season);
    let ma = params.ma_poly(orders.season);
    let mu = params.c / (1.0 - ar.iter().sum::<f64>());
    let w: Vec<f64> = match xb {
        Some(xb) => yd.iter().zip(xb).map(|(y, x)| y - x - mu).collect(),
        None => yd.iter().map(|y| y - mu).collect(),
    };
    arma_filter(&w, &ar, &ma)
}

/// Conditional sum of squared one-step errors of the differenced series `yd`.
/// Parameters outside the stationary/invertible region are rejected.
pub fn css_objective(yd: &[f64], orders: &ArimaOrders, params: &ArimaParams) -> Result<f64> {
    params.check_shape(orders)?;
    if !params.is_admissible() {
        return Err(Error::InvalidParams("AR part not stationary or MA part not invertible".into()));
    }
    Ok(residuals_unchecked(yd, None, orders, params).iter().map(|e| e * e).sum())
}
