use serde::{Deserialize, Serialize};

use super::css::poly_mul;
use super::ArimaFit;
use crate::error::{Error, Result};
use crate::stats::dist::normal_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub horizon: usize,
    pub level: f64,
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Forecast standard errors, σ·√(Σψ²).
    pub std_errors: Vec<f64>,
}

/// Coefficients g_k (k ≥ 1) of the level-scale AR polynomial
/// `1 − Σ g_k B^k = A(B)(1 − B)^d (1 − B^s)^D`.
fn level_ar(fit: &ArimaFit) -> Vec<f64> {
    let o = &fit.orders;
    let mut poly = vec![1.0];
    poly.extend(fit.params.ar_poly(o.season).iter().map(|a| -a));
    for _ in 0..o.d {
        poly = poly_mul(&poly, &[1.0, -1.0]);
    }
    for _ in 0..o.seasonal_d {
        let mut seas = vec![0.0; o.season + 1];
        seas[0] = 1.0;
        seas[o.season] = -1.0;
        poly = poly_mul(&poly, &seas);
    }
    poly[1..].iter().map(|v| -v).collect()
}

/// ψ_0..ψ_{h−1} of the MA(∞) form on the level scale.
pub(crate) fn psi_weights(g: &[f64], b: &[f64], h: usize) -> Vec<f64> {
    let mut psi = vec![0.0; h];
    if h == 0 {
        return psi;
    }
    psi[0] = 1.0;
    for j in 1..h {
        let mut v = b.get(j - 1).copied().unwrap_or(0.0);
        for k in 1..=j.min(g.len()) {
            v += g[k - 1] * psi[j - k];
        }
        psi[j] = v;
    }
    psi
}

/// Point forecasts and prediction intervals for `h` steps after the end of
/// the fitted series.
pub fn forecast(fit: &ArimaFit, h: usize, level: f64) -> Result<Forecast> {
    if h == 0 {
        return Err(Error::InvalidArgument("forecast horizon must be positive".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("interval level {level} not in (0, 1)")));
    }
    if !fit.beta.is_empty() {
        return Err(Error::InvalidArgument(
            "forecasting a model with regressors needs their future values".into(),
        ));
    }
    let g = level_ar(fit);
    let b = fit.params.ma_poly(fit.orders.season);
    let n = fit.series.len();
    let lost = n - fit.residuals.len();

    let mut y = fit.series.clone();
    let mut eps: Vec<f64> = vec![0.0; lost];
    eps.extend_from_slice(&fit.residuals);
    let c = fit.params.c;
    for t in n..n + h {
        let mut v = c;
        for (k, gk) in g.iter().enumerate() {
            if let Some(idx) = t.checked_sub(k + 1) {
                v += gk * y[idx];
            }
        }
        for (k, bk) in b.iter().enumerate() {
            if let Some(idx) = t.checked_sub(k + 1) {
                v += bk * eps[idx];
            }
        }
        y.push(v);
        eps.push(0.0);
    }
    let point = y[n..].to_vec();

    let psi = psi_weights(&g, &b, h);
    let z = normal_quantile(0.5 + level / 2.0);
    let sigma = fit.params.sigma2.max(0.0).sqrt();
    let mut acc = 0.0;
    let std_errors: Vec<f64> = psi
        .iter()
        .map(|p| {
            acc += p * p;
            sigma * acc.sqrt()
        })
        .collect();
    let lower = point.iter().zip(&std_errors).map(|(p, s)| p - z * s).collect();
    let upper = point.iter().zip(&std_errors).map(|(p, s)| p + z * s).collect();
    Ok(Forecast { horizon: h, level, point, lower, upper, std_errors })
}
