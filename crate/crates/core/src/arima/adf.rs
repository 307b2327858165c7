//! Augmented Dickey–Fuller test, constant-only case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ols;

/// Minimum series length accepted by [`adf_test`].
pub const ADF_MIN_LENGTH: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    /// t-ratio of the lagged level coefficient.
    pub statistic: f64,
    /// Number of lagged differences in the final regression.
    pub lag: usize,
    /// Observations in the final regression.
    pub n_obs: usize,
    /// Critical values at 1%, 5% and 10%.
    pub critical_values: [f64; 3],
    /// Statistic below the 5% critical value.
    pub reject_unit_root: bool,
    /// The input had no variation, so the regression is undefined.
    pub degenerate: bool,
}

/// Schwert's rule `floor(12 (n/100)^(1/4))`.
pub fn default_adf_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Response-surface critical values for the constant, no-trend regression
/// with `n_obs` observations (MacKinnon 2010, Table 2, N = 1).
pub fn adf_critical_values(n_obs: usize) -> [f64; 3] {
    let t = n_obs as f64;
    let surface = |b: [f64; 4]| b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t);
    [
        surface([-3.43035, -6.5393, -16.786, -79.433]),
        surface([-2.86154, -2.8903, -4.234, -40.040]),
        surface([-2.56677, -1.5384, -2.809, 0.0]),
    ]
}

/// Rows of the ADF regression for `lags` lagged differences, using only
/// observations from `start` on (so several lag choices share one sample).
fn design(y: &[f64], lags: usize, start: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // dy[i] = y[i+1] - y[i]; row for dy[i] uses y[i] and dy[i-1..i-lags]
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for i in start..dy.len() {
        let mut row = Vec::with_capacity(lags + 2);
        row.push(1.0);
        row.push(y[i]);
        row.extend((1..=lags).map(|j| dy[i - j]));
        rows.push(row);
        target.push(dy[i]);
    }
    (rows, target)
}

/// ADF test with the lag chosen by BIC over `0..=max_lag` on a common sample,
/// then refit on the largest sample available for that lag. `max_lag` of
/// `None` uses [`default_adf_lag`].
pub fn adf_test(y: &[f64], max_lag: Option<usize>) -> Result<AdfResult> {
    let n = y.len();
    if n < ADF_MIN_LENGTH {
        return Err(Error::InsufficientData { what: "ADF test", needed: ADF_MIN_LENGTH, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    let first = y[0];
    if y.iter().all(|v| *v == first) {
        log::warn!("ADF test on a constant series: regression is degenerate, unit root not rejected");
        return Ok(AdfResult {
            statistic: f64::NAN,
            lag: 0,
            n_obs: n - 1,
            critical_values: adf_critical_values(n - 1),
            reject_unit_root: false,
            degenerate: true,
        });
    }
    // keep at least 5 residual degrees of freedom in the common sample
    let mut max_lag = max_lag.unwrap_or_else(|| default_adf_lag(n));
    while max_lag > 0 && (n - 1).saturating_sub(max_lag) < 2 * max_lag + 2 + 5 {
        max_lag -= 1;
    }

    let mut best: Option<(f64, usize)> = None;
    for lags in 0..=max_lag {
        let (x, t) = design(y, lags, max_lag);
        let Ok(f) = ols(&x, &t) else { continue };
        let m = t.len() as f64;
        if f.rss <= 0.0 {
            continue;
        }
        let bic = m * (f.rss / m).ln() + (lags + 2) as f64 * m.ln();
        if best.is_none_or(|(b, _)| bic < b) {
            best = Some((bic, lags));
        }
    }
    let lag = best.map(|(_, l)| l).unwrap_or(0);
    let (x, t) = design(y, lag, lag);
    let f = match ols(&x, &t) {
        Ok(f) => f,
        Err(Error::Singular(_)) => {
            log::warn!("ADF regression is singular: unit root not rejected");
            return Ok(AdfResult {
                statistic: f64::NAN,
                lag,
                n_obs: t.len(),
                critical_values: adf_critical_values(t.len()),
                reject_unit_root: false,
                degenerate: true,
            });
        }
        Err(e) => return Err(e),
    };
    let n_obs = t.len();
    let critical_values = adf_critical_values(n_obs);
    let se = f.std_errors[1];
    let statistic = if se > 0.0 { f.beta[1] / se } else { f64::NEG_INFINITY };
    Ok(AdfResult {
        statistic,
        lag,
        n_obs,
        critical_values,
        reject_unit_root: statistic < critical_values[1],
        degenerate: false,
    })
}
