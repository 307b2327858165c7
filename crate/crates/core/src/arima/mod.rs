//! Seasonal ARIMA modeling: differencing, unit-root tests, order selection,
//! conditional-sum-of-squares estimation, forecasting and simulation.
//!
//! The model for the differenced series `y'_t = Δ^d Δ_s^D y_t` is
//!
//! ```text
//! y'_t = c + Σ a_k y'_{t-k} + ε_t + Σ b_k ε_{t-k}
//! ```
//!
//! where `1 - Σ a_k B^k = (1 - Σ φ_i B^i)(1 - Σ Φ_j B^{sj})` and
//! `1 + Σ b_k B^k = (1 + Σ θ_i B^i)(1 + Σ Θ_j B^{sj})`. MA terms enter with a
//! plus sign.

mod adf;
mod css;
mod diagnostics;
mod difference;
mod estimate;
mod forecast;
mod selection;
mod simulate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adf::{adf_critical_values, adf_test, default_adf_lag, AdfResult};
pub use css::{css_objective, expand_ar, expand_ma, is_invertible, is_stationary, min_root_modulus};
pub use diagnostics::{acf, ljung_box};
pub use difference::{difference, integrate};
pub use estimate::{fit, fit_with, FitOptions, Regressor};
pub use forecast::{forecast, Forecast};
pub use selection::{
    auto_fit, auto_fit_with, root_moduli, select_differencing, select_differencing_with, tentative_orders, AutoFit,
    AutoOptions, Candidate, Differencing, MinicCell, TentativeOrders, UNIT_ROOT_MARGIN,
};
pub use simulate::simulate;
pub(crate) use selection::near_unit_root;

pub(crate) use estimate::fit_regression;

/// Nonseasonal (p, d, q), seasonal (P, D, Q) and the season length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrders {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub seasonal_p: usize,
    #[serde(rename = "D")]
    pub seasonal_d: usize,
    #[serde(rename = "Q")]
    pub seasonal_q: usize,
    #[serde(rename = "s")]
    pub season: usize,
}

/// Largest seasonal AR or MA order the selection pipeline will consider.
pub const MAX_SEASONAL_ORDER: usize = 2;

impl ArimaOrders {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q, seasonal_p: 0, seasonal_d: 0, seasonal_q: 0, season: 12 }
    }

    pub fn seasonal(mut self, seasonal_p: usize, seasonal_d: usize, seasonal_q: usize, season: usize) -> Self {
        self.seasonal_p = seasonal_p;
        self.seasonal_d = seasonal_d;
        self.seasonal_q = seasonal_q;
        self.season = season;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.seasonal_p > MAX_SEASONAL_ORDER || self.seasonal_q > MAX_SEASONAL_ORDER {
            return Err(Error::InvalidArgument(format!(
                "seasonal orders must be <= {MAX_SEASONAL_ORDER}, got P={} Q={}",
                self.seasonal_p, self.seasonal_q
            )));
        }
        if self.d + self.seasonal_d > 3 {
            return Err(Error::InvalidArgument(format!(
                "total differencing d + D must be <= 3, got {}",
                self.d + self.seasonal_d
            )));
        }
        if self.has_seasonal_terms() && self.season < 2 {
            return Err(Error::InvalidArgument(format!("season length {} too short", self.season)));
        }
        Ok(())
    }

    pub fn has_seasonal_terms(&self) -> bool {
        self.seasonal_p + self.seasonal_d + self.seasonal_q > 0
    }

    pub fn arma_count(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q
    }

    /// Observations consumed by differencing.
    pub fn lost_to_differencing(&self) -> usize {
        self.d + self.season * self.seasonal_d
    }

    /// Minimum series length accepted by [`fit`].
    pub fn min_length(&self) -> usize {
        10 + self.p + self.d + self.q + self.season * (self.seasonal_p + self.seasonal_d + self.seasonal_q)
    }

    /// Parse "p,d,q" or "p,d,q,P,D,Q".
    pub fn parse(spec: &str, season: usize) -> Result<Self> {
        let parts: std::result::Result<Vec<usize>, _> = spec.split(',').map(|s| s.trim().parse::<usize>()).collect();
        let parts = parts.map_err(|_| Error::InvalidArgument(format!("invalid orders '{spec}'")))?;
        let o = match parts.as_slice() {
            [p, d, q] => ArimaOrders::new(*p, *d, *q),
            [p, d, q, sp, sd, sq] => ArimaOrders::new(*p, *d, *q).seasonal(*sp, *sd, *sq, season),
            _ => return Err(Error::InvalidArgument(format!("orders '{spec}' must have 3 or 6 fields"))),
        };
        Ok(ArimaOrders { season, ..o })
    }
}

impl fmt::Display for ArimaOrders {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)?;
        if self.has_seasonal_terms() {
            write!(f, "({},{},{})[{}]", self.seasonal_p, self.seasonal_d, self.seasonal_q, self.season)?;
        }
        Ok(())
    }
}

/// Model coefficients. `c` is the constant of the differenced equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaParams {
    pub c: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seasonal_phi: Vec<f64>,
    pub seasonal_theta: Vec<f64>,
    pub sigma2: f64,
}

impl ArimaParams {
    pub fn zeros(orders: &ArimaOrders, sigma2: f64) -> Self {
        Self {
            c: 0.0,
            phi: vec![0.0; orders.p],
            theta: vec![0.0; orders.q],
            seasonal_phi: vec![0.0; orders.seasonal_p],
            seasonal_theta: vec![0.0; orders.seasonal_q],
            sigma2,
        }
    }

    pub(crate) fn check_shape(&self, orders: &ArimaOrders) -> Result<()> {
        if self.phi.len() != orders.p
            || self.theta.len() != orders.q
            || self.seasonal_phi.len() != orders.seasonal_p
            || self.seasonal_theta.len() != orders.seasonal_q
        {
            return Err(Error::InvalidArgument(format!("parameter lengths do not match {orders}")));
        }
        Ok(())
    }

    /// Stationary AR factors and invertible MA factors.
    pub fn is_admissible(&self) -> bool {
        is_stationary(&self.phi)
            && is_stationary(&self.seasonal_phi)
            && is_invertible(&self.theta)
            && is_invertible(&self.seasonal_theta)
    }

    /// Expanded AR coefficients a_k of the full lag polynomial.
    pub fn ar_poly(&self, season: usize) -> Vec<f64> {
        expand_ar(&self.phi, &self.seasonal_phi, season)
    }

    pub fn ma_poly(&self, season: usize) -> Vec<f64> {
        expand_ma(&self.theta, &self.seasonal_theta, season)
    }

    /// Process mean of the differenced series, `c / (1 - Σ a_k)`.
    pub fn mean(&self, season: usize) -> f64 {
        self.c / (1.0 - self.ar_poly(season).iter().sum::<f64>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientKind {
    Constant,
    Regressor,
    Ar,
    Ma,
    SeasonalAr,
    SeasonalMa,
}

/// One reported coefficient. Names follow the lag they act on, so a
/// seasonal AR term with s = 12 is "AR(12)".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub kind: CoefficientKind,
    pub estimate: f64,
    pub std_error: f64,
    /// Two-sided normal-approximation p-value of estimate / std_error.
    pub p_value: f64,
}

/// A fitted model with its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArimaFit {
    pub orders: ArimaOrders,
    pub include_constant: bool,
    pub params: ArimaParams,
    /// Regression coefficients for exogenous inputs, in input order.
    pub beta: Vec<f64>,
    pub regressor_names: Vec<String>,
    /// Constant, regressors, AR, MA, seasonal AR, seasonal MA.
    pub coefficients: Vec<Coefficient>,
    /// Minimized conditional sum of squares.
    pub css: f64,
    /// `n_eff · ln(σ̂²) + k · ln(n_eff)`; −∞ for a degenerate zero-variance fit.
    pub bic: f64,
    /// One-step errors on the differenced scale, one per differenced observation.
    pub residuals: Vec<f64>,
    pub n_effective: usize,
    /// The undifferenced series the model was fitted to.
    pub series: Vec<f64>,
    pub evaluations: usize,
    /// The input was constant; the fit is exact and σ² = 0.
    pub degenerate: bool,
}

impl ArimaFit {
    /// Number of estimated coefficients (constant and regressors included).
    pub fn n_coefficients(&self) -> usize {
        self.coefficients.len()
    }

    /// One-step-ahead in-sample predictions on the original scale. The first
    /// `d + sD` values are not predictable and are `None`.
    pub fn fitted_values(&self) -> Vec<Option<f64>> {
        let lost = self.series.len() - self.residuals.len();
        self.series
            .iter()
            .enumerate()
            .map(|(t, y)| if t < lost { None } else { Some(y - self.residuals[t - lost]) })
            .collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}
