//! Automatic model identification: differencing orders from unit-root tests,
//! tentative ARMA orders from a minimum-information-criterion table, then an
//! exhaustive BIC search bounded by the tentative orders.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adf::{adf_test, AdfResult};
use super::diagnostics::acf;
use super::css::min_root_modulus;
use super::difference::difference;
use super::estimate::{fit_with, long_ar_residuals, FitOptions};
use super::{ArimaFit, ArimaOrders, MAX_SEASONAL_ORDER};
use crate::error::{Error, Result};
use crate::linalg::ols;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoOptions {
    pub season: usize,
    pub max_p: usize,
    pub max_q: usize,
    /// D = 1 when the lag-s autocorrelation exceeds this.
    pub seasonal_threshold: f64,
    /// Fix d instead of testing for it.
    pub d: Option<usize>,
    /// Fix D instead of using the seasonal-strength rule.
    pub seasonal_d: Option<usize>,
    pub max_evals: usize,
}

impl Default for AutoOptions {
    fn default() -> Self {
        Self { season: 12, max_p: 5, max_q: 5, seasonal_threshold: 0.64, d: None, seasonal_d: None, max_evals: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Differencing {
    pub d: usize,
    pub seasonal_d: usize,
    /// Lag-s autocorrelation used for the seasonal decision.
    pub seasonal_strength: f64,
    /// ADF results in the order they were run.
    pub adf: Vec<AdfResult>,
}

pub fn select_differencing(y: &[f64], season: usize) -> Result<Differencing> {
    select_differencing_with(y, &AutoOptions { season, ..Default::default() })
}

/// Choose D by seasonal strength, then the smallest d ∈ {0, 1, 2} whose
/// differenced series rejects a unit root (d = 2 when none does).
///
/// Seasonal strength is measured on the level series when it already looks
/// stationary and on its first difference otherwise, so a random walk's
/// slowly decaying autocorrelation is not mistaken for seasonality.
pub fn select_differencing_with(y: &[f64], opts: &AutoOptions) -> Result<Differencing> {
    let s = opts.season;
    if s < 2 {
        return Err(Error::InvalidArgument(format!("season length {s} too short")));
    }
    if y.len() < 3 * s {
        return Err(Error::InsufficientData { what: "differencing selection", needed: 3 * s, got: y.len() });
    }
    let mut adf = Vec::new();
    let level = adf_test(y, None)?;
    let level_rejects = level.reject_unit_root;
    adf.push(level);
    let base = if level_rejects { y.to_vec() } else { difference(y, 1, 0, s)? };
    let seasonal_strength = acf(&base, s)[s - 1];
    let seasonal_d = match opts.seasonal_d {
        Some(v) => v,
        None => usize::from(seasonal_strength > opts.seasonal_threshold),
    };
    if let Some(d) = opts.d {
        return Ok(Differencing { d, seasonal_d, seasonal_strength, adf });
    }
    for d in 0..=2 {
        if d == 0 && seasonal_d == 0 {
            if level_rejects {
                return Ok(Differencing { d, seasonal_d, seasonal_strength, adf });
            }
            continue;
        }
        let r = adf_test(&difference(y, d, seasonal_d, s)?, None)?;
        let rejects = r.reject_unit_root;
        adf.push(r);
        if rejects {
            return Ok(Differencing { d, seasonal_d, seasonal_strength, adf });
        }
    }
    Ok(Differencing { d: 2, seasonal_d, seasonal_strength, adf })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinicCell {
    pub p: usize,
    pub q: usize,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TentativeOrders {
    pub p: usize,
    pub q: usize,
    pub seasonal_p: usize,
    pub seasonal_q: usize,
    /// Order of the long autoregression supplying innovation proxies.
    pub long_ar_order: usize,
    /// First index of the common regression sample for the (p, q) table.
    pub sample_start: usize,
    /// Grid bounds actually used after any shrinking.
    pub max_p: usize,
    pub max_q: usize,
    /// Nonseasonal table in row-major (p, q) order.
    pub grid: Vec<MinicCell>,
    /// Seasonal table; entries count seasonal lags.
    pub seasonal_grid: Vec<MinicCell>,
}

/// `ln(rss/N) + k·ln(N)/N` for a regression of `w_t` on an intercept,
/// `w_{t−l}` for l in `ar_lags` and `e_{t−l}` for l in `ma_lags`.
fn minic_bic(w: &[f64], e: &[f64], ar_lags: &[usize], ma_lags: &[usize], start: usize) -> Option<f64> {
    let rows: Vec<Vec<f64>> = (start..w.len())
        .map(|t| {
            let mut r = vec![1.0];
            r.extend(ar_lags.iter().map(|&l| w[t - l]));
            r.extend(ma_lags.iter().map(|&l| e[t - l]));
            r
        })
        .collect();
    let target = &w[start..];
    let n = target.len() as f64;
    let fit = ols(&rows, target).ok()?;
    let k = (ar_lags.len() + ma_lags.len()) as f64;
    Some((fit.rss / n).ln() + k * n.ln() / n)
}

fn argmin(cells: &[MinicCell]) -> (usize, usize) {
    let mut best = (0, 0, f64::INFINITY);
    for c in cells {
        if c.bic < best.2 {
            best = (c.p, c.q, c.bic);
        }
    }
    (best.0, best.1)
}

/// Tentative (p, q, P, Q) for a differenced series.
pub fn tentative_orders(yd: &[f64], season: usize, max_p: usize, max_q: usize) -> Result<TentativeOrders> {
    let n = yd.len();
    let long = ((n as f64 / 10.0).min(20.0).ceil() as usize).max(1);
    let (mut pmax, mut qmax) = (max_p, max_q);
    // each cell needs at least ten more observations than coefficients
    let feasible = |pm: usize, qm: usize| {
        let start = long + pm.max(qm);
        n > start && n - start >= pm + qm + 1 + 10
    };
    while !feasible(pmax, qmax) && (pmax > 0 || qmax > 0) {
        if pmax >= qmax && pmax > 0 {
            pmax -= 1;
        } else {
            qmax -= 1;
        }
    }
    if (pmax, qmax) != (max_p, max_q) {
        log::warn!("series of length {n} too short for a {max_p}x{max_q} order table; using {pmax}x{qmax}");
    }
    let e = long_ar_residuals(yd, long)
        .ok_or(Error::InsufficientData { what: "tentative order selection", needed: 2 * long + 3, got: n })?;
    let mean = yd.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = yd.iter().map(|v| v - mean).collect();

    let start = long + pmax.max(qmax);
    let mut grid = Vec::with_capacity((pmax + 1) * (qmax + 1));
    for p in 0..=pmax {
        for q in 0..=qmax {
            let ar: Vec<usize> = (1..=p).collect();
            let ma: Vec<usize> = (1..=q).collect();
            let bic = minic_bic(&w, &e, &ar, &ma, start).unwrap_or(f64::INFINITY);
            grid.push(MinicCell { p, q, bic });
        }
    }
    let (p, q) = argmin(&grid);

    // seasonal lags on top of the chosen nonseasonal terms
    let ar: Vec<usize> = (1..=p).collect();
    let ma: Vec<usize> = (1..=q).collect();
    let mut smax = MAX_SEASONAL_ORDER;
    let seasonal_feasible = |sm: usize| {
        let st = long + (season * sm).max(p).max(q);
        n > st && n - st >= p + q + 2 * sm + 1 + 10
    };
    while smax > 0 && !seasonal_feasible(smax) {
        smax -= 1;
    }
    if smax < MAX_SEASONAL_ORDER {
        log::warn!("series of length {n} supports seasonal orders up to {smax} only");
    }
    let mut seasonal_grid = Vec::new();
    if smax > 0 {
        let sstart = long + (season * smax).max(p).max(q);
        for sp in 0..=smax {
            for sq in 0..=smax {
                let mut a = ar.clone();
                a.extend((1..=sp).map(|j| j * season));
                let mut m = ma.clone();
                m.extend((1..=sq).map(|j| j * season));
                let bic = minic_bic(&w, &e, &a, &m, sstart).unwrap_or(f64::INFINITY);
                seasonal_grid.push(MinicCell { p: sp, q: sq, bic });
            }
        }
    }
    let (seasonal_p, seasonal_q) = if seasonal_grid.is_empty() { (0, 0) } else { argmin(&seasonal_grid) };
    Ok(TentativeOrders {
        p,
        q,
        seasonal_p,
        seasonal_q,
        long_ar_order: long,
        sample_start: start,
        max_p: pmax,
        max_q: qmax,
        grid,
        seasonal_grid,
    })
}

/// One cell of the order search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub orders: ArimaOrders,
    pub include_constant: bool,
    pub bic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutoFit {
    pub fit: ArimaFit,
    pub differencing: Option<Differencing>,
    pub tentative: Option<TentativeOrders>,
    pub candidates: Vec<Candidate>,
}

/// Candidates whose AR or MA roots fall within this distance of the unit
/// circle are not eligible; CSS is unreliable there.
pub const UNIT_ROOT_MARGIN: f64 = 0.01;

/// Smallest AR and MA root moduli of a fit.
pub fn root_moduli(fit: &ArimaFit) -> (f64, f64) {
    let s = fit.orders.season;
    let ar = fit.params.ar_poly(s);
    let ma: Vec<f64> = fit.params.ma_poly(s).iter().map(|b| -b).collect();
    (min_root_modulus(&ar), min_root_modulus(&ma))
}

/// An AR or MA root within [`UNIT_ROOT_MARGIN`] of the unit circle.
pub(crate) fn near_unit_root(fit: &ArimaFit) -> bool {
    let (ar, ma) = root_moduli(fit);
    !fit.degenerate && (ar < 1.0 + UNIT_ROOT_MARGIN || ma < 1.0 + UNIT_ROOT_MARGIN)
}

pub fn auto_fit(y: &[f64], season: usize) -> Result<AutoFit> {
    auto_fit_with(y, &AutoOptions { season, ..Default::default() })
}

/// Differencing selection, tentative orders, then the minimum-BIC model over
/// all orders bounded by the tentative ones. With d + D > 0 each cell is
/// tried with and without a constant. Ties go to the earlier cell. Fits with
/// a root near the unit circle are only used when nothing else converged.
pub fn auto_fit_with(y: &[f64], opts: &AutoOptions) -> Result<AutoFit> {
    let s = opts.season;
    if y.len() < 3 * s {
        return Err(Error::InsufficientData { what: "automatic model selection", needed: 3 * s, got: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    if y.iter().all(|v| *v == y[0]) {
        log::warn!("constant series: returning a degenerate mean-only model");
        let orders = ArimaOrders { season: s, ..ArimaOrders::new(0, 0, 0) };
        let fit = fit_with(y, &orders, &FitOptions { include_constant: Some(true), max_evals: opts.max_evals })?;
        return Ok(AutoFit { fit, differencing: None, tentative: None, candidates: Vec::new() });
    }
    let diff = select_differencing_with(y, opts)?;
    let yd = difference(y, diff.d, diff.seasonal_d, s)?;
    let tent = tentative_orders(&yd, s, opts.max_p, opts.max_q)?;

    let constants: &[bool] = if diff.d + diff.seasonal_d == 0 { &[true] } else { &[true, false] };
    let mut cells = Vec::new();
    for p in 0..=tent.p {
        for q in 0..=tent.q {
            for sp in 0..=tent.seasonal_p {
                for sq in 0..=tent.seasonal_q {
                    for &c in constants {
                        let orders = ArimaOrders::new(p, diff.d, q).seasonal(sp, diff.seasonal_d, sq, s);
                        cells.push((orders, c));
                    }
                }
            }
        }
    }
    let results: Vec<Result<ArimaFit>> = cells
        .par_iter()
        .map(|(orders, c)| fit_with(y, orders, &FitOptions { include_constant: Some(*c), max_evals: opts.max_evals }))
        .collect();

    let mut candidates = Vec::with_capacity(cells.len());
    let mut best: Option<ArimaFit> = None;
    let mut best_boundary: Option<ArimaFit> = None;
    let mut last_err = None;
    for ((orders, c), r) in cells.iter().zip(results) {
        match r {
            Ok(f) if near_unit_root(&f) => {
                let (ar, ma) = root_moduli(&f);
                candidates.push(Candidate {
                    orders: *orders,
                    include_constant: *c,
                    bic: Some(f.bic),
                    error: Some(format!("root near the unit circle (AR {ar:.4}, MA {ma:.4})")),
                });
                if best_boundary.as_ref().is_none_or(|b| f.bic < b.bic) {
                    best_boundary = Some(f);
                }
            }
            Ok(f) => {
                candidates.push(Candidate { orders: *orders, include_constant: *c, bic: Some(f.bic), error: None });
                if best.as_ref().is_none_or(|b| f.bic < b.bic) {
                    best = Some(f);
                }
            }
            Err(e) => {
                log::debug!("{orders} (constant: {c}) failed: {e}");
                candidates.push(Candidate { orders: *orders, include_constant: *c, bic: None, error: Some(e.to_string()) });
                last_err = Some(e);
            }
        }
    }
    if best.is_none() && best_boundary.is_some() {
        log::warn!("every converged candidate has a root near the unit circle; using the best of them");
        best = best_boundary;
    }
    match best {
        Some(fit) => Ok(AutoFit { fit, differencing: Some(diff), tentative: Some(tent), candidates }),
        None => Err(last_err.unwrap_or_else(|| Error::InvalidArgument("empty order grid".into()))),
    }
}
