//! Conditional-sum-of-squares estimation.
//!
//! The constant and any regression coefficients enter the one-step errors
//! linearly once the ARMA coefficients are fixed, so they are concentrated
//! out by least squares on filtered columns. The simplex search only runs
//! over the ARMA coefficients, expressed through partial autocorrelations so
//! every trial point is stationary and invertible.

use super::css::{
    ar_from_free, arma_filter, expand_ar, expand_ma, free_from_ar, free_from_ma, ma_from_free, residuals_unchecked,
};
use super::difference::difference;
use super::{ArimaFit, ArimaOrders, ArimaParams, Coefficient, CoefficientKind};
use crate::error::{Error, Result};
use crate::linalg::{lstsq_min_norm, ols, sym_inverse};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::stats::dist::normal_sf;

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// `None` includes a constant exactly when d + D = 0.
    pub include_constant: Option<bool>,
    pub max_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { include_constant: None, max_evals: 2000 }
    }
}

/// An exogenous input on the original (undifferenced) time scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub name: String,
    pub values: Vec<f64>,
}

pub fn fit(y: &[f64], orders: &ArimaOrders) -> Result<ArimaFit> {
    fit_with(y, orders, &FitOptions::default())
}

pub fn fit_with(y: &[f64], orders: &ArimaOrders, opts: &FitOptions) -> Result<ArimaFit> {
    fit_regression(y, orders, &[], opts)
}

/// Split of the ARMA coefficient vector into its four blocks.
#[derive(Clone, Copy)]
struct Layout {
    p: usize,
    q: usize,
    sp: usize,
    sq: usize,
}

impl Layout {
    fn of(o: &ArimaOrders) -> Self {
        Self { p: o.p, q: o.q, sp: o.seasonal_p, sq: o.seasonal_q }
    }

    fn len(&self) -> usize {
        self.p + self.q + self.sp + self.sq
    }

    /// Free vector → (φ, θ, Φ, Θ).
    fn natural(&self, free: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (a, rest) = free.split_at(self.p);
        let (b, rest) = rest.split_at(self.q);
        let (c, d) = rest.split_at(self.sp);
        (ar_from_free(a), ma_from_free(b), ar_from_free(c), ma_from_free(d))
    }
}

/// Fit regression-with-ARIMA-errors by CSS. Regressors are differenced with
/// the series.
pub(crate) fn fit_regression(
    y: &[f64],
    orders: &ArimaOrders,
    regressors: &[Regressor],
    opts: &FitOptions,
) -> Result<ArimaFit> {
    orders.validate()?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    if y.len() < orders.min_length() {
        return Err(Error::InsufficientData { what: "ARIMA fit", needed: orders.min_length(), got: y.len() });
    }
    for r in regressors {
        if r.values.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "regressor '{}' has {} values for a series of {}",
                r.name,
                r.values.len(),
                y.len()
            )));
        }
    }
    let include_constant = opts
        .include_constant
        .unwrap_or(orders.d + orders.seasonal_d == 0);
    let s = orders.season;
    let yd = difference(y, orders.d, orders.seasonal_d, s)?;
    let xd: Vec<Vec<f64>> = regressors
        .iter()
        .map(|r| difference(&r.values, orders.d, orders.seasonal_d, s))
        .collect::<Result<_>>()?;
    check_regressors(regressors, &xd, include_constant)?;
    let n = yd.len();

    // columns of the concentrated regression
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if include_constant {
        columns.push(vec![1.0; n]);
    }
    columns.extend(xd.iter().cloned());

    let layout = Layout::of(orders);
    let mut evaluations = 0;
    let free_opt: Vec<f64> = if layout.len() == 0 {
        Vec::new()
    } else {
        let start = initial_free(&yd, &columns, orders);
        let steps = vec![0.25; start.len()];
        let objective = |free: &[f64]| {
            let (phi, theta, sphi, stheta) = layout.natural(free);
            let ar = expand_ar(&phi, &sphi, s);
            let ma = expand_ma(&theta, &stheta, s);
            concentrated(&yd, &columns, &ar, &ma).map(|(rss, _)| rss).unwrap_or(f64::INFINITY)
        };
        let nm = NelderMeadOptions { max_evals: opts.max_evals, ..Default::default() };
        let m = nelder_mead(objective, &start, &steps, &nm);
        evaluations = m.evals;
        if !m.converged {
            return Err(Error::NonConvergence { evaluations: m.evals, best_objective: m.f, best_params: m.x });
        }
        m.x
    };

    let (phi, theta, seasonal_phi, seasonal_theta) = layout.natural(&free_opt);
    let ar = expand_ar(&phi, &seasonal_phi, s);
    let ma = expand_ma(&theta, &seasonal_theta, s);
    let (_, coef) = concentrated(&yd, &columns, &ar, &ma)?;
    let (mu, beta) = if include_constant { (coef[0], coef[1..].to_vec()) } else { (0.0, coef) };
    let c = mu * (1.0 - ar.iter().sum::<f64>());

    let xb: Option<Vec<f64>> = (!beta.is_empty())
        .then(|| (0..n).map(|t| xd.iter().zip(&beta).map(|(x, b)| x[t] * b).sum()).collect());
    let mut params = ArimaParams { c, phi, theta, seasonal_phi, seasonal_theta, sigma2: 0.0 };
    let residuals = residuals_unchecked(&yd, xb.as_deref(), orders, &params);
    let css: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = css / n as f64;
    params.sigma2 = sigma2;

    let names = coefficient_names(orders, include_constant, regressors);
    let k = names.len();
    let scale = yd.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let degenerate = sigma2 <= 1e-24 * scale.max(1e-300) || sigma2 == 0.0;
    let bic = if degenerate {
        f64::NEG_INFINITY
    } else {
        n as f64 * sigma2.ln() + k as f64 * (n as f64).ln()
    };

    let natural = natural_vector(&params, &beta, include_constant);
    let std_errors = if degenerate {
        vec![0.0; k]
    } else {
        hessian_std_errors(&yd, &xd, orders, include_constant, &natural, sigma2)
    };
    let coefficients = names
        .into_iter()
        .zip(natural.iter().zip(&std_errors))
        .map(|((name, kind), (&estimate, &std_error))| Coefficient {
            name,
            kind,
            estimate,
            std_error,
            p_value: if std_error > 0.0 && std_error.is_finite() {
                2.0 * normal_sf((estimate / std_error).abs())
            } else {
                f64::NAN
            },
        })
        .collect();

    Ok(ArimaFit {
        orders: *orders,
        include_constant,
        params,
        beta,
        regressor_names: regressors.iter().map(|r| r.name.clone()).collect(),
        coefficients,
        css,
        bic,
        residuals,
        n_effective: n,
        series: y.to_vec(),
        evaluations,
        degenerate,
    })
}

fn check_regressors(regressors: &[Regressor], xd: &[Vec<f64>], include_constant: bool) -> Result<()> {
    let centered = |x: &[f64]| -> Vec<f64> {
        if include_constant {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            x.iter().map(|v| v - m).collect()
        } else {
            x.to_vec()
        }
    };
    let mut normed = Vec::with_capacity(xd.len());
    for (r, x) in regressors.iter().zip(xd) {
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroVarianceRegressor(r.name.clone()));
        }
        let c = centered(x);
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-12 * x.iter().map(|v| v.abs()).fold(0.0, f64::max) {
            return Err(Error::CollinearRegressors(r.name.clone(), "constant".into()));
        }
        normed.push(c.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    for i in 0..normed.len() {
        for j in i + 1..normed.len() {
            let cos: f64 = normed[i].iter().zip(&normed[j]).map(|(a, b)| a * b).sum();
            if cos.abs() > 1.0 - 1e-10 {
                return Err(Error::CollinearRegressors(regressors[i].name.clone(), regressors[j].name.clone()));
            }
        }
    }
    Ok(())
}

/// Filter the response and every column through the ARMA inverse, then
/// regress. Returns (rss, coefficients).
fn concentrated(yd: &[f64], columns: &[Vec<f64>], ar: &[f64], ma: &[f64]) -> Result<(f64, Vec<f64>)> {
    let fy = arma_filter(yd, ar, ma);
    if columns.is_empty() {
        return Ok((fy.iter().map(|v| v * v).sum(), Vec::new()));
    }
    let fx: Vec<Vec<f64>> = columns.iter().map(|c| arma_filter(c, ar, ma)).collect();
    let rows: Vec<Vec<f64>> = (0..yd.len()).map(|t| fx.iter().map(|c| c[t]).collect()).collect();
    let fit = ols(&rows, &fy)?;
    Ok((fit.rss, fit.beta))
}

/// Hannan–Rissanen style starting values: long-AR residuals stand in for
/// the innovations, then one regression on lagged values and residuals.
fn initial_free(yd: &[f64], columns: &[Vec<f64>], orders: &ArimaOrders) -> Vec<f64> {
    let n = yd.len();
    let s = orders.season;
    // remove the regression part by plain least squares first
    let w: Vec<f64> = if columns.is_empty() {
        yd.to_vec()
    } else {
        let rows: Vec<Vec<f64>> = (0..n).map(|t| columns.iter().map(|c| c[t]).collect()).collect();
        match ols(&rows, yd) {
            Ok(f) => (0..n).map(|t| yd[t] - rows[t].iter().zip(&f.beta).map(|(x, b)| x * b).sum::<f64>()).collect(),
            Err(_) => yd.to_vec(),
        }
    };
    let zeros = || vec![0.0; orders.arma_count()];
    let lags_ar: Vec<usize> = (1..=orders.p).chain((1..=orders.seasonal_p).map(|j| j * s)).collect();
    let lags_ma: Vec<usize> = (1..=orders.q).chain((1..=orders.seasonal_q).map(|j| j * s)).collect();
    let long = ((n as f64 / 10.0).min(20.0).ceil() as usize).max(1);
    let max_lag = lags_ar.iter().chain(&lags_ma).copied().max().unwrap_or(0);
    let start = long + max_lag;
    let k = lags_ar.len() + lags_ma.len();
    if n < start + k + 5 {
        return zeros();
    }
    let resid = match long_ar_residuals(&w, long) {
        Some(r) => r,
        None => return zeros(),
    };
    let rows: Vec<Vec<f64>> = (start..n)
        .map(|t| {
            lags_ar
                .iter()
                .map(|&l| w[t - l])
                .chain(lags_ma.iter().map(|&l| resid[t - l]))
                .collect()
        })
        .collect();
    let target: Vec<f64> = (start..n).map(|t| w[t]).collect();
    let beta = match ols(&rows, &target) {
        Ok(f) => f.beta,
        Err(_) => return zeros(),
    };
    let (ar_part, ma_part) = beta.split_at(lags_ar.len());
    let (phi, sphi) = ar_part.split_at(orders.p);
    let (theta, stheta) = ma_part.split_at(orders.q);
    let mut free = free_from_ar(phi);
    free.extend(free_from_ma(theta));
    free.extend(free_from_ar(sphi));
    free.extend(free_from_ma(stheta));
    free
}

/// Residuals of an AR(`order`) fitted by least squares to the centered series;
/// the first `order` entries are zero.
pub(crate) fn long_ar_residuals(w: &[f64], order: usize) -> Option<Vec<f64>> {
    let n = w.len();
    if n <= 2 * order + 2 {
        return None;
    }
    let m = w.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = w.iter().map(|v| v - m).collect();
    let rows: Vec<Vec<f64>> = (order..n).map(|t| (1..=order).map(|l| c[t - l]).collect()).collect();
    let target: Vec<f64> = c[order..].to_vec();
    // a perfectly periodic series gives a rank-deficient lag matrix
    let beta = match ols(&rows, &target) {
        Ok(fit) => fit.beta,
        Err(_) => lstsq_min_norm(&rows, &target)?.0,
    };
    let mut resid = vec![0.0; n];
    for (i, t) in (order..n).enumerate() {
        resid[t] = target[i] - rows[i].iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>();
    }
    Some(resid)
}

fn coefficient_names(o: &ArimaOrders, include_constant: bool, regressors: &[Regressor]) -> Vec<(String, CoefficientKind)> {
    let mut names = Vec::new();
    if include_constant {
        names.push(("Constant".to_string(), CoefficientKind::Constant));
    }
    names.extend(regressors.iter().map(|r| (r.name.clone(), CoefficientKind::Regressor)));
    names.extend((1..=o.p).map(|i| (format!("AR({i})"), CoefficientKind::Ar)));
    names.extend((1..=o.q).map(|i| (format!("MA({i})"), CoefficientKind::Ma)));
    names.extend((1..=o.seasonal_p).map(|j| (format!("AR({})", j * o.season), CoefficientKind::SeasonalAr)));
    names.extend((1..=o.seasonal_q).map(|j| (format!("MA({})", j * o.season), CoefficientKind::SeasonalMa)));
    names
}

/// Estimates in reporting order: [c], β, φ, θ, Φ, Θ.
fn natural_vector(p: &ArimaParams, beta: &[f64], include_constant: bool) -> Vec<f64> {
    let mut v = Vec::new();
    if include_constant {
        v.push(p.c);
    }
    v.extend_from_slice(beta);
    v.extend_from_slice(&p.phi);
    v.extend_from_slice(&p.theta);
    v.extend_from_slice(&p.seasonal_phi);
    v.extend_from_slice(&p.seasonal_theta);
    v
}

/// CSS as a function of the natural coefficient vector, without admissibility checks.
pub(crate) fn css_natural(yd: &[f64], xd: &[Vec<f64>], o: &ArimaOrders, include_constant: bool, v: &[f64]) -> f64 {
    let mut i = 0;
    let c = if include_constant {
        i += 1;
        v[0]
    } else {
        0.0
    };
    let beta = &v[i..i + xd.len()];
    i += xd.len();
    let mut take = |len: usize| {
        let out = v[i..i + len].to_vec();
        i += len;
        out
    };
    let phi = take(o.p);
    let theta = take(o.q);
    let seasonal_phi = take(o.seasonal_p);
    let seasonal_theta = take(o.seasonal_q);
    let params = ArimaParams { c, phi, theta, seasonal_phi, seasonal_theta, sigma2: 1.0 };
    let xb: Option<Vec<f64>> = (!xd.is_empty())
        .then(|| (0..yd.len()).map(|t| xd.iter().zip(beta).map(|(x, b)| x[t] * b).sum()).collect());
    residuals_unchecked(yd, xb.as_deref(), o, &params).iter().map(|e| e * e).sum()
}

/// Standard errors from `Cov = 2σ² H⁻¹`, H the finite-difference Hessian of
/// the CSS at the estimate. Entries are NaN when H is not positive definite.
fn hessian_std_errors(
    yd: &[f64],
    xd: &[Vec<f64>],
    o: &ArimaOrders,
    include_constant: bool,
    x: &[f64],
    sigma2: f64,
) -> Vec<f64> {
    let k = x.len();
    let f = |v: &[f64]| css_natural(yd, xd, o, include_constant, v);
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut hess = vec![vec![0.0; k]; k];
    let mut pt = x.to_vec();
    for i in 0..k {
        pt[i] = x[i] + h[i];
        let fp = f(&pt);
        pt[i] = x[i] - h[i];
        let fm = f(&pt);
        pt[i] = x[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                pt[i] = x[i] + si * h[i];
                pt[j] = x[j] + sj * h[j];
                let v = f(&pt);
                pt[i] = x[i];
                pt[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    match sym_inverse(&hess) {
        Some(inv) => (0..k)
            .map(|i| {
                let var = 2.0 * sigma2 * inv[i][i];
                if var > 0.0 && var.is_finite() {
                    var.sqrt()
                } else {
                    f64::NAN
                }
            })
            .collect(),
        None => vec![f64::NAN; k],
    }
}

#[cfg(test)]
mod tests {
    use super::super::{css_objective, simulate};
    use super::*;

    fn ar1_params(phi: f64) -> ArimaParams {
        ArimaParams { c: 0.0, phi: vec![phi], theta: vec![], seasonal_phi: vec![], seasonal_theta: vec![], sigma2: 1.0 }
    }

    #[test]
    fn white_noise_closed_form() {
        let o = ArimaOrders::new(0, 0, 0);
        let y = simulate(&o, &ArimaParams { c: 3.0, ..ArimaParams::zeros(&o, 4.0) }, 400, 5).unwrap();
        let f = fit(&y, &o).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() as f64 - 1.0);
        assert!((f.params.c - mean).abs() < 1e-10);
        assert!((f.params.sigma2 / var - 1.0).abs() < 0.02);
        // SE of the mean is σ/√n
        let se = f.coefficient("Constant").unwrap().std_error;
        assert!((se / (f.params.sigma2 / y.len() as f64).sqrt() - 1.0).abs() < 1e-4);
        assert_eq!(f.n_effective, 400);
        let k = 1.0;
        let n = 400.0f64;
        assert!((f.bic - (n * f.params.sigma2.ln() + k * n.ln())).abs() < 1e-9);
    }

    #[test]
    fn recovers_ar1() {
        let o = ArimaOrders::new(1, 0, 0);
        let y = simulate(&o, &ar1_params(0.6), 500, 17).unwrap();
        let f = fit(&y, &o).unwrap();
        assert!((f.params.phi[0] - 0.6).abs() < 0.1, "{:?}", f.params);
        assert!(f.params.is_admissible());
        assert_eq!(f.residuals.len(), 500);
        assert_eq!(f.coefficients.len(), 2);
        let se = f.coefficient("AR(1)").unwrap().std_error;
        // asymptotic sqrt((1 − φ²)/n) ≈ 0.0358
        assert!((se - 0.0358).abs() < 0.01, "se {se}");
    }

    #[test]
    fn recovers_ima11() {
        let o = ArimaOrders::new(0, 1, 1);
        let p = ArimaParams { theta: vec![0.5], ..ArimaParams::zeros(&o, 1.0) };
        let y = simulate(&o, &p, 500, 3).unwrap();
        let f = fit(&y, &o).unwrap();
        assert!(!f.include_constant);
        assert!((f.params.theta[0] - 0.5).abs() < 0.15, "{:?}", f.params);
        assert_eq!(f.n_effective, 499);
    }

    #[test]
    fn optimum_is_stationary_point() {
        let o = ArimaOrders::new(1, 0, 1);
        let p = ArimaParams { c: 2.0, phi: vec![0.5], theta: vec![0.3], ..ArimaParams::zeros(&o, 1.0) };
        let y = simulate(&o, &p, 300, 8).unwrap();
        let f = fit(&y, &o).unwrap();
        let x = natural_vector(&f.params, &[], true);
        let obj = |v: &[f64]| css_natural(&y, &[], &o, true, v);
        let f0 = obj(&x);
        assert!((f0 - f.css).abs() < 1e-9 * f0);
        for i in 0..x.len() {
            let h = 1e-5;
            let mut a = x.clone();
            a[i] += h;
            let mut b = x.clone();
            b[i] -= h;
            let g = (obj(&a) - obj(&b)) / (2.0 * h);
            assert!(g.abs() < 1e-4 * f0, "grad[{i}] = {g}, objective {f0}");
        }
        // the public objective agrees at the optimum
        assert!((css_objective(&y, &o, &f.params).unwrap() - f.css).abs() < 1e-9 * f.css);
    }

    #[test]
    fn seasonal_model_fits() {
        let o = ArimaOrders::new(1, 0, 0).seasonal(1, 0, 0, 12);
        let p = ArimaParams { c: 1.0, phi: vec![0.4], seasonal_phi: vec![0.5], ..ArimaParams::zeros(&o, 1.0) };
        let y = simulate(&o, &p, 400, 21).unwrap();
        let f = fit(&y, &o).unwrap();
        assert!((f.params.phi[0] - 0.4).abs() < 0.12, "{:?}", f.params);
        assert!((f.params.seasonal_phi[0] - 0.5).abs() < 0.12, "{:?}", f.params);
        let names: Vec<&str> = f.coefficients.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["Constant", "AR(1)", "AR(12)"]);
    }

    #[test]
    fn too_short_rejected() {
        let o = ArimaOrders::new(2, 1, 1);
        assert!(matches!(fit(&[1.0; 12], &o), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn regressor_checks() {
        let y: Vec<f64> = (0..50).map(|t| (t as f64 * 0.7).sin()).collect();
        let o = ArimaOrders::new(0, 0, 0);
        let zero = Regressor { name: "z".into(), values: vec![0.0; 50] };
        assert!(matches!(
            fit_regression(&y, &o, &[zero], &FitOptions::default()),
            Err(Error::ZeroVarianceRegressor(n)) if n == "z"
        ));
        let step: Vec<f64> = (0..50).map(|t| if t >= 20 { 1.0 } else { 0.0 }).collect();
        let a = Regressor { name: "a".into(), values: step.clone() };
        let b = Regressor { name: "b".into(), values: step.iter().map(|v| 2.0 * v).collect() };
        match fit_regression(&y, &o, &[a.clone(), b], &FitOptions::default()) {
            Err(Error::CollinearRegressors(x, z)) => assert_eq!((x.as_str(), z.as_str()), ("a", "b")),
            other => panic!("expected collinearity error, got {other:?}"),
        }
        let ones = Regressor { name: "ones".into(), values: vec![1.0; 50] };
        assert!(matches!(
            fit_regression(&y, &o, &[ones], &FitOptions::default()),
            Err(Error::CollinearRegressors(_, c)) if c == "constant"
        ));
        assert!(fit_regression(&y, &o, &[a], &FitOptions::default()).is_ok());
    }

    #[test]
    fn constant_series_is_degenerate() {
        let f = fit(&[4.0; 30], &ArimaOrders::new(0, 0, 0)).unwrap();
        assert!(f.degenerate);
        assert!((f.params.c - 4.0).abs() < 1e-12);
        assert_eq!(f.bic, f64::NEG_INFINITY);
    }

    #[test]
    fn fitted_values_align() {
        let o = ArimaOrders::new(0, 1, 1);
        let p = ArimaParams { theta: vec![0.3], ..ArimaParams::zeros(&o, 1.0) };
        let y = simulate(&o, &p, 60, 1).unwrap();
        let f = fit(&y, &o).unwrap();
        let fv = f.fitted_values();
        assert!(fv[0].is_none());
        for t in 1..60 {
            assert!((fv[t].unwrap() + f.residuals[t - 1] - y[t]).abs() < 1e-9);
        }
    }
}
