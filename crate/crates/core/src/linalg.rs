//! Ordinary least squares on small dense designs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Ols {
    pub beta: Vec<f64>,
    pub rss: f64,
    /// Standard errors with the residual variance estimated as rss / (n − k).
    pub std_errors: Vec<f64>,
}

/// Least squares of `y` on the columns of `x` via a QR factorization.
/// `x` is row-major: `x[i]` is observation i.
pub(crate) fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<Ols> {
    let n = y.len();
    let k = x.first().map(Vec::len).unwrap_or(0);
    if x.len() != n {
        return Err(Error::InvalidArgument(format!("design has {} rows for {} observations", x.len(), n)));
    }
    if k == 0 {
        let rss = y.iter().map(|v| v * v).sum();
        return Ok(Ols { beta: Vec::new(), rss, std_errors: Vec::new() });
    }
    if n < k {
        return Err(Error::InsufficientData { what: "least squares", needed: k, got: n });
    }
    let xm = DMatrix::from_fn(n, k, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|j| xm.column(j).norm()).fold(0.0f64, f64::max).max(1e-300);
    for j in 0..k {
        if r[(j, j)].abs() <= 1e-11 * scale {
            return Err(Error::Singular(format!("design column {j} is linearly dependent")));
        }
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    let resid = &yv - &xm * &beta;
    let rss = resid.norm_squared();
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular("triangular inverse failed".into()))?;
    let sigma2 = if n > k { rss / (n - k) as f64 } else { f64::NAN };
    let std_errors = (0..k)
        .map(|j| (sigma2 * rinv.row(j).norm_squared()).sqrt())
        .collect();
    Ok(Ols { beta: beta.iter().copied().collect(), rss, std_errors })
}

/// Minimum-norm least-squares coefficients via SVD; tolerates rank-deficient
/// designs. Returns the coefficients and the residual sum of squares.
pub(crate) fn lstsq_min_norm(x: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = y.len();
    let k = x.first().map(Vec::len).unwrap_or(0);
    if x.len() != n || k == 0 || n == 0 {
        return None;
    }
    let xm = DMatrix::from_fn(n, k, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let svd = xm.clone().svd(true, true);
    let eps = svd.singular_values.max() * 1e-10 * n.max(k) as f64;
    let beta = svd.solve(&yv, eps).ok()?;
    let rss = (&yv - &xm * &beta).norm_squared();
    Some((beta.iter().copied().collect(), rss))
}

/// Inverse of a symmetric matrix given row-major, or `None` when singular.
pub(crate) fn sym_inverse(h: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let k = h.len();
    let m = DMatrix::from_fn(k, k, |i, j| h[i][j]);
    let inv = m.try_inverse()?;
    Some((0..k).map(|i| (0..k).map(|j| inv[(i, j)]).collect()).collect())
}
