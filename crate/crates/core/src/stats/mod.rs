//! Confidence intervals, one-way ANOVA, one-sided t-tests and percent change.

pub mod dist;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample mean with a t-based confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCI {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// One value for t and chi-square tests, (between, within) for F.
    pub df: Vec<f64>,
    pub p_value: f64,
    pub alternative: Alternative,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with an n − 1 denominator.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("values must be finite".into()))
    }
}

/// `mean ± t(1 − α/2, n − 1) · sd / √n`.
pub fn mean_ci(values: &[f64], level: f64) -> Result<MeanCI> {
    if values.len() < 2 {
        return Err(Error::Undefined(format!("confidence interval needs n >= 2, got {}", values.len())));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence level {level} not in (0, 1)")));
    }
    check_finite(values)?;
    let n = values.len();
    let m = mean(values);
    let se = std_dev(values) / (n as f64).sqrt();
    let half = dist::t_quantile(0.5 + level / 2.0, n as f64 - 1.0) * se;
    Ok(MeanCI { mean: m, lo: m - half, hi: m + half, level, n })
}

/// One-way ANOVA F test on `groups`.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(format!("ANOVA needs at least 2 groups, got {}", groups.len())));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::InvalidArgument(format!("group {i} has {} values, need at least 2", g.len())));
        }
        check_finite(g)?;
    }
    let k = groups.len() as f64;
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let n = n_total as f64;
    let grand = groups.iter().flatten().sum::<f64>() / n;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let (df1, df2) = (k - 1.0, n - k);
    let ms_between = ss_between / df1;
    let ms_within = ss_within / df2;
    let (f, p) = if ms_between == 0.0 {
        (0.0, 1.0)
    } else if ms_within == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = ms_between / ms_within;
        (f, dist::f_sf(f, df1, df2))
    };
    Ok(TestResult { statistic: f, df: vec![df1, df2], p_value: p, alternative: Alternative::Greater })
}

/// One-sample t test of H1: mean > `mu0`.
///
/// A zero-variance sample gives t = 0 and p = 0.5 when its mean equals
/// `mu0`, and ±∞ with p = 0 or 1 otherwise.
pub fn t_test_greater(values: &[f64], mu0: f64) -> Result<TestResult> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!("t test needs n >= 2, got {}", values.len())));
    }
    check_finite(values)?;
    let n = values.len() as f64;
    let m = mean(values);
    let sd = std_dev(values);
    let df = n - 1.0;
    let (t, p) = if sd == 0.0 {
        if m == mu0 {
            (0.0, 0.5)
        } else if m > mu0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        }
    } else {
        let t = (m - mu0) / (sd / n.sqrt());
        (t, dist::t_sf(t, df))
    };
    Ok(TestResult { statistic: t, df: vec![df], p_value: p, alternative: Alternative::Greater })
}

/// Relative reduction in percent: `100 · (pre − post) / pre`.
pub fn pct_change(pre_mean: f64, post_mean: f64) -> Result<f64> {
    if pre_mean == 0.0 {
        return Err(Error::Undefined("percent change from a zero baseline".into()));
    }
    Ok(100.0 * (pre_mean - post_mean) / pre_mean)
}
