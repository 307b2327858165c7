use crate::error::{Error, Result};
use crate::stats::dist::chi2_sf;
use crate::stats::{Alternative, TestResult};

/// Sample autocorrelations r_1..r_max_lag (denominator n, mean removed).
/// Zero-variance input gives zeros.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0; max_lag];
    }
    let m = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    (1..=max_lag)
        .map(|k| {
            if c0 == 0.0 || k >= n {
                0.0
            } else {
                c[k..].iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / c0
            }
        })
        .collect()
}

/// Ljung–Box portmanteau test. Degrees of freedom are `lag − fitted_params`,
/// at least 1.
pub fn ljung_box(residuals: &[f64], lag: usize, fitted_params: usize) -> Result<TestResult> {
    let n = residuals.len();
    if lag == 0 {
        return Err(Error::InvalidArgument("Ljung-Box lag must be positive".into()));
    }
    if n <= lag {
        return Err(Error::InsufficientData { what: "Ljung-Box test", needed: lag + 1, got: n });
    }
    let r = acf(residuals, lag);
    let nf = n as f64;
    let q = nf * (nf + 2.0) * r.iter().enumerate().map(|(i, rk)| rk * rk / (nf - (i + 1) as f64)).sum::<f64>();
    let df = lag.saturating_sub(fitted_params).max(1) as f64;
    Ok(TestResult { statistic: q, df: vec![df], p_value: chi2_sf(q, df), alternative: Alternative::Greater })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn acf_hand_example() {
        // centered: -1.5, -0.5, 0.5, 1.5; c0 = 5
        let r = acf(&[1.0, 2.0, 3.0, 4.0], 2);
        assert!((r[0] - (0.75 - 0.25 + 0.75) / 5.0).abs() < 1e-12);
        assert!((r[1] - (-0.75 - 0.75) / 5.0).abs() < 1e-12);
        assert_eq!(acf(&[2.0; 5], 2), vec![0.0, 0.0]);
    }

    #[test]
    fn size_on_white_noise() {
        let rejections = (0..200).filter(|&s| ljung_box(&noise(120, s), 12, 0).unwrap().p_value < 0.05).count();
        assert!((4..=16).contains(&rejections), "{rejections}/200");
    }

    #[test]
    fn detects_strong_autocorrelation() {
        let x: Vec<f64> = noise(200, 4)
            .iter()
            .scan(0.0, |s, e| {
                *s = 0.9 * *s + e;
                Some(*s)
            })
            .collect();
        assert!(ljung_box(&x, 12, 0).unwrap().p_value < 0.01);
    }

    #[test]
    fn df_floor_and_errors() {
        let r = ljung_box(&noise(50, 1), 3, 5).unwrap();
        assert_eq!(r.df, vec![1.0]);
        assert!(ljung_box(&[1.0; 12], 12, 0).is_err());
    }

    proptest! {
        #[test]
        fn q_nonnegative(x in prop::collection::vec(-1e3f64..1e3, 15..60)) {
            let r = ljung_box(&x, 12, 2).unwrap();
            prop_assert!(r.statistic >= 0.0);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
