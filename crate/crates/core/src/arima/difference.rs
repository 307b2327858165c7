use crate::error::{Error, Result};

fn lag_diff(y: &[f64], lag: usize) -> Vec<f64> {
    y.iter().skip(lag).zip(y).map(|(a, b)| a - b).collect()
}

/// Apply Δ^d, then the seasonal Δ_s^D. Output length is n − d − D·s.
pub fn difference(y: &[f64], d: usize, seasonal_d: usize, season: usize) -> Result<Vec<f64>> {
    let lost = d + seasonal_d * season;
    if y.len() <= lost {
        return Err(Error::InsufficientData { what: "differencing", needed: lost + 1, got: y.len() });
    }
    if seasonal_d > 0 && season == 0 {
        return Err(Error::InvalidArgument("seasonal differencing needs a season length".into()));
    }
    let mut out = y.to_vec();
    for _ in 0..d {
        out = lag_diff(&out, 1);
    }
    for _ in 0..seasonal_d {
        out = lag_diff(&out, season);
    }
    Ok(out)
}

/// Invert [`difference`] given the first `d + D·s` values of the original series.
pub fn integrate(diffed: &[f64], head: &[f64], d: usize, seasonal_d: usize, season: usize) -> Result<Vec<f64>> {
    let lost = d + seasonal_d * season;
    if head.len() != lost {
        return Err(Error::InvalidArgument(format!("need {lost} initial values, got {}", head.len())));
    }
    // heads of every intermediate series, in the order difference() builds them
    let mut heads = vec![head.to_vec()];
    for _ in 0..d {
        let next = lag_diff(heads.last().unwrap(), 1);
        heads.push(next);
    }
    for _ in 0..seasonal_d {
        let next = lag_diff(heads.last().unwrap(), season);
        heads.push(next);
    }
    let mut cur = diffed.to_vec();
    for level in (0..seasonal_d).rev() {
        let h = &heads[d + level];
        cur = undo(&cur, h, season);
    }
    for level in (0..d).rev() {
        cur = undo(&cur, &heads[level], 1);
    }
    Ok(cur)
}

/// Rebuild x from Δ_lag x, where `head` holds x's first values.
fn undo(dx: &[f64], head: &[f64], lag: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(dx.len() + lag);
    x.extend_from_slice(&head[..lag]);
    for t in lag..dx.len() + lag {
        let v = dx[t - lag] + x[t - lag];
        x.push(v);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_series() {
        let y: Vec<f64> = (0..10).map(|t| 2.0 * t as f64).collect();
        assert_eq!(difference(&y, 1, 0, 12).unwrap(), vec![2.0; 9]);
        assert_eq!(difference(&y, 0, 0, 12).unwrap(), y);
        assert_eq!(difference(&y, 2, 0, 12).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn seasonal_lengths() {
        let y: Vec<f64> = (0..40).map(|t| (t % 12) as f64).collect();
        let s = difference(&y, 0, 1, 12).unwrap();
        assert_eq!(s.len(), 28);
        assert!(s.iter().all(|v| *v == 0.0));
        assert_eq!(difference(&y, 1, 1, 12).unwrap().len(), 27);
        assert!(difference(&y[..12], 0, 1, 12).is_err());
    }

    proptest! {
        #[test]
        fn integrate_inverts(y in prop::collection::vec(-1e3f64..1e3, 40..80), d in 0usize..3, sd in 0usize..2) {
            let s = 4;
            let lost = d + sd * s;
            let dy = difference(&y, d, sd, s).unwrap();
            prop_assert_eq!(dy.len(), y.len() - lost);
            let back = integrate(&dy, &y[..lost], d, sd, s).unwrap();
            prop_assert_eq!(back.len(), y.len());
            for (a, b) in back.iter().zip(&y) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
