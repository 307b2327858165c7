use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::difference::integrate;
use super::{ArimaOrders, ArimaParams};
use crate::error::{Error, Result};

const BURN_IN: usize = 200;

/// Simulate `n` observations from the model. The ARMA recursion runs on the
/// differenced scale with a discarded burn-in, then is integrated with zero
/// initial values.
pub fn simulate(orders: &ArimaOrders, params: &ArimaParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    orders.validate()?;
    params.check_shape(orders)?;
    if n == 0 {
        return Err(Error::InvalidArgument("simulation length must be positive".into()));
    }
    if !params.is_admissible() {
        return Err(Error::InvalidParams("AR part not stationary or MA part not invertible".into()));
    }
    if !(params.sigma2 >= 0.0 && params.sigma2.is_finite()) {
        return Err(Error::InvalidParams(format!("innovation variance {} is invalid", params.sigma2)));
    }
    let lost = orders.lost_to_differencing();
    if n <= lost {
        return Err(Error::InvalidArgument(format!("n = {n} leaves nothing after {lost} integration steps")));
    }
    let s = orders.season;
    let ar = params.ar_poly(s);
    let ma = params.ma_poly(s);
    let mu = params.mean(s);
    let normal = Normal::new(0.0, params.sigma2.sqrt()).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let m = n - lost;
    let total = BURN_IN + m;
    let mut eps = Vec::with_capacity(total);
    let mut dev = Vec::with_capacity(total);
    for t in 0..total {
        let e: f64 = normal.sample(&mut rng);
        let mut v = e;
        for (k, a) in ar.iter().enumerate().take(t) {
            v += a * dev[t - k - 1];
        }
        for (k, b) in ma.iter().enumerate().take(t) {
            v += b * eps[t - k - 1];
        }
        eps.push(e);
        dev.push(v);
    }
    let w: Vec<f64> = dev[BURN_IN..].iter().map(|v| v + mu).collect();
    if lost == 0 {
        return Ok(w);
    }
    integrate(&w, &vec![0.0; lost], orders.d, orders.seasonal_d, s)
}
