//! Derivative-free Nelder–Mead simplex minimization.

#[derive(Debug, Clone)]
pub(crate) struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when (f_worst − f_best) ≤ ftol · |f_best| (+ a tiny absolute floor).
    pub ftol: f64,
    /// Extra restarts from the best vertex after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 2000, ftol: 1e-10, restarts: 2 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimize `f` from `x0` with per-coordinate initial simplex steps.
/// Non-finite objective values are treated as +∞.
pub(crate) fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return Minimum { x: Vec::new(), f: v, evals, converged: true };
    }

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut converged_any = false;
    let mut step_scale = 1.0;

    for round in 0..=opts.restarts {
        let mut simplex: Vec<Vec<f64>> = vec![best_x.clone()];
        let mut values = vec![best_f];
        for i in 0..n {
            let mut v = best_x.clone();
            v[i] += steps[i] * step_scale;
            let fv = eval(&v, &mut evals);
            simplex.push(v);
            values.push(fv);
        }
        let start_f = best_f;
        let mut converged = false;

        while evals < opts.max_evals {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let (fb, fw) = (values[0], values[n]);
            if fw.is_finite() && fw - fb <= opts.ftol * fb.abs() + 1e-300 {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
            };

            let xr = along(-1.0);
            let fr = eval(&xr, &mut evals);
            if fr < values[0] {
                let xe = along(-2.0);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            // shrink toward the best vertex
            for i in 1..=n {
                let v: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
                values[i] = eval(&v, &mut evals);
                simplex[i] = v;
            }
        }

        let (bi, _) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty simplex");
        if values[bi] <= best_f {
            best_f = values[bi];
            best_x = simplex[bi].clone();
        }
        if !converged {
            break;
        }
        converged_any = true;
        // a restart that gains nothing confirms the optimum
        if round > 0 && start_f - best_f <= opts.ftol * best_f.abs() + 1e-300 {
            break;
        }
        step_scale *= 0.1;
    }

    Minimum { x: best_x, f: best_f, evals, converged: converged_any }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let m = nelder_mead(
            |x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + 3.0,
            &[0.0, 0.0],
            &[0.5, 0.5],
            &NelderMeadOptions::default(),
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4);
        assert!((m.x[1] + 2.0).abs() < 1e-4);
        assert!((m.f - 3.0).abs() < 1e-9);
    }

    #[test]
    fn rosenbrock() {
        let m = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2) + 1.0,
            &[-1.2, 1.0],
            &[0.2, 0.2],
            &NelderMeadOptions { max_evals: 5000, ..Default::default() },
        );
        assert!((m.x[0] - 1.0).abs() < 1e-3, "{:?}", m);
        assert!((m.x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn infinite_region_avoided() {
        let m = nelder_mead(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.2).powi(2) + 1.0 },
            &[1.0],
            &[0.5],
            &NelderMeadOptions::default(),
        );
        assert!((m.x[0] - 0.2).abs() < 1e-4);
    }

    #[test]
    fn budget_respected() {
        let m = nelder_mead(
            |x| x.iter().map(|v| v.abs().sqrt()).sum::<f64>() + 1.0,
            &[3.0, -2.0, 1.0],
            &[1.0, 1.0, 1.0],
            &NelderMeadOptions { max_evals: 30, ..Default::default() },
        );
        assert!(m.evals <= 34);
        assert!(!m.converged);
    }
}
