//! Levenberg–Marquardt nonlinear least squares on forward-mode Jacobians.

use nalgebra::DVector;

use super::forward::{linearize, VectorFn};
use super::GradError;

#[derive(Debug, Clone, Copy)]
pub struct LeastSquaresSettings {
    pub max_iter: usize,
    /// Relative reduction of the cost below which iteration stops.
    pub ftol: f64,
    /// Relative step size below which iteration stops.
    pub xtol: f64,
    pub initial_damping: f64,
}

impl Default for LeastSquaresSettings {
    fn default() -> Self {
        LeastSquaresSettings { max_iter: 500, ftol: 1e-15, xtol: 1e-12, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct LeastSquaresResult {
    pub x: Vec<f64>,
    /// `½ Σ r²` at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `½‖r(x)‖²` from `x0`.
pub fn least_squares<F: VectorFn>(
    residuals: &F,
    x0: &[f64],
    settings: &LeastSquaresSettings,
) -> Result<LeastSquaresResult, GradError> {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut lin = linearize(residuals, x.as_slice(), n.clamp(1, 32))?;
    let mut cost = 0.5 * lin.values.norm_squared();
    let mut mu = settings.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        iterations += 1;
        let jtj = lin.jacobian.tr_mul(&lin.jacobian);
        let jtr = lin.jacobian.tr_mul(&lin.values);
        if jtr.amax() <= 1e-300 {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += mu * jtj[(j, j)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let xt = &x + &step;
            let trial = match residuals.eval::<f64>(xt.as_slice()) {
                Ok(r) if r.iter().all(|v| v.is_finite()) => DVector::from_vec(r),
                _ => {
                    mu *= 10.0;
                    continue;
                }
            };
            let trial_cost = 0.5 * trial.norm_squared();
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(1e-300);
                let small_step = step.norm() <= settings.xtol * (x.norm() + settings.xtol);
                x = xt;
                cost = trial_cost;
                mu = (mu / 3.0).max(1e-12);
                lin = linearize(residuals, x.as_slice(), n.clamp(1, 32))?;
                improved = true;
                if rel < settings.ftol || small_step {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
            if mu > 1e20 {
                break;
            }
        }
        if !improved {
            // No damping level reduces the cost: stationary to machine precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Ok(LeastSquaresResult { x: x.iter().copied().collect(), cost, iterations, converged })
}
