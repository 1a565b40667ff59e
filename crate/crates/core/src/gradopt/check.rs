//! Central finite-difference verification of forward-mode derivatives.

use super::forward::{linearize, VectorFn};
use super::GradError;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckTolerance {
    pub rtol: f64,
    pub atol: f64,
    /// Relative step: `h_j = step · max(1, |x_j|)`.
    pub step: f64,
}

impl Default for GradCheckTolerance {
    fn default() -> Self {
        GradCheckTolerance { rtol: 1e-5, atol: 1e-8, step: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub output: usize,
    pub input: usize,
    pub ad: f64,
    pub fd: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub mismatches: Vec<Mismatch>,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compare the forward-mode Jacobian of `f` with central differences.
pub fn check_gradient<F: VectorFn>(
    f: &F,
    x: &[f64],
    tol: GradCheckTolerance,
) -> Result<GradCheckReport, GradError> {
    let lin = linearize(f, x, 16)?;
    let mut report = GradCheckReport { max_rel_error: 0.0, max_abs_error: 0.0, mismatches: Vec::new(), checked: 0 };
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = tol.step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let fp = f.eval::<f64>(&xp)?;
        xp[j] = x[j] - h;
        let fm = f.eval::<f64>(&xp)?;
        xp[j] = x[j];
        for i in 0..fp.len() {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            let ad = lin.jacobian[(i, j)];
            let err = (ad - fd).abs();
            let scale = ad.abs().max(fd.abs());
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max(err);
            if scale > 0.0 {
                report.max_rel_error = report.max_rel_error.max(err / scale);
            }
            if err > tol.atol + tol.rtol * scale || !fd.is_finite() {
                report.mismatches.push(Mismatch { output: i, input: j, ad, fd });
            }
        }
    }
    Ok(report)
}
