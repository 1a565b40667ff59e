//! Inequality-constrained quadratic programs via least-distance programming.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::nnls::nnls;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum QpError {
    #[error("quadratic subproblem is infeasible")]
    Infeasible,
    #[error("Hessian approximation is not positive definite")]
    NotPositiveDefinite,
    #[error("non-negative least squares hit its iteration cap")]
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LdpSolution {
    pub z: DVector<f64>,
    pub multipliers: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub d: DVector<f64>,
    /// One non-negative multiplier per row of `A`.
    pub multipliers: DVector<f64>,
}

/// `min ½‖z‖²` subject to `G z ≥ h`.
pub fn solve_ldp(g: &DMatrix<f64>, h: &DVector<f64>) -> Result<LdpSolution, QpError> {
    let (m, n) = g.shape();
    if m == 0 {
        return Ok(LdpSolution { z: DVector::zeros(n), multipliers: DVector::zeros(0) });
    }
    let mut e = DMatrix::zeros(n + 1, m);
    e.view_mut((0, 0), (n, m)).copy_from(&g.transpose());
    e.row_mut(n).copy_from(&h.transpose());
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let sol = nnls(&e, &f);
    if !sol.converged {
        return Err(QpError::IterationLimit);
    }
    let denom = sol.residual[n];
    if denom <= 1e-12 {
        return Err(QpError::Infeasible);
    }
    let z = DVector::from_fn(n, |i, _| -sol.residual[i] / denom);
    let slack = g * &z - h;
    let hscale = h.amax().max(1.0);
    if slack.min() < -1e-7 * hscale {
        return Err(QpError::Infeasible);
    }
    Ok(LdpSolution { z, multipliers: sol.x / denom })
}

/// `min ½ dᵀB d + gᵀd` subject to `A d ≥ lower`, with `B = L Lᵀ` given by its
/// lower Cholesky factor.
pub fn solve_qp(
    chol_l: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
) -> Result<QpSolution, QpError> {
    let linv_g = chol_l.solve_lower_triangular(g).ok_or(QpError::NotPositiveDefinite)?;
    let gt = chol_l.solve_lower_triangular(&a.transpose()).ok_or(QpError::NotPositiveDefinite)?;
    let gmat = gt.transpose();
    let h = lower + &gmat * &linv_g;
    let ldp = solve_ldp(&gmat, &h)?;
    let d = chol_l
        .tr_solve_lower_triangular(&(ldp.z - linv_g))
        .ok_or(QpError::NotPositiveDefinite)?;
    Ok(QpSolution { d, multipliers: ldp.multipliers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chol(b: &DMatrix<f64>) -> DMatrix<f64> {
        b.clone().cholesky().unwrap().unpack()
    }

    #[test]
    fn active_bound() {
        // min (d-2)² s.t. d ≥ 3
        let b = DMatrix::from_element(1, 1, 2.0);
        let g = DVector::from_element(1, -4.0);
        let a = DMatrix::from_element(1, 1, 1.0);
        let lo = DVector::from_element(1, 3.0);
        let s = solve_qp(&chol(&b), &g, &a, &lo).unwrap();
        assert!((s.d[0] - 3.0).abs() < 1e-12);
        assert!((s.multipliers[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_detected() {
        let g = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let h = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(solve_ldp(&g, &h).unwrap_err(), QpError::Infeasible);
    }

    /// Exhaustive active-set enumeration for small strictly convex QPs.
    fn brute_force(b: &DMatrix<f64>, g: &DVector<f64>, a: &DMatrix<f64>, lo: &DVector<f64>) -> Option<f64> {
        let (m, n) = a.shape();
        let mut best: Option<f64> = None;
        for mask in 0u32..(1 << m) {
            let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let k = act.len();
            let mut kkt = DMatrix::zeros(n + k, n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(b);
            let mut rhs = DVector::zeros(n + k);
            rhs.rows_mut(0, n).copy_from(&(-g));
            for (r, &i) in act.iter().enumerate() {
                for j in 0..n {
                    kkt[(n + r, j)] = a[(i, j)];
                    kkt[(j, n + r)] = a[(i, j)];
                }
                rhs[n + r] = lo[i];
            }
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            let d = sol.rows(0, n).into_owned();
            if (a * &d - lo).iter().all(|s| *s >= -1e-9) {
                let obj = 0.5 * d.dot(&(b * &d)) + g.dot(&d);
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_active_set_enumeration(
            n in 1usize..4,
            m in 1usize..5,
            vals in proptest::collection::vec(-2.0f64..2.0, 9 + 3 + 12 + 4),
        ) {
            let root = DMatrix::from_fn(n, n, |i, j| vals[i * 3 + j]);
            let b = &root * root.transpose() + DMatrix::identity(n, n) * 0.5;
            let g = DVector::from_fn(n, |i, _| vals[9 + i]);
            let a = DMatrix::from_fn(m, n, |i, j| vals[12 + i * 3 + j]);
            // Keep d = 0 strictly feasible so the QP has a solution.
            let lo = DVector::from_fn(m, |i, _| -vals[24 + i].abs() - 0.1);
            let s = solve_qp(&chol(&b), &g, &a, &lo).unwrap();
            let obj = 0.5 * s.d.dot(&(&b * &s.d)) + g.dot(&s.d);
            let oracle = brute_force(&b, &g, &a, &lo).unwrap();
            prop_assert!((obj - oracle).abs() < 1e-8 * (1.0 + oracle.abs()));
            // KKT stationarity: B d + g = Aᵀ λ
            let stat = (&b * &s.d + &g - a.transpose() * &s.multipliers).amax();
            prop_assert!(stat < 1e-8);
            prop_assert!(s.multipliers.iter().all(|l| *l >= 0.0));
        }
    }
}
