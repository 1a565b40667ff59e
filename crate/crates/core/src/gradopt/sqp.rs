//! Sequential least-squares quadratic programming.
//!
//! Each major iteration solves a quadratic model of the Lagrangian with
//! linearized constraints, using a damped BFGS Hessian held as a Cholesky
//! factor, and globalizes with an L1 exact-penalty merit function and
//! backtracking.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::forward::{linearize, Linearization, VectorFn};
use super::qp::{solve_qp, QpError, QpSolution};
use super::{EvalError, OptError};
use crate::scalar::Scalar;

/// Nonlinear program `min f(x)` subject to `c(x) ≥ 0` and `lower ≤ x ≤ upper`.
pub trait NlpProblem {
    fn dimension(&self) -> usize;
    fn constraint_count(&self) -> usize;
    fn bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// Objective and constraint values.
    fn evaluate<T: Scalar>(&self, x: &[T]) -> Result<(T, Vec<T>), EvalError>;
}

/// Objective followed by constraints as one vector function.
pub struct NlpFunction<'a, P>(pub &'a P);

impl<P: NlpProblem> VectorFn for NlpFunction<'_, P> {
    fn n_inputs(&self) -> usize {
        self.0.dimension()
    }
    fn n_outputs(&self) -> usize {
        1 + self.0.constraint_count()
    }
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
        let (f, c) = self.0.evaluate(x)?;
        let mut out = Vec::with_capacity(1 + c.len());
        out.push(f);
        out.extend(c);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqpSettings {
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub batch_width: usize,
    /// Largest step component accepted as converged.
    pub step_tol: f64,
    pub max_backtracks: usize,
}

impl Default for SqpSettings {
    fn default() -> Self {
        SqpSettings { kkt_tol: 1e-6, max_iter: 300, batch_width: 16, step_tol: 1e-6, max_backtracks: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailure,
    SubproblemFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub f: f64,
    pub violation: f64,
    /// Merit before and after the accepted step, same penalty weights.
    pub merit_before: f64,
    pub merit_after: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptResult {
    pub x_star: Vec<f64>,
    pub f_star: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub history: Vec<HistoryEntry>,
    /// Constraint multipliers of the last quadratic subproblem.
    pub multipliers: Vec<f64>,
    pub constraints: Vec<f64>,
    pub evaluations: usize,
    pub linearizations: usize,
}

fn violation(c: &DVector<f64>) -> f64 {
    c.iter().fold(0.0f64, |m, v| m.max(-v))
}

struct Point {
    x: DVector<f64>,
    f: f64,
    c: DVector<f64>,
    grad: DVector<f64>,
    jac: DMatrix<f64>,
}

impl Point {
    fn from_lin(x: DVector<f64>, lin: Linearization) -> Self {
        let m = lin.values.len() - 1;
        let n = x.len();
        Point {
            f: lin.values[0],
            c: lin.values.rows(1, m).into_owned(),
            grad: lin.jacobian.row(0).transpose(),
            jac: lin.jacobian.view((1, 0), (m, n)).into_owned(),
            x,
        }
    }

    fn lagrangian_gradient(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.grad - self.jac.tr_mul(lambda)
    }
}

struct Subproblem {
    step: QpSolution,
    relaxed: bool,
}

/// Build and solve the quadratic subproblem at `p`. Falls back to a relaxed
/// problem that scales violated linearizations when the plain one is
/// infeasible.
fn subproblem(p: &Point, chol_l: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> Result<Subproblem, QpError> {
    let n = p.x.len();
    let m = p.c.len();
    let rows = m + 2 * n;
    let mut a = DMatrix::zeros(rows, n);
    let mut lo = DVector::zeros(rows);
    a.view_mut((0, 0), (m, n)).copy_from(&p.jac);
    for i in 0..m {
        lo[i] = -p.c[i];
    }
    for j in 0..n {
        a[(m + j, j)] = 1.0;
        lo[m + j] = lower[j] - p.x[j];
        a[(m + n + j, j)] = -1.0;
        lo[m + n + j] = p.x[j] - upper[j];
    }
    match solve_qp(chol_l, &p.grad, &a, &lo) {
        Ok(step) => return Ok(Subproblem { step, relaxed: false }),
        Err(QpError::Infeasible) => {}
        Err(e) => return Err(e),
    }
    // Relaxed: extra variable ξ ∈ [0, 1]; violated rows read a·d − c·ξ ≥ −c.
    let diag_max = (0..n).map(|j| chol_l[(j, j)].powi(2)).fold(1.0f64, f64::max);
    let rho = 1e4 * diag_max;
    let mut l2 = DMatrix::zeros(n + 1, n + 1);
    l2.view_mut((0, 0), (n, n)).copy_from(chol_l);
    l2[(n, n)] = rho.sqrt();
    let mut a2 = DMatrix::zeros(rows + 2, n + 1);
    a2.view_mut((0, 0), (rows, n)).copy_from(&a);
    let mut lo2 = DVector::zeros(rows + 2);
    lo2.rows_mut(0, rows).copy_from(&lo);
    for i in 0..m {
        if p.c[i] < 0.0 {
            a2[(i, n)] = -p.c[i];
        }
    }
    a2[(rows, n)] = 1.0;
    a2[(rows + 1, n)] = -1.0;
    lo2[rows + 1] = -1.0;
    let mut g2 = DVector::zeros(n + 1);
    g2.rows_mut(0, n).copy_from(&p.grad);
    let sol = solve_qp(&l2, &g2, &a2, &lo2)?;
    Ok(Subproblem {
        step: QpSolution { d: sol.d.rows(0, n).into_owned(), multipliers: sol.multipliers.rows(0, rows).into_owned() },
        relaxed: true,
    })
}

/// Powell-damped BFGS update of `b` with step `s` and gradient change `y`.
fn bfgs_update(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if sbs <= 1e-300 {
        return;
    }
    let sy = s.dot(y);
    let y = if sy < 0.2 * sbs {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    } else {
        y.clone()
    };
    let sy = s.dot(&y);
    if sy <= 1e-300 {
        return;
    }
    b.ger(1.0 / sy, &y, &y, 1.0);
    b.ger(-1.0 / sbs, &bs, &bs, 1.0);
}

/// Minimize `problem` from `x0` with sequential quadratic programming.
pub fn sqp_minimize<P: NlpProblem>(problem: &P, x0: &[f64], settings: &SqpSettings) -> Result<OptResult, OptError> {
    let n = problem.dimension();
    let m = problem.constraint_count();
    if x0.len() != n {
        return Err(OptError::Dimension(format!("x0 has {} entries, problem has {n}", x0.len())));
    }
    let (lower, upper) = problem.bounds();
    if lower.len() != n || upper.len() != n {
        return Err(OptError::Dimension("bounds length".into()));
    }
    for j in 0..n {
        let slack = 1e-12 * (1.0 + x0[j].abs());
        if !(x0[j] >= lower[j] - slack && x0[j] <= upper[j] + slack) {
            return Err(OptError::OutOfBounds(j));
        }
    }
    let clamp_x = |x: &mut DVector<f64>| {
        for j in 0..n {
            x[j] = x[j].clamp(lower[j], upper[j]);
        }
    };
    let stacked = NlpFunction(problem);
    let mut x = DVector::from_column_slice(x0);
    clamp_x(&mut x);
    let mut point = Point::from_lin(x.clone(), linearize(&stacked, x.as_slice(), settings.batch_width)?);
    if point.c.len() != m {
        return Err(OptError::Dimension(format!("problem returned {} constraints, declared {m}", point.c.len())));
    }
    let mut evaluations = 1;
    let mut linearizations = 1;
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut penalty = DVector::<f64>::zeros(m);
    let mut lambda = DVector::<f64>::zeros(m);
    let mut history = Vec::new();
    let mut best: Option<(DVector<f64>, f64, DVector<f64>)> = None;
    let feas_tol = settings.kkt_tol;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut fresh_hessian = true;

    let note_best = |p: &Point, best: &mut Option<(DVector<f64>, f64, DVector<f64>)>| {
        if violation(&p.c) <= feas_tol && best.as_ref().is_none_or(|(_, f, _)| p.f < *f) {
            *best = Some((p.x.clone(), p.f, p.c.clone()));
        }
    };
    note_best(&point, &mut best);

    while iterations < settings.max_iter {
        iterations += 1;
        let chol = match b.clone().cholesky() {
            Some(c) => c.unpack(),
            None => {
                b = DMatrix::identity(n, n);
                fresh_hessian = true;
                DMatrix::identity(n, n)
            }
        };
        let sub = match subproblem(&point, &chol, &lower, &upper) {
            Ok(s) => s,
            Err(_) if !fresh_hessian => {
                b = DMatrix::identity(n, n);
                fresh_hessian = true;
                continue;
            }
            Err(_) => {
                termination = Termination::SubproblemFailure;
                break;
            }
        };
        let d = sub.step.d;
        lambda = sub.step.multipliers.rows(0, m).into_owned();
        let viol = violation(&point.c);
        let gd = point.grad.dot(&d);
        let comp: f64 = (0..m).map(|i| (lambda[i] * point.c[i]).abs()).sum();
        let measure = gd.abs() + comp;
        let dmax = d.amax();

        if !sub.relaxed && measure < settings.kkt_tol && viol < feas_tol && dmax <= settings.step_tol {
            let mut xt = &point.x + &d;
            clamp_x(&mut xt);
            if let Ok(lin) = linearize(&stacked, xt.as_slice(), settings.batch_width) {
                linearizations += 1;
                let cand = Point::from_lin(xt, lin);
                if violation(&cand.c) <= feas_tol.max(viol) && cand.f <= point.f + settings.kkt_tol {
                    point = cand;
                }
            }
            termination = Termination::Converged;
            break;
        }

        for i in 0..m {
            penalty[i] = lambda[i].abs().max(0.5 * (penalty[i] + lambda[i].abs()));
        }
        let merit = |f: f64, c: &DVector<f64>, pen: &DVector<f64>| {
            f + (0..c.len()).map(|i| pen[i] * (-c[i]).max(0.0)).sum::<f64>()
        };
        let phi0 = merit(point.f, &point.c, &penalty);
        let ad = &point.jac * &d;
        let mut dphi = gd;
        for i in 0..m {
            if point.c[i] < 0.0 {
                dphi -= penalty[i] * ad[i];
            }
        }
        if dphi >= 0.0 {
            if dmax <= settings.step_tol && viol < feas_tol {
                termination = Termination::Converged;
                break;
            }
            if !fresh_hessian {
                b = DMatrix::identity(n, n);
                fresh_hessian = true;
                continue;
            }
            termination = Termination::LineSearchFailure;
            break;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let mut xt = &point.x + &d * alpha;
            clamp_x(&mut xt);
            evaluations += 1;
            let phi = match stacked.eval::<f64>(xt.as_slice()) {
                Ok(v) if v.iter().all(|z| z.is_finite()) => {
                    merit(v[0], &DVector::from_column_slice(&v[1..]), &penalty)
                }
                _ => f64::INFINITY,
            };
            if phi <= phi0 + 1e-4 * alpha * dphi {
                accepted = Some((xt, phi));
                break;
            }
            let next = if phi.is_finite() {
                let denom = 2.0 * (phi - phi0 - alpha * dphi);
                if denom > 0.0 {
                    -dphi * alpha * alpha / denom
                } else {
                    0.5 * alpha
                }
            } else {
                0.1 * alpha
            };
            alpha = next.clamp(0.1 * alpha, 0.5 * alpha);
        }
        let Some((xt, phi)) = accepted else {
            if !fresh_hessian {
                b = DMatrix::identity(n, n);
                fresh_hessian = true;
                continue;
            }
            termination = Termination::LineSearchFailure;
            break;
        };
        let lin = linearize(&stacked, xt.as_slice(), settings.batch_width)?;
        linearizations += 1;
        let next = Point::from_lin(xt, lin);
        let s = &next.x - &point.x;
        let y = next.lagrangian_gradient(&lambda) - point.lagrangian_gradient(&lambda);
        bfgs_update(&mut b, &s, &y);
        fresh_hessian = false;
        history.push(HistoryEntry {
            iteration: iterations,
            f: next.f,
            violation: violation(&next.c),
            merit_before: phi0,
            merit_after: phi,
            step_length: alpha,
        });
        let df = (next.f - point.f).abs();
        point = next;
        note_best(&point, &mut best);
        if df < settings.kkt_tol * (1.0 + point.f.abs())
            && s.amax() <= settings.step_tol
            && violation(&point.c) < feas_tol
        {
            termination = Termination::Converged;
            break;
        }
    }

    let converged = termination == Termination::Converged;
    let (x_star, f_star, c_star) = if !converged && violation(&point.c) > feas_tol {
        match best {
            Some(b) => b,
            None => (point.x, point.f, point.c),
        }
    } else {
        (point.x, point.f, point.c)
    };
    Ok(OptResult {
        max_violation: violation(&c_star),
        x_star: x_star.iter().copied().collect(),
        f_star,
        iterations,
        converged,
        termination,
        history,
        multipliers: lambda.iter().copied().collect(),
        constraints: c_star.iter().copied().collect(),
        evaluations,
        linearizations,
    })
}
