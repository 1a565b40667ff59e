//! Batched forward-mode linearization.

use nalgebra::{DMatrix, DVector};

use super::dual::Dual;
use super::{EvalError, GradError};
use crate::scalar::Scalar;

/// Vector-valued model that can be evaluated with any [`Scalar`].
pub trait VectorFn {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>, EvalError>;
}

/// Values and Jacobian (`outputs × inputs`) at a point.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub values: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

/// Widest seed batch supported by [`linearize`].
pub const MAX_BATCH_WIDTH: usize = 32;

/// Values and exact Jacobian of `f` at `x`, seeding `batch_width` input
/// directions per forward pass.
pub fn linearize<F: VectorFn>(f: &F, x: &[f64], batch_width: usize) -> Result<Linearization, GradError> {
    if batch_width == 0 || batch_width > MAX_BATCH_WIDTH {
        return Err(GradError::BatchWidth(batch_width));
    }
    match batch_width.next_power_of_two() {
        1 => linearize_n::<1, F>(f, x, batch_width),
        2 => linearize_n::<2, F>(f, x, batch_width),
        4 => linearize_n::<4, F>(f, x, batch_width),
        8 => linearize_n::<8, F>(f, x, batch_width),
        16 => linearize_n::<16, F>(f, x, batch_width),
        _ => linearize_n::<32, F>(f, x, batch_width),
    }
}

/// Number of forward passes a linearization of `n` inputs takes.
pub fn pass_count(n: usize, batch_width: usize) -> usize {
    n.div_ceil(batch_width).max(1)
}

fn linearize_n<const N: usize, F: VectorFn>(f: &F, x: &[f64], width: usize) -> Result<Linearization, GradError> {
    let n = x.len();
    if n == 0 {
        let v = f.eval::<f64>(x)?;
        return Ok(Linearization { jacobian: DMatrix::zeros(v.len(), 0), values: DVector::from_vec(v) });
    }
    let mut values: Option<DVector<f64>> = None;
    let mut jacobian = DMatrix::zeros(0, 0);
    let mut seeded: Vec<Dual<N>> = x.iter().map(|v| Dual::constant(*v)).collect();
    for start in (0..n).step_by(width) {
        let end = (start + width).min(n);
        for (j, xj) in seeded.iter_mut().enumerate() {
            *xj = if (start..end).contains(&j) { Dual::variable(x[j], j - start) } else { Dual::constant(x[j]) };
        }
        let out = f.eval(&seeded)?;
        if values.is_none() {
            jacobian = DMatrix::zeros(out.len(), n);
            values = Some(DVector::from_iterator(out.len(), out.iter().map(|o| o.re)));
        }
        for (i, o) in out.iter().enumerate() {
            if !o.re.is_finite() {
                return Err(GradError::NonFiniteValue { output: i });
            }
            for j in start..end {
                let t = o.eps[j - start];
                if !t.is_finite() {
                    return Err(GradError::NonFiniteTangent { output: i, variable: j });
                }
                jacobian[(i, j)] = t;
            }
        }
    }
    Ok(Linearization { values: values.expect("at least one pass"), jacobian })
}

/// Scalar adapter: gradient of output `index` of `f`.
pub fn gradient<F: VectorFn>(f: &F, x: &[f64], batch_width: usize) -> Result<(f64, Vec<f64>), GradError> {
    let lin = linearize(f, x, batch_width)?;
    if lin.values.len() != 1 {
        return Err(GradError::Eval(EvalError::new("gradient", "function must have exactly one output")));
    }
    Ok((lin.values[0], lin.jacobian.row(0).iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Poly;
    impl VectorFn for Poly {
        fn n_inputs(&self) -> usize {
            2
        }
        fn n_outputs(&self) -> usize {
            1
        }
        fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
            Ok(vec![x[0] * x[0] * x[1]])
        }
    }

    struct Wide(usize);
    impl VectorFn for Wide {
        fn n_inputs(&self) -> usize {
            self.0
        }
        fn n_outputs(&self) -> usize {
            2
        }
        fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
            let s: T = x.iter().enumerate().map(|(k, v)| *v * *v * T::cst(k as f64 + 1.0)).sum();
            Ok(vec![s, x[0].exp() * x[x.len() - 1]])
        }
    }

    struct Singular;
    impl VectorFn for Singular {
        fn n_inputs(&self) -> usize {
            1
        }
        fn n_outputs(&self) -> usize {
            1
        }
        fn eval<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
            Ok(vec![x[0].sqrt()])
        }
    }

    #[test]
    fn polynomial() {
        let (v, g) = gradient(&Poly, &[3.0, 2.0], 4).unwrap();
        assert_eq!(v, 18.0);
        assert_eq!(g, vec![12.0, 9.0]);
    }

    #[test]
    fn every_batch_width_agrees() {
        let x: Vec<f64> = (0..13).map(|k| 0.1 * k as f64 - 0.4).collect();
        let reference = linearize(&Wide(13), &x, 1).unwrap();
        for w in [2, 3, 5, 8, 13, 16, 32] {
            let lin = linearize(&Wide(13), &x, w).unwrap();
            assert_eq!(lin.jacobian, reference.jacobian, "width {w}");
        }
        assert_eq!(pass_count(13, 5), 3);
    }

    #[test]
    fn non_finite_tangent_reported() {
        let err = linearize(&Singular, &[0.0], 1).unwrap_err();
        assert!(matches!(err, GradError::NonFiniteTangent { output: 0, variable: 0 }));
    }
}
