//! Scalar abstraction shared by plain and dual-number evaluation.
//!
//! Every model equation in this crate is written once against [`Scalar`]. The
//! same code path then serves `f64` simulation, `f32` smoke runs and
//! forward-mode differentiation through [`crate::gradopt::Dual`].

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Real number type the model can be evaluated with.
pub trait Scalar:
    Float
    + FromPrimitive
    + Debug
    + Default
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    /// Lift a constant. Dual numbers get zero tangents.
    fn cst(v: f64) -> Self;

    /// Primal value as `f64`.
    fn re(&self) -> f64;

    /// True when the value and every carried derivative are finite.
    fn all_finite(&self) -> bool {
        self.is_finite()
    }

    /// Tolerance used by fixed-point loops, never tighter than a few ulps.
    fn loop_tolerance(requested: f64) -> f64 {
        requested.max(16.0 * Self::epsilon().re())
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    #[inline]
    fn cst(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn re(&self) -> f64 {
        *self as f64
    }
}

/// Value-based select: returns `a` when `cond` holds, otherwise `b`. The
/// tangent of the selected branch passes through untouched.
#[inline]
pub fn select<T: Scalar>(cond: bool, a: T, b: T) -> T {
    if cond {
        a
    } else {
        b
    }
}

/// `max(x, lo)` then `min(., hi)` with value-based branching.
#[inline]
pub fn clamp<T: Scalar>(x: T, lo: T, hi: T) -> T {
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}
