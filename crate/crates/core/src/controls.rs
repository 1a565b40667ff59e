//! Time-dependent controls: first-order delays, coarse knot controls and
//! ramped pulses.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::store::{TimeGrid, TimeSeries};

/// Knot spacing of coarse controls, in years.
pub const COARSE_STEP: f64 = 2.5;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("delay below grid resolution: tau = {0} < 1 year")]
    DelayTooShort(f64),
    #[error("coarse control needs {expected} knots, got {got}")]
    KnotCount { expected: usize, got: usize },
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
}

/// First-order delay `do/dt = (i - o)/tau`.
#[derive(Debug, Clone, Copy)]
pub struct DelayState<T> {
    pub tau: f64,
    pub initial_value: T,
}

impl<T: Scalar> DelayState<T> {
    pub fn new(tau: f64, initial_value: T) -> Self {
        DelayState { tau, initial_value }
    }
}

/// Explicit Euler with a one-year step: `o[t+1] = o[t] + (i[t] - o[t])/tau`.
pub fn delay_integrate<T: Scalar>(
    input: &TimeSeries<T>,
    state: DelayState<T>,
) -> Result<TimeSeries<T>, ControlError> {
    if !(state.tau >= 1.0) {
        return Err(ControlError::DelayTooShort(state.tau));
    }
    let k = T::cst(1.0 / state.tau);
    let mut out = Vec::with_capacity(input.len());
    let mut o = state.initial_value;
    for i in input.iter() {
        out.push(o);
        o += (*i - o) * k;
    }
    Ok(TimeSeries::new(input.grid(), out).expect("same grid"))
}

/// Piecewise-linear control defined on knots spaced [`COARSE_STEP`] apart.
#[derive(Debug, Clone)]
pub struct CoarseControl<T> {
    pub first_knot: f64,
    pub step: f64,
    pub knot_values: Vec<T>,
}

impl<T: Scalar> CoarseControl<T> {
    /// Number of knots needed to cover `grid`.
    pub fn knot_count(grid: TimeGrid) -> usize {
        (grid.horizon() / COARSE_STEP).ceil() as usize + 1
    }

    /// Control whose knots start at the first grid year.
    pub fn for_grid(grid: TimeGrid, knot_values: Vec<T>) -> Result<Self, ControlError> {
        let expected = Self::knot_count(grid);
        if knot_values.len() != expected {
            return Err(ControlError::KnotCount { expected, got: knot_values.len() });
        }
        Ok(CoarseControl { first_knot: grid.start_year as f64, step: COARSE_STEP, knot_values })
    }

    pub fn constant(grid: TimeGrid, value: T) -> Self {
        Self::for_grid(grid, vec![value; Self::knot_count(grid)]).expect("knot count")
    }

    pub fn knot_year(&self, k: usize) -> f64 {
        self.first_knot + k as f64 * self.step
    }

    /// Linear interpolation at `year`, flat beyond the first and last knot.
    pub fn value_at(&self, year: f64) -> T {
        let n = self.knot_values.len();
        let s = (year - self.first_knot) / self.step;
        if s <= 0.0 || n == 1 {
            return self.knot_values[0];
        }
        if s >= (n - 1) as f64 {
            return self.knot_values[n - 1];
        }
        let k = s.floor() as usize;
        let w = s - k as f64;
        if w == 0.0 {
            return self.knot_values[k];
        }
        self.knot_values[k] * T::cst(1.0 - w) + self.knot_values[k + 1] * T::cst(w)
    }
}

/// Sample a coarse control onto the annual grid.
pub fn evaluate_coarse<T: Scalar>(control: &CoarseControl<T>, grid: TimeGrid) -> TimeSeries<T> {
    TimeSeries::from_fn(grid, |y| control.value_at(y as f64))
}

/// Ramped pulse: zero before `eis`, linear rise to `max_share` over `ramp`,
/// plateau for `lifetime`, linear fall to zero over `rampdown`.
#[derive(Debug, Clone, Copy)]
pub struct RampedPulse<T> {
    pub eis: T,
    pub max_share: T,
    pub lifetime: T,
    pub rampdown: T,
    pub ramp: T,
}

impl<T: Scalar> RampedPulse<T> {
    /// Pulse with the fleet-renewal convention `ramp = 2·tau_fleet`.
    pub fn with_fleet_tau(eis: T, max_share: T, lifetime: T, rampdown: T, tau_fleet: f64) -> Self {
        RampedPulse { eis, max_share, lifetime, rampdown, ramp: T::cst(2.0 * tau_fleet) }
    }

    pub fn validate(&self, grid: TimeGrid) -> Result<(), ControlError> {
        let eis = self.eis.re();
        if eis < grid.start_year as f64 || eis > grid.end_year as f64 {
            return Err(ControlError::InvalidPulse(format!("eis {eis} outside horizon")));
        }
        let m = self.max_share.re();
        if !(0.0..=1.0).contains(&m) {
            return Err(ControlError::InvalidPulse(format!("max_share {m} outside [0,1]")));
        }
        if self.lifetime.re() <= 0.0 || self.ramp.re() <= 0.0 || self.rampdown.re() <= 0.0 {
            return Err(ControlError::InvalidPulse("durations must be positive".into()));
        }
        Ok(())
    }

    /// Pulse value at a (possibly fractional) year.
    pub fn value_at(&self, year: f64) -> T {
        let u = T::cst(year) - self.eis;
        let zero = T::zero();
        if u <= zero {
            return zero;
        }
        if u < self.ramp {
            return self.max_share * u / self.ramp;
        }
        let plateau_end = self.ramp + self.lifetime;
        if u <= plateau_end {
            return self.max_share;
        }
        let fall = u - plateau_end;
        if fall < self.rampdown {
            return self.max_share * (T::one() - fall / self.rampdown);
        }
        zero
    }
}

impl RampedPulse<f64> {
    /// Exact integral of the pulse over `[from, to]`.
    pub fn area(&self, from: f64, to: f64) -> f64 {
        self.antiderivative(to - self.eis) - self.antiderivative(from - self.eis)
    }

    fn antiderivative(&self, u: f64) -> f64 {
        let (m, r, l, d) = (self.max_share, self.ramp, self.lifetime, self.rampdown);
        if u <= 0.0 {
            0.0
        } else if u < r {
            m * u * u / (2.0 * r)
        } else if u <= r + l {
            m * r / 2.0 + m * (u - r)
        } else if u < r + l + d {
            let f = u - r - l;
            m * r / 2.0 + m * l + m * (f - f * f / (2.0 * d))
        } else {
            m * (r / 2.0 + l + d / 2.0)
        }
    }
}

/// Sample a pulse on the annual grid.
pub fn evaluate_pulse<T: Scalar>(pulse: &RampedPulse<T>, grid: TimeGrid) -> TimeSeries<T> {
    TimeSeries::from_fn(grid, |y| pulse.value_at(y as f64))
}
