//! Aviation decarbonization scenarios with gradient-based policy optimization.

pub mod aircraft;
pub mod bundled;
pub mod controls;
pub mod demand;
pub mod energymix;
pub mod fleet;
pub mod gradopt;
pub mod policy;
pub mod scalar;
pub mod store;

pub use gradopt::{Dual, EvalError};
pub use scalar::Scalar;
pub use store::{ScenarioBackground, TimeGrid, TimeSeries};

/// Year-indexed series of plain reals.
pub type Series = TimeSeries<f64>;
