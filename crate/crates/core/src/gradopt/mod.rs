//! Forward-mode differentiation and sequential quadratic programming.

mod check;
mod dual;
mod forward;
mod levmar;
mod nnls;
mod qp;
mod sqp;

pub use check::{check_gradient, GradCheckReport, GradCheckTolerance, Mismatch};
pub use dual::Dual;
pub use forward::{gradient, linearize, pass_count, Linearization, VectorFn, MAX_BATCH_WIDTH};
pub use levmar::{least_squares, LeastSquaresResult, LeastSquaresSettings};
pub use nnls::{nnls, NnlsResult};
pub use qp::{solve_ldp, solve_qp, LdpSolution, QpError, QpSolution};
pub use sqp::{sqp_minimize, HistoryEntry, NlpFunction, NlpProblem, OptResult, SqpSettings, Termination};

use thiserror::Error;

/// Model evaluation failure, tagged with the stage that produced it.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{site}: {message}")]
pub struct EvalError {
    pub site: String,
    pub message: String,
}

impl EvalError {
    pub fn new(site: impl Into<String>, message: impl Into<String>) -> Self {
        EvalError { site: site.into(), message: message.into() }
    }

    /// Error for a non-finite value or derivative produced at `site`.
    pub fn non_finite(site: impl Into<String>) -> Self {
        EvalError::new(site, "non-finite value or tangent")
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GradError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("non-finite tangent in output {output} with respect to variable {variable}")]
    NonFiniteTangent { output: usize, variable: usize },
    #[error("non-finite value in output {output}")]
    NonFiniteValue { output: usize },
    #[error("batch width {0} outside 1..=32")]
    BatchWidth(usize),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OptError {
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("initial point violates bounds at variable {0}")]
    OutOfBounds(usize),
    #[error("problem dimension mismatch: {0}")]
    Dimension(String),
}
