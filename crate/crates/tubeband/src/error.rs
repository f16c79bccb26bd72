//! Error taxonomy shared by the whole crate.
//!
//! [`Error::kind`] splits the variants into contract violations (bad inputs,
//! caller mistakes) and numerical failures (singular designs, solver
//! breakdowns), which is the split the CLI maps to exit codes 2 and 1.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operation not defined for this spec (e.g. second derivative of a
    /// B-spline of degree < 2).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Caller broke a documented contract (bad contrast vector, missing ν, …).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Design matrix does not have full column rank.
    #[error("singular design: rank {rank} < required {needed}")]
    SingularDesign { rank: usize, needed: usize },

    /// Matrix factorization failed (input not positive definite).
    #[error("factorization failed: {0}")]
    Factorization(String),

    /// The curve collapses: ‖A f(x)‖ vanishes somewhere on the domain.
    #[error("degenerate curve: |A f(x)| < 1e-12 near x = {x}")]
    DegenerateCurve { x: f64 },

    /// Curvature is requested where the curve has no speed.
    #[error("stationary point: |psi_x(x)| below threshold at x = {x}")]
    StationaryPoint { x: f64 },

    /// A root/bracketing solver failed to converge.
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Configuration or contract problem; the run request itself is invalid.
    Contract,
    /// Numerical failure while executing a valid request.
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Domain(_) | Error::Unsupported(_) | Error::Contract(_) => ErrorKind::Contract,
            Error::SingularDesign { .. }
            | Error::Factorization(_)
            | Error::DegenerateCurve { .. }
            | Error::StationaryPoint { .. }
            | Error::Solver(_) => ErrorKind::Numerical,
        }
    }
}
