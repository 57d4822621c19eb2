use alloc::boxed::Box;
use alloc::string::String;

use crate::tangentflow::JetState;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside the neighborhood: |(s,u)| = {norm} is not below rho = {rho}")]
    OutsideNeighborhood { norm: f64, rho: f64 },

    /// The image of the carried state left `U`. The state is the last one
    /// still inside the neighborhood.
    #[error("orbit escaped the neighborhood after iterate {}", .0.n)]
    Escaped(Box<JetState>),

    #[error("tangent vector {index} has a vanishing unstable component")]
    DegenerateVector { index: usize },

    #[error("model inconsistency: {what} (residual {residual:e})")]
    ModelInconsistency { what: String, residual: f64 },

    #[error(
        "fixed-point iteration did not converge in {iterations} steps (residual {residual:e})"
    )]
    Divergence { iterations: usize, residual: f64 },

    #[error("every mesh point left the neighborhood by iterate {n}")]
    EmptyOrbit { n: usize },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
