use thiserror::Error;

use crate::chain::Trajectory;
use crate::geom::Vec2;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The log density (or its gradient) diverges at the requested point.
    #[error("singularity of {density} at ({x1}, {x2})", x1 = .at[0], x2 = .at[1])]
    Singularity { density: String, at: Vec2 },

    /// Point lies on the cone where the radial limits do not exist.
    #[error("point ({x1}, {x2}) lies on the singular cone of {density}", x1 = .at[0], x2 = .at[1])]
    SingularCone { density: String, at: Vec2 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("integration stalled at t={t}: step size underflow, last state ({x1}, {x2})", x1 = .last[0], x2 = .last[1])]
    Stiffness { t: f64, last: Vec2 },

    /// Simulation hit the hard step cap; the partial trajectory is kept.
    #[error("step budget exceeded: requested {requested} steps, cap is {cap}")]
    Truncated {
        requested: usize,
        cap: usize,
        partial: Box<Trajectory>,
    },

    #[error("step budget exceeded: {0}")]
    Budget(String),

    #[error("path does not cover the requested horizon: need {required}, have {available}")]
    Coverage { required: String, available: String },

    /// Failure while evaluating a drift at trajectory index `index`.
    #[error("drift evaluation failed at state {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("both diagonal branches re-entered the singular band immediately")]
    DegenerateBranch,
}

/// Coarse error classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Budget,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) => ErrorClass::Config,
            Error::Singularity { .. }
            | Error::SingularCone { .. }
            | Error::Numeric(_)
            | Error::Quadrature { .. }
            | Error::Stiffness { .. }
            | Error::DegenerateBranch => ErrorClass::Numeric,
            Error::Truncated { .. } | Error::Budget(_) | Error::Coverage { .. } => {
                ErrorClass::Budget
            }
            Error::AtIndex { source, .. } => source.class(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
