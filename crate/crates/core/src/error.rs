use thiserror::Error;

use crate::grid::TensorType;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("tensor type mismatch: expected {expected:?}, found {found:?}")]
    TypeMismatch {
        expected: TensorType,
        found: TensorType,
    },

    #[error("grid or dimension mismatch: {0}")]
    ShapeMismatch(String),

    #[error("immersion violated at node {node}: smallest singular value {singular_value:.3e} below floor")]
    ImmersionViolation { node: usize, singular_value: f64 },

    #[error("derivative order {order} exceeds maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("invalid metric configuration: {0}")]
    InvalidConfig(String),

    #[error("no feasible initial path between the endpoints")]
    InfeasibleInitialization,

    #[error("warp lost orientation at node {node}: det = {det:.3e}")]
    WarpDegenerate { node: usize, det: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("bad exponents: {0}")]
    BadExponents(String),

    #[error("sequence point leaves the domain at index {index} (value {value})")]
    DomainViolation { index: usize, value: f64 },

    #[error("bad surface spec: {0}")]
    BadSpec(String),

    #[error("unsupported ambient dimension {0}")]
    UnsupportedAmbientDim(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors that mark a trial point as outside the open set the optimizers
    /// work on; line searches back off instead of aborting.
    pub fn is_feasibility_violation(&self) -> bool {
        matches!(
            self,
            Error::ImmersionViolation { .. }
                | Error::WarpDegenerate { .. }
                | Error::DomainViolation { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
