use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Capacity,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("capacity exceeded: {what} requires {required}, limit is {limit}")]
    Capacity {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("integrator instability at t = {time}: squared norm grew by {growth:e} in one step")]
    IntegratorInstability { time: f64, growth: f64 },

    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("photon cutoff too small: top Fock population {population:e} exceeds {limit:e}")]
    CutoffExceeded { population: f64, limit: f64 },

    #[error("empty estimate: {0}")]
    EmptyEstimate(String),

    #[error("bad argument: {0}")]
    Argument(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("no convergence after {steps} steps; last state (s, p, z2) = {last:?}")]
    NonConvergence { steps: usize, last: [f64; 3] },

    #[error("steady state is not unique: null space has multiplicity {multiplicity}")]
    DegenerateSteadyState { multiplicity: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_)
            | Error::Argument(_)
            | Error::Parse { .. }
            | Error::Config(_)
            | Error::UnsupportedSize(_)
            | Error::DimensionMismatch { .. } => ErrorKind::Config,
            Error::Capacity { .. } | Error::CutoffExceeded { .. } => ErrorKind::Capacity,
            Error::Trajectory { source, .. } => source.kind(),
            Error::Io(_) => ErrorKind::Io,
            Error::DivisionByZero(_)
            | Error::IntegratorInstability { .. }
            | Error::Internal(_)
            | Error::EmptyEstimate(_)
            | Error::NonConvergence { .. }
            | Error::DegenerateSteadyState { .. } => ErrorKind::Numerical,
        }
    }
}
