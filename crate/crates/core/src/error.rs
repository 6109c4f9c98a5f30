use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("metric is singular at the queried point (|det g| = {det:.3e})")]
    SingularMetric { det: f64 },

    #[error("dimension {0} is too small, the Schouten tensor needs n >= 3")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("conformal factor vanishes at the queried point")]
    ZeroFactor,

    #[error("velocity is null or nearly null (|U|^2 = {0:.3e})")]
    NullVelocity(f64),

    #[error("velocity must be spacelike for this operation (|U|^2 = {0:.3e})")]
    NonSpacelikeVelocity(f64),

    #[error("state is missing the jerk J = nabla_U A")]
    MissingJerk,

    #[error("singular linear system")]
    SingularLinearSystem,

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("right-hand side failed at t = {t}: {source}")]
    Rhs { t: f64, source: Box<Error> },

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("point hits the pole of the map")]
    PoleHit,

    #[error("point {0:?} lies outside the metric's coordinate patch")]
    PatchExit(Vec<f64>),

    #[error("no convergence after {iterations} iterations (best residual {best_residual:.3e})")]
    NoConvergence { iterations: usize, best_residual: f64 },

    #[error("dimension {0} must be even")]
    OddDimension(usize),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("operation requires a flat metric")]
    NotFlat,
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl Error {
    /// Whether the error comes from the input (configuration, expressions, shapes)
    /// rather than from a numerical failure during computation.
    pub fn is_input(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Expr(_)
            | Error::DimensionMismatch { .. }
            | Error::BadParams(_)
            | Error::OddDimension(_)
            | Error::NotFlat
            | Error::DimensionTooSmall(_) => true,
            Error::Rhs { source, .. } => source.is_input(),
            _ => false,
        }
    }
}
