use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes across the numerics stack.
///
/// Times and points are reported in `f64` regardless of the working scalar;
/// diagnostics do not need the generic precision.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("exponent {name} must be positive, got {value}")]
    NonPositiveExponent { name: &'static str, value: f64 },

    #[error("drift evaluated at singular point ({point}) at t = {time}")]
    SingularEvaluation { time: f64, point: String },

    #[error("flow integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("ensemble produced no usable replicates ({failed} failed)")]
    EmptyEnsemble { failed: usize },

    #[error("quadrature box does not contain the test-function support ball")]
    SupportOutsideBox,

    #[error("malformed path data: {0}")]
    PathFormat(String),

    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    pub fn singular<T: crate::Scalar>(time: T, x: &[T]) -> Self {
        let coords: Vec<String> = x.iter().map(|c| format!("{}", c.lossy_f64())).collect();
        Error::SingularEvaluation {
            time: time.lossy_f64(),
            point: coords.join(", "),
        }
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
