use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the policies, environments and harness.
#[derive(Debug, Error)]
pub enum CocoError {
    #[error("ccv-overflow: Lyapunov derivative is not finite (log value {log_value})")]
    CcvOverflow { log_value: f64 },

    #[error("unnormalized-violation: per-round violation {value} is outside [0, 1]")]
    UnnormalizedViolation { value: f64 },

    #[error("bound-violation: {what} = {value} exceeds declared bound {bound}")]
    BoundViolation {
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("scale-regression: new scale {new} is below current scale {old}")]
    ScaleRegression { old: f64, new: f64 },

    #[error("gamma-violation: scale ratio {ratio} exceeds growth cap {gamma}")]
    GammaViolation { ratio: f64, gamma: f64 },

    #[error("loss-exceeds-scale: max loss {max_loss} exceeds scale bound {scale}")]
    LossExceedsScale { max_loss: f64, scale: f64 },

    #[error("negative loss {value} at expert {index}")]
    NegativeLoss { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unnormalized-round: {what} entry {value} at index {index} is outside [0, 1]")]
    UnnormalizedRound {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("unsupported-projection: oracle set has no projection routine")]
    UnsupportedProjection,

    #[error("cover-too-large: estimated {estimate} centers exceeds cap {cap}")]
    CoverTooLarge { estimate: f64, cap: usize },

    #[error("unnormalized-oracle: {what} value {value} is outside [0, 1]")]
    UnnormalizedOracle { what: &'static str, value: f64 },

    #[error("infeasible-instance: no expert has zero cumulative violation")]
    InfeasibleInstance,

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("protocol-violation: {0}")]
    ProtocolViolation(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("round {round}: {source}")]
    RoundFailure {
        round: usize,
        #[source]
        source: Box<CocoError>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, CocoError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CocoError {
    CocoError::InvalidParameter(msg.into())
}
