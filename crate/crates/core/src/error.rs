use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distance table is not symmetric at ({0}, {1})")]
    AsymmetricDistance(usize, usize),
    #[error("invalid distance {value} at ({i}, {j})")]
    InvalidDistance { i: usize, j: usize, value: f64 },
    #[error("mass at point {index} must be strictly positive and finite, got {value}")]
    InvalidMass { index: usize, value: f64 },
    #[error("power-metric exponent must be >= 1, got {0}")]
    InvalidGamma(f64),
    #[error("invalid space specification: {0}")]
    InvalidSpec(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("point {0} is out of range")]
    PointOutOfRange(usize),
    #[error("region is empty")]
    EmptyRegion,
    #[error("exponent value {value} at point {index} is below 1")]
    InvalidExponent { index: usize, value: f64 },
    #[error("operation requires a finite exponent (p_+ < inf)")]
    InfiniteExponent,
    #[error("operation requires p_- > 1, got {0}")]
    ExponentNotAboveOne(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("weight value at point {index} must be positive and finite, got {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("transfer inequality gap condition violated at point {0}")]
    GapConditionViolated(usize),
    #[error("|f| > 1 at point {0}, required by the two-sided transfer variant")]
    FunctionExceedsOne(usize),
    #[error("d0 must exceed 1, got {0}")]
    InvalidD0(f64),
    #[error("grid construction failed at scale {scale}: {reason}")]
    GridConstruction { scale: f64, reason: String },
    #[error("generation {requested} outside grid range [{bottom}, {top}]")]
    GenerationOutOfRange { requested: i32, bottom: i32, top: i32 },
    #[error("height {lambda} must exceed the global average {threshold}")]
    HeightBelowThreshold { lambda: f64, threshold: f64 },
    #[error("height must be positive, got {0}")]
    InvalidHeight(f64),
    #[error("base a = {a} must exceed the measured CZ constant {ccz}")]
    BaseTooSmall { a: f64, ccz: f64 },
    #[error("exponent must exceed 1, got {0}")]
    InvalidLebesgueExponent(f64),
    #[error("certificate failure: {0}")]
    Certificate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
