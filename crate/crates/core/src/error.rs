use thiserror::Error;

/// Every failure the library can signal.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid radius {0}: radial profiles are only evaluated for r_bar >= 1")]
    InvalidRadius(f64),

    #[error("radial drift profile is unbounded at r_bar = {0}")]
    UnboundedRadialProfile(f64),

    #[error("invalid driver index {driver}: model has {count} drivers")]
    InvalidDriver { driver: usize, count: usize },

    #[error("numeric overflow at step {step}: a coordinate left [-1e300, 1e300]")]
    NumericOverflow { step: i64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("kappa = {kappa} outside (0, {upper})")]
    KappaOutOfRange { kappa: f64, upper: f64 },

    #[error("q = {q} must exceed the dimension {d}")]
    QTooSmall { q: f64, d: usize },

    #[error("chaining weights sum to {0} > 1")]
    WeightViolation(f64),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),
}

pub type Result<T> = std::result::Result<T, FlowError>;
