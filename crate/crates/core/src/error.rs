use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is singular or ill-conditioned (condition number {condition:e})")]
    NonInvertibleCovariance { condition: f64 },

    #[error("covariance matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("non-finite summary statistic at index {index}")]
    NonFiniteStatistic { index: usize },

    #[error("series has zero variance; autocorrelation is undefined")]
    DegenerateSeries,

    #[error("scaling vector has a zero entry at index {index}")]
    InvalidScaling { index: usize },

    #[error("spin value {value} at site {site} is not -1 or +1")]
    InvalidSpin { site: usize, value: i8 },

    #[error("grid of {len} cells is not a square with side >= {min_side}")]
    InvalidGrid { len: usize, min_side: usize },

    #[error("unsupported block combination: {0}")]
    UnsupportedCombination(String),

    #[error("need at least {needed} resamples, got {got}")]
    InsufficientResamples { needed: usize, got: usize },

    #[error("block length {block} must divide {size} and lie in 1..={size}")]
    InvalidBlockLength { block: usize, size: usize },

    #[error("tile side {tile} is invalid for subsample side {side} and target side {target}")]
    InvalidTile { tile: usize, side: usize, target: usize },

    #[error("resampling plan is corrupt: {0}")]
    CorruptPlan(String),

    #[error("statistic `{0}` cannot be computed from resampling counts")]
    UnsupportedStatistic(String),

    #[error("precision must be positive, got {0}")]
    InvalidPrecision(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("store holds {available} points but {requested} neighbours were requested")]
    InsufficientHistory { available: usize, requested: usize },

    #[error("all particle weights are zero at target {target}")]
    DegenerateWeights { target: usize },

    #[error("weights are not normalised (sum {sum})")]
    NormalizationError { sum: f64 },

    #[error("chain is constant; integrated autocorrelation time is infinite")]
    InfiniteIat,

    #[error("kernel density bandwidth is zero")]
    DegenerateBandwidth,

    #[error("estimator configuration: {0}")]
    InvalidConfig(String),

    #[error("initial state has zero prior density")]
    InvalidInitialState,

    #[error("i/o: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// Errors that describe a bad simulation or an unusable likelihood
    /// estimate at one parameter value, rather than a broken setup.
    /// Samplers treat these as a zero likelihood at a proposal.
    pub fn is_estimate_failure(&self) -> bool {
        matches!(
            self,
            Error::NonInvertibleCovariance { .. }
                | Error::NotPositiveSemiDefinite { .. }
                | Error::DegenerateSeries
                | Error::NonFiniteStatistic { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
