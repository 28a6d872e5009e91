use alloc::string::String;

/// Errors raised by the core computations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("pump cycle has no non-missing readings")]
    EmptyCycle,
    #[error("timestamps not strictly increasing at reading {index}")]
    NonMonotoneTimestamps { index: usize },
    #[error("window has no non-missing values")]
    AllMissingWindow,
    #[error("need at least {needed} present values, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("histograms do not share bin edges")]
    BinMismatch,
    #[error("invalid histogram: {0}")]
    InvalidHistogram(&'static str),
    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(&'static str),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("non-finite value in training input")]
    NonFiniteInput,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("insufficient data: {0}")]
    InsufficientData(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
