use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no studies")]
    NoStudies,

    #[error("invalid study {label:?}: {reason}")]
    InvalidStudy { label: String, reason: String },

    #[error("duplicate study label {0:?}")]
    DuplicateLabel(String),

    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("degrees of freedom must be >= 1, got {0}")]
    InvalidDf(f64),

    #[error("tau2 undefined: the between-study variance needs at least 2 studies, got {0}")]
    Tau2Undefined(usize),

    #[error("{context} requires at least {needed} studies, got {got}")]
    TooFewStudies {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("degenerate meta-analysis: {0}")]
    Degenerate(String),

    #[error("subset size k={k} must satisfy 0 < k <= n={n}")]
    InvalidSubsetSize { n: usize, k: usize },

    #[error("u={u} out of range: must satisfy {min} <= u <= {max}")]
    UOutOfRange { u: usize, min: usize, max: usize },

    #[error("enumeration would require {count} subset meta-analyses (cap {cap}); lower u")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("meta-analysis on subset [{}] failed: {source}", subset.join(", "))]
    SubsetFailed {
        subset: Vec<String>,
        #[source]
        source: Box<Error>,
    },

    #[error("meta-analysis not significant (p = {p_two:.4} > alpha = {alpha}); bound undefined")]
    NotSignificant { p_two: f64, alpha: f64 },

    #[error("row {row}: {message}")]
    Input { row: usize, message: String },

    #[error("missing required column {0:?}")]
    MissingColumn(String),

    #[error("heterogeneous measures in one study set: {first} and {other}")]
    MixedMeasures { first: String, other: String },

    #[error("invalid endpoint family: {0}")]
    InvalidFamily(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("cannot render plot: {0}")]
    Render(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Classifies the error for front-ends that need a coarse category.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SubsetFailed { source, .. } => source.kind(),
            Error::EnumerationCap { .. } => ErrorKind::Cap,
            Error::Input { .. }
            | Error::MissingColumn(_)
            | Error::MixedMeasures { .. }
            | Error::InvalidStudy { .. }
            | Error::DuplicateLabel(_)
            | Error::InvalidAlpha(_)
            | Error::InvalidProbability(_)
            | Error::InvalidDf(_)
            | Error::InvalidFamily(_)
            | Error::InvalidConfig(_)
            | Error::NoStudies => ErrorKind::Input,
            Error::Io(_) | Error::Render(_) => ErrorKind::Io,
            Error::Tau2Undefined(_)
            | Error::TooFewStudies { .. }
            | Error::Degenerate(_)
            | Error::InvalidSubsetSize { .. }
            | Error::UOutOfRange { .. }
            | Error::NotSignificant { .. } => ErrorKind::Precondition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or invalid input data.
    Input,
    /// Valid data that does not satisfy an analysis precondition.
    Precondition,
    /// The subset enumeration cap was exceeded.
    Cap,
    Io,
}
