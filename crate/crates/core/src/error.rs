use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// Malformed input: unknown generator, unparsable word, bad argument.
    #[error("input error: {0}")]
    Input(String),
    /// A configuration file or field failed validation.
    #[error("config error at {field}: {message}")]
    Config { field: String, message: String },
    /// The caller violated a documented precondition.
    #[error("contract error: {0}")]
    Contract(String),
    /// Argument outside the domain of a closed formula.
    #[error("domain error: {0}")]
    Domain(String),
    /// An enumeration exceeded its configured size cap.
    #[error("overflow: more than {cap} reduced words for {element}")]
    Overflow { element: String, cap: usize },
    /// A computation needed an element beyond the configured ball.
    #[error("out of ball: {element} has length {length} > radius {radius}")]
    OutOfBall { element: String, length: u32, radius: u32 },
    /// An internal identity failed; indicates a bug.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    /// Cache file unreadable, stale or from another system.
    #[error("cache error: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
