use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition of an operation was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("index {index} out of range 1..={max}")]
    OutOfRange { index: usize, max: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("enumeration cap exceeded: n = {n} > cap {cap}; use the band DP for localized instances")]
    EnumerationCap { n: usize, cap: usize },

    #[error("window cap exceeded: window width {width} > cap {cap}")]
    WindowCap { width: usize, cap: usize },

    #[error("localization vector is not {0}-admissible")]
    Inadmissible(usize),

    #[error("empty conditional support: {0}")]
    EmptySupport(String),

    #[error("kernel is not reversible: detailed balance fails between states {x} and {y} (relative error {rel_err:e})")]
    NotReversible { x: usize, y: usize, rel_err: f64 },

    #[error("mixing time search exceeded {cap} steps (last worst-case TV {last_tv})")]
    MixingCap { cap: usize, last_tv: f64 },

    #[error("state space too large: {0}")]
    StateCap(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling order violated: {0}")]
    OrderViolation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
