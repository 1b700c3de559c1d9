use thiserror::Error;

/// Errors raised by the simulator and its observables.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("arcs live on circles of different circumference ({0} vs {1})")]
    CircumferenceMismatch(f64, f64),

    #[error("need at least {needed} firms, got {got}")]
    InsufficientPopulation { needed: usize, got: usize },

    #[error("degenerate sample: radii have zero variance")]
    DegenerateSample,

    #[error("no valid samples in record")]
    EmptyRecord,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("recorder not enabled: {0}")]
    MissingRecorder(&'static str),
}

pub type Result<T> = std::result::Result<T, MarketError>;
