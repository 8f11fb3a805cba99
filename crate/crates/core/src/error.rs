use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A point lies outside (or on the boundary of) the support of a marginal.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    /// Training labels contain a single class.
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    /// Input has no usable signal (all-zero matrix, zero normalizer, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("all dimensions collapsed (variance below {threshold})")]
    AllDimensionsCollapsed { threshold: f64 },

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
