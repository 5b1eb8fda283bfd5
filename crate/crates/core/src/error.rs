use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("precision target unreachable: {0}")]
    Precision(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("partition too coarse: {0}")]
    CoarsePartition(String),

    #[error("grid resolution insufficient: {0}")]
    Resolution(String),

    #[error("inconsistent bad intervals: {0}")]
    Consistency(String),

    #[error("not applicable: {0}")]
    Applicability(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
