use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoxError>;

/// Errors raised by ingestion, fitting, and the subsampling estimators.
#[derive(Debug, Error)]
pub enum CoxError {
    #[error("MissingColumn: column `{0}` not found in header")]
    MissingColumn(String),
    #[error("EmptyDataset: no usable rows")]
    EmptyDataset,
    #[error("NegativeTime: row {row} has time {value}")]
    NegativeTime { row: usize, value: f64 },
    #[error("InvalidStatus: row {row} has status {value}, expected 0 or 1")]
    InvalidStatus { row: usize, value: f64 },
    #[error("InvalidPath: {0}")]
    InvalidPath(String),
    #[error("DimensionMismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("NonFiniteValue: {0}")]
    NonFiniteValue(&'static str),
    #[error("EmptyRiskSet: nobody at risk at t={t}")]
    EmptyRiskSet { t: f64 },
    #[error("SingularInformation: pivot {pivot:e} below threshold {threshold:e}")]
    SingularInformation { pivot: f64, threshold: f64 },
    #[error("NotConverged: {what} after {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },
    #[error("EmptySubsample: no records drawn")]
    EmptySubsample,
    #[error("TooFewEvents: {events} events, need at least {required}")]
    TooFewEvents { events: usize, required: usize },
    #[error("IndexOutOfRange: index {index} for n={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("DegenerateVariance: {0}")]
    DegenerateVariance(String),
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error("Csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}
