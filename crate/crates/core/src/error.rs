use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("order {requested} outside the computed range 0..={available}")]
    Range { requested: i64, available: usize },
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),
    #[error("kernel evaluated at q + l = 0 (q = {q}, l = {l}); the arc limit must be used instead")]
    KernelLimit { q: i32, l: i32 },
    #[error("numerical accuracy: {0}")]
    Accuracy(String),
    #[error("insufficient coverage: {0}")]
    InsufficientCoverage(String),
}

impl Error {
    /// True for failures caused by numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Accuracy(_))
    }
}
