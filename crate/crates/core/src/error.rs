use crate::tensor::Label;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate wire label `{0}`")]
    DuplicateLabel(Label),
    #[error("unknown wire label `{0}`")]
    UnknownLabel(Label),
    #[error("invalid wire `{label}`: dimension must be at least 1")]
    ZeroDimension { label: Label },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("wire mismatch: {0}")]
    WireMismatch(String),
    #[error("label `{0}` cannot be linked: both wires point in the same direction")]
    LabelCollision(Label),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not a deterministic comb: {0}")]
    InvalidComb(String),
    #[error("decomposition rejected: {0}")]
    Certification(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
