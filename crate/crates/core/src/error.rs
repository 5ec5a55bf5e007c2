use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range (valid 1..={len}) for {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("transform violates L'L = LL' = ell*I: max deviation {deviation:.3e} (ell = {ell:.6e})")]
    TransformNotScaledOrthogonal { deviation: f64, ell: f64 },

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("SVD failed to converge on frontal slice {slice}")]
    SvdFailed { slice: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite iterate at ADMM iteration {iteration}")]
    NonFiniteIterate { iteration: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
