use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An amplitude pair of a photon input does not satisfy |c1|^2 + |c2|^2 = 1.
    #[error("amplitude pair `{field}` is not normalized: |c1|^2 + |c2|^2 = {norm_sqr}")]
    Normalization { field: &'static str, norm_sqr: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("state has zero norm where a nonzero state is required")]
    ZeroState,

    /// Amplitude left in the discarded interferometer arm after recombination.
    #[error("block composition leaves {residual:e} of amplitude in the discarded arm")]
    CompositionMismatch { residual: f64 },

    #[error("invalid cavity parameters: {0}")]
    InvalidParams(String),

    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),

    #[error("invalid averaging method: {0}")]
    InvalidMethod(String),

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
