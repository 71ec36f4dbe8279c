//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spectral parameter lies on the symbol curve (distance {distance:.3e})")]
    OnSymbolCurve { distance: f64 },

    #[error("roots do not split across the unit circle: |lambda1| = {modulus_large:.6}, |lambda2| = {modulus_small:.6}")]
    NoSplit { modulus_large: f64, modulus_small: f64 },

    #[error("leading coefficient gamma vanishes (|gamma| = {0:.3e})")]
    DegenerateGamma(f64),

    #[error("point {0} is not on the unit circle")]
    NotOnUnitCircle(num_complex::Complex64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("jump operators do not sum to a rank-one fiber perturbation (residual {0:.3e})")]
    NotRankOne(f64),

    #[error("system size n = {n} is too small for interaction range {range}; need n > {needed}")]
    SizeTooSmall { n: usize, range: usize, needed: usize },

    #[error("dense problem of dimension {dim} exceeds the cap {cap}")]
    SizeTooLarge { dim: usize, cap: usize },

    #[error("no closed form is known for this model: {0}")]
    UnsupportedModel(String),

    #[error("empty point set")]
    EmptySet,

    #[error("no spectrum left after excluding a disk of radius {0}")]
    EmptyAfterExclusion(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
