use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("inverse branch did not reach |T(z) - y| <= tol for y = {target} (residual {residual:e})")]
    Convergence { target: f64, residual: f64 },

    #[error("power iteration stalled at residual {residual:e} after {iterations} iterations")]
    PowerIteration { residual: f64, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("weights sum to {sum}, expected 1")]
    Normalization { sum: f64 },

    #[error("{what}: {size} exceeds cap {cap}")]
    SizeCap {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate variance {0}")]
    DegenerateVariance(f64),

    #[error("sampling failure: {0}")]
    Sampling(String),

    #[error(
        "observable `{label}` violates Lip_{coordinate} bound {bound:e}: observed ratio {ratio:e} at |dz| = {step:e}"
    )]
    Certification {
        label: String,
        coordinate: usize,
        bound: f64,
        ratio: f64,
        step: f64,
    },

    #[error("cache file is corrupted: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
