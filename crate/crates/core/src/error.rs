use thiserror::Error;

/// Errors raised across the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid of {n_points} points cannot resolve a field truncated at S = {s_max} (need at least {required})")]
    Truncation {
        n_points: usize,
        s_max: usize,
        required: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("backend `{backend}` does not provide {capability}")]
    MissingCapability {
        backend: String,
        capability: &'static str,
    },

    #[error("spectral resolution error: {0}")]
    SpectralResolution(String),

    #[error("differentiation produced non-finite values at coordinate {0}")]
    Differentiation(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("path {path}: divergence at tau = {tau:.6} (norm {norm:.3e} above bound {bound})")]
    Divergence {
        path: usize,
        tau: f64,
        norm: f64,
        bound: f64,
        last_good: Box<crate::field::FourierField>,
    },

    #[error("path {path}: integration failure at tau = {tau:.6}: non-finite state")]
    NonFinite {
        path: usize,
        tau: f64,
        last_good: Vec<f64>,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
