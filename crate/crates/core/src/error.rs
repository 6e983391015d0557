use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block: {0}")]
    InvalidBlock(String),

    #[error("invalid block sequence: symbol {symbol} at position {position} is outside 1..={max}")]
    InvalidSequence {
        symbol: u8,
        position: usize,
        max: usize,
    },

    #[error("cannot build a resonator array from an empty block sequence")]
    EmptyArray,

    #[error("invalid sampler: {0}")]
    InvalidSampler(String),

    #[error("bound-length sampling is infeasible: every occurrence bound is zero")]
    Infeasible,

    #[error("sequence length {len} is not a multiple of the chunk length {chunk}")]
    Length { len: usize, chunk: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("total masses differ: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        /// Eigenvalues found before the iteration budget ran out (unsorted diagonal).
        partial: Vec<f64>,
    },

    #[error("propagation matrix is not unimodular: det = {0}")]
    NotUnimodular(f64),

    #[error("quasimomentum grid is missing alpha = {0}")]
    MissingQuasimomentum(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error stems from user input (configs, sequences, parameters)
    /// rather than from a numerical failure.
    pub fn is_config_error(&self) -> bool {
        !matches!(
            self,
            Error::NoConvergence { .. } | Error::NotUnimodular(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
