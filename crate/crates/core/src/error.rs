use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Invalid grid, partition or solver configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Dyadic block index outside the representable range.
    #[error("block q={q} outside representable range [{q_min}, {q_max}]")]
    BlockRange { q: i32, q_min: i32, q_max: i32 },

    /// A pointwise domain violation (vacuum breach, out-of-range entropy
    /// variable); carries the offending grid point.
    #[error("domain error at grid point {index} (value {value:.6e}): {message}")]
    Domain {
        index: usize,
        value: f64,
        message: String,
    },

    /// Input does not satisfy a declared spectral-support or shape property.
    #[error("validation error: {0}")]
    Validation(String),

    /// Time stepping failed; `s` is the evolution time of the failure.
    #[error("solver failure at s={s:.6}: {message}")]
    Solver { s: f64, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
