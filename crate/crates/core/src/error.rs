use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid coverage insufficient: need [{need_start}, {need_end}], have [{have_start}, {have_end}]")]
    Coverage {
        need_start: f64,
        need_end: f64,
        have_start: f64,
        have_end: f64,
    },

    #[error("numerical consistency check failed: {0}")]
    NumericalConsistency(String),

    #[error("infinite metric massiveness at eps = {eps}")]
    InfiniteMassiveness { eps: f64 },

    #[error("degenerate bound: {0}")]
    Degenerate(String),

    #[error("entropy integral diverges: {0}")]
    Divergent(String),

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and positive, got {value}"
        )))
    }
}
