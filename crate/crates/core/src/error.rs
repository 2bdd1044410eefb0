use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config line {line}: key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("photon number {photons} exceeds the configured cutoff {cutoff}")]
    CutoffExceeded { photons: u32, cutoff: u32 },

    #[error(
        "quadrature did not converge for {what}: {coarse:e} vs {fine:e} (relative change {relative:e})"
    )]
    QuadratureNonConvergence {
        what: &'static str,
        coarse: f64,
        fine: f64,
        relative: f64,
    },

    #[error("photon-number truncation tail {tail:e} exceeds budget {budget:e}")]
    TruncationBudget { tail: f64, budget: f64 },

    #[error("decoy gain grid is missing pattern {0}")]
    IncompleteGrid(String),

    #[error("numerical invariant violated: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than numerical breakdown.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::InvalidParameter { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
