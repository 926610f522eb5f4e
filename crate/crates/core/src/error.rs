use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coincident particles {i} and {j}: the Coulomb kernel is singular")]
    Singular { i: usize, j: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("density integrates to {found}, expected {expected}")]
    NotNormalized { expected: f64, found: f64 },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    #[error("non-finite position after {step} Langevin steps (chain {chain}); step size eta={eta} is likely too large")]
    NonFinite { chain: usize, step: u64, eta: f64 },

    #[error("importance weights degenerate: effective sample size {ess:.2} < 10")]
    DegenerateWeights { ess: f64 },

    #[error("optimizer diverged at iteration {iteration}: |nu| = {norm:e}")]
    Diverged { iteration: usize, norm: f64 },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("output directory {0} already exists (pass --overwrite to replace it)")]
    OutputExists(std::path::PathBuf),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for this error: 2 for a bad configuration, 3 for a
    /// refused overwrite, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::OutputExists(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
