use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    Invalid { name: String, reason: String },

    /// Configuration rejected at load; `path` is the dotted key that failed.
    #[error("{path}: {reason}")]
    Config { path: String, reason: String },

    #[error("non-finite value at node {index} (state {state:?}) in step {step}")]
    NonFinite {
        step: usize,
        index: usize,
        state: [f64; 4],
    },

    #[error("trajectory diverged at t = {t} s (state {state:?})")]
    Diverged { t: f64, state: [f64; 4] },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error("initial-state sampler found no admissible state in {0} attempts")]
    SamplerExhausted(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

impl Error {
    /// Numerical breakdown, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Diverged { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
