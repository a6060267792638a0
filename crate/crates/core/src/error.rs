use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("undefined for N = 0: {0}")]
    UndefinedFringe(&'static str),

    #[error("degenerate spin direction: transverse mean spin is zero")]
    DegenerateDirection,

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{stage} did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{flagged} of {total} trajectories diverged (limit 1%)")]
    Diverged { flagged: usize, total: usize },

    #[error("numerical failure in {stage}: {reason}")]
    Numerical { stage: &'static str, reason: String },

    #[error("condensate mode is ambiguous: eigenvalue gap {gap:e} (leading {leading:e})")]
    AmbiguousMode { gap: f64, leading: f64 },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
