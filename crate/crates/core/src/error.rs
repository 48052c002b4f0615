use thiserror::Error;

/// Errors produced by the filling, rendering, simulation and identification stages.
#[derive(Debug, Error)]
pub enum GicError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },

    #[error("singular material parameters: {0}")]
    SingularParameter(String),

    #[error("inverted element: det(F) = {det}")]
    InvertedElement { det: f64 },

    #[error("invalid simulation state: {0}")]
    InvalidState(String),

    #[error("CFL condition violated: dt = {dt}, limit = {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("simulation diverged at substep {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("finite-difference probe diverged on coordinate {coordinate} ({name})")]
    DivergedProbe { coordinate: usize, name: String },

    #[error("identification failed: {0}")]
    IdentificationFailed(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl GicError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GicError::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        GicError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by numerical blow-up rather than bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            GicError::Diverged { .. }
                | GicError::DivergedProbe { .. }
                | GicError::InvertedElement { .. }
                | GicError::IdentificationFailed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, GicError>;
