use thiserror::Error;

/// Errors surfaced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: String,
        left: usize,
        right: usize,
    },

    #[error("integration diverged at t = {t}: {reason}")]
    IntegrationDiverged { t: f64, reason: String },

    #[error("Picard iteration did not converge within {max_iter} iterations (last ratio {last_ratio})")]
    PicardNonConvergence { max_iter: usize, last_ratio: f64 },

    #[error("scenario error at {pointer}: {message}")]
    Scenario { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn dims(context: impl Into<String>, left: usize, right: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            left,
            right,
        }
    }

    pub fn scenario(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scenario {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}
