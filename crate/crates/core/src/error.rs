use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("simulation diverged: particle {particle} has a non-finite position")]
    SimulationDiverged { particle: usize },

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("centerline extraction failed: {0}")]
    Extraction(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
