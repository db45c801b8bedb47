use thiserror::Error;

/// Error taxonomy shared by the whole crate.
///
/// The variants map one-to-one onto process exit codes in the CLI:
/// `Argument` and `Model` are caller mistakes (exit 2), `Resource` means a
/// configured size cap was exceeded (exit 3), `Numeric` means a solver or
/// an internal cross-check failed to reach its tolerance (exit 4).
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("model inconsistency: {0}")]
    Model(String),
    #[error("resource cap exceeded: {0}")]
    Resource(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn argument(msg: impl Into<String>) -> Self {
        CoreError::Argument(msg.into())
    }
    pub fn model(msg: impl Into<String>) -> Self {
        CoreError::Model(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        CoreError::Resource(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        CoreError::Numeric(msg.into())
    }
}
