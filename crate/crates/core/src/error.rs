use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Gram matrix could not be factorized; refit with a larger noise floor.
    #[error("gram matrix is not positive definite ({0}); refit hyperparameters with a larger noise floor")]
    Factorization(String),

    #[error("traffic window: {0}")]
    Window(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
