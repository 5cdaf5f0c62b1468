use thiserror::Error;

/// Errors raised by the modem library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside its admissible domain (symbol index, offset, attenuation).
    #[error("input out of domain: {0}")]
    Domain(String),
    /// Tensor shapes or lengths do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A forward or backward pass produced NaN or infinity.
    #[error("non-finite value produced by layer {index} ({name})")]
    NonFinite { index: usize, name: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A serialized artifact failed validation.
    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },
    #[error("training diverged at step {step}: loss {loss:.4} stayed above {threshold:.4}")]
    Diverged { step: u64, loss: f64, threshold: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}
