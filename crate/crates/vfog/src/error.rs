use thiserror::Error;

/// Crate-wide error type. Every fallible public operation returns
/// [`Result`].
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed trace input. `line` is 1-based and counts the header.
    #[error("trace parse error at line {line}: {msg}")]
    TraceParse { line: u64, msg: String },

    /// A caller-supplied value is outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tensor or feature-vector width does not match what a network or
    /// scaler was built for.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A forward or backward pass produced NaN or infinity.
    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },

    /// Training was asked to run on an empty sample set.
    #[error("empty training set")]
    EmptyTrainingSet,

    /// A serialized model bundle could not be used.
    #[error("model bundle error: {0}")]
    Bundle(String),

    /// Models handed to routing or evaluation do not fit together or the
    /// trajectory they were applied to.
    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    /// Filesystem access failure, annotated with the path involved.
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// `map_err` adapter that tags an io error with its path.
    pub fn file<P: AsRef<std::path::Path>>(path: P) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.as_ref().display().to_string();
        move |source| Error::File { path, source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
