use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised while reading or validating a `.sfwb` weight file.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFileError {
    BadMagic([u8; 4]),
    UnsupportedVersion(u32),
    /// The file ended early. `layer` names the layer being read, or the
    /// header/trailer section when no layer was in progress.
    Truncated { layer: String },
    ShapeMismatch { layer: String, expected: Vec<usize>, found: Vec<usize> },
    Malformed(String),
}

impl fmt::Display for WeightFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFileError::BadMagic(m) => write!(f, "bad magic bytes {m:?}, expected \"SFWB\""),
            WeightFileError::UnsupportedVersion(v) => write!(f, "unsupported weight file version {v}"),
            WeightFileError::Truncated { layer } => write!(f, "weight file truncated while reading `{layer}`"),
            WeightFileError::ShapeMismatch { layer, expected, found } => write!(
                f,
                "layer `{layer}` has shape {found:?} but the network expects {expected:?}"
            ),
            WeightFileError::Malformed(msg) => write!(f, "malformed weight file: {msg}"),
        }
    }
}

#[derive(Debug)]
pub enum Error {
    Shape(String),
    InvalidArgument(String),
    NonFinite { context: String, iteration: usize },
    UnknownLayer { name: String, valid: Vec<String> },
    CorpusTooSmall(String),
    WeightFile(WeightFileError),
    Image(String),
    Leakage(String),
    Io(io::Error),
    Json(serde_json::Error),
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite { context, iteration } => {
                write!(f, "non-finite value in {context} at iteration {iteration}")
            }
            Error::UnknownLayer { name, valid } => {
                write!(f, "unknown layer `{name}`; valid layers: {}", valid.join(", "))
            }
            Error::CorpusTooSmall(msg) => write!(f, "corpus too small: {msg}"),
            Error::WeightFile(e) => e.fmt(f),
            Error::Image(msg) => write!(f, "image error: {msg}"),
            Error::Leakage(msg) => write!(f, "data leakage: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl From<WeightFileError> for Error {
    fn from(e: WeightFileError) -> Self {
        Error::WeightFile(e)
    }
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
