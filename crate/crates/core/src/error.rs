use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {what}{}", location_suffix(.location))]
    NonFinite {
        what: String,
        location: Option<String>,
    },

    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("format error in {path}: {kind}")]
    Format { path: PathBuf, kind: FormatError },

    #[error("checkpoint config hash mismatch: file has {found}, expected {expected}")]
    HashMismatch { found: String, expected: String },

    #[error("non-finite loss at step {step}; last good checkpoint: {}", .last_checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()))]
    Diverged {
        step: u64,
        last_checkpoint: Option<PathBuf>,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Invalid(String),
}

/// Distinct failure classes of the binary readers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {found} (reader supports up to {supported})")]
    FutureVersion { found: u16, supported: u16 },
    #[error("length mismatch: header implies {expected} bytes, file has {actual}")]
    Length { expected: u64, actual: u64 },
    #[error("truncated while reading {0}")]
    Truncated(&'static str),
    #[error("corrupt content: {0}")]
    Corrupt(String),
}

fn location_suffix(loc: &Option<String>) -> String {
    match loc {
        Some(l) => format!(" at {l}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, kind: FormatError) -> Self {
        Error::Format {
            path: path.into(),
            kind,
        }
    }

    /// Io error annotated with the file it concerns.
    pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        }
    }
}
