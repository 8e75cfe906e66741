use std::path::PathBuf;

/// Errors raised across the detection pipeline.
///
/// Each variant maps to a distinct process exit code (see [`Error::exit_code`])
/// so scripted callers can tell parameter, data, I/O and format failures apart.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// A tensor or image has dimensions incompatible with the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument value is outside its documented domain.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The input data cannot support the operation (empty corpus, single-class set, ...).
    #[error("data error: {0}")]
    Data(String),

    /// An image buffer is in the wrong color space for the operation.
    #[error("color space error: {0}")]
    Space(String),

    /// An operation was invoked before the state it depends on was recorded.
    #[error("state error: {0}")]
    State(String),

    #[error("i/o error{}: {source}", path.as_ref().map(|p| format!(" ({})", p.display())).unwrap_or_default())]
    Io {
        #[source]
        source: std::io::Error,
        path: Option<PathBuf>,
    },

    /// A file does not conform to its declared on-disk format.
    #[error("format error{}: {msg}", offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    Format { msg: String, offset: Option<u64> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(source: std::io::Error, path: impl Into<PathBuf>) -> Self {
        Error::Io {
            source,
            path: Some(path.into()),
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format {
            msg: msg.into(),
            offset: None,
        }
    }

    pub fn format_at(msg: impl Into<String>, offset: u64) -> Self {
        Error::Format {
            msg: msg.into(),
            offset: Some(offset),
        }
    }

    /// Process exit code for the CLI. 0 is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 2,
            Error::Data(_) => 3,
            Error::Io { .. } => 4,
            Error::Format { .. } => 5,
            Error::Shape(_) => 6,
            Error::Space(_) => 7,
            Error::State(_) => 8,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io { source, path: None }
    }
}
