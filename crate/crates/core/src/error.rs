use std::path::PathBuf;

/// Errors produced by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no evaluable data: {0}")]
    NoData(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("frame {frame}: {source}")]
    Frame {
        frame: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the file the error was raised for.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::File { .. }) => e,
            e => Error::File {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }

    /// Attach the frame index the error was raised for.
    pub fn in_frame(self, frame: u32) -> Self {
        Error::Frame {
            frame,
            source: Box::new(self),
        }
    }

    /// The innermost error, with file and frame context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::File { source, .. } | Error::Frame { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn is_format(&self) -> bool {
        matches!(self.root(), Error::Format(_))
    }

    pub fn is_data(&self) -> bool {
        matches!(self.root(), Error::Data(_))
    }

    pub fn is_shape(&self) -> bool {
        matches!(self.root(), Error::Shape(_))
    }

    pub fn is_vocabulary(&self) -> bool {
        matches!(self.root(), Error::Vocabulary(_))
    }

    pub fn is_contract(&self) -> bool {
        matches!(self.root(), Error::Contract(_))
    }

    pub fn is_config(&self) -> bool {
        matches!(self.root(), Error::Config(_))
    }

    pub fn is_no_data(&self) -> bool {
        matches!(self.root(), Error::NoData(_))
    }
}
