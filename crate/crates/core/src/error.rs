use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants map one-to-one onto the CLI exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (bad index, negative argument, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid configuration (sampler spec, CV folds, config file, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// A numerical routine failed (infeasible LP, non-PD matrix, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error class: 2 usage/config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

impl Error {
    /// Prefixes the message, keeping the error class.
    pub(crate) fn context(self, what: impl std::fmt::Display) -> Self {
        match self {
            Error::Usage(m) => Error::Usage(format!("{what}: {m}")),
            Error::Config(m) => Error::Config(format!("{what}: {m}")),
            Error::Data(m) => Error::Data(format!("{what}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{what}: {m}")),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{what}: {e}"))),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn data(msg: impl Into<String>) -> Error {
    Error::Data(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}
