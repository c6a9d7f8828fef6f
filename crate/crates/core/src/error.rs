use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate code {0:?}")]
    DuplicateCode(String),

    #[error("dangling parent: concept {code:?} names parent {parent:?} which is not in the snapshot")]
    DanglingParent { code: String, parent: String },

    #[error("no concept has a preferred label in language {0:?}")]
    NoConceptsForLanguage(String),

    #[error("unmappable taxonomy code {0:?}")]
    UnmappableCode(String),

    #[error("unknown label tag {0:?}")]
    UnknownLabel(String),

    #[error("invalid span in posting {posting:?}: {message}")]
    InvalidSpan { posting: String, message: String },

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined kappa: chance agreement is 1 but observed agreement is {observed}")]
    UndefinedKappa { observed: f64 },

    #[error("HTTP status {status} from {url}")]
    HttpStatus { status: u16, url: String },

    #[error("network error: {0}")]
    Network(String),

    #[error("request timed out after {0:?}")]
    Timeout(std::time::Duration),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Whether repeating the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            Error::HttpStatus { status, .. } => *status == 429 || *status >= 500,
            Error::Timeout(_) | Error::Network(_) => true,
            _ => false,
        }
    }

    /// Process exit code: 2 for input/format problems, 3 for runtime and network failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::HttpStatus { .. }
            | Error::Network(_)
            | Error::Timeout(_)
            | Error::UndefinedKappa { .. } => 3,
            Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => 3,
            _ => 2,
        }
    }
}
