use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("unknown model id `{0}`")]
    UnknownModel(String),

    #[error("invalid parameter `{key}`: {reason}")]
    Param { key: String, reason: String },

    #[error("{path}{}: {msg}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse {
        path: String,
        line: Option<usize>,
        msg: String,
    },

    #[error("invalid problem `{name}`: {reason}")]
    InvalidProblem { name: String, reason: String },

    #[error("primitive file: {0}")]
    PrimitiveFile(String),

    #[error("model mismatch: found `{found}`, expected `{expected}`")]
    ModelMismatch { found: String, expected: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse_yaml(path: &str, err: serde_yaml::Error) -> Self {
        Error::Parse {
            path: path.to_string(),
            line: err.location().map(|l| l.line()),
            msg: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
