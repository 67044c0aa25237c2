use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {msg}")]
    Record { line: usize, msg: String },
    #[error("{0}")]
    Other(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 capacity, 4 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Capacity(_) => 3,
            HarnessError::Io { .. } => 4,
            HarnessError::Record { .. } | HarnessError::Other(_) => 1,
        }
    }
}

impl From<gfflab_core::Error> for HarnessError {
    fn from(e: gfflab_core::Error) -> Self {
        match e {
            gfflab_core::Error::Capacity { .. } => HarnessError::Capacity(e.to_string()),
            gfflab_core::Error::Domain(m) => HarnessError::Config(m),
            other => HarnessError::Other(other.to_string()),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
