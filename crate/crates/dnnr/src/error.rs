use std::io;
use std::path::PathBuf;

pub type Result<T, E = DnnrError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum DnnrError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{source_name}:{line}: {source}")]
    Record {
        source_name: String,
        line: usize,
        source: dnnr_core::Error,
    },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] dnnr_core::Error),
}

impl DnnrError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DnnrError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        DnnrError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        use dnnr_core::Error as Core;
        match self {
            DnnrError::Usage(_) => 1,
            DnnrError::Core(e) if e.is_numeric() => 3,
            DnnrError::Core(
                Core::Config(_) | Core::UnknownField(_) | Core::UnknownFeatureSet(_),
            ) => 1,
            _ => 2,
        }
    }
}
