use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mirrorbench_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for configuration problems, 3 when no feasible
    /// placement exists, 4 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        use mirrorbench_core::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } | Self::Core(E::Io(_)) => 4,
            Self::Core(E::InfeasibleSpace(_)) => 3,
            Self::Core(E::Parse { .. }) => 4,
            Self::Core(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
