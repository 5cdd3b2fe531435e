use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("{path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] physid::Error),

    #[error("{0} check(s) exceeded tolerance")]
    ChecksFailed(usize),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Data {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// 1 failed checks, 2 configuration, 3 data, 4 divergence.
    pub fn exit_code(&self) -> u8 {
        use physid::Error as E;
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Usage(_) | CliError::ConfigParse { .. } | CliError::ConfigRead { .. } => 2,
            CliError::Data { .. } | CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                E::Config(_)
                | E::InvalidSpec { .. }
                | E::UnknownSystem(_)
                | E::InvalidArgument(_) => 2,
                E::Divergence { .. }
                | E::NonFinite { .. }
                | E::NonFiniteHidden { .. }
                | E::Autodiff(_) => 4,
                _ => 3,
            },
        }
    }
}
