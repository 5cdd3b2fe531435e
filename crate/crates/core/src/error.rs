use std::path::PathBuf;

use crate::autodiff::AdError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] AdError),

    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown system '{0}'")]
    UnknownSystem(String),

    #[error("invalid system spec '{name}': {reason}")]
    InvalidSpec { name: String, reason: String },

    #[error("non-finite value at step {step}, component {component} ({stage})")]
    NonFinite {
        step: usize,
        component: usize,
        stage: &'static str,
    },

    #[error("non-finite hidden state in unit {unit}")]
    NonFiniteHidden { unit: usize },

    #[error("length mismatch in {what}: {left} vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("series too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Csv {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("audio: {0}")]
    Audio(String),

    #[error("image: {0}")]
    Image(String),

    #[error("no curve found matching color {0:?}")]
    NoCurve([u8; 3]),

    #[error("degenerate axis calibration: {0}")]
    DegenerateCalibration(String),

    #[error("point coincides with the pivot at sample {0}")]
    AtPivot(usize),

    #[error("alignment: {0}")]
    Alignment(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
