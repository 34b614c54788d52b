use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("stale trace: network was modified after the forward pass")]
    StaleTrace,

    #[error("training diverged at epoch {epoch}{}", member_suffix(.member_seed))]
    TrainingDiverged {
        epoch: usize,
        member_seed: Option<u64>,
    },

    #[error("member {index}: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("model is frozen; parameter updates are rejected")]
    Frozen,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("phase `{phase}` failed: {source}")]
    Phase {
        phase: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn member_suffix(seed: &Option<u64>) -> String {
    match seed {
        Some(s) => format!(" (member seed {s})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_phase(self, phase: &str) -> Self {
        match self {
            e @ Error::Phase { .. } => e,
            other => Error::Phase {
                phase: phase.to_string(),
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
