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

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: &'static str },

    #[error("{path}: input has no rows")]
    EmptyInput { path: PathBuf },

    #[error("no trip survived cleaning ({dropped} rows dropped)")]
    NoValidRows { dropped: usize },

    #[error("requested {requested} drivers but only {available} are available")]
    NotEnoughDrivers { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dataset {path}: {message}")]
    Dataset { path: PathBuf, message: String },

    #[error("report {path}: {message}")]
    Report { path: PathBuf, message: String },

    #[error(transparent)]
    Model(#[from] dds_core::Error),
}

impl Error {
    /// Stable category printed on stderr as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } | Error::MissingColumn { .. } | Error::EmptyInput { .. } => "parse",
            Error::NoValidRows { .. } | Error::NotEnoughDrivers { .. } | Error::Dataset { .. } => {
                "data"
            }
            Error::Config(_) => "config",
            Error::Report { .. } => "report",
            Error::Model(dds_core::Error::Diverged { .. }) => "divergence",
            Error::Model(_) => "model",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "parse" | "data" | "report" => 4,
            "divergence" => 5,
            _ => 6,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
