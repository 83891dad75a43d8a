use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Residual variance vanished relative to the response variance.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// The per-split statistics carry no spread, so studentization is undefined.
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    /// A configuration document or flag combination is invalid. `path` is a
    /// JSON-pointer-style location inside the document, empty for flags.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("cannot parse {value:?} as a number at row {row}, column {column:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("test {index}: {source}")]
    Test {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad classes of failure, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
    Other,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
            ErrorKind::Other => 1,
        }
    }
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config { .. } | Error::Domain(_) => ErrorKind::Config,
            Error::MissingColumn(_)
            | Error::Parse { .. }
            | Error::InsufficientData(_)
            | Error::Io(_)
            | Error::Csv(_) => ErrorKind::Data,
            Error::SingularDesign(_) | Error::DegenerateFit(_) | Error::DegenerateStatistic(_) => {
                ErrorKind::Numerical
            }
            Error::Test { source, .. } => source.kind(),
            Error::Json(_) => ErrorKind::Other,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical degeneracy, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        self.kind().exit_code()
    }

    /// True for failures that a fresh random split may avoid.
    pub(crate) fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::SingularDesign(_) | Error::DegenerateFit(_) | Error::DegenerateStatistic(_)
        )
    }
}
