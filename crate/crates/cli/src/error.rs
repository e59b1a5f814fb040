use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown command {0:?}")]
    UnknownCommand(String),

    #[error("invalid config key `{key}`{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    ConfigInvalid { key: String, line: Option<usize>, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] einflow_core::Error),

    #[error(transparent)]
    Poly(#[from] einflow_spherepoly::Error),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

impl CliError {
    /// Validation failures are detectable from the inputs alone; everything else is numerical.
    pub fn exit_code(&self) -> i32 {
        use einflow_core::Error as E;
        match self {
            CliError::UnknownCommand(_) | CliError::ConfigInvalid { .. } | CliError::Usage(_) | CliError::Io(_) => {
                EXIT_VALIDATION
            }
            CliError::Core(
                E::InvalidInput(_)
                | E::ResolutionTooCoarse { .. }
                | E::ChartMismatch
                | E::ExcludedSphere
                | E::CflViolation { .. }
                | E::NonConstantScalar { .. }
                | E::NonPositiveScalar { .. }
                | E::NonPositiveMu { .. }
                | E::NonPositiveDefinite { .. }
                | E::InsufficientSnapshots { .. }
                | E::Io(_),
            ) => EXIT_VALIDATION,
            CliError::Poly(
                einflow_spherepoly::Error::DimensionMismatch { .. }
                | einflow_spherepoly::Error::DimensionTooSmall { .. },
            ) => EXIT_VALIDATION,
            _ => EXIT_NUMERICAL,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
