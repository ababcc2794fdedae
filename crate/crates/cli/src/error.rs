use std::fmt;
use std::path::PathBuf;

/// Failure of a pipeline command; the variant decides the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    MissingArtifact { what: &'static str, path: PathBuf },
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::MissingArtifact { .. } => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::MissingArtifact { what, path } => {
                write!(f, "missing {what}: {} does not exist", path.display())
            }
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fuelrec_core::Error> for CliError {
    fn from(e: fuelrec_core::Error) -> Self {
        use fuelrec_core::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::Io(e) => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
