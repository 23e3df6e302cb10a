use thiserror::Error;

use crate::modelfile::ModelFileError;
use crate::pgm::PgmError;

/// Failure of a command, classified by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<trd_core::Error> for CliError {
    fn from(e: trd_core::Error) -> Self {
        use trd_core::Error as E;
        match e {
            E::NonFinite(_) | E::RankDeficient => CliError::Numeric(e.to_string()),
            E::InvalidArgument(_) | E::UnsupportedFilterSize(_) | E::TooManyFilters { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PgmError> for CliError {
    fn from(e: PgmError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
