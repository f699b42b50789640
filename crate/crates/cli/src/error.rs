use spde_heavy::Error;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 rejected configuration, 3 non-convergence, 4 I/O failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 4,
            CliError::Lib(e) => match e {
                Error::InvalidParameter { .. }
                | Error::NotAdmissible(_)
                | Error::Infeasible(_)
                | Error::Hypothesis(_)
                | Error::GuardBand { .. }
                | Error::InsufficientLevel { .. } => 2,
                Error::NotConverged { .. } | Error::Quadrature { .. } => 3,
                Error::Io(_) | Error::Json(_) => 4,
                _ => 1,
            },
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Lib(Error::Json(e))
    }
}
