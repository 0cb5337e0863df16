//! CLI error categories and their process exit codes.

use switof_core::Error as CoreError;
use thiserror::Error;

/// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 pipeline
/// infeasibility.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Infeasible(_) => "infeasible",
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) => CliError::Config(e.to_string()),
            CoreError::DataValidity(_)
            | CoreError::DimensionMismatch(_)
            | CoreError::CarrierNotFound(_)
            | CoreError::DegenerateFit(_) => CliError::Data(e.to_string()),
            CoreError::SpectralOverlap(_)
            | CoreError::InfiniteSyntheticWavelength(_)
            | CoreError::CascadeInfeasible { .. } => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attach a path to an i/o error.
pub fn io_at<T>(path: &std::path::Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
