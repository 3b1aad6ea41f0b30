//! CLI error taxonomy and process exit codes.
//!
//! Every failure surfaces as one of three categories so that shell scripts
//! can branch on the exit status: validation problems (bad flags, malformed
//! data, mismatched comparisons) exit 2, convergence failures exit 3, and
//! filesystem/serialisation problems exit 4.

use std::path::Path;

use thiserror::Error;
use tvgarch_core::fit::FitError;
use tvgarch_core::model::ModelError;
use tvgarch_core::sampler::SamplerError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: flags, config keys, data files, or incompatible runs.
    #[error("{0}")]
    Validation(String),
    /// The sampler ran but the result is not trustworthy.
    #[error("{0}")]
    Convergence(String),
    /// Reading or writing artefacts failed.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Wraps an I/O error with the path that caused it.
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<FitError> for CliError {
    fn from(err: FitError) -> Self {
        match err {
            // configuration and data problems are validation failures;
            // a sampler that cannot start or finish is a convergence failure
            FitError::Model(m) => CliError::Validation(m.to_string()),
            FitError::Basis(b) => CliError::Validation(b.to_string()),
            FitError::Sampler(SamplerError::InvalidConfig { reason }) => {
                CliError::Validation(format!("invalid sampler configuration: {reason}"))
            }
            FitError::Sampler(s) => CliError::Convergence(s.to_string()),
            FitError::Internal(msg) => CliError::Convergence(msg),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(err: ModelError) -> Self {
        CliError::Validation(err.to_string())
    }
}
