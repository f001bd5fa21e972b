use std::path::PathBuf;

use hapsim_core::backend::BackendError;
use hapsim_core::params::ParamError;
use hapsim_core::sensitivity::SensitivityError;
use hapsim_core::surrogate::SurrogateError;
use hapsim_core::tissue::TissueError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ParamError),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Model(#[from] BackendError),
    #[error("fit failed: {0}")]
    Fit(#[from] SurrogateError),
    #[error("sensitivity analysis: {0}")]
    Sensitivity(#[from] SensitivityError),
    #[error("{stage} stage: {source}")]
    Tissue {
        stage: &'static str,
        #[source]
        source: TissueError,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    /// 2 for configuration and file-system problems, 1 for failures of the
    /// computation itself.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Write { .. } | CliError::Input(_) => 2,
            _ => 1,
        }
    }
}

pub fn stage(stage: &'static str) -> impl FnOnce(TissueError) -> CliError {
    move |source| CliError::Tissue { stage, source }
}
