use scet_core::arch::{ArchError, CheckpointError};
use scet_core::audit::AuditError;
use scet_core::imaging::ImagingError;
use scet_core::pipeline::PipelineError;
use scet_core::training::TrainError;
use thiserror::Error;

/// Failure classes with stable exit codes.
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
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ArchError> for CliError {
    fn from(e: ArchError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::ConfigMismatch { .. } | CheckpointError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Imaging(e) => e.into(),
            PipelineError::Arch(e) => CliError::Numeric(e.to_string()),
            PipelineError::NonFinite => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Arch(_) => CliError::Usage(e.to_string()),
            TrainError::EmptyDataset(_) | TrainError::Imaging(_) | TrainError::Io { .. } => CliError::Data(e.to_string()),
            TrainError::Checkpoint(c) => c.into(),
            TrainError::NonFinite { .. } | TrainError::Tensor(_) | TrainError::MissingGradient(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}
