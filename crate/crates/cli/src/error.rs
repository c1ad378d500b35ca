// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use seufsm::emit::EmitError;
use seufsm::encoding::EncodingError;
use seufsm::extract::ExtractError;
use seufsm::pipeline::PipelineError;
use seufsm::reach::ReachError;
use seufsm::report::ReportError;
use seufsm::seu::SeuError;
use seufsm::{NetlistError, StgError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: NetlistError },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Capacity(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } | CliError::Write { .. } => 2,
            CliError::Parse { .. } | CliError::Invalid(_) => 3,
            CliError::Capacity(_) => 4,
        }
    }
}

impl From<StgError> for CliError {
    fn from(e: StgError) -> Self {
        match e {
            StgError::CapacityExceeded { .. } => CliError::Capacity(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<SeuError> for CliError {
    fn from(e: SeuError) -> Self {
        match e {
            SeuError::CapacityExceeded { .. } | SeuError::ExposureTooLarge { .. } => {
                CliError::Capacity(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Extract(e) => e.into(),
            PipelineError::Stg(e) => e.into(),
            PipelineError::Seu(e) => e.into(),
        }
    }
}

impl From<ExtractError> for CliError {
    fn from(e: ExtractError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<EncodingError> for CliError {
    fn from(e: EncodingError) -> Self {
        match e {
            EncodingError::CapacityExceeded { .. } | EncodingError::TooManyStates(_) => {
                CliError::Capacity(e.to_string())
            }
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<EmitError> for CliError {
    fn from(e: EmitError) -> Self {
        match e {
            EmitError::CapacityExceeded { .. } => CliError::Capacity(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<ReachError> for CliError {
    fn from(e: ReachError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Invalid(e.to_string())
    }
}
