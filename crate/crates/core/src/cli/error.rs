use crate::learn::LearnError;
use crate::pem::ModelError;
use crate::server::{ClientError, ServerError};
use crate::sim::SimError;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Convergence(_) => EXIT_CONVERGENCE,
            Self::Io(_) => EXIT_IO,
        }
    }

    pub(crate) fn io_at(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }
}

fn learn_is_convergence(e: &LearnError) -> bool {
    match e {
        LearnError::NotConverged { .. } => true,
        LearnError::Field { source, .. } => learn_is_convergence(source),
        _ => false,
    }
}

fn learn_is_io(e: &LearnError) -> bool {
    match e {
        LearnError::Io(_) | LearnError::Model(ModelError::Io(_)) => true,
        LearnError::Field { source, .. } => learn_is_io(source),
        _ => false,
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        if learn_is_convergence(&e) {
            Self::Convergence(e.to_string())
        } else if learn_is_io(&e) {
            Self::Io(e.to_string())
        } else {
            Self::Data(e.to_string())
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Io(_) => Self::Io(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidSpec(_) | SimError::Perception(_) => Self::Data(e.to_string()),
            SimError::Remote(_) | SimError::Io(_) => Self::Io(e.to_string()),
        }
    }
}

impl From<ServerError> for CliError {
    fn from(e: ServerError) -> Self {
        match e {
            ServerError::NoModels => Self::Usage(e.to_string()),
            _ => Self::Io(e.to_string()),
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
