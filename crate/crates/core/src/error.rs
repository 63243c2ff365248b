use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("no users in user-item records")]
    EmptyUsers,
    #[error("dependency record {index} references unknown item `{item}`")]
    UnknownItem { index: usize, item: String },
    #[error("group record {index} references unknown user `{user}`")]
    UnknownUser { index: usize, user: String },
    #[error("{kind} id {id} out of range (count {count})")]
    OutOfRange {
        kind: &'static str,
        id: usize,
        count: usize,
    },
    #[error("path `{label}`: {reason}")]
    InvalidPath { label: String, reason: String },
    #[error("path `{label}` references entity type `{entity}` with no relation available")]
    MissingRelation { label: String, entity: String },
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("evaluation instance set is empty")]
    EmptyInstances,
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("non-finite loss at stage {stage}, epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        stage: u8,
        epoch: usize,
        batch: usize,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u8, expected: u8 },
    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the command-line front end to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFiniteGradient(_) | Error::NonFiniteLoss { .. } => ErrorKind::Numerical,
            Error::Config(_) | Error::Infeasible(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}
