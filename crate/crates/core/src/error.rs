//! Crate-wide error type.

use crate::ids::{FrameId, PersonId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is invalid; names the offending field.
    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },

    /// A referenced person is absent at the given frame.
    #[error("person {person} is absent at frame {frame}")]
    MissingPerson { frame: FrameId, person: PersonId },

    /// Inputs violate an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Internally inconsistent data (e.g. an edge to a nonexistent node).
    #[error("inconsistent data: {0}")]
    Inconsistency(String),

    /// Modularity is undefined on a graph with zero total edge weight.
    #[error("modularity undefined: graph has zero total edge weight")]
    UndefinedModularity,

    /// Brute-force enumeration refused: too many nodes.
    #[error("graph has {nodes} nodes, brute-force enumeration is capped at {max}")]
    SizeLimit { nodes: usize, max: usize },

    /// A record in an interchange file failed to parse or validate.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A pipeline stage failed; carries the stage name and the cause.
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
