use std::path::PathBuf;

use thiserror::Error;

use crate::solver::IterationRecord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid interface: {0}")]
    InvalidInterface(String),

    #[error("degenerate element {element} (jacobian {jacobian:e})")]
    DegenerateElement { element: usize, jacobian: f64 },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("body {0} has no contact-tagged facets")]
    EmptyContact(usize),

    #[error("hybrid model `{model}` is incompatible with hybrid space `{space}`")]
    IncompatibleHybrid { model: String, space: String },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("linear solve failed in newton iteration {iteration}: {message}")]
    NewtonLinearSolve { iteration: usize, message: String },

    #[error("newton iteration did not converge in {} iterations", log.len())]
    NonConvergence { log: Vec<IterationRecord> },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("scenario validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
