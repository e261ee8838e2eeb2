use thiserror::Error;

use crate::model::Diagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which stage of document ingestion rejected the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentErrorKind {
    /// Not well-formed JSON.
    Syntax,
    /// Well-formed JSON that does not match the expected shape.
    Schema,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("pipeline is empty")]
    EmptyPipeline,
    #[error("invalid model: {0}")]
    InvalidModel(Diagnostics),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("unfolding needs {needed} nodes, budget is {budget}")]
    NodeBudgetExceeded { budget: usize, needed: usize },
    #[error("role graph is not tree-like: `{0}` has more than one senior role")]
    NotTreeLike(String),
    #[error("role graph is not a leaf hierarchy: `{0}` holds permissions and has juniors that hold permissions")]
    NotLeaf(String),
    #[error("keys are not unique: object `{0}` has more than one parent")]
    NotUnique(String),
    #[error("no permission is assigned to any role")]
    EmptyPermissionSet,
    #[error("identifier `{0}` is already used by another object")]
    IdCollision(String),
    #[error("`{parent}` -> `{child}` is not an arc of the hierarchy")]
    NotAnArc { parent: String, child: String },
    #[error("label does not belong to this lattice: {0}")]
    ForeignLabel(String),
    #[error("conversion check failed: {0}")]
    Verification(String),
    #[error("{kind:?} error at line {line}, column {column}: {message}")]
    Document {
        kind: DocumentErrorKind,
        line: usize,
        column: usize,
        message: String,
    },
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        use serde_json::error::Category;
        let kind = match err.classify() {
            Category::Syntax | Category::Eof | Category::Io => DocumentErrorKind::Syntax,
            Category::Data => DocumentErrorKind::Schema,
        };
        Error::Document {
            kind,
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
