use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("mesh topology error: {0}")]
    MeshTopology(String),

    #[error("invalid agglomeration: {0}")]
    Agglomeration(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular local system on element {element}: {msg}")]
    SingularLocal { element: usize, msg: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("smoother setup failed: {0}")]
    Smoother(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
