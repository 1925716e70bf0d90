use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid covariance matrix: {0}")]
    InvalidCovariance(String),

    #[error("invalid identifying family: {0}")]
    InvalidFamily(String),

    #[error("matrix is not square: {rows} row slots vs {cols} column slots")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix dimension {dim} exceeds the expansion cap {cap}; use fingerprints instead")]
    ExpansionCap { dim: usize, cap: usize },

    #[error("division by the zero polynomial")]
    DivisionByZero,

    #[error("polynomial is not V-homogeneous: terms `{first}` and `{second}` disagree")]
    NotHomogeneous { first: String, second: String },

    #[error("identification undefined at sigma: A-matrix of node `{node}` is singular")]
    IdentificationUndefined { node: String },

    #[error("matrix I - Lambda is singular")]
    SingularSystem,

    #[error("constraint determinant is identically zero")]
    Degenerate,

    #[error("node `{node}` has no parents; its A-determinant is the constant 1")]
    TrivialFactor { node: String },

    #[error("constraint is not a tree")]
    NotATree,

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("invalid transformation: {0}")]
    InvalidTransformation(String),

    #[error("fingerprints were taken with different primes or seeds")]
    FingerprintMismatch,

    #[error("covariance matrix has no entry for `{0}`")]
    MissingVariable(String),

    #[error("expansion of `{node}` revisits a node not justified by the identification order")]
    CycleInIdentification { node: String },

    #[error("could not draw parameters with invertible I - Lambda after {0} attempts")]
    ResampleExhausted(usize),

    #[error("no generator found: {0}")]
    Interpolation(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
