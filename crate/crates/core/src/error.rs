use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size limit exceeded: {what} needs {needed} entries, budget is {budget}")]
    SizeLimit {
        what: String,
        needed: usize,
        budget: usize,
    },

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is singular to working precision (min eigenvalue {0:e})")]
    Singular(f64),

    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("polynomial is not homogeneous: found degrees {0} and {1}")]
    Inhomogeneous(usize, usize),

    #[error("generator x{index} out of range (n = {n}, valid indices 0..={n})")]
    GeneratorRange { index: usize, n: usize },

    #[error("degree {requested} exceeds the maximum degree {max}")]
    DegreeRange { requested: usize, max: usize },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("invalid system data: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
