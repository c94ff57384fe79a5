use thiserror::Error;

/// Errors raised by the numerical routines and the CLI.
#[derive(Debug, Error)]
pub enum CknError {
    #[error("inadmissible parameters: {0}")]
    InadmissibleParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("discretization mismatch: {0}")]
    DiscretizationMismatch(String),

    #[error("operator in sector l={sector} is near-singular at (p={p}, n={n}): smallest |eigenvalue| {min_eig:.3e}")]
    SingularOperator {
        sector: usize,
        p: f64,
        n: usize,
        min_eig: f64,
    },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("indefinite Hessian in sector l={sector}: {detail}")]
    IndefiniteHessian { sector: usize, detail: String },

    #[error("Gamma pole at argument {0}")]
    GammaPole(f64),

    #[error("no local minimum: {0}")]
    NoLocalMinimum(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CknError>;
