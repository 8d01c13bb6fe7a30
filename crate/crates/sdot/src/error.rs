use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cost gradient singular at y = x for exponent p < 2")]
    SingularGradient,
    #[error("zero-weight atom present; restrict to strictly positive atoms first")]
    ZeroWeightAtom,
    #[error("solver did not converge: gradient sup-norm {grad_norm} after {iterations} iterations")]
    NonConvergence { grad_norm: f64, iterations: usize },
    #[error("finite-difference step too small: no sample point changed cell, increase the step")]
    DegenerateStep,
    #[error("Hessian numerically singular on the mean-zero subspace (smallest nonzero eigenvalue {0:.3e}); strict concavity of the dual fails, the optimum may not be unique")]
    SingularHessian(f64),
    #[error("{excluded} of {total} bootstrap replicates failed to converge (cap is 1%); solver unstable on this instance")]
    BootstrapInstability { excluded: usize, total: usize },
    #[error("bootstrap refused: the dual optimum is not unique (multistart found {0} distinct optima) and bootstrap intervals would be inconsistent")]
    BootstrapNonUnique(usize),
    #[error("unsupported distribution spec: {0}")]
    UnsupportedSpec(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
