use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown nonlinearity `{0}`")]
    UnknownNonlinearity(String),

    #[error("field is not monotone along axis {axis}: {violation_fraction:.4} of checked points violate it")]
    NotMonotone {
        axis: usize,
        violation_fraction: f64,
    },

    #[error("gradient too small on the core to define a direction")]
    UndefinedDirection,

    #[error(
        "linear solve stopped after {iterations} iterations at relative residual {residual:e}"
    )]
    LinearSolve {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed field dump: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
