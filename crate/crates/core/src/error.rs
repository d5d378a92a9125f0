use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point ({0}, {1}) lies inside an obstacle")]
    InsideObstacle(f64, f64),
    #[error("point ({0}, {1}) is outside the computational domain")]
    OutsideDomain(f64, f64),
    #[error("ray exceeded {0} reflections (degenerate corner trap)")]
    TooManyBounces(usize),
    #[error("graph has {n} nodes, enumeration limit is {limit}")]
    GraphTooLarge { n: usize, limit: usize },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mesh generation failed: {0}")]
    Mesh(String),
    #[error("quadrature of degree {0} unavailable")]
    Quadrature(usize),
    #[error("factorization failed at k = {k}: {reason} (k may be close to a resonance)")]
    Singular { k: f64, reason: String },
    #[error("solve residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    Residual { residual: f64, tol: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
