use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure space: {0}")]
    InvalidSpace(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not a normal contraction: {0}")]
    NotNormal(String),
    #[error("not an increasing normal contraction: {0}")]
    NotIncreasing(String),
    #[error("invalid piecewise-linear data: {0}")]
    InvalidPiecewise(String),
    #[error("non-convex edge function: {0}")]
    NonConvexEdge(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("improper shift center: {0}")]
    ImproperCenter(String),
    #[error("energy is not homogeneous of degree {0}")]
    NotHomogeneous(f64),
    #[error("negative energy value {0}; functional is not convex")]
    NegativeEnergy(f64),
    #[error("solver cannot handle this instance: {0}")]
    UnsupportedInstance(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
