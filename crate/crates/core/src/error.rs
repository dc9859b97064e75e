use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate pair: points coincide (distance {0:e})")]
    DegeneratePair(f64),

    #[error("zero reference vector")]
    ZeroReference,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid gamma {0}: adversarial degree cap must satisfy 0 <= gamma < 1/2")]
    InvalidGamma(f64),

    #[error("well-distributedness set S is empty for pair ({0}, {1})")]
    EmptySet(usize, usize),

    #[error("constraint Gram matrix is rank deficient (condition number {0:e})")]
    RankDeficient(f64),

    #[error("observation graph is disconnected; the minimizer is not unique")]
    DisconnectedGraph,

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("zero-norm point stack")]
    ZeroNorm,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
