use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fractional order s = {0} must lie strictly between 0 and 1")]
    InvalidOrder(f64),

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("evaluation node {index} is within {needed} nodes of the window edge and no tail model was supplied")]
    TooCloseToEdge { index: usize, needed: usize },

    #[error("non-finite sample at node {0}")]
    NonFiniteSample(usize),

    #[error("direction is not a unit vector (|z| = {0})")]
    NonUnitDirection(f64),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("no interval contains the base point")]
    NoComponent,

    #[error("point ({0}, {1}) is not inside the domain")]
    OutsideDomain(f64, f64),

    #[error("segment problem: {0}")]
    InvalidSegment(String),

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least two points to build a hull, got {0}")]
    TooFewPoints(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
