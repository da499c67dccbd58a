use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("site {0:?} is not in the interior set")]
    NotInterior(Vec<i64>),
    #[error("hierarchy has no levels: N = {n} must exceed {threshold:.3}")]
    NoLevels { n: i64, threshold: f64 },
    #[error("no positive solution: 2hχ = {target:.6} must stay below {threshold:.6}")]
    NoSolution { target: f64, threshold: f64 },
    #[error("region too large ({sites} sites, limit {limit}); reduce N")]
    TooLarge { sites: usize, limit: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("requested accuracy {requested:.1e} not reached; best achieved {achieved:.1e}")]
    Accuracy { requested: f64, achieved: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
