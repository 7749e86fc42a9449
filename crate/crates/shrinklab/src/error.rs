use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("paths live on different grids")]
    GridMismatch,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("horizon {horizon} too short: local time never exceeds {level}; use a longer horizon")]
    HorizonTooShort { horizon: f64, level: f64 },

    #[error("drift is not finite for parameter {theta} at t = {t} (outside the family's kill rule)")]
    NonFiniteDrift { theta: f64, t: f64 },

    #[error("mixture density is zero at t = {t}; posterior undefined")]
    ZeroMixture { t: f64 },

    #[error("posterior mean drift is undefined at t = 0 for a prior without first moment")]
    UndefinedAtZero,

    #[error("not a supermartingale at node {node}: conditional mean {mean} exceeds value {value}")]
    NotSupermartingale { node: usize, mean: f64, value: f64 },

    #[error("need at least {needed} paths, got {got}")]
    TooFewPaths { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
