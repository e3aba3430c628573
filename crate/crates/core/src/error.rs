use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(u32, u32),
    #[error("index {0} outside the horizon of the sequence")]
    OutOfHorizon(String),
    #[error("radius {0} exceeds the cap 1/2")]
    RadiusCap(f64),
    #[error("infeasible schedule: {0}")]
    Infeasible(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("query is not a construction interval: {0}")]
    NotAligned(String),
    #[error("zero-mass ball at radius 2^-{0}")]
    ZeroMass(f64),
    #[error("conditioning failed after {0} attempts")]
    Conditioning(u32),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
