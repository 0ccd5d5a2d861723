use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("pairwise distance needs at least two antennas, layout has {0}")]
    UndefinedDistance(usize),

    #[error("singular channel: terminal coincides with antenna {antenna}")]
    SingularChannel { antenna: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("non-finite raw action component at index {0}")]
    NonFiniteAction(usize),

    #[error("raw action has length {got}, expected {expected}")]
    ActionLength { expected: usize, got: usize },

    #[error("episode is done; call reset before stepping again")]
    EpisodeDone,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged at episode {episode}: parameter `{param}` is non-finite")]
    Diverged { episode: usize, param: String },

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("checkpoint integrity check failed: {0}")]
    CheckpointIntegrity(String),

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("refusing to compare runs from different scenarios ({0} vs {1})")]
    ScenarioMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
