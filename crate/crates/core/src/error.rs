use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid price bounds: low anchor {low} must be below high anchor {high}")]
    InvalidBounds { low: f64, high: f64 },
    #[error("invalid grid size {0}: need at least 2 prices")]
    InvalidSize(usize),
    #[error("episode finished: timestep {t} exceeds horizon {horizon}")]
    EpisodeFinished { t: usize, horizon: usize },
    #[error("action index {action} out of range for a grid of {grid_len} prices")]
    InvalidAction { action: usize, grid_len: usize },
    #[error("empty price search range [{lo}, {hi}]")]
    EmptySearchRange { lo: f64, hi: f64 },
    #[error("solver did not converge after {iterations} iterations on every restart (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("discounted equilibria are not implemented")]
    NotImplemented,
    #[error("degenerate benchmarks: monopoly and Nash profit coincide at agent {agent}, timestep {t}")]
    DegenerateBenchmarks { agent: usize, t: usize },
    #[error("invalid gamma {0}: must lie in (0, 1]")]
    InvalidGamma(f64),
    #[error("insufficient history: need {needed} episodes, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("degenerate reward bounds: max reward {max} does not exceed min reward {min}")]
    DegenerateBounds { min: f64, max: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("incomplete episode: rollout does not end on a terminal step")]
    IncompleteEpisode,
    #[error("minibatch too small: rollout of {rollout} steps cannot be split into {minibatches} minibatches")]
    MinibatchTooSmall { rollout: usize, minibatches: usize },
    #[error("mismatched episode grids across logs")]
    MismatchedGrids,
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
