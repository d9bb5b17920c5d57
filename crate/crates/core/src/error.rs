use thiserror::Error;

use crate::chain::CaseLabel;

/// Errors produced by the graphgame library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node index {0} out of range (graph has {1} nodes)")]
    NodeOutOfRange(usize, usize),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("self-loop on `{0}` (self-adjacency is implicit)")]
    SelfLoop(String),
    #[error("malformed tuple node `{label}`: {reason}")]
    MalformedTuple { label: String, reason: String },
    #[error("graph nodes are not the full Cartesian product of the axes: {0}")]
    NotCartesian(String),
    #[error("graph is not decomposable over the given coalition axes")]
    NotDecomposable,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid coalition structure: {0}")]
    InvalidCoalitions(String),
    #[error("non-finite payoff for coalition {coalition} at profile index {index}")]
    NonFinitePayoff { coalition: usize, index: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("graph is not connected")]
    NotConnected,
    #[error("target mass must be strictly positive on every node (node `{0}`)")]
    NonPositiveTarget(String),
    #[error("low-mass set A_k is empty for k = {0}")]
    EmptyLowSet(u64),
    #[error("matrix is not row-stochastic: {0}")]
    NonStochastic(String),
    #[error("time {time} precedes the first schedule time {first}")]
    BeforeSchedule { time: u64, first: u64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("wrong case for this construction: expected {expected:?}, found {found:?}")]
    WrongCase { expected: CaseLabel, found: CaseLabel },
    #[error("target support is split across connected components; no graph-consistent chain can reach it")]
    SupportSplit,
    #[error("schedule gap condition violated at level {level}: gap {gap} < {required}")]
    GapViolation { level: u64, gap: u64, required: f64 },
    #[error("invalid initial distribution: {0}")]
    InvalidInit(String),
    #[error(
        "consistency violation at stage {stage}: coalition {coalition} moved from `{from}` to non-adjacent `{to}`"
    )]
    ConsistencyViolation { stage: u64, coalition: usize, from: String, to: String },
    #[error("trace has {len} states but {needed} are required")]
    TraceTooShort { len: usize, needed: usize },
    #[error("profile is not a pure C-equilibrium")]
    NotPureEquilibrium,
    #[error("mixed equilibrium solver did not converge after {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
