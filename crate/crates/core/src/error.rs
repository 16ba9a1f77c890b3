use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed distribution: {0}")]
    MalformedDistribution(String),
    #[error("largest reward {max_reward} exceeds penalty {penalty}; pre-filter such queries")]
    RewardExceedsPenalty { max_reward: f64, penalty: f64 },
    #[error("index {index} outside 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid threshold policy: {0}")]
    InvalidPolicy(String),
    #[error("decay weight {weight} exceeds t*f = {limit}; use a finer grid")]
    InfeasibleDecay { weight: f64, limit: f64 },
    #[error("exhaustive grid search supports at most 4 thresholds, got {0}")]
    TooManyThresholds(usize),
    #[error("malformed bid set: {0}")]
    MalformedBidSet(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("group size f*n = {0} is not an integer")]
    NonIntegralGroupSize(f64),
    #[error("instance too large for exact oracle: {0}")]
    SizeLimit(String),
    #[error("competitive ratio undefined: optimum is {opt} (algorithm bound {alg_bound})")]
    UndefinedRatio { alg_bound: f64, opt: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
