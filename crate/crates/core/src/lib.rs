//! Online allocation of impressions between guaranteed contracts and a spot exchange.

pub mod dist;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod instances;
pub mod matching;
pub mod num;
pub mod oracle;
pub mod policy;
pub mod ratio;

pub use dist::{Normalized, RewardDistribution};
pub use engine::{AllocationState, Decision, RunReport, Server, Target};
pub use error::{Error, Result};
pub use instances::{gen_complete_bipartite, gen_upper_triangular, supply_factor, Group, Instance};
pub use num::Scalar;
pub use policy::{Grid, ObjectiveParams, ThresholdPolicy};

pub type RewardDistributionF64 = RewardDistribution<f64>;
pub type RewardDistributionF32 = RewardDistribution<f32>;
pub type ThresholdPolicyF64 = ThresholdPolicy<f64>;
pub type ThresholdPolicyF32 = ThresholdPolicy<f32>;
