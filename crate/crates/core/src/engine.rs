//! Online serving: the threshold algorithm over a stream of queries.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::num::Scalar;
use crate::policy::ThresholdPolicy;

/// Delivery counters and exchange revenue of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState<T> {
    demands: Vec<u64>,
    delivered: Vec<u64>,
    revenue: T,
    queries: u64,
}

impl<T: Scalar> AllocationState<T> {
    pub fn new(demands: Vec<u64>) -> Result<Self> {
        if demands.iter().any(|&n| n == 0) {
            return Err(Error::InvalidInstance("demands must be positive".into()));
        }
        let m = demands.len();
        Ok(Self { demands, delivered: vec![0; m], revenue: T::zero(), queries: 0 })
    }

    pub fn demands(&self) -> &[u64] {
        &self.demands
    }

    pub fn delivered(&self) -> &[u64] {
        &self.delivered
    }

    pub fn exchange_revenue(&self) -> T {
        self.revenue
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    /// Exact comparison of `k_a / n_a` with `k_b / n_b`.
    pub fn cmp_sr(&self, a: usize, b: usize) -> Ordering {
        let lhs = self.delivered[a] as u128 * self.demands[b] as u128;
        let rhs = self.delivered[b] as u128 * self.demands[a] as u128;
        lhs.cmp(&rhs)
    }

    pub fn is_satisfied(&self, a: usize) -> bool {
        self.delivered[a] >= self.demands[a]
    }

    /// Eligible advertiser with the lowest satisfaction ratio; ties go to the smaller id.
    pub fn min_sr(&self, eligible: &[usize]) -> Option<usize> {
        eligible
            .iter()
            .copied()
            .min_by(|&a, &b| self.cmp_sr(a, b).then(a.cmp(&b)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Contract(usize),
    /// The exchange, identified when the caller distinguishes several.
    Exchange(Option<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision<T> {
    pub target: Target,
    /// Reserve of the min-SR advertiser's segment; absent when no contract competed.
    pub reserve: Option<T>,
    pub min_sr_advertiser: Option<usize>,
}

/// One exchange's outcome against the broadcast reserve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeBid {
    pub exchange: usize,
    pub clears_reserve: bool,
    pub is_highest: bool,
}

/// Final accounting of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<T> {
    pub reward: T,
    pub exchange_revenue: T,
    pub penalty_paid: T,
    pub offset: T,
    pub delivered: Vec<u64>,
    pub demands: Vec<u64>,
    pub queries: u64,
    pub seed: Option<u64>,
}

impl<T: Scalar> RunReport<T> {
    pub fn fill_rate(&self) -> f64 {
        let n: u64 = self.demands.iter().sum();
        if n == 0 {
            return 1.0;
        }
        self.delivered.iter().sum::<u64>() as f64 / n as f64
    }

    pub fn total_demand(&self) -> u64 {
        self.demands.iter().sum()
    }

    /// Reward per unit of demand.
    pub fn normalized_reward(&self) -> T {
        self.reward / T::from_count(self.total_demand())
    }
}

/// A threshold policy bound to an allocation state.
#[derive(Debug, Clone)]
pub struct Server<T> {
    policy: ThresholdPolicy<T>,
    state: AllocationState<T>,
    cutoffs: Vec<Vec<u64>>,
}

impl<T: Scalar> Server<T> {
    pub fn new(policy: ThresholdPolicy<T>, demands: Vec<u64>) -> Result<Self> {
        let state = AllocationState::new(demands)?;
        let cutoffs = state.demands.iter().map(|&n| policy.cutoffs(n)).collect();
        Ok(Self { policy, state, cutoffs })
    }

    pub fn policy(&self) -> &ThresholdPolicy<T> {
        &self.policy
    }

    pub fn state(&self) -> &AllocationState<T> {
        &self.state
    }

    fn segment(&self, a: usize) -> usize {
        let k = self.state.delivered[a];
        self.cutoffs[a].partition_point(|&c| c <= k)
    }

    /// Min-SR eligible advertiser and its reserve, or `None` when all are satisfied.
    fn contender(&self, eligible: &[usize]) -> Option<(usize, T)> {
        let a = self.state.min_sr(eligible)?;
        if self.state.is_satisfied(a) {
            return None;
        }
        Some((a, self.policy.reserve(self.segment(a))))
    }

    /// Routes one query whose highest exchange bid is `reward`. Ties favor the contract.
    pub fn serve_query(&mut self, eligible: &[usize], reward: T) -> Decision<T> {
        debug_assert!(eligible.iter().all(|&a| a < self.state.demands.len()));
        self.state.queries += 1;
        let Some((a, reserve)) = self.contender(eligible) else {
            self.state.revenue = self.state.revenue + reward;
            return Decision { target: Target::Exchange(None), reserve: None, min_sr_advertiser: None };
        };
        let target = if reward <= reserve {
            self.state.delivered[a] += 1;
            Target::Contract(a)
        } else {
            self.state.revenue = self.state.revenue + reward;
            Target::Exchange(None)
        };
        Decision { target, reserve: Some(reserve), min_sr_advertiser: Some(a) }
    }

    /// Routes one query using only each exchange's comparison against the reserve.
    ///
    /// Revenue is not credited since bid values are unknown. A bid set is malformed
    /// if more than one exchange is flagged highest, or if an exchange clears the
    /// reserve while the flagged highest does not (or none is flagged).
    pub fn serve_query_multi_exchange(&mut self, eligible: &[usize], bids: &[ExchangeBid]) -> Result<Decision<T>> {
        let mut highest = bids.iter().filter(|b| b.is_highest);
        let top = highest.next();
        if highest.next().is_some() {
            return Err(Error::MalformedBidSet("several exchanges flagged highest".into()));
        }
        let any_clears = bids.iter().any(|b| b.clears_reserve);
        if any_clears && !top.is_some_and(|b| b.clears_reserve) {
            return Err(Error::MalformedBidSet(
                "an exchange clears the reserve but the highest bid does not".into(),
            ));
        }
        self.state.queries += 1;
        let Some((a, reserve)) = self.contender(eligible) else {
            let target = Target::Exchange(top.map(|b| b.exchange));
            return Ok(Decision { target, reserve: None, min_sr_advertiser: None });
        };
        let target = match top {
            Some(b) if b.clears_reserve => Target::Exchange(Some(b.exchange)),
            _ => {
                self.state.delivered[a] += 1;
                Target::Contract(a)
            }
        };
        Ok(Decision { target, reserve: Some(reserve), min_sr_advertiser: Some(a) })
    }

    /// Reward `= revenue - c * shortfall + offset`.
    pub fn finalize(&self, penalty: T, offset: T, seed: Option<u64>) -> RunReport<T> {
        let shortfall: u64 = self
            .state
            .demands
            .iter()
            .zip(&self.state.delivered)
            .map(|(&n, &k)| n - k)
            .sum();
        let penalty_paid = penalty * T::from_count(shortfall);
        RunReport {
            reward: self.state.revenue - penalty_paid + offset,
            exchange_revenue: self.state.revenue,
            penalty_paid,
            offset,
            delivered: self.state.delivered.clone(),
            demands: self.state.demands.clone(),
            queries: self.state.queries,
            seed,
        }
    }
}

/// Runs the policy over an instance with i.i.d. rewards drawn from the policy's
/// distribution, seeded by `seed`.
pub fn simulate<T: Scalar>(
    instance: &Instance,
    policy: &ThresholdPolicy<T>,
    penalty: T,
    seed: u64,
) -> Result<RunReport<T>> {
    let mut server = Server::new(policy.clone(), instance.demands().to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = policy.dist();
    for eligible in instance.queries() {
        let reward = dist.sample(&mut rng);
        server.serve_query(eligible, reward);
    }
    Ok(server.finalize(penalty, T::zero(), Some(seed)))
}
