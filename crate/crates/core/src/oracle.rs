//! Ground-truth computations used to check the policy and the engine.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::RewardDistribution;
use crate::engine::Server;
use crate::error::{Error, Result};
use crate::flow::MinCostFlow;
use crate::instances::Instance;
use crate::num::Scalar;
use crate::policy::{grid_boundaries, segment_weight, slice_segments, AdversaryProfile, ThresholdPolicy};

pub const OFFLINE_QUERY_LIMIT: u64 = 100_000;
pub const ONLINE_DEMAND_LIMIT: u64 = 8;
pub const ONLINE_QUERY_LIMIT: u64 = 12;
pub const ONLINE_SUPPORT_LIMIT: usize = 3;

/// An instance with the exchange reward of every query fixed, in arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedInstance {
    pub instance: Instance,
    pub rewards: Vec<f64>,
}

impl RealizedInstance {
    pub fn new(instance: Instance, rewards: Vec<f64>) -> Result<Self> {
        if rewards.len() as u64 != instance.total_queries() {
            return Err(Error::InvalidInstance(format!(
                "{} rewards for {} queries",
                rewards.len(),
                instance.total_queries()
            )));
        }
        Ok(Self { instance, rewards })
    }

    pub fn sample(instance: Instance, dist: &RewardDistribution<f64>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rewards = (0..instance.total_queries()).map(|_| dist.sample(&mut rng)).collect();
        Self { instance, rewards }
    }
}

/// `(f - 1) N` times the mean of the top `1 - 1/f` of the distribution.
pub fn offline_opt_formula<T: Scalar>(dist: &RewardDistribution<T>, supply: T, total_demand: T) -> T {
    if supply <= T::one() {
        return T::zero();
    }
    (supply - T::one()) * total_demand * dist.top_quantile_mean(T::one() - T::one() / supply)
}

/// Sum of the `Q - N` largest rewards: no allocation does better.
pub fn offline_opt_upper_bound(realized: &RealizedInstance) -> f64 {
    let mut r = realized.rewards.clone();
    r.sort_by(|a, b| b.total_cmp(a));
    let sold = r.len().saturating_sub(realized.instance.total_demand() as usize);
    let n = realized.instance.total_demand() as usize;
    if r.len() < n {
        return f64::NAN;
    }
    r[..sold].iter().sum()
}

/// Exact offline optimum of exchange revenue minus penalty.
///
/// Delivering query `q` to a contract gains `c - r_q` over selling it, so the optimum
/// is `sum r - c N` plus a maximum-weight b-matching, solved as min-cost flow with
/// queries aggregated by (group, reward).
pub fn offline_opt_exact(realized: &RealizedInstance, penalty: f64) -> Result<f64> {
    offline_opt_flow(realized, penalty, true)
}

/// [`offline_opt_exact`] with one flow node per query.
pub fn offline_opt_exact_per_query(realized: &RealizedInstance, penalty: f64) -> Result<f64> {
    offline_opt_flow(realized, penalty, false)
}

fn offline_opt_flow(realized: &RealizedInstance, penalty: f64, aggregate: bool) -> Result<f64> {
    let inst = &realized.instance;
    if inst.total_queries() > OFFLINE_QUERY_LIMIT {
        return Err(Error::SizeLimit(format!(
            "{} queries exceed the offline limit of {OFFLINE_QUERY_LIMIT}",
            inst.total_queries()
        )));
    }
    // (group, reward bits) -> (count, gain)
    let mut classes: Vec<(usize, u64, f64)> = Vec::new();
    let mut index: HashMap<(usize, u64), usize> = HashMap::new();
    let mut pos = 0usize;
    for (g, grp) in inst.groups().iter().enumerate() {
        for &r in &realized.rewards[pos..pos + grp.count as usize] {
            let gain = penalty - r;
            if aggregate {
                let slot = *index.entry((g, r.to_bits())).or_insert_with(|| {
                    classes.push((g, 0, gain));
                    classes.len() - 1
                });
                classes[slot].1 += 1;
            } else {
                classes.push((g, 1, gain));
            }
        }
        pos += grp.count as usize;
    }
    let m = inst.advertisers();
    let k = classes.len();
    let (source, sink) = (0, 1 + k + m);
    let mut net = MinCostFlow::new(sink + 1);
    for (i, &(g, count, gain)) in classes.iter().enumerate() {
        net.add_edge(source, 1 + i, count as i64, -gain);
        for &a in &inst.groups()[g].eligible {
            net.add_edge(1 + i, 1 + k + a, count as i64, 0.0);
        }
    }
    for (a, &n) in inst.demands().iter().enumerate() {
        net.add_edge(1 + k + a, sink, n as i64, 0.0);
    }
    let out = net.run_while_profitable(source, sink);
    let total: f64 = realized.rewards.iter().sum();
    Ok(total - penalty * inst.total_demand() as f64 - out.cost)
}

/// Expected reward of the best online policy, by backward induction over
/// (query index, remaining demand).
pub fn online_opt_bruteforce(
    instance: &Instance,
    dist: &RewardDistribution<f64>,
    penalty: f64,
) -> Result<f64> {
    if instance.total_demand() > ONLINE_DEMAND_LIMIT
        || instance.total_queries() > ONLINE_QUERY_LIMIT
        || dist.len() > ONLINE_SUPPORT_LIMIT
    {
        return Err(Error::SizeLimit(format!(
            "online brute force needs N <= {ONLINE_DEMAND_LIMIT}, queries <= {ONLINE_QUERY_LIMIT}, d <= {ONLINE_SUPPORT_LIMIT}"
        )));
    }
    let queries: Vec<&[usize]> = instance.queries().collect();
    let m = instance.advertisers();
    let symmetric = instance.demands().windows(2).all(|w| w[0] == w[1])
        && queries.iter().all(|el| el.len() == m);
    let mut solver = Backward {
        queries,
        dist,
        penalty,
        symmetric,
        memo: HashMap::new(),
    };
    Ok(solver.value(0, instance.demands().to_vec()))
}

struct Backward<'a> {
    queries: Vec<&'a [usize]>,
    dist: &'a RewardDistribution<f64>,
    penalty: f64,
    symmetric: bool,
    memo: HashMap<(usize, Vec<u64>), f64>,
}

impl Backward<'_> {
    fn value(&mut self, i: usize, mut remaining: Vec<u64>) -> f64 {
        if i == self.queries.len() {
            return -self.penalty * remaining.iter().sum::<u64>() as f64;
        }
        if self.symmetric {
            remaining.sort_unstable();
        }
        if let Some(&v) = self.memo.get(&(i, remaining.clone())) {
            return v;
        }
        let skip = self.value(i + 1, remaining.clone());
        let mut serve = f64::NEG_INFINITY;
        for &a in self.queries[i] {
            if remaining[a] > 0 {
                let mut next = remaining.clone();
                next[a] -= 1;
                serve = serve.max(self.value(i + 1, next));
            }
        }
        let v = self
            .dist
            .masses()
            .zip(self.dist.support())
            .map(|(p, &r)| p * (r + skip).max(serve))
            .sum();
        self.memo.insert((i, remaining), v);
        v
    }
}

/// Reward of the threshold policy on one realization.
pub fn threshold_reward(realized: &RealizedInstance, policy: &ThresholdPolicy<f64>, penalty: f64) -> Result<f64> {
    let mut server = Server::new(policy.clone(), realized.instance.demands().to_vec())?;
    for (eligible, &r) in realized.instance.queries().zip(&realized.rewards) {
        server.serve_query(eligible, r);
    }
    Ok(server.finalize(penalty, 0.0, None).reward)
}

/// Exact expectation of `eval` over all `d^Q` reward realizations.
pub fn expect_over_realizations<F>(
    instance: &Instance,
    dist: &RewardDistribution<f64>,
    mut eval: F,
) -> Result<f64>
where
    F: FnMut(&RealizedInstance) -> Result<f64>,
{
    let q = instance.total_queries() as usize;
    let d = dist.len();
    if (d as f64).powi(q as i32) > 1e7 {
        return Err(Error::SizeLimit(format!("{d}^{q} realizations")));
    }
    let masses: Vec<f64> = dist.masses().collect();
    let mut digits = vec![0usize; q];
    let mut realized = RealizedInstance::new(instance.clone(), vec![dist.support()[0]; q])?;
    let mut total = 0.0;
    loop {
        let p: f64 = digits.iter().map(|&i| masses[i]).product();
        if p > 0.0 {
            for (slot, &i) in realized.rewards.iter_mut().zip(&digits) {
                *slot = dist.support()[i];
            }
            total += p * eval(&realized)?;
        }
        let mut pos = 0;
        loop {
            if pos == q {
                return Ok(total);
            }
            digits[pos] += 1;
            if digits[pos] < d {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// Adversary profile with every constraint tight, by forward substitution:
/// `beta_{j+1} = beta_1 - (1 / (f t)) sum_{l <= j} w_l beta_l`.
pub fn adversary_lp_tight<T: Scalar>(
    policy: &ThresholdPolicy<T>,
    supply: T,
    total_demand: T,
    t: usize,
) -> AdversaryProfile<T> {
    assert!(t >= 1, "discretization must be positive");
    let weights = slice_weights(policy, t);
    let tf = T::from_count(t as u64) * supply;
    let beta1 = total_demand / T::from_count(t as u64);
    let mut beta = Vec::with_capacity(t);
    beta.push(beta1);
    let mut acc = T::zero();
    for j in 0..t - 1 {
        acc = acc + weights[j] * beta[j];
        beta.push(beta1 - acc / tf);
    }
    AdversaryProfile { t, beta }
}

fn slice_weights<T: Scalar>(policy: &ThresholdPolicy<T>, t: usize) -> Vec<T> {
    let bounds = grid_boundaries(policy.thresholds(), t);
    slice_segments(&bounds, t)
        .into_iter()
        .map(|k| segment_weight(policy.dist(), k))
        .collect()
}

/// Slack of each adversary constraint `sum_{l<=j} w_l beta_l - f t (beta_1 - beta_{j+1})`
/// for `j = 1..t-1`; feasibility means nonnegative, tightness means zero.
pub fn lp_slack<T: Scalar>(policy: &ThresholdPolicy<T>, profile: &AdversaryProfile<T>, supply: T) -> Vec<T> {
    let t = profile.t;
    let weights = slice_weights(policy, t);
    let tf = T::from_count(t as u64) * supply;
    let b = &profile.beta;
    let mut acc = T::zero();
    (0..t - 1)
        .map(|j| {
            acc = acc + weights[j] * b[j];
            acc - tf * (b[0] - b[j + 1])
        })
        .collect()
}
