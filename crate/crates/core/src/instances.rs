//! Contract instances, their generators, and the supply factor.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::MaxFlow;

/// A block of consecutive queries sharing one eligibility set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub count: u64,
    pub eligible: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    demands: Vec<u64>,
    groups: Vec<Group>,
    supply_factor: Option<f64>,
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    demands: Vec<u64>,
    groups: Vec<Group>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    supply_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        let mut inst = Instance::new(raw.demands, raw.groups, raw.supply_factor)?;
        inst.seed = raw.seed;
        Ok(inst)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            demands: inst.demands,
            groups: inst.groups,
            supply_factor: inst.supply_factor,
            seed: inst.seed,
        }
    }
}

impl Instance {
    /// Validates demands, eligibility lists (sorted on the way in) and, when a supply
    /// factor is declared, that the query count equals `f N` exactly.
    pub fn new(demands: Vec<u64>, mut groups: Vec<Group>, supply_factor: Option<f64>) -> Result<Self> {
        let m = demands.len();
        if demands.iter().any(|&n| n == 0) {
            return Err(Error::InvalidInstance("demands must be positive".into()));
        }
        for g in &mut groups {
            g.eligible.sort_unstable();
            g.eligible.dedup();
            if let Some(&bad) = g.eligible.iter().find(|&&a| a >= m) {
                return Err(Error::InvalidInstance(format!(
                    "eligible advertiser {bad} out of range for {m} advertisers"
                )));
            }
        }
        let inst = Self { demands, groups, supply_factor, seed: None };
        if let Some(f) = supply_factor {
            if !(f >= 1.0) {
                return Err(Error::InvalidInstance(format!("supply factor {f} below 1")));
            }
            let expected = f * inst.total_demand() as f64;
            if (expected - expected.round()).abs() > 1e-9 || expected.round() as u64 != inst.total_queries() {
                return Err(Error::InvalidInstance(format!(
                    "{} queries but f N = {expected}",
                    inst.total_queries()
                )));
            }
        }
        Ok(inst)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn demands(&self) -> &[u64] {
        &self.demands
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn declared_supply_factor(&self) -> Option<f64> {
        self.supply_factor
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn advertisers(&self) -> usize {
        self.demands.len()
    }

    pub fn total_demand(&self) -> u64 {
        self.demands.iter().sum()
    }

    pub fn total_queries(&self) -> u64 {
        self.groups.iter().map(|g| g.count).sum()
    }

    /// Eligibility set of every query in arrival order.
    pub fn queries(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat(g.eligible.as_slice()).take(g.count as usize))
    }
}

fn group_size(n: u64, f: f64) -> Result<u64> {
    let size = f * n as f64;
    if !(f >= 1.0) || (size - size.round()).abs() > 1e-9 {
        return Err(Error::NonIntegralGroupSize(size));
    }
    Ok(size.round() as u64)
}

/// The adversarial instance: `m` advertisers of demand `n`, `m` groups of `f n` queries,
/// and group `i` eligible to advertisers `j` with `pi(j) >= i` for a seeded permutation.
pub fn gen_upper_triangular(m: usize, n: u64, f: f64, seed: u64) -> Result<Instance> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInstance("need m, n >= 1".into()));
    }
    let size = group_size(n, f)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // rank[j] = pi(j) - 1
    let mut rank: Vec<usize> = (0..m).collect();
    rank.shuffle(&mut rng);
    let groups = (0..m)
        .map(|i| Group {
            count: size,
            eligible: (0..m).filter(|&j| rank[j] >= i).collect(),
        })
        .collect();
    Ok(Instance::new(vec![n; m], groups, Some(f))?.with_seed(seed))
}

/// `m` advertisers of demand `n` and `f m n` queries all eligible to everyone, split
/// evenly over `groups` arrival blocks.
pub fn gen_complete_bipartite(m: usize, n: u64, f: f64, groups: usize) -> Result<Instance> {
    if m == 0 || n == 0 || groups == 0 {
        return Err(Error::InvalidInstance("need m, n, groups >= 1".into()));
    }
    let total = group_size(n * m as u64, f)?;
    let all: Vec<usize> = (0..m).collect();
    let per = total / groups as u64;
    let extra = total % groups as u64;
    let blocks = (0..groups as u64)
        .map(|g| Group { count: per + u64::from(g < extra), eligible: all.clone() })
        .filter(|g| g.count > 0)
        .collect();
    Instance::new(vec![n; m], blocks, Some(f))
}

fn deliverable_fraction_ok(inst: &Instance, f: f64) -> bool {
    let m = inst.advertisers();
    let k = inst.groups.len();
    let (source, sink) = (0, 1 + k + m);
    let mut g = MaxFlow::new(sink + 1);
    for (i, grp) in inst.groups.iter().enumerate() {
        g.add_edge(source, 1 + i, grp.count as f64);
        for &a in &grp.eligible {
            g.add_edge(1 + i, 1 + k + a, f64::INFINITY);
        }
    }
    for (a, &n) in inst.demands.iter().enumerate() {
        g.add_edge(1 + k + a, sink, f * n as f64);
    }
    let need = f * inst.total_demand() as f64;
    g.run(source, sink) >= need - 1e-9 * need.max(1.0)
}

/// Largest `f` such that a fractional allocation delivers `f n_a` to every advertiser.
///
/// Bisects on max-flow feasibility down to an interval of `1e-10`. The bound
/// `min_a (eligible queries of a) / n_a` is tried first and is often attained.
pub fn supply_factor(inst: &Instance) -> f64 {
    let mut reach = vec![0u64; inst.advertisers()];
    for g in &inst.groups {
        for &a in &g.eligible {
            reach[a] += g.count;
        }
    }
    let hi = reach
        .iter()
        .zip(&inst.demands)
        .map(|(&r, &n)| r as f64 / n as f64)
        .fold(f64::INFINITY, f64::min);
    if !(hi > 0.0) || !hi.is_finite() {
        return 0.0;
    }
    if deliverable_fraction_ok(inst, hi) {
        return hi;
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if deliverable_fraction_ok(inst, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn triangular_shape() {
        let inst = gen_upper_triangular(3, 2, 2.0, 9).unwrap();
        assert_eq!(inst.groups().len(), 3);
        assert!(inst.groups().iter().all(|g| g.count == 4));
        assert_eq!(inst.groups()[0].eligible.len(), 3);
        assert_eq!(inst.groups()[2].eligible.len(), 1);
        // nested eligibility
        for w in inst.groups().windows(2) {
            assert!(w[1].eligible.iter().all(|a| w[0].eligible.contains(a)));
        }
        let single = gen_upper_triangular(1, 5, 1.0, 0).unwrap();
        assert_eq!(single.groups(), &[Group { count: 5, eligible: vec![0] }]);
        assert!(matches!(gen_upper_triangular(3, 3, 1.5, 0), Err(Error::NonIntegralGroupSize(_))));
    }

    #[test]
    fn supply_factor_examples() {
        for f in [1.0, 1.5, 2.0, 3.0] {
            let tri = gen_upper_triangular(6, 4, f, 3).unwrap();
            assert!((supply_factor(&tri) - f).abs() < 1e-6);
            let full = gen_complete_bipartite(5, 4, f, 3).unwrap();
            assert!((supply_factor(&full) - f).abs() < 1e-6);
        }
        let stranded = Instance::new(vec![1, 1], vec![Group { count: 3, eligible: vec![0] }], None).unwrap();
        assert_eq!(supply_factor(&stranded), 0.0);
    }

    #[test]
    fn supply_factor_needs_bisection_when_shared() {
        // advertiser 1 alone could reach 1.5x its demand, but the shared pool caps both at 1x
        let inst = Instance::new(
            vec![2, 2],
            vec![
                Group { count: 3, eligible: vec![0, 1] },
                Group { count: 1, eligible: vec![0] },
            ],
            None,
        )
        .unwrap();
        assert!((supply_factor(&inst) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn validation_and_json() {
        assert!(Instance::new(vec![0], vec![], None).is_err());
        assert!(Instance::new(vec![1], vec![Group { count: 1, eligible: vec![1] }], None).is_err());
        assert!(Instance::new(vec![2], vec![Group { count: 3, eligible: vec![0] }], Some(2.0)).is_err());
        let inst = gen_upper_triangular(3, 2, 2.0, 4).unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        assert!(json.starts_with(r#"{"demands":[2,2,2],"groups":[{"count":4,"eligible":["#));
        let back: Instance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
        let bad = r#"{"demands":[1],"groups":[{"count":1,"eligible":[3]}]}"#;
        assert!(serde_json::from_str::<Instance>(bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn supply_factor_invariances(
            demands in prop::collection::vec(1u64..5, 1..5),
            groups in prop::collection::vec((1u64..6, prop::collection::vec(0usize..5, 1..4)), 1..5),
            seed in any::<u64>(),
        ) {
            let m = demands.len();
            let groups: Vec<Group> = groups
                .into_iter()
                .map(|(count, el)| Group { count, eligible: el.into_iter().map(|a| a % m).collect() })
                .collect();
            let inst = Instance::new(demands.clone(), groups.clone(), None).unwrap();
            let base = supply_factor(&inst);

            let mut perm: Vec<usize> = (0..m).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mut permuted_demands = vec![0; m];
            for a in 0..m {
                permuted_demands[perm[a]] = demands[a];
            }
            let permuted: Vec<Group> = groups
                .iter()
                .map(|g| Group { count: g.count, eligible: g.eligible.iter().map(|&a| perm[a]).collect() })
                .collect();
            let p = Instance::new(permuted_demands, permuted, None).unwrap();
            prop_assert!((supply_factor(&p) - base).abs() < 1e-6);

            // split advertiser 0 (doubled demand) into two halves with the same edges
            let mut split_demands: Vec<u64> = demands.iter().map(|n| 2 * n).collect();
            split_demands[0] = demands[0];
            split_demands.push(demands[0]);
            let split_groups: Vec<Group> = groups
                .iter()
                .map(|g| {
                    let mut el = g.eligible.clone();
                    if el.contains(&0) {
                        el.push(m);
                    }
                    Group { count: 2 * g.count, eligible: el }
                })
                .collect();
            let s = Instance::new(split_demands, split_groups, None).unwrap();
            prop_assert!((supply_factor(&s) - base).abs() < 1e-6);
        }
    }
}
