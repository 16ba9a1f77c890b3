//! Online vertex-weighted matching with surplus supply: Perturbed-Greedy with the
//! potential `psi(x) = 1 - exp(-(1 - x) / f)`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::Group;

/// Advertisers with weights and demands; each is served as `n_a` unit copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingInstance {
    weights: Vec<f64>,
    demands: Vec<u64>,
    groups: Vec<Group>,
    supply: u32,
}

impl MatchingInstance {
    pub fn new(weights: Vec<f64>, demands: Vec<u64>, groups: Vec<Group>, supply: u32) -> Result<Self> {
        if weights.len() != demands.len() {
            return Err(Error::InvalidInstance("one weight per advertiser".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || demands.contains(&0) {
            return Err(Error::InvalidInstance("weights and demands must be positive".into()));
        }
        if supply == 0 {
            return Err(Error::InvalidInstance("supply factor must be a positive integer".into()));
        }
        let m = weights.len();
        if groups.iter().flat_map(|g| &g.eligible).any(|&a| a >= m) {
            return Err(Error::InvalidInstance("eligible advertiser out of range".into()));
        }
        Ok(Self { weights, demands, groups, supply })
    }

    /// Triangular instance: group `i` of `f n` queries is eligible to advertisers with
    /// `pi(a) >= i`. Every advertiser is saturable offline.
    pub fn triangular<R: Rng + ?Sized>(weights: Vec<f64>, n: u64, supply: u32, rng: &mut R) -> Result<Self> {
        let m = weights.len();
        let mut rank: Vec<usize> = (0..m).collect();
        rank.shuffle(rng);
        let groups = (0..m)
            .map(|i| Group {
                count: supply as u64 * n,
                eligible: (0..m).filter(|&a| rank[a] >= i).collect(),
            })
            .collect();
        Self::new(weights, vec![n; m], groups, supply)
    }

    pub fn supply(&self) -> u32 {
        self.supply
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_a c_a n_a`, the optimum on instances where every advertiser saturates.
    pub fn total_weighted_demand(&self) -> f64 {
        self.weights.iter().zip(&self.demands).map(|(w, &n)| w * n as f64).sum()
    }

    /// Unit copies as (original advertiser, copy id), ordered by original.
    pub fn unit_copies(&self) -> Vec<(usize, usize)> {
        let mut id = 0;
        let mut out = Vec::new();
        for (a, &n) in self.demands.iter().enumerate() {
            for _ in 0..n {
                out.push((a, id));
                id += 1;
            }
        }
        out
    }
}

pub fn psi(x: f64, supply: f64) -> f64 {
    1.0 - (-(1.0 - x) / supply).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingOutcome {
    pub weight: f64,
    /// Copy id matched to each query in arrival order.
    pub matches: Vec<Option<usize>>,
}

/// Runs Perturbed-Greedy with the given rank per unit copy.
///
/// Each query takes the available eligible copy maximizing `c_a psi(x)`, breaking
/// ties by copy id.
pub fn perturbed_greedy_with_ranks(inst: &MatchingInstance, ranks: &[f64]) -> MatchingOutcome {
    let copies = inst.unit_copies();
    assert_eq!(ranks.len(), copies.len(), "one rank per unit copy");
    let f = inst.supply as f64;
    // per advertiser: remaining copies, best (lowest rank, then lowest id) at the end
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); inst.weights.len()];
    for &(a, id) in &copies {
        stacks[a].push(id);
    }
    for s in &mut stacks {
        s.sort_by(|&x, &y| ranks[y].total_cmp(&ranks[x]).then(y.cmp(&x)));
    }
    let mut weight = 0.0;
    let mut matches = Vec::new();
    for g in &inst.groups {
        for _ in 0..g.count {
            let mut best: Option<(f64, usize, usize)> = None;
            for &a in &g.eligible {
                if let Some(&id) = stacks[a].last() {
                    let v = inst.weights[a] * psi(ranks[id], f);
                    let better = match best {
                        None => true,
                        Some((bv, bid, _)) => v > bv || (v == bv && id < bid),
                    };
                    if better {
                        best = Some((v, id, a));
                    }
                }
            }
            match best {
                Some((_, id, a)) => {
                    stacks[a].pop();
                    weight += inst.weights[a];
                    matches.push(Some(id));
                }
                None => matches.push(None),
            }
        }
    }
    MatchingOutcome { weight, matches }
}

/// Draws a uniform rank per unit copy and runs Perturbed-Greedy.
pub fn perturbed_greedy<R: Rng + ?Sized>(inst: &MatchingInstance, rng: &mut R) -> MatchingOutcome {
    let ranks: Vec<f64> = (0..inst.unit_copies().len()).map(|_| rng.gen::<f64>()).collect();
    perturbed_greedy_with_ranks(inst, &ranks)
}

/// RANKING: each query takes the available eligible copy of lowest rank.
pub fn ranking_with_ranks(inst: &MatchingInstance, ranks: &[f64]) -> Vec<Option<usize>> {
    let copies = inst.unit_copies();
    let mut taken = vec![false; copies.len()];
    let mut matches = Vec::new();
    for g in &inst.groups {
        for _ in 0..g.count {
            let pick = copies
                .iter()
                .filter(|&&(a, id)| !taken[id] && g.eligible.binary_search(&a).is_ok())
                .min_by(|x, y| ranks[x.1].total_cmp(&ranks[y.1]).then(x.1.cmp(&y.1)))
                .map(|&(_, id)| id);
            if let Some(id) = pick {
                taken[id] = true;
            }
            matches.push(pick);
        }
    }
    matches
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: u64,
    pub weight: f64,
    pub ratio: f64,
}

/// Perturbed-Greedy on fresh triangular instances; trial `k` uses stream `k` of the
/// root seed for both the permutation and the ranks.
pub fn matching_trials(
    m: usize,
    n: u64,
    supply: u32,
    weights: Option<&[f64]>,
    trials: u64,
    seed: u64,
) -> Result<Vec<Trial>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInstance("need m, n >= 1".into()));
    }
    let weights: Vec<f64> = match weights {
        Some(w) if w.len() == m => w.to_vec(),
        Some(w) => {
            return Err(Error::InvalidInstance(format!("{} weights for {m} advertisers", w.len())));
        }
        None => vec![1.0; m],
    };
    (0..trials)
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let inst = MatchingInstance::triangular(weights.clone(), n, supply, &mut rng)?;
            let out = perturbed_greedy(&inst, &mut rng);
            Ok(Trial { trial, weight: out.weight, ratio: out.weight / inst.total_weighted_demand() })
        })
        .collect()
}

/// Mean and standard error of the matched-weight ratio over `trials` runs.
pub fn empirical_ratio(
    m: usize,
    n: u64,
    supply: u32,
    weights: Option<&[f64]>,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let rows = matching_trials(m, n, supply, weights, trials, seed)?;
    let ratios: Vec<f64> = rows.iter().map(|t| t.ratio).collect();
    Ok(mean_stderr(&ratios))
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// `f - f exp(-1/f)`.
pub fn surplus_ratio(supply: f64) -> f64 {
    supply - supply * (-1.0 / supply).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, proptest, ProptestConfig};

    #[test]
    fn single_advertiser() {
        let inst = MatchingInstance::new(vec![2.5], vec![1], vec![Group { count: 1, eligible: vec![0] }], 1).unwrap();
        let out = perturbed_greedy(&inst, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(out.weight, 2.5);
        let (mean, _) = empirical_ratio(1, 3, 2, None, 10, 1).unwrap();
        assert_eq!(mean, 1.0);
    }

    #[test]
    fn unit_copies_preserve_weighted_demand() {
        let inst = MatchingInstance::new(vec![1.0, 3.0], vec![2, 3], vec![], 1).unwrap();
        let copies = inst.unit_copies();
        assert_eq!(copies.len(), 5);
        let copy_weight: f64 = copies.iter().map(|&(a, _)| inst.weights()[a]).sum();
        assert_eq!(copy_weight, inst.total_weighted_demand());
    }

    #[test]
    fn trials_are_reproducible() {
        let a = matching_trials(10, 2, 2, None, 5, 3).unwrap();
        let b = matching_trials(10, 2, 2, None, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn psi_is_decreasing() {
        for f in [1.0, 2.0, 4.0] {
            assert!(psi(0.2, f) > psi(0.7, f));
            assert_eq!(psi(1.0, f), 0.0);
        }
        assert!((surplus_ratio(1.0) - 0.632_120_558_828_557_7).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unit_weights_reduce_to_ranking(m in 1usize..8, n in 1u64..3, f in 1u32..4, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = MatchingInstance::triangular(vec![1.0; m], n, f, &mut rng).unwrap();
            let ranks: Vec<f64> = (0..m * n as usize).map(|_| rng.gen()).collect();
            let pg = perturbed_greedy_with_ranks(&inst, &ranks);
            prop_assert_eq!(pg.matches, ranking_with_ranks(&inst, &ranks));
        }

        #[test]
        fn decisions_invariant_under_weight_scaling(
            m in 1usize..8,
            seed in any::<u64>(),
            scale in 0.01..100.0f64,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..2.0)).collect();
            let inst = MatchingInstance::triangular(weights.clone(), 2, 2, &mut rng).unwrap();
            let ranks: Vec<f64> = (0..2 * m).map(|_| rng.gen()).collect();
            let scaled = MatchingInstance::new(
                weights.iter().map(|w| w * scale).collect(),
                vec![2; m],
                inst.groups.clone(),
                2,
            )
            .unwrap();
            prop_assert_eq!(
                perturbed_greedy_with_ranks(&inst, &ranks).matches,
                perturbed_greedy_with_ranks(&scaled, &ranks).matches
            );
        }
    }
}
