//! Competitive ratios: the binary closed form and the worst case at a fixed mean.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::RewardDistribution;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::policy::{best_reward, binary_threshold_unclamped, Grid, ObjectiveParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdCase {
    /// `1 + f q ln(1 - r/c) > 0`: the threshold is interior.
    Interior,
    /// The threshold clamps to zero.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QSide {
    /// `q > 1/f`: the offline optimum sells every reward-`r` query.
    AboveInverseSupply,
    AtOrBelowInverseSupply,
}

/// Per-unit-demand algorithm bound, offline optimum and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioReport<T> {
    pub alg_bound: T,
    pub opt: T,
    pub ratio: T,
    pub threshold_case: ThresholdCase,
    pub q_side: QSide,
}

/// Algorithm bound per unit demand for the binary distribution at the optimal threshold.
pub fn binary_alg_bound<T: Scalar>(supply: T, q: T, r: T, penalty: T) -> (T, ThresholdCase) {
    let one = T::one();
    let f = supply;
    let keep = one - r / penalty;
    if binary_threshold_unclamped(f, q, r, penalty) > T::zero() {
        let v = penalty * f * ((one - one / f) - keep.powf(one - q) * (-one / f).exp());
        (v, ThresholdCase::Interior)
    } else {
        let v = penalty * f * ((one - one / f) - (one - q) * keep - q * (-one / (q * f)).exp());
        (v, ThresholdCase::Boundary)
    }
}

pub fn binary_ratio<T: Scalar>(supply: T, q: T, r: T, penalty: T) -> Result<RatioReport<T>> {
    let one = T::one();
    if !(supply >= one) || !(q > T::zero() && q < one) || !(r >= T::zero() && r < penalty) {
        return Err(Error::Domain("require f >= 1, 0 < q < 1, 0 <= r < c".into()));
    }
    let (alg_bound, threshold_case) = binary_alg_bound(supply, q, r, penalty);
    let (opt, q_side) = if q > one / supply {
        (supply * (one - q) * r, QSide::AboveInverseSupply)
    } else {
        (supply * (one - one / supply) * r, QSide::AtOrBelowInverseSupply)
    };
    if !(opt > T::zero()) {
        return Err(Error::UndefinedRatio { alg_bound: alg_bound.as_f64(), opt: opt.as_f64() });
    }
    Ok(RatioReport { alg_bound, opt, ratio: alg_bound / opt, threshold_case, q_side })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateKind {
    /// All mass at the mean.
    PointMass,
    /// Zero with probability `1/f`, otherwise `f mu / (f - 1)`.
    ZeroAndScaled,
    /// `f mu - (f - 1) c` with probability `1/f`, otherwise the penalty.
    PenaltyAndRemainder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Candidate<T> {
    pub kind: CandidateKind,
    pub dist: RewardDistribution<T>,
    pub thresholds: Vec<T>,
    /// Best continuous-limit reward per unit demand.
    pub best_reward: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct WorstCaseSpec<T> {
    pub mean: T,
    pub penalty: T,
    pub supply: T,
    pub candidates: Vec<Candidate<T>>,
    /// Index into `candidates` of the smallest best reward.
    pub argmin: usize,
}

impl<T: Scalar> WorstCaseSpec<T> {
    pub fn min_reward(&self) -> T {
        self.candidates[self.argmin].best_reward
    }
}

/// Two-atom distribution, collapsing to a point mass when the atoms coincide.
fn two_point<T: Scalar>(low: T, high: T, p_low: T) -> Result<RewardDistribution<T>> {
    if low == high {
        RewardDistribution::point(low)
    } else {
        RewardDistribution::new(vec![low, high], vec![p_low, T::one()])
    }
}

/// The candidate worst-case distributions with mean `mu`, each scored by its best
/// achievable reward.
pub fn worst_case_distribution<T: Scalar>(mean: T, penalty: T, supply: T, grid: Grid) -> Result<WorstCaseSpec<T>> {
    let (mu, c, f) = (mean, penalty, supply);
    let one = T::one();
    if !(mu > T::zero()) || mu > c {
        return Err(Error::Domain(format!("mean {mu} must lie in (0, {c}]")));
    }
    if !(f > one) {
        return Err(Error::Domain(format!("supply factor {f} must exceed 1")));
    }
    let mut dists = vec![(CandidateKind::PointMass, RewardDistribution::point(mu)?)];
    let scaled = f * mu / (f - one);
    if scaled <= c {
        dists.push((CandidateKind::ZeroAndScaled, two_point(T::zero(), scaled, one / f)?));
    }
    let low = f * mu - (f - one) * c;
    if low >= T::zero() {
        dists.push((CandidateKind::PenaltyAndRemainder, two_point(low, c, one / f)?));
    }
    let params = ObjectiveParams::unit(f, c);
    let candidates: Vec<Candidate<T>> = dists
        .into_iter()
        .map(|(kind, dist)| {
            let (policy, best) = best_reward(&dist, &params, grid);
            Candidate { kind, thresholds: policy.thresholds().to_vec(), dist, best_reward: best }
        })
        .collect();
    let argmin = (0..candidates.len())
        .min_by(|&a, &b| {
            candidates[a]
                .best_reward
                .partial_cmp(&candidates[b].best_reward)
                .expect("finite rewards")
                .then(a.cmp(&b))
        })
        .expect("the point mass is always a candidate");
    Ok(WorstCaseSpec { mean: mu, penalty: c, supply: f, candidates, argmin })
}

/// Random distribution on `[0, c]` with at most `max_d` atoms and mean exactly `mu`
/// (up to rounding).
///
/// Atoms are drawn on both sides of the mean; masses are random within each side and
/// the two sides are mixed to hit the mean.
pub fn random_mean_distribution<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    c: f64,
    max_d: usize,
) -> Result<RewardDistribution<f64>> {
    if !(mu > 0.0 && mu < c) || max_d < 2 {
        return Err(Error::Domain("need 0 < mu < c and at least two atoms".into()));
    }
    loop {
        let d = rng.gen_range(2..=max_d);
        let mut support: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..=c)).collect();
        support.sort_by(f64::total_cmp);
        support.dedup();
        let below: Vec<usize> = (0..support.len()).filter(|&i| support[i] < mu).collect();
        let above: Vec<usize> = (0..support.len()).filter(|&i| support[i] > mu).collect();
        if below.is_empty() || above.is_empty() || support.len() != d {
            continue;
        }
        let mut weights: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
        let side_mean = |idx: &[usize], w: &[f64]| {
            let total: f64 = idx.iter().map(|&i| w[i]).sum();
            let m: f64 = idx.iter().map(|&i| w[i] * support[i]).sum::<f64>() / total;
            (total, m)
        };
        let (wl, ml) = side_mean(&below, &weights);
        let (wh, mh) = side_mean(&above, &weights);
        // lambda ml + (1 - lambda) mh = mu
        let lambda = (mh - mu) / (mh - ml);
        for &i in &below {
            weights[i] *= lambda / wl;
        }
        for &i in &above {
            weights[i] *= (1.0 - lambda) / wh;
        }
        if let Ok(dist) = RewardDistribution::from_point_masses(support, &weights) {
            return Ok(dist);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{binary_threshold, ub_continuous};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binary_ratio_examples() {
        let rep = binary_ratio(2.0, 0.5, 0.5, 1.0).unwrap();
        assert_eq!(rep.threshold_case, ThresholdCase::Interior);
        assert_eq!(rep.q_side, QSide::AtOrBelowInverseSupply);
        assert_abs_diff_eq!(rep.opt, 0.5, epsilon = 1e-15);
        let expected = 2.0 * (0.5 - 0.5f64.sqrt() * (-0.5f64).exp()) / 0.5;
        assert_abs_diff_eq!(rep.ratio, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.ratio, 0.28449, epsilon = 1e-4);

        assert!(matches!(binary_ratio(2.0, 0.5, 0.0, 1.0), Err(Error::UndefinedRatio { .. })));
        assert!(matches!(binary_ratio(1.0, 0.5, 0.5, 1.0), Err(Error::UndefinedRatio { .. })));

        let mut last = f64::NEG_INFINITY;
        for f in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 100.0] {
            let r = binary_ratio(f, 0.5, 0.5, 1.0).unwrap().ratio;
            assert!(r > last && r < 1.0, "f = {f}: {r}");
            last = r;
        }
    }

    #[test]
    fn boundary_case_can_be_negative() {
        let rep = binary_ratio(1.5, 0.9, 0.95, 1.0).unwrap();
        assert_eq!(rep.threshold_case, ThresholdCase::Boundary);
        assert_eq!(rep.q_side, QSide::AboveInverseSupply);
        assert!(rep.ratio < 0.0);
    }

    #[test]
    fn worst_case_examples() {
        let grid = Grid::default();
        let wc = worst_case_distribution(0.3, 1.0, 2.0, grid).unwrap();
        let kinds: Vec<_> = wc.candidates.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, [CandidateKind::PointMass, CandidateKind::ZeroAndScaled]);
        assert_eq!(wc.candidates[1].dist.support(), &[0.0, 0.6]);

        // (f / (f - 1)) mu = 1.2 exceeds c, so only two candidates survive
        let wc = worst_case_distribution(0.6, 1.0, 2.0, grid).unwrap();
        let kinds: Vec<_> = wc.candidates.iter().map(|c| c.kind).collect();
        assert_eq!(kinds, [CandidateKind::PointMass, CandidateKind::PenaltyAndRemainder]);
        let third = &wc.candidates[1].dist;
        assert_abs_diff_eq!(third.support()[0], 0.2, epsilon = 1e-15);
        assert_eq!(third.support()[1], 1.0);
        assert_eq!(third.cum_mass(), &[0.5, 1.0]);

        let wc = worst_case_distribution(1.0, 1.0, 2.0, grid).unwrap();
        assert_eq!(wc.candidates.len(), 2);
        assert!(wc.candidates.iter().all(|c| c.dist.support() == [1.0]));

        assert!(matches!(worst_case_distribution(1.5, 1.0, 2.0, grid), Err(Error::Domain(_))));
        for c in &wc.candidates {
            assert_abs_diff_eq!(c.dist.mean(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn random_mean_distributions_hit_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let d = random_mean_distribution(&mut rng, 0.3, 1.0, 4).unwrap();
            assert_abs_diff_eq!(d.mean(), 0.3, epsilon = 1e-12);
            assert!(d.len() <= 4 && d.support()[0] >= 0.0 && d.max_reward() <= 1.0);
        }
    }

    proptest! {
        #[test]
        fn selected_case_matches_continuous_objective(
            f in 1.0..8.0f64,
            q in 0.02..0.98f64,
            r in 0.001..0.99f64,
        ) {
            let dist = RewardDistribution::binary(q, r).unwrap();
            let s = binary_threshold(f, q, r, 1.0).unwrap();
            let ub = ub_continuous(&dist, &[s, 1.0], &ObjectiveParams::unit(f, 1.0));
            let (alg, _) = binary_alg_bound(f, q, r, 1.0);
            prop_assert!((alg - ub).abs() <= 1e-9, "alg {alg} ub {ub}");
        }
    }
}
