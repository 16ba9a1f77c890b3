//! Threshold policies: construction, objective evaluation and optimization.
//!
//! A policy partitions the satisfaction-ratio axis into `d` segments
//! `[0, s_1), [s_1, s_2), ..., [s_{d-1}, 1)`. Segments are indexed from zero here:
//! segment `k` ends at `thresholds[k]` and uses the reserve `support[d - 1 - k]`, so the
//! neediest contracts are protected by the highest reserve.
//!
//! Two objective functions are provided. [`lb_discrete`] is the adversary-profile lower
//! bound at a finite discretization `t`; [`ub_continuous`] is its closed form as
//! `t -> inf`, equal to the best online reward on the upper-triangular instance. The
//! optimizers work on the continuous form.

use serde::{Deserialize, Serialize};

use crate::dist::RewardDistribution;
use crate::error::{Error, Result};
use crate::num::{ratio_at_least, ratio_cutoff, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolicy<T> {
    dist: RewardDistribution<T>,
    thresholds: Vec<T>,
}

/// Penalty, supply factor and total demand: the scalars every objective depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams<T> {
    pub supply: T,
    pub penalty: T,
    pub total_demand: T,
}

impl<T: Scalar> ObjectiveParams<T> {
    pub fn new(supply: T, penalty: T, total_demand: T) -> Self {
        Self { supply, penalty, total_demand }
    }

    /// Per unit of demand (`N = 1`).
    pub fn unit(supply: T, penalty: T) -> Self {
        Self::new(supply, penalty, T::one())
    }
}

impl<T: Scalar> ThresholdPolicy<T> {
    pub fn new(dist: RewardDistribution<T>, thresholds: Vec<T>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidPolicy(msg));
        if thresholds.len() != dist.len() {
            return invalid(format!(
                "{} thresholds for a support of size {}",
                thresholds.len(),
                dist.len()
            ));
        }
        if thresholds.iter().any(|s| !(*s >= T::zero() && *s <= T::one())) {
            return invalid("thresholds must lie in [0, 1]".into());
        }
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return invalid("thresholds must be non-decreasing".into());
        }
        if *thresholds.last().unwrap() != T::one() {
            return invalid("final threshold must be exactly 1".into());
        }
        Ok(Self { dist, thresholds })
    }

    /// The two-segment policy of the binary case: full protection below `s`.
    pub fn binary(dist: RewardDistribution<T>, s: T) -> Result<Self> {
        Self::new(dist, vec![s, T::one()])
    }

    pub fn dist(&self) -> &RewardDistribution<T> {
        &self.dist
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Reserve price of segment `k`: the `(d - k)`-th smallest support value.
    pub fn reserve(&self, segment: usize) -> T {
        self.dist.support()[self.len() - 1 - segment]
    }

    /// Segment containing the satisfaction ratio `delivered / demand`, compared exactly.
    ///
    /// Returns `None` for a satisfied contract (`delivered >= demand`).
    pub fn segment_of(&self, delivered: u64, demand: u64) -> Option<usize> {
        if delivered >= demand {
            return None;
        }
        Some(
            self.thresholds
                .iter()
                .take_while(|&&s| ratio_at_least(delivered, demand, s))
                .count(),
        )
    }

    /// Smallest delivered count at which each threshold is reached, for a given demand.
    ///
    /// The segment of `delivered` is the number of cutoffs `<= delivered`.
    pub fn cutoffs(&self, demand: u64) -> Vec<u64> {
        self.thresholds.iter().map(|&s| ratio_cutoff(demand, s)).collect()
    }
}

/// Closed-form threshold for the binary distribution (`0` w.p. `q`, `r` w.p. `1 - q`).
pub fn binary_threshold<T: Scalar>(supply: T, q: T, r: T, penalty: T) -> Result<T> {
    if !(r < penalty) {
        return Err(Error::Domain(format!("reward {r} must be below penalty {penalty}")));
    }
    if !(q > T::zero() && q < T::one()) || r < T::zero() || supply < T::one() {
        return Err(Error::Domain("require 0 < q < 1, r >= 0, f >= 1".into()));
    }
    let s = T::one() + supply * q * (T::one() - r / penalty).ln();
    Ok(s.max(T::zero()).min(T::one()))
}

/// Unclamped binary threshold `1 + f q ln(1 - r/c)`; its sign selects the ratio case.
pub fn binary_threshold_unclamped<T: Scalar>(supply: T, q: T, r: T, penalty: T) -> T {
    T::one() + supply * q * (T::one() - r / penalty).ln()
}

/// Expected impressions allocated per `1/t` slice of satisfaction ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryProfile<T> {
    pub t: usize,
    /// `beta[j - 1]` holds `beta_j` for `j = 1..=t`.
    pub beta: Vec<T>,
}

impl<T: Scalar> AdversaryProfile<T> {
    /// `alpha_j = t (beta_j - beta_{j+1})`, defined for `j < t`.
    pub fn alpha(&self) -> Vec<T> {
        let t = T::from_count(self.t as u64);
        self.beta.windows(2).map(|w| t * (w[0] - w[1])).collect()
    }
}

/// Segment boundaries `b_k = s_k t` on the discretization grid (floored, snapping
/// values within 1e-9 of an integer).
pub fn grid_boundaries<T: Scalar>(thresholds: &[T], t: usize) -> Vec<usize> {
    thresholds
        .iter()
        .map(|&s| {
            let x = s.as_f64() * t as f64;
            let near = x.round();
            let b = if (x - near).abs() < 1e-9 { near } else { x.floor() };
            (b.max(0.0) as usize).min(t)
        })
        .collect()
}

/// Segment of slice index `j` (1-based): the `k` with `b_{k-1} < j <= b_k`.
pub(crate) fn slice_segments(bounds: &[usize], t: usize) -> Vec<usize> {
    let mut seg = Vec::with_capacity(t);
    let mut k = 0;
    for j in 1..=t {
        while k + 1 < bounds.len() && j > bounds[k] {
            k += 1;
        }
        seg.push(k);
    }
    seg
}

/// Decay weight `1 / q_{d-k}` applied while the neediest contract sits in segment `k`.
pub(crate) fn segment_weight<T: Scalar>(dist: &RewardDistribution<T>, segment: usize) -> T {
    T::one() / dist.cum_mass()[dist.len() - 1 - segment]
}

/// Expected gain `c - E[r | r <= reserve_k]` of one contract allocation in segment `k`.
pub(crate) fn segment_gain<T: Scalar>(
    dist: &RewardDistribution<T>,
    penalty: T,
    segment: usize,
) -> T {
    penalty - dist.cond_mean_below(dist.len() - segment).expect("segment in range")
}

/// Piecewise-geometric adversary profile solving the tight constraint system.
///
/// Within segment `k` each slice multiplies `beta` by `1 - w_k / (t f)`; the factors
/// of completed segments are chained as whole powers.
pub fn beta_closed_form<T: Scalar>(
    policy: &ThresholdPolicy<T>,
    supply: T,
    total_demand: T,
    t: usize,
) -> Result<AdversaryProfile<T>> {
    assert!(t >= 1, "discretization must be positive");
    let dist = policy.dist();
    let bounds = grid_boundaries(policy.thresholds(), t);
    let tf = T::from_count(t as u64) * supply;
    let factors: Vec<T> = (0..policy.len())
        .map(|k| T::one() - segment_weight(dist, k) / tf)
        .collect();
    check_decay(dist, &bounds, t, tf)?;

    let beta1 = total_demand / T::from_count(t as u64);
    // prefix[k] = product of the full factors of segments 0..k
    let mut prefix = Vec::with_capacity(policy.len());
    let mut acc = T::one();
    let mut start = 0usize;
    for (k, &b) in bounds.iter().enumerate() {
        prefix.push(acc);
        let len = b.saturating_sub(start);
        acc = acc * factors[k].powi(len as i32);
        start = start.max(b);
    }
    let segments = slice_segments(&bounds, t);
    let beta = (1..=t)
        .map(|j| {
            if j == 1 {
                return beta1;
            }
            let k = segments[j - 2];
            let seg_start = if k == 0 { 0 } else { bounds[k - 1] };
            let steps = (j - 1 - seg_start) as i32;
            beta1 * prefix[k] * factors[k].powi(steps)
        })
        .collect();
    Ok(AdversaryProfile { t, beta })
}

fn check_decay<T: Scalar>(
    dist: &RewardDistribution<T>,
    bounds: &[usize],
    t: usize,
    tf: T,
) -> Result<()> {
    let mut start = 0;
    for (k, &b) in bounds.iter().enumerate() {
        // slices start+1..=b feed the recurrence only when they are below t
        let used = b.min(t.saturating_sub(1)) > start;
        let weight = segment_weight(dist, k);
        if used && weight > tf {
            return Err(Error::InfeasibleDecay { weight: weight.as_f64(), limit: tf.as_f64() });
        }
        start = start.max(b);
    }
    Ok(())
}

/// `-cN + sum_u f N (q_u - q_{u-1}) r_u`: everything to the exchange, nothing delivered.
pub fn baseline_objective<T: Scalar>(dist: &RewardDistribution<T>, params: &ObjectiveParams<T>) -> T {
    let exchange: T = dist.masses().zip(dist.support()).map(|(p, &r)| p * r).sum();
    -params.penalty * params.total_demand + params.supply * params.total_demand * exchange
}

/// Finite-`t` lower bound on the algorithm's reward under the tight adversary profile.
pub fn lb_discrete<T: Scalar>(
    policy: &ThresholdPolicy<T>,
    params: &ObjectiveParams<T>,
    t: usize,
) -> Result<T> {
    let dist = policy.dist();
    let profile = beta_closed_form(policy, params.supply, params.total_demand, t)?;
    let bounds = grid_boundaries(policy.thresholds(), t);
    let segments = slice_segments(&bounds, t);
    let gains: Vec<T> = (0..policy.len()).map(|k| segment_gain(dist, params.penalty, k)).collect();
    let allocated: T = profile
        .beta
        .iter()
        .zip(&segments)
        .map(|(&b, &k)| b * gains[k])
        .sum();
    Ok(baseline_objective(dist, params) + allocated)
}

/// Continuous-limit objective of a threshold vector.
///
/// Atom `a` is delivered to contracts at rate `1 - exp(-E)` where `E` accumulates
/// `(s_k - s_{k-1}) / (f q_{d-k})` over the segments whose reserve admits it.
pub fn ub_continuous<T: Scalar>(
    dist: &RewardDistribution<T>,
    thresholds: &[T],
    params: &ObjectiveParams<T>,
) -> T {
    debug_assert_eq!(thresholds.len(), dist.len());
    ub_from_parts(dist.support(), dist.cum_mass(), thresholds, params)
}

/// [`ub_continuous`] over raw parts; tolerates repeated support values.
pub(crate) fn ub_from_parts<T: Scalar>(
    support: &[T],
    cum_mass: &[T],
    thresholds: &[T],
    params: &ObjectiveParams<T>,
) -> T {
    let d = support.len();
    let (f, c, n) = (params.supply, params.penalty, params.total_demand);
    let mass = |i: usize| if i == 0 { cum_mass[0] } else { cum_mass[i] - cum_mass[i - 1] };
    // exponent[k] = E after segment k
    let mut exponent = Vec::with_capacity(d);
    let mut e = T::zero();
    let mut prev = T::zero();
    for (k, &s) in thresholds.iter().enumerate() {
        e = e + (s - prev) / (f * cum_mass[d - 1 - k]);
        exponent.push(e);
        prev = s;
    }
    let mut value = -c * n;
    for a in 0..d {
        let p = mass(a);
        value = value + f * n * p * support[a];
        value = value + f * n * p * (c - support[a]) * (T::one() - (-exponent[d - 1 - a]).exp());
    }
    value
}

/// Uniform threshold grid with spacing `1 / steps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub steps: usize,
}

impl Grid {
    pub const DEFAULT_STEPS: usize = 200;

    pub fn new(steps: usize) -> Self {
        assert!(steps >= 1, "grid needs at least one step");
        Self { steps }
    }

    /// Grid with spacing as close as possible to `eps`.
    pub fn from_eps(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("grid spacing {eps} outside (0, 1)")));
        }
        Ok(Self::new((1.0 / eps).round().max(1.0) as usize))
    }

    /// `eps = 1/m` for an instance with `m` advertisers.
    pub fn for_advertisers(m: usize) -> Self {
        Self::new(m.max(1))
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.steps as f64
    }

    pub fn value<T: Scalar>(&self, i: usize) -> T {
        if i == self.steps {
            T::one()
        } else {
            T::from_count(i as u64) / T::from_count(self.steps as u64)
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self::new(Self::DEFAULT_STEPS)
    }
}

#[derive(Clone, Copy)]
struct Cell<T> {
    value: T,
    x: T,
    parent: u32,
}

/// Dynamic program over (segment, threshold grid index, boundary-profile bucket).
///
/// The state after segment `k` is the threshold `s_k` on the grid together with
/// `x = exp(-E_k)`, the normalized adversary profile at the segment boundary. The
/// `x` axis is bucketed by flooring to multiples of `eps / d`; each bucket keeps its
/// best partial path along with that path's exact `x`. Segment `k` then contributes
/// `N f q x (1 - exp(-(s_k - s_{k-1}) / (f q))) (c - E[r | r <= reserve_k])`.
///
/// The returned thresholds are re-scored with [`ub_continuous`] by the caller.
pub fn optimize_thresholds_dp<T: Scalar>(
    dist: &RewardDistribution<T>,
    params: &ObjectiveParams<T>,
    grid: Grid,
) -> ThresholdPolicy<T> {
    let d = dist.len();
    let steps = grid.steps;
    if d == 1 {
        return ThresholdPolicy::new(dist.clone(), vec![T::one()]).expect("single threshold");
    }
    let buckets = d * steps;
    let width = buckets + 1;
    let idx = |y: usize, b: usize| y * width + b;
    let bucket_of = |x: T| -> usize {
        let b = (x * T::from_count(buckets as u64)).floor().as_f64();
        (b.max(0.0) as usize).min(buckets)
    };
    let (f, c, n) = (params.supply, params.penalty, params.total_demand);
    let step = T::one() / T::from_count(steps as u64);

    // layers[k] holds states after segment k
    let mut layers: Vec<Vec<Option<Cell<T>>>> = Vec::with_capacity(d);
    for k in 0..d {
        let q = dist.cum_mass()[d - 1 - k];
        let rate = step / (f * q);
        let coef = n * f * q * segment_gain(dist, c, k);
        let decay: Vec<T> = (0..=steps)
            .map(|delta| (-rate * T::from_count(delta as u64)).exp())
            .collect();
        let mut layer: Vec<Option<Cell<T>>> = vec![None; (steps + 1) * width];
        let last = k == d - 1;
        let relax = |layer: &mut Vec<Option<Cell<T>>>, y0: usize, x0: T, v0: T, parent: u32| {
            let targets = if last { steps..=steps } else { y0..=steps };
            for y in targets {
                let dec = decay[y - y0];
                let x = x0 * dec;
                let value = v0 + coef * x0 * (T::one() - dec);
                let slot = &mut layer[idx(y, bucket_of(x))];
                match slot {
                    Some(cell) if !(value > cell.value) => {}
                    _ => *slot = Some(Cell { value, x, parent }),
                }
            }
        };
        if k == 0 {
            relax(&mut layer, 0, T::one(), T::zero(), u32::MAX);
        } else {
            let prev = &layers[k - 1];
            for y0 in 0..=steps {
                for b0 in 0..width {
                    if let Some(cell) = prev[idx(y0, b0)] {
                        relax(&mut layer, y0, cell.x, cell.value, idx(y0, b0) as u32);
                    }
                }
            }
        }
        layers.push(layer);
    }

    // best terminal cell at s_d = 1
    let final_layer = &layers[d - 1];
    let mut best: Option<(usize, T)> = None;
    for b in 0..width {
        if let Some(cell) = final_layer[idx(steps, b)] {
            if best.map_or(true, |(_, v)| cell.value > v) {
                best = Some((idx(steps, b), cell.value));
            }
        }
    }
    let mut pos = best.expect("s_d = 1 is always reachable").0;
    let mut indices = vec![steps; d];
    for k in (0..d).rev() {
        indices[k] = pos / width;
        let cell = layers[k][pos].expect("back-pointer to a filled cell");
        if k > 0 {
            pos = cell.parent as usize;
        }
    }
    let thresholds = indices.iter().map(|&i| grid.value(i)).collect();
    ThresholdPolicy::new(dist.clone(), thresholds).expect("grid thresholds are valid")
}

/// Exhaustive search over monotone grid threshold vectors (`d <= 4`).
///
/// Ties keep the lexicographically smallest vector.
pub fn optimize_thresholds_grid<T: Scalar>(
    dist: &RewardDistribution<T>,
    params: &ObjectiveParams<T>,
    grid: Grid,
) -> Result<ThresholdPolicy<T>> {
    let d = dist.len();
    if d > 4 {
        return Err(Error::TooManyThresholds(d));
    }
    let steps = grid.steps;
    let mut current = vec![0usize; d - 1];
    let mut best: Option<(Vec<usize>, T)> = None;
    let mut thresholds = vec![T::one(); d];
    loop {
        for (slot, &i) in thresholds.iter_mut().zip(&current) {
            *slot = grid.value(i);
        }
        let v = ub_continuous(dist, &thresholds, params);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((current.clone(), v));
        }
        // next non-decreasing tuple in lexicographic order
        let mut pos = current.len();
        loop {
            if pos == 0 {
                let idx = best.unwrap().0;
                let mut ths: Vec<T> = idx.iter().map(|&i| grid.value(i)).collect();
                ths.push(T::one());
                return ThresholdPolicy::new(dist.clone(), ths);
            }
            pos -= 1;
            if current[pos] < steps {
                current[pos] += 1;
                let v = current[pos];
                for slot in current[pos + 1..].iter_mut() {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Thresholds maximizing [`ub_continuous`] on the grid, via the dynamic program.
pub fn optimize_thresholds<T: Scalar>(
    dist: &RewardDistribution<T>,
    params: &ObjectiveParams<T>,
    grid: Grid,
) -> ThresholdPolicy<T> {
    optimize_thresholds_dp(dist, params, grid)
}

/// Best achievable continuous-limit reward for a distribution, and the policy attaining it.
pub fn best_reward<T: Scalar>(
    dist: &RewardDistribution<T>,
    params: &ObjectiveParams<T>,
    grid: Grid,
) -> (ThresholdPolicy<T>, T) {
    let policy = optimize_thresholds(dist, params, grid);
    let value = ub_continuous(dist, policy.thresholds(), params);
    (policy, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn binary() -> RewardDistribution<f64> {
        RewardDistribution::binary(0.5, 0.5).unwrap()
    }

    /// `RHS(x)` of the binary analysis, per unit demand, with `x = s / f`.
    fn binary_rhs(f: f64, q: f64, r: f64, c: f64, x: f64) -> f64 {
        c * (f - 1.0) + (1.0 - q) * (r - c) * f * (-x).exp()
            - q * f * c * ((1.0 - q) / q * x - 1.0 / (q * f)).exp()
    }

    /// Brute-force maximizer of `RHS` over `x` in `[0, 1/f]`.
    fn rhs_argmax(f: f64, q: f64, r: f64, c: f64) -> f64 {
        let n = 200_000;
        (0..=n)
            .map(|i| i as f64 / n as f64 / f)
            .map(|x| (x, binary_rhs(f, q, r, c, x)))
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
            .0
            * f
    }

    #[test]
    fn binary_threshold_examples() {
        let s = binary_threshold(2.0, 0.5, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(s, 1.0 + 0.5f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(s, 0.306853, epsilon = 1e-6);
        assert_abs_diff_eq!(s, rhs_argmax(2.0, 0.5, 0.5, 1.0), epsilon = 1e-4);
        assert_eq!(binary_threshold(1.0, 0.9, 0.99, 1.0).unwrap(), 0.0);
        for f in [1.0, 3.0] {
            for q in [0.1, 0.7] {
                assert_eq!(binary_threshold(f, q, 0.0, 1.0).unwrap(), 1.0);
            }
        }
        assert!(matches!(binary_threshold(2.0, 0.5, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn binary_threshold_matches_rhs_argmax() {
        for (f, q, r) in [(1.5, 0.3, 0.4), (4.0, 0.8, 0.9), (2.0, 0.2, 0.7), (1.0, 0.6, 0.2)] {
            let s = binary_threshold(f, q, r, 1.0).unwrap();
            assert_abs_diff_eq!(s, rhs_argmax(f, q, r, 1.0), epsilon = 1e-4);
        }
    }

    #[test]
    fn policy_validation() {
        let d = binary();
        assert!(ThresholdPolicy::new(d.clone(), vec![0.3, 1.0]).is_ok());
        assert!(ThresholdPolicy::new(d.clone(), vec![0.3, 0.9]).is_err());
        assert!(ThresholdPolicy::new(d.clone(), vec![0.5, 0.3]).is_err());
        assert!(ThresholdPolicy::new(d.clone(), vec![1.0]).is_err());
        assert!(ThresholdPolicy::new(d, vec![-0.1, 1.0]).is_err());
    }

    #[test]
    fn reserves_mirror_support() {
        let d = RewardDistribution::new(vec![0.0, 0.2, 0.6], vec![0.3, 0.7, 1.0]).unwrap();
        let p = ThresholdPolicy::new(d, vec![0.25, 0.5, 1.0]).unwrap();
        assert_eq!([p.reserve(0), p.reserve(1), p.reserve(2)], [0.6, 0.2, 0.0]);
        assert_eq!(p.segment_of(0, 8), Some(0));
        assert_eq!(p.segment_of(2, 8), Some(1));
        assert_eq!(p.segment_of(3, 8), Some(1));
        assert_eq!(p.segment_of(4, 8), Some(2));
        assert_eq!(p.segment_of(7, 8), Some(2));
        assert_eq!(p.segment_of(8, 8), None);
        // 0.2f64 sits just above 1/5, so 2/10 has not reached it
        let q = ThresholdPolicy::new(p.dist().clone(), vec![0.2, 0.6, 1.0]).unwrap();
        assert_eq!(q.segment_of(2, 10), Some(0));
        let cut = q.cutoffs(10);
        for k in 0..10 {
            let seg = cut.iter().filter(|&&x| x <= k).count();
            assert_eq!(Some(seg), q.segment_of(k, 10));
        }
    }

    #[test]
    fn beta_binary_matches_geometric_form() {
        let (n, f, t) = (1.0, 2.0, 1000usize);
        let p = ThresholdPolicy::binary(binary(), 0.3).unwrap();
        let prof = beta_closed_form(&p, f, n, t).unwrap();
        assert_eq!(prof.beta[0], n / t as f64);
        let tf = t as f64 * f;
        for j in 1..=300usize {
            let expect = n / t as f64 * (1.0 - 1.0 / tf).powi(j as i32 - 1);
            assert_abs_diff_eq!(prof.beta[j - 1], expect, epsilon = 1e-15);
        }
        // past the threshold the decay uses 1/q = 2
        for j in 302..=t {
            let expect = n / t as f64
                * (1.0 - 1.0 / tf).powi(300)
                * (1.0 - 2.0 / tf).powi(j as i32 - 301);
            assert_abs_diff_eq!(prof.beta[j - 1], expect, epsilon = 1e-15);
        }
        assert_eq!(prof.alpha().len(), t - 1);
    }

    #[test]
    fn beta_rejects_coarse_grid() {
        let d = RewardDistribution::binary(0.01, 0.5).unwrap();
        let p = ThresholdPolicy::binary(d, 0.2).unwrap();
        assert!(matches!(beta_closed_form(&p, 1.0, 1.0, 10), Err(Error::InfeasibleDecay { .. })));
    }

    #[test]
    fn lb_binary_matches_closed_form() {
        let params = ObjectiveParams::unit(2.0, 1.0);
        let s = binary_threshold(2.0, 0.5, 0.5, 1.0).unwrap();
        let p = ThresholdPolicy::binary(binary(), s).unwrap();
        let expected = 2.0 * (0.5 - 0.5f64.sqrt() * (-0.5f64).exp());
        let lb = lb_discrete(&p, &params, 100_000).unwrap();
        assert_abs_diff_eq!(lb, expected, epsilon = 1e-3);
        assert_abs_diff_eq!(lb, 0.14225, epsilon = 1e-3);
    }

    #[test]
    fn point_mass_at_zero_bounds_agree() {
        // d = 1, f = 1: an adversary still strands a 1/e fraction of demand
        let d = RewardDistribution::point(0.0).unwrap();
        let p = ThresholdPolicy::new(d.clone(), vec![1.0]).unwrap();
        let params = ObjectiveParams::unit(1.0, 1.0);
        let ub = ub_continuous(&d, &[1.0], &params);
        assert_abs_diff_eq!(ub, -(-1.0f64).exp(), epsilon = 1e-15);
        let lb = lb_discrete(&p, &params, 1_000_000).unwrap();
        assert_abs_diff_eq!(lb, ub, epsilon = 1e-5);
    }

    #[test]
    fn ub_binary_examples() {
        let (f, q, r, c) = (2.0, 0.5, 0.5, 1.0);
        let params = ObjectiveParams::unit(f, c);
        let s = binary_threshold(f, q, r, c).unwrap();
        let ub = ub_continuous(&binary(), &[s, 1.0], &params);
        assert_abs_diff_eq!(ub, binary_rhs(f, q, r, c, s / f), epsilon = 1e-12);
        assert_abs_diff_eq!(ub, 0.142236, epsilon = 1e-6);

        let at_zero = ub_continuous(&binary(), &[0.0, 1.0], &params);
        // RHS(0) expanded: the exchange share enters with a negative sign
        let expect = c * f * ((1.0 - 1.0 / f) - (1.0 - q) * (1.0 - r / c) - q * (-1.0 / (q * f)).exp());
        assert_abs_diff_eq!(at_zero, expect, epsilon = 1e-12);
    }

    #[test]
    fn dp_binary_and_degenerate() {
        let params = ObjectiveParams::unit(2.0, 1.0);
        let grid = Grid::new(200);
        let p = optimize_thresholds_dp(&binary(), &params, grid);
        assert!((p.thresholds()[0] - 0.306853).abs() <= 2.0 * grid.eps());
        let one = RewardDistribution::point(0.2).unwrap();
        assert_eq!(optimize_thresholds_dp(&one, &params, grid).thresholds(), &[1.0]);
        assert_eq!(optimize_thresholds_grid(&one, &params, grid).unwrap().thresholds(), &[1.0]);
    }

    #[test]
    fn grid_limits_support_size() {
        let d = RewardDistribution::new(
            vec![0.0, 0.1, 0.2, 0.3, 0.4],
            vec![0.2, 0.4, 0.6, 0.8, 1.0],
        )
        .unwrap();
        let params = ObjectiveParams::unit(2.0, 1.0);
        assert!(matches!(
            optimize_thresholds_grid(&d, &params, Grid::new(10)),
            Err(Error::TooManyThresholds(5))
        ));
    }

    #[test]
    fn dp_agrees_with_grid_on_two_atoms() {
        let params = ObjectiveParams::unit(1.5, 1.0);
        let grid = Grid::new(200);
        let d = RewardDistribution::new(vec![0.1, 0.8], vec![0.4, 1.0]).unwrap();
        let dp = optimize_thresholds_dp(&d, &params, grid);
        let ex = optimize_thresholds_grid(&d, &params, grid).unwrap();
        assert_eq!(dp.thresholds(), ex.thresholds());
    }

    #[test]
    fn dp_generic_over_f32() {
        let d = RewardDistribution::<f32>::binary(0.5, 0.5).unwrap();
        let p = optimize_thresholds_dp(&d, &ObjectiveParams::unit(2.0f32, 1.0), Grid::new(100));
        assert!((p.thresholds()[0] - 0.306853).abs() <= 0.02);
    }

    fn arb_case(max_d: usize) -> impl Strategy<Value = (RewardDistribution<f64>, Vec<f64>, f64)> {
        crate::dist::tests::arb_dist(max_d).prop_flat_map(|d| {
            let len = d.len();
            (
                Just(d),
                prop::collection::vec(0.0..1.0f64, len - 1),
                1.0..4.0f64,
            )
                .prop_map(|(d, mut s, f)| {
                    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    s.push(1.0);
                    (d, s, f)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn lb_matches_ub_for_large_t((d, s, f) in arb_case(5)) {
            let c = 1.0 + d.max_reward();
            let params = ObjectiveParams::new(f, c, 3.0);
            let p = ThresholdPolicy::new(d.clone(), s.clone()).unwrap();
            let lb = lb_discrete(&p, &params, 100_000).unwrap();
            let ub = ub_continuous(&d, &s, &params);
            prop_assert!((lb - ub).abs() <= 1e-3 * c * 3.0, "lb {lb} ub {ub}");
        }

        #[test]
        fn ub_invariant_under_atom_splitting((d, s, f) in arb_case(4), pick in 0usize..4) {
            let params = ObjectiveParams::unit(f, 1.0);
            let a = pick % d.len();
            let len = d.len();
            let mut support = d.support().to_vec();
            let mut cum = d.cum_mass().to_vec();
            let lower = cum[a] - d.mass(a) / 2.0;
            support.insert(a, support[a]);
            cum.insert(a, lower);
            // atom a is served from segment len-1-a; its lower half gets an empty segment
            let mut split_s = s.clone();
            split_s.insert(len - a, s[len - 1 - a]);
            let before = ub_continuous(&d, &s, &params);
            let after = ub_from_parts(&support, &cum, &split_s, &params);
            prop_assert!((before - after).abs() < 1e-12);
        }

        #[test]
        fn dp_close_to_exhaustive_grid_four_atoms(
            d in crate::dist::tests::arb_dist(4).prop_filter("four atoms", |d| d.len() == 4),
            f in 1.0..4.0f64,
        ) {
            let params = ObjectiveParams::unit(f, 1.0);
            let grid = Grid::new(50);
            let dp = optimize_thresholds_dp(&d, &params, grid);
            let ex = optimize_thresholds_grid(&d, &params, grid).unwrap();
            let gap = ub_continuous(&d, ex.thresholds(), &params) - ub_continuous(&d, dp.thresholds(), &params);
            prop_assert!((-1e-12..=1e-4).contains(&gap), "gap {gap}");
        }

        #[test]
        fn dp_close_to_exhaustive_grid(d in crate::dist::tests::arb_dist(3), f in 1.0..4.0f64) {
            let params = ObjectiveParams::unit(f, 1.0);
            let grid = Grid::new(200);
            let dp = optimize_thresholds_dp(&d, &params, grid);
            let ex = optimize_thresholds_grid(&d, &params, grid).unwrap();
            let v_dp = ub_continuous(&d, dp.thresholds(), &params);
            let v_ex = ub_continuous(&d, ex.thresholds(), &params);
            prop_assert!(v_dp <= v_ex + 1e-12);
            prop_assert!(v_ex - v_dp <= 1e-4, "dp {v_dp} grid {v_ex}");
        }
    }
}
