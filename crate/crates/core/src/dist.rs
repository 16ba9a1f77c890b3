//! Discrete ad-exchange reward distributions.
//!
//! A distribution is stored as its sorted support `r_1 < ... < r_d` together with the
//! cumulative masses `q_u = Pr[r <= r_u]`, so `q_d = 1` and atom `u` carries
//! `q_u - q_{u-1}` (with `q_0 = 0`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution<T>", into = "RawDistribution<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct RewardDistribution<T> {
    support: Vec<T>,
    cum_mass: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct RawDistribution<T> {
    support: Vec<T>,
    cum_mass: Vec<T>,
}

impl<T: Scalar> TryFrom<RawDistribution<T>> for RewardDistribution<T> {
    type Error = Error;
    fn try_from(raw: RawDistribution<T>) -> Result<Self> {
        Self::new(raw.support, raw.cum_mass)
    }
}

impl<T> From<RewardDistribution<T>> for RawDistribution<T> {
    fn from(d: RewardDistribution<T>) -> Self {
        RawDistribution { support: d.support, cum_mass: d.cum_mass }
    }
}

/// A distribution re-expressed with `r_1 = 0`, plus the constant to add back.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized<T> {
    pub dist: RewardDistribution<T>,
    pub penalty: T,
    /// `(f - 1) * N * r_1`: original objective minus shifted objective.
    pub offset: T,
    pub shift: T,
}

impl<T: Scalar> RewardDistribution<T> {
    /// Builds a distribution from support values and cumulative masses.
    ///
    /// A final cumulative mass within the scalar's mass tolerance of one is renormalized
    /// (every mass divided by it) so that `q_d == 1` holds exactly.
    pub fn new(support: Vec<T>, mut cum_mass: Vec<T>) -> Result<Self> {
        let malformed = |msg: &str| Err(Error::MalformedDistribution(msg.to_string()));
        if support.is_empty() {
            return malformed("empty support");
        }
        if support.len() != cum_mass.len() {
            return malformed("support and cum_mass differ in length");
        }
        if support.iter().chain(cum_mass.iter()).any(|x| !x.is_finite()) {
            return malformed("non-finite value");
        }
        if support[0] < T::zero() {
            return malformed("negative reward");
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return malformed("support must be strictly increasing");
        }
        if cum_mass[0] <= T::zero() {
            return malformed("masses must lie in (0, 1]");
        }
        if cum_mass.windows(2).any(|w| w[0] >= w[1]) {
            return malformed("cum_mass must be strictly increasing");
        }
        let last = *cum_mass.last().unwrap();
        if (last - T::one()).abs() > T::mass_tolerance() {
            return malformed("final cumulative mass must equal 1");
        }
        if last != T::one() {
            for q in cum_mass.iter_mut() {
                *q = *q / last;
            }
            *cum_mass.last_mut().unwrap() = T::one();
        }
        Ok(Self { support, cum_mass })
    }

    /// Builds a distribution from point masses (which must sum to one).
    pub fn from_point_masses(support: Vec<T>, masses: &[T]) -> Result<Self> {
        let mut acc = T::zero();
        let cum = masses
            .iter()
            .map(|&m| {
                acc = acc + m;
                acc
            })
            .collect();
        Self::new(support, cum)
    }

    pub fn point(reward: T) -> Result<Self> {
        Self::new(vec![reward], vec![T::one()])
    }

    /// Reward `0` with probability `q`, reward `r` with probability `1 - q`.
    pub fn binary(q: T, r: T) -> Result<Self> {
        Self::new(vec![T::zero(), r], vec![q, T::one()])
    }

    /// Checks the penalty gate: every downstream operation assumes `r_d <= c`.
    pub fn validate(self, penalty: T) -> Result<Self> {
        let max_reward = self.max_reward();
        if !(max_reward <= penalty) {
            return Err(Error::RewardExceedsPenalty {
                max_reward: max_reward.as_f64(),
                penalty: penalty.as_f64(),
            });
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn cum_mass(&self) -> &[T] {
        &self.cum_mass
    }

    pub fn max_reward(&self) -> T {
        *self.support.last().unwrap()
    }

    /// Probability of the `i`-th atom (0-based).
    pub fn mass(&self, i: usize) -> T {
        if i == 0 {
            self.cum_mass[0]
        } else {
            self.cum_mass[i] - self.cum_mass[i - 1]
        }
    }

    pub fn masses(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.len()).map(move |i| self.mass(i))
    }

    pub fn mean(&self) -> T {
        self.masses().zip(&self.support).map(|(p, &r)| p * r).sum()
    }

    /// Shifts support and penalty down by `r_1` so the smallest reward is zero.
    pub fn normalize(&self, penalty: T, supply: T, total_demand: T) -> Result<Normalized<T>> {
        let checked = self.clone().validate(penalty)?;
        let shift = checked.support[0];
        let support = checked.support.iter().map(|&r| r - shift).collect();
        Ok(Normalized {
            dist: Self { support, cum_mass: checked.cum_mass },
            penalty: penalty - shift,
            offset: (supply - T::one()) * total_demand * shift,
            shift,
        })
    }

    /// `E[r | r <= r_k]`: the mean of the lowest `k` atoms, `1 <= k <= d`.
    pub fn cond_mean_below(&self, k: usize) -> Result<T> {
        if k == 0 || k > self.len() {
            return Err(Error::IndexOutOfRange { index: k, len: self.len() });
        }
        let num: T = (0..k).map(|i| self.mass(i) * self.support[i]).sum();
        Ok(num / self.cum_mass[k - 1])
    }

    /// Mean of the top `p` probability mass, splitting the atom that straddles the
    /// `1 - p` quantile. `p = 0` yields zero by convention.
    pub fn top_quantile_mean(&self, p: T) -> T {
        if p <= T::zero() {
            return T::zero();
        }
        let p = p.min(T::one());
        let mut remaining = p;
        let mut total = T::zero();
        for i in (0..self.len()).rev() {
            let take = self.mass(i).min(remaining);
            total = total + take * self.support[i];
            remaining = remaining - take;
            if remaining <= T::zero() {
                break;
            }
        }
        total / p
    }

    /// Mean of the bottom `p` probability mass (counterpart of [`Self::top_quantile_mean`]).
    pub fn bottom_quantile_mean(&self, p: T) -> T {
        if p <= T::zero() {
            return T::zero();
        }
        let p = p.min(T::one());
        let mut remaining = p;
        let mut total = T::zero();
        for i in 0..self.len() {
            let take = self.mass(i).min(remaining);
            total = total + take * self.support[i];
            remaining = remaining - take;
            if remaining <= T::zero() {
                break;
            }
        }
        total / p
    }

    /// Index of the atom selected by a uniform draw `u` in `[0, 1)`.
    pub fn quantile_index(&self, u: T) -> usize {
        self.cum_mass
            .iter()
            .position(|&q| u < q)
            .unwrap_or(self.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        self.support[self.sample_index(rng)]
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.len() == 1 {
            return 0;
        }
        let u = T::lit(rng.gen::<f64>());
        self.quantile_index(u)
    }
}
