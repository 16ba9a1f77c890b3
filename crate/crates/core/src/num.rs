//! Scalar abstraction shared by every money- and probability-valued computation.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating-point scalar used for rewards, probabilities and thresholds: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion from a count.
    #[inline]
    fn from_count(n: u64) -> Self {
        <Self as NumCast>::from(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Tolerance used when snapping a cumulative mass to exactly one.
    fn mass_tolerance() -> Self;
}

impl Scalar for f32 {
    fn mass_tolerance() -> Self {
        // 1e-12 is below f32 resolution near 1.0; use a few ulps instead.
        4.0 * f32::EPSILON
    }
}

impl Scalar for f64 {
    fn mass_tolerance() -> Self {
        1e-12
    }
}

/// Exact test `k / n >= s` for a non-negative float `s`, without rounding `k / n`.
///
/// `s` is decomposed as `mantissa * 2^exponent`, so the comparison becomes an
/// integer comparison of `k * 2^-exponent` against `mantissa * n`.
pub fn ratio_at_least<T: Scalar>(k: u64, n: u64, s: T) -> bool {
    debug_assert!(n > 0);
    if s <= T::zero() {
        return true;
    }
    let (mantissa, exponent, _) = s.integer_decode();
    let rhs = mantissa as u128 * n as u128;
    if exponent >= 0 {
        let shift = exponent as u32;
        // k >= mantissa * n * 2^exponent
        if shift >= 64 {
            return false;
        }
        let rhs_bits = 128 - rhs.leading_zeros();
        if rhs_bits + shift > 127 {
            return false;
        }
        return (k as u128) >= rhs << shift;
    }
    let shift = (-(exponent as i32)) as u32;
    if k == 0 {
        return rhs == 0;
    }
    let k_bits = 64 - k.leading_zeros();
    if k_bits + shift > 127 {
        // k * 2^shift >= 2^127 > mantissa * n
        return true;
    }
    ((k as u128) << shift) >= rhs
}

/// Smallest `k` in `0..=n` with `k / n >= s`, or `n + 1` when even `n / n` falls short.
pub fn ratio_cutoff<T: Scalar>(n: u64, s: T) -> u64 {
    let (mut lo, mut hi) = (0u64, n + 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if mid <= n && ratio_at_least(mid, n, s) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}
