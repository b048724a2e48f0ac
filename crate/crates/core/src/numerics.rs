//! Log-domain arithmetic, seeded randomness and finite-difference helpers.
//!
//! Everything here is natural-log based. Distances and densities in this crate
//! routinely span hundreds of orders of magnitude, so lengths are carried as
//! [`LogScalar`]s and reduced with [`log_sum_exp`].

use std::fmt;
use std::ops::{Add, Sub};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `log(x)` for a non-negative magnitude `x`. Negative infinity is exactly zero.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogScalar(pub f64);

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar(f64::NEG_INFINITY);
    pub const ONE: LogScalar = LogScalar(0.0);

    pub fn from_linear(x: f64) -> Self {
        LogScalar(x.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn linear(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Log of the sum of the two magnitudes.
    pub fn ln_add(self, other: LogScalar) -> LogScalar {
        LogScalar(log_add_exp(self.0, other.0))
    }
}

/// Multiplication of magnitudes.
impl Add for LogScalar {
    type Output = LogScalar;
    fn add(self, rhs: LogScalar) -> LogScalar {
        LogScalar(self.0 + rhs.0)
    }
}

/// Division of magnitudes.
impl Sub for LogScalar {
    type Output = LogScalar;
    fn sub(self, rhs: LogScalar) -> LogScalar {
        LogScalar(self.0 - rhs.0)
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum_i exp(v_i))` via max-shift.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyReduction);
    }
    Ok(log_sum_exp_iter(values.iter().copied()))
}

/// Iterator form of [`log_sum_exp`]; an empty iterator reduces to negative infinity.
pub fn log_sum_exp_iter<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let it = values.into_iter();
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        // all zero magnitudes, +inf, or NaN present
        return if it.clone().any(f64::is_nan) { f64::NAN } else { max };
    }
    let sum: f64 = it.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    pub fn push(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Seeded, portable pseudo-random stream (ChaCha8).
///
/// Child streams are derived from `(seed, task id)` so parallel work can be
/// scheduled in any order without changing results.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for sub-task `task`; depends only on the seed, not on
    /// how much of this stream has been consumed.
    pub fn child(&self, task: u64) -> Rng {
        Rng::new(derive_seed(self.seed, task))
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64-style mixing of a parent seed and a task id.
pub fn derive_seed(seed: u64, task: u64) -> u64 {
    let mut z = seed ^ task.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform random permutation in place.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    items.shuffle(rng);
}

/// Central-difference gradient of a scalar field.
pub fn finite_diff_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::invalid("h", "step must be positive"));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        if !up.is_finite() {
            return Err(Error::NonFinite {
                what: "function value",
                point: probe,
            });
        }
        probe[i] = x[i] - h;
        let down = f(&probe);
        if !down.is_finite() {
            return Err(Error::NonFinite {
                what: "function value",
                point: probe,
            });
        }
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Composite Simpson rule on `[a, b]` with `intervals` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let m = (intervals.max(2) + 1) & !1;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::numerics::Rng;
    use rand::RngCore;

    #[test]
    fn lse_examples() {
        assert_eq!(log_sum_exp(&[3.5]).unwrap(), 3.5);
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let big = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
        assert!(matches!(log_sum_exp(&[]), Err(Error::EmptyReduction)));
    }

    #[test]
    fn lse_handles_zero_magnitudes() {
        let v = log_sum_exp(&[f64::NEG_INFINITY, 2.0]).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn streaming_matches_batch() {
        let vals = [-3.0, 10.0, 2.5, -700.0, 9.99];
        let mut acc = LogSumExp::default();
        for v in vals {
            acc.push(v);
        }
        assert!((acc.value() - log_sum_exp(&vals).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shuffle_small_cases() {
        let mut rng = Rng::new(1);
        let mut empty: Vec<usize> = vec![];
        shuffle(&mut empty, &mut rng);
        assert!(empty.is_empty());
        let mut one = vec![5];
        shuffle(&mut one, &mut rng);
        assert_eq!(one, vec![5]);
    }

    #[test]
    fn shuffle_replays_with_same_seed() {
        let run = || {
            let mut v = vec![1, 2, 3];
            shuffle(&mut v, &mut Rng::new(42));
            v
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn child_streams_do_not_depend_on_parent_consumption() {
        let parent = Rng::new(7);
        let mut used = parent.clone();
        used.next_u64();
        assert_eq!(parent.child(3).next_u64(), used.child(3).next_u64());
        assert_ne!(parent.child(3).next_u64(), parent.child(4).next_u64());
    }

    #[test]
    fn fd_gradient_of_constant_and_quadratic() {
        let g = finite_diff_gradient(|_| 4.0, &[0.3, -1.0], 1e-4).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = finite_diff_gradient(|x| -0.5 * dot(x, x), &[1.0, 2.0], 1e-4).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-8 && (g[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn fd_gradient_reports_offending_point() {
        let err = finite_diff_gradient(|x| if x[0] > 0.0 { f64::NAN } else { 0.0 }, &[0.0], 1e-3)
            .unwrap_err();
        match err {
            Error::NonFinite { point, .. } => assert_eq!(point, vec![1e-3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn lse_at_least_max(v in prop::collection::vec(-500.0f64..500.0, 1..20)) {
            let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(log_sum_exp(&v).unwrap() >= m);
        }

        #[test]
        fn lse_equals_max_for_single_finite(x in -500.0f64..500.0, k in 0usize..5) {
            let mut v = vec![f64::NEG_INFINITY; k];
            v.push(x);
            prop_assert_eq!(log_sum_exp(&v).unwrap(), x);
        }

        #[test]
        fn lse_shift_equivariant(v in prop::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let lhs = log_sum_exp(&shifted).unwrap();
            let rhs = log_sum_exp(&v).unwrap() + c;
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }

        #[test]
        fn shuffle_preserves_multiset(mut v in prop::collection::vec(0u32..10, 0..40), seed: u64) {
            let mut sorted = v.clone();
            sorted.sort();
            shuffle(&mut v, &mut Rng::new(seed));
            v.sort();
            prop_assert_eq!(v, sorted);
        }
    }
}
