//! Bath influence functionals by brute-force Wick pairing.
//!
//! Points are kept in operator order: minus-branch times from the latest to
//! the earliest, then plus-branch times from the earliest to the latest. Every
//! pair contributes `B(first, second)` with `first` the earlier point in that
//! order. Coincident points are separate slots, so multiplicities come out of
//! the enumeration by themselves.

use num_complex::Complex64;

use crate::bath::{LatticeCorrelation, Site};
use crate::error::{FrodsError, Result};

/// Largest number of points the enumeration accepts by default (11!! = 10395 pairings).
pub const DEFAULT_MAX_POINTS: usize = 12;

/// Continuous-time arguments of an influence functional.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeList {
    /// `-t_m <= ... <= -t_1`
    pub left: Vec<f64>,
    /// `t'_1 <= ... <= t'_m'`
    pub right: Vec<f64>,
}

impl TimeList {
    pub fn new(left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        if !left.iter().all(|&t| t <= 0.0) || !sorted(&left) {
            return Err(FrodsError::invalid("times.left", "must be non-positive and ascending"));
        }
        if !right.iter().all(|&t| t >= 0.0) || !sorted(&right) {
            return Err(FrodsError::invalid("times.right", "must be non-negative and ascending"));
        }
        Ok(TimeList { left, right })
    }

    pub fn len(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points in operator order.
    pub fn sequence(&self) -> Vec<f64> {
        self.left.iter().chain(&self.right).copied().collect()
    }
}

/// `(n - 1)!!` for even `n`, 0 for odd `n`.
pub fn pairing_count(n: usize) -> u64 {
    if n % 2 == 1 {
        return 0;
    }
    (1..n as u64).step_by(2).product()
}

/// Calls `visit` once per perfect pairing of `0..n`; pairs are `(i, j)` with `i < j`.
pub fn for_each_pairing(n: usize, visit: &mut impl FnMut(&[(usize, usize)])) {
    if n % 2 == 1 {
        return;
    }
    assert!(n <= 64, "pairing enumeration limited to 64 points");
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut pairs = Vec::with_capacity(n / 2);
    visit_rec(all, &mut pairs, visit);
}

fn visit_rec(
    remaining: u64,
    pairs: &mut Vec<(usize, usize)>,
    visit: &mut impl FnMut(&[(usize, usize)]),
) {
    if remaining == 0 {
        visit(pairs);
        return;
    }
    let i = remaining.trailing_zeros() as usize;
    let rest = remaining & !(1u64 << i);
    let mut later = rest;
    while later != 0 {
        let j = later.trailing_zeros() as usize;
        later &= later - 1;
        pairs.push((i, j));
        visit_rec(rest & !(1u64 << j), pairs, visit);
        pairs.pop();
    }
}

/// `Σ_pairings Π weight(i, j)` over perfect pairings of `0..n`.
pub fn sum_over_pairings(n: usize, weight: impl Fn(usize, usize) -> Complex64) -> Complex64 {
    if n % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    assert!(n <= 64, "pairing enumeration limited to 64 points");
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    sum_rec(all, &weight)
}

fn sum_rec(remaining: u64, weight: &impl Fn(usize, usize) -> Complex64) -> Complex64 {
    if remaining == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let i = remaining.trailing_zeros() as usize;
    let rest = remaining & !(1u64 << i);
    let mut later = rest;
    let mut total = Complex64::new(0.0, 0.0);
    while later != 0 {
        let j = later.trailing_zeros() as usize;
        later &= later - 1;
        let w = weight(i, j);
        if w.re != 0.0 || w.im != 0.0 {
            total += w * sum_rec(rest & !(1u64 << j), weight);
        }
    }
    total
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(FrodsError::OracleLimit(format!(
            "{n} points exceed the pairing cap of {cap}"
        )))
    } else {
        Ok(())
    }
}

/// Influence functional of a continuous time list; `b(earlier, later)`.
pub fn influence(
    times: &TimeList,
    b: impl Fn(f64, f64) -> Complex64,
    cap: usize,
) -> Result<Complex64> {
    check_cap(times.len(), cap)?;
    let seq = times.sequence();
    Ok(sum_over_pairings(seq.len(), |i, j| b(seq[i], seq[j])))
}

/// Lattice points in operator order for index lists `(j_{n-}, ..., j_{1-})`
/// and `(j_{1+}, ..., j_{n+})`; an index value `v` contributes `v` copies.
pub fn lattice_sequence(j_minus: &[u8], j_plus: &[u8]) -> Vec<Site> {
    let n = j_minus.len();
    let mut seq = Vec::new();
    for (i, &v) in j_minus.iter().enumerate() {
        for _ in 0..v {
            seq.push(Site::minus(n - i));
        }
    }
    for (i, &v) in j_plus.iter().enumerate() {
        for _ in 0..v {
            seq.push(Site::plus(i + 1));
        }
    }
    seq
}

/// Lattice influence functional with indices in `{0, 1, 2}`.
pub fn influence_lattice(
    j_minus: &[u8],
    j_plus: &[u8],
    corr: &impl LatticeCorrelation,
    cap: usize,
) -> Result<Complex64> {
    if let Some(&v) = j_minus.iter().chain(j_plus).find(|&&v| v > 2) {
        return Err(FrodsError::invalid("indices", format!("index {v} outside 0..=2")));
    }
    let seq = lattice_sequence(j_minus, j_plus);
    check_cap(seq.len(), cap)?;
    Ok(sum_over_pairings(seq.len(), |i, j| corr.pair(seq[i], seq[j])))
}
