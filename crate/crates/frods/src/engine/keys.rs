//! Circle patterns of bold diagrams and their dense enumeration.
//!
//! A key records, for every slot of the active window, how many open circles
//! sit there: bits of `ones` mark a single circle, `two` marks the (at most
//! one) slot holding a double insertion with both circles open.
//!
//! Keys of a [`KeySpace`] are ranked in a fixed order: keys without a two
//! come first, grouped by circle count and ranked colexicographically inside
//! each group; keys with a two follow, grouped by the position of the two,
//! then by the count of single circles, again colexicographically on the
//! remaining slots.

use std::sync::OnceLock;

use crate::error::{FrodsError, Result};

/// Widest window a key can describe.
pub const MAX_SLOTS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DiagramKey {
    pub ones: u128,
    pub two: Option<u8>,
}

#[inline]
fn bit(slot: usize) -> u128 {
    1u128 << slot
}

impl DiagramKey {
    pub const EMPTY: DiagramKey = DiagramKey { ones: 0, two: None };

    /// Key from per-slot values in `{0, 1, 2}`.
    pub fn from_slots(values: &[u8]) -> Option<Self> {
        let mut key = DiagramKey::EMPTY;
        for (s, &v) in values.iter().enumerate() {
            match v {
                0 => {}
                1 => key.ones |= bit(s),
                2 if key.two.is_none() => key.two = Some(s as u8),
                _ => return None,
            }
        }
        Some(key)
    }

    /// Ones and twos: a double insertion counts as two circles.
    #[inline]
    pub fn circle_count(&self) -> usize {
        self.ones.count_ones() as usize + if self.two.is_some() { 2 } else { 0 }
    }

    #[inline]
    pub fn slot(&self, s: usize) -> u8 {
        if self.two == Some(s as u8) {
            2
        } else if self.ones & bit(s) != 0 {
            1
        } else {
            0
        }
    }

    #[inline]
    pub fn is_plain(&self) -> bool {
        self.two.is_none()
    }

    /// Adds one circle at `s`; `None` if that would create a second two (or a three).
    #[inline]
    pub fn raise(&self, s: usize) -> Option<DiagramKey> {
        match self.slot(s) {
            0 => Some(DiagramKey {
                ones: self.ones | bit(s),
                two: self.two,
            }),
            1 if self.two.is_none() => Some(DiagramKey {
                ones: self.ones & !bit(s),
                two: Some(s as u8),
            }),
            _ => None,
        }
    }

    /// Splits off slot `s`, returning its value and the key with that slot cleared.
    #[inline]
    pub fn take(&self, s: usize) -> (u8, DiagramKey) {
        let v = self.slot(s);
        let rest = DiagramKey {
            ones: self.ones & !bit(s),
            two: if v == 2 { None } else { self.two },
        };
        (v, rest)
    }

    /// Moves every slot up by `by` positions.
    #[inline]
    pub fn shift_up(&self, by: usize) -> DiagramKey {
        DiagramKey {
            ones: self.ones << by,
            two: self.two.map(|t| t + by as u8),
        }
    }

    /// Per-slot values for the first `slots` slots.
    pub fn to_slots(&self, slots: usize) -> Vec<u8> {
        (0..slots).map(|s| self.slot(s)).collect()
    }
}

struct Binomials(Vec<[u128; MAX_SLOTS + 1]>);

fn binomials() -> &'static Binomials {
    static TABLE: OnceLock<Binomials> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![[0u128; MAX_SLOTS + 1]; MAX_SLOTS + 1];
        for n in 0..=MAX_SLOTS {
            t[n][0] = 1;
            for k in 1..=n {
                t[n][k] = t[n - 1][k - 1] + if k < n { t[n - 1][k] } else { 0 };
            }
        }
        Binomials(t)
    })
}

/// `C(n, k)`, zero when `k > n`.
#[inline]
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        0
    } else {
        binomials().0[n][k]
    }
}

/// Colexicographic rank of a bit set among the sets of the same size.
#[inline]
fn colex_rank(mut mask: u128) -> u128 {
    let t = &binomials().0;
    let mut rank = 0u128;
    let mut i = 1;
    while mask != 0 {
        let p = mask.trailing_zeros() as usize;
        rank += t[p][i];
        mask &= mask - 1;
        i += 1;
    }
    rank
}

/// Calls `f` on every `c`-subset of `0..n`, in increasing numeric (colex) order.
pub fn for_each_combination(n: usize, c: usize, mut f: impl FnMut(u128)) {
    if c > n {
        return;
    }
    if c == 0 {
        f(0);
        return;
    }
    let mut x: u128 = if c == 128 { u128::MAX } else { bit(c) - 1 };
    loop {
        f(x);
        let u = x & x.wrapping_neg();
        let v = match x.checked_add(u) {
            Some(v) => v,
            None => break,
        };
        let y = v | (((v ^ x) / u) >> 2);
        if n < 128 && y >> n != 0 {
            break;
        }
        x = y;
    }
}

/// Removes slot `t` and closes the gap.
#[inline]
fn compress(ones: u128, t: usize) -> u128 {
    let low = ones & (bit(t) - 1);
    let high = ones.checked_shr(t as u32 + 1).unwrap_or(0);
    low | (high << t)
}

/// Inverse of [`compress`] (slot `t` comes back empty).
#[inline]
fn expand(ones: u128, t: usize) -> u128 {
    let low = ones & (bit(t) - 1);
    let high = ones >> t;
    low | high.checked_shl(t as u32 + 1).unwrap_or(0)
}

/// All keys over `slots` slots with at most `max_circles` circles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySpace {
    slots: usize,
    max_circles: usize,
    twos: bool,
    plain_offsets: Vec<usize>,
    plain_len: usize,
    two_offsets: Vec<usize>,
    two_block: usize,
    len: usize,
}

/// Upper limit on the number of keys in one space.
pub const MAX_KEYS: usize = 1 << 26;

impl KeySpace {
    pub fn new(slots: usize, max_circles: usize, twos: bool) -> Result<Self> {
        if slots > MAX_SLOTS {
            return Err(FrodsError::invalid(
                "numerics",
                format!("window of {slots} slots exceeds the {MAX_SLOTS}-slot limit"),
            ));
        }
        let too_large = || FrodsError::StoreTooLarge {
            keys: usize::MAX,
            dim: 0,
        };
        let max_plain = max_circles.min(slots);
        let mut plain_offsets = Vec::with_capacity(max_plain + 2);
        let mut acc: u128 = 0;
        for c in 0..=max_plain {
            plain_offsets.push(acc as usize);
            acc += binomial(slots, c);
            if acc > MAX_KEYS as u128 {
                return Err(too_large());
            }
        }
        plain_offsets.push(acc as usize);
        let plain_len = acc as usize;

        let mut two_offsets = Vec::new();
        let mut block: u128 = 0;
        let with_twos = twos && slots >= 1 && max_circles >= 2;
        if with_twos {
            let rest = slots - 1;
            for c in 0..=(max_circles - 2).min(rest) {
                two_offsets.push(block as usize);
                block += binomial(rest, c);
                if block > MAX_KEYS as u128 {
                    return Err(too_large());
                }
            }
        }
        let total = plain_len as u128 + block * if with_twos { slots as u128 } else { 0 };
        if total > MAX_KEYS as u128 {
            return Err(too_large());
        }
        Ok(KeySpace {
            slots,
            max_circles,
            twos: with_twos,
            plain_offsets,
            plain_len,
            two_offsets,
            two_block: block as usize,
            len: total as usize,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn max_circles(&self) -> usize {
        self.max_circles
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of keys without a two.
    pub fn plain_len(&self) -> usize {
        self.plain_len
    }

    /// Dense position of `key`, or `None` when the key lies outside the space.
    #[inline]
    pub fn index(&self, key: DiagramKey) -> Option<usize> {
        if key.circle_count() > self.max_circles {
            return None;
        }
        debug_assert!(self.slots == MAX_SLOTS || key.ones >> self.slots == 0);
        let c = key.ones.count_ones() as usize;
        match key.two {
            None => Some(self.plain_offsets[c] + colex_rank(key.ones) as usize),
            Some(t) => {
                if !self.twos {
                    return None;
                }
                let t = t as usize;
                debug_assert!(t < self.slots);
                Some(
                    self.plain_len
                        + t * self.two_block
                        + self.two_offsets[c]
                        + colex_rank(compress(key.ones, t)) as usize,
                )
            }
        }
    }

    /// Every key, in index order.
    pub fn keys(&self) -> Vec<DiagramKey> {
        let mut out = Vec::with_capacity(self.len);
        for c in 0..self.plain_offsets.len() - 1 {
            for_each_combination(self.slots, c, |m| out.push(DiagramKey { ones: m, two: None }));
        }
        if self.twos {
            for t in 0..self.slots {
                for c in 0..self.two_offsets.len() {
                    for_each_combination(self.slots - 1, c, |m| {
                        out.push(DiagramKey {
                            ones: expand(m, t),
                            two: Some(t as u8),
                        })
                    });
                }
            }
        }
        debug_assert_eq!(out.len(), self.len);
        out
    }
}

/// Number of second-order keys over a full window of `2 k_max` slots holding
/// at most `d_max` circles.
pub fn diagram_count(d_max: usize, k_max: usize) -> u128 {
    let s = 2 * k_max;
    let mut total: u128 = (0..=d_max.min(s)).map(|k| binomial(s, k)).sum();
    if s >= 1 {
        for k in 2..=d_max {
            total += s as u128 * binomial(s - 1, k - 2);
        }
    }
    total
}

/// First-order analogue of [`diagram_count`].
pub fn first_order_count(d_max: usize, k_max: usize) -> u128 {
    let s = 2 * k_max;
    (0..=d_max.min(s)).map(|k| binomial(s, k)).sum()
}
