//! Index sets `Inc^m_n`: strictly increasing `m`-tuples drawn from `[0, n)`.
//!
//! Tuples are enumerated in colexicographic order (sorted by the last index,
//! then the one before it, ...), which is the order in which the
//! combinatorial number system ranks them:
//! `rank(i_1 < ... < i_m) = sum_j C(i_j, j)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A strictly increasing vector of 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IncreasingTuple {
    indices: Vec<usize>,
}

impl IncreasingTuple {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTuple(format!(
                "{indices:?} is not strictly increasing"
            )));
        }
        Ok(Self { indices })
    }

    /// Checks the tuple also lives inside `[0, n)`.
    pub fn within(indices: Vec<usize>, n: usize) -> Result<Self> {
        let t = Self::new(indices)?;
        match t.indices.last() {
            Some(&last) if last >= n => Err(Error::IndexOutOfRange { index: last, n }),
            _ => Ok(t),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn order(&self) -> usize {
        self.indices.len()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.indices
    }

    /// Colexicographic rank. Independent of the ambient `n`.
    pub fn rank(&self) -> Result<u128> {
        rank_indices(&self.indices)
    }

    /// 1-based rendering, matching the usual `1 <= i_1 < ... < i_m <= n`.
    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }
}

impl TryFrom<Vec<usize>> for IncreasingTuple {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<IncreasingTuple> for Vec<usize> {
    fn from(t: IncreasingTuple) -> Self {
        t.indices
    }
}

impl fmt::Display for IncreasingTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, i) in self.one_based().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, ")")
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `C(n, m)` with checked 128-bit arithmetic; 0 when `m > n`.
pub fn count_tuples(n: usize, m: usize) -> Result<u128> {
    if m > n {
        return Ok(0);
    }
    let k = m.min(n - m) as u128;
    let n128 = n as u128;
    let overflow = || Error::Overflow {
        n: n as u64,
        m: m as u64,
    };
    let mut r: u128 = 1;
    for i in 1..=k {
        // r * (n - k + i) / i is an integer; divide out the common factor first
        // so that the intermediate product only overflows when the result does.
        let g = gcd(r, i);
        let factor = (n128 - k + i) / (i / g);
        r = (r / g).checked_mul(factor).ok_or_else(overflow)?;
    }
    Ok(r)
}

/// `C(n, m)` as `f64`, for normalizations where exactness is not needed.
pub fn binomial_f64(n: usize, m: usize) -> f64 {
    if m > n {
        return 0.0;
    }
    let k = m.min(n - m);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

fn rank_indices(indices: &[usize]) -> Result<u128> {
    let mut rank: u128 = 0;
    for (j, &i) in indices.iter().enumerate() {
        let c = count_tuples(i, j + 1)?;
        rank = rank.checked_add(c).ok_or(Error::Overflow {
            n: i as u64,
            m: (j + 1) as u64,
        })?;
    }
    Ok(rank)
}

/// Colexicographic rank of `t` inside `Inc^m_n`; fails if `t` does not fit in `[0, n)`.
pub fn rank_tuple(t: &IncreasingTuple, n: usize) -> Result<u128> {
    if let Some(&last) = t.indices.last() {
        if last >= n {
            return Err(Error::IndexOutOfRange { index: last, n });
        }
    }
    t.rank()
}

/// Inverse of [`rank_tuple`].
pub fn unrank_tuple(rank: u128, n: usize, m: usize) -> Result<IncreasingTuple> {
    let count = count_tuples(n, m)?;
    if rank >= count {
        return Err(Error::RankOutOfRange { rank, n, m, count });
    }
    let mut indices = vec![0usize; m];
    let mut rest = rank;
    let mut upper = n; // candidate indices lie strictly below `upper`
    for j in (1..=m).rev() {
        // largest c < upper with C(c, j) <= rest; C(j - 1, j) = 0 guarantees one exists
        let mut lo = j - 1;
        let mut hi = upper - 1;
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if count_tuples(mid, j)? <= rest {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        indices[j - 1] = lo;
        rest -= count_tuples(lo, j)?;
        upper = lo;
    }
    Ok(IncreasingTuple { indices })
}

/// Advances `idx` to its colexicographic successor inside `Inc^m_n`.
/// Returns `false` (leaving `idx` unspecified) when `idx` was the last tuple.
pub fn next_colex(idx: &mut [usize], n: usize) -> bool {
    let m = idx.len();
    for j in 0..m {
        let limit = if j + 1 < m { idx[j + 1] } else { n };
        if idx[j] + 1 < limit {
            idx[j] += 1;
            for (l, v) in idx[..j].iter_mut().enumerate() {
                *v = l;
            }
            return true;
        }
    }
    false
}

/// Calls `f` on every element of `Inc^m_n` in colexicographic order,
/// reusing one buffer. Does nothing when `m > n`; calls `f(&[])` once when `m = 0`.
pub fn for_each_tuple(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m > n {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        f(&idx);
        if !next_colex(&mut idx, n) {
            break;
        }
    }
}

/// Stream of `Inc^m_n` in colexicographic order.
#[derive(Debug, Clone)]
pub struct TupleIter {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for TupleIter {
    type Item = IncreasingTuple;

    fn next(&mut self) -> Option<IncreasingTuple> {
        let out = self.current.clone()?;
        let mut cur = self.current.take().unwrap();
        if next_colex(&mut cur, self.n) {
            self.current = Some(cur);
        }
        Some(IncreasingTuple { indices: out })
    }
}

pub fn enumerate_tuples(n: usize, m: usize) -> TupleIter {
    TupleIter {
        n,
        current: (m <= n).then(|| (0..m).collect()),
    }
}
