//! Ordinal patterns of short windows.
//!
//! A window of `h + 1` values is mapped to the permutation of its time indices
//! that lists the values from largest to smallest. Equal values are listed in
//! ascending index order, which makes the encoding a total function.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{OpdError, Result};
use crate::scalar::Scalar;

/// Largest supported pattern order; `(h + 1)!` is at most 5040.
pub const MAX_ORDER: usize = 6;

const FACTORIALS: [usize; MAX_ORDER + 2] = [1, 1, 2, 6, 24, 120, 720, 5040];

/// Number of patterns of order `h`, i.e. `(h + 1)!`.
pub fn pattern_count(h: usize) -> Result<usize> {
    check_order(h)?;
    Ok(FACTORIALS[h + 1])
}

pub(crate) fn check_order(h: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&h) {
        Ok(())
    } else {
        Err(OpdError::UnsupportedOrder {
            h,
            min: 1,
            max: MAX_ORDER,
        })
    }
}

/// A permutation of `{0, …, h}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrdinalPattern {
    order: u8,
    perm: [u8; MAX_ORDER + 1],
}

impl OrdinalPattern {
    /// Build a pattern from an explicit permutation.
    pub fn from_perm(perm: &[usize]) -> Result<Self> {
        if perm.len() < 2 {
            return Err(OpdError::InvalidInput(format!(
                "pattern needs at least 2 entries, got {}",
                perm.len()
            )));
        }
        let h = perm.len() - 1;
        check_order(h)?;
        let mut seen = [false; MAX_ORDER + 1];
        let mut out = [0u8; MAX_ORDER + 1];
        for (slot, &v) in out.iter_mut().zip(perm) {
            if v > h || seen[v] {
                return Err(OpdError::InvalidInput(format!(
                    "{perm:?} is not a permutation of 0..={h}"
                )));
            }
            seen[v] = true;
            *slot = v as u8;
        }
        Ok(OrdinalPattern {
            order: h as u8,
            perm: out,
        })
    }

    /// Pattern order `h` (the pattern has `h + 1` entries).
    #[inline]
    pub fn order(&self) -> usize {
        self.order as usize
    }

    #[inline]
    pub fn perm(&self) -> &[u8] {
        &self.perm[..=self.order()]
    }

    /// Lexicographic rank among all patterns of the same order; matches the
    /// position in [`all_patterns`].
    pub fn rank(&self) -> usize {
        let p = self.perm();
        let m = p.len();
        let mut rank = 0;
        for i in 0..m {
            let smaller_later = p[i + 1..].iter().filter(|&&v| v < p[i]).count();
            rank += smaller_later * FACTORIALS[m - 1 - i];
        }
        rank
    }

    /// Spatial reversal `(π_h, …, π_0)`: the pattern of the negated window.
    pub fn space_reverse(&self) -> Self {
        let mut out = *self;
        out.perm[..=self.order()].reverse();
        out
    }

    /// Time reversal `(h − π_0, …, h − π_h)`: the pattern of the window read backwards.
    pub fn time_reverse(&self) -> Self {
        let mut out = *self;
        for v in &mut out.perm[..=self.order()] {
            *v = self.order - *v;
        }
        out
    }
}

impl fmt::Display for OrdinalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.perm().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for OrdinalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl FromStr for OrdinalPattern {
    type Err = OpdError;

    fn from_str(s: &str) -> Result<Self> {
        let perm = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| OpdError::InvalidInput(format!("bad pattern entry {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        OrdinalPattern::from_perm(&perm)
    }
}

impl Serialize for OrdinalPattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OrdinalPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordinal pattern of `x` (length `h + 1`).
pub fn encode_pattern<T: Scalar>(x: &[T]) -> Result<OrdinalPattern> {
    if x.len() < 2 {
        return Err(OpdError::InvalidInput(format!(
            "window needs at least 2 values, got {}",
            x.len()
        )));
    }
    check_order(x.len() - 1)?;
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(OpdError::InvalidInput(format!("non-finite value at index {i}")));
    }
    Ok(encode_unchecked(x))
}

/// Ordinal pattern of the path `(0, y_1, y_1 + y_2, …)` built from `h` increments.
pub fn encode_increments<T: Scalar>(y: &[T]) -> Result<OrdinalPattern> {
    if y.is_empty() {
        return Err(OpdError::InvalidInput("need at least one increment".into()));
    }
    check_order(y.len())?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(OpdError::InvalidInput(format!("non-finite increment at index {i}")));
    }
    Ok(encode_increments_unchecked(y))
}

/// Caller guarantees `2 <= x.len() <= MAX_ORDER + 1` and finite entries.
#[inline]
pub(crate) fn encode_unchecked<T: Scalar>(x: &[T]) -> OrdinalPattern {
    let m = x.len();
    let mut perm = [0u8; MAX_ORDER + 1];
    for (i, slot) in perm.iter_mut().enumerate().take(m) {
        *slot = i as u8;
    }
    // Insertion sort, descending by value; strict comparison keeps equal
    // values in ascending index order.
    for i in 1..m {
        let cur = perm[i];
        let v = x[cur as usize];
        let mut j = i;
        while j > 0 && x[perm[j - 1] as usize] < v {
            perm[j] = perm[j - 1];
            j -= 1;
        }
        perm[j] = cur;
    }
    OrdinalPattern {
        order: (m - 1) as u8,
        perm,
    }
}

#[inline]
pub(crate) fn encode_increments_unchecked<T: Scalar>(y: &[T]) -> OrdinalPattern {
    let mut path = [T::zero(); MAX_ORDER + 1];
    let mut acc = T::zero();
    for (slot, &v) in path[1..].iter_mut().zip(y) {
        acc = acc + v;
        *slot = acc;
    }
    encode_unchecked(&path[..=y.len()])
}

/// Spatial reversal of `p`.
pub fn space_reverse(p: &OrdinalPattern) -> OrdinalPattern {
    p.space_reverse()
}

/// Time reversal of `p`.
pub fn time_reverse(p: &OrdinalPattern) -> OrdinalPattern {
    p.time_reverse()
}

/// All `(h + 1)!` patterns of order `h` in lexicographic order.
pub fn all_patterns(h: usize) -> Result<Vec<OrdinalPattern>> {
    check_order(h)?;
    let mut current: Vec<usize> = (0..=h).collect();
    let mut out = Vec::with_capacity(FACTORIALS[h + 1]);
    loop {
        out.push(OrdinalPattern::from_perm(&current)?);
        if !next_permutation(&mut current) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// A set containing exactly one of `π` and its spatial reversal for every `π`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternHalfSet {
    pub h: usize,
    pub members: Vec<OrdinalPattern>,
}

impl PatternHalfSet {
    pub fn contains(&self, p: &OrdinalPattern) -> bool {
        self.members.binary_search(p).is_ok()
    }

    /// Check the half-set property against the full pattern set.
    pub fn is_valid(&self) -> bool {
        let Ok(all) = all_patterns(self.h) else {
            return false;
        };
        self.members.len() * 2 == all.len()
            && all.iter().all(|p| self.contains(p) != self.contains(&p.space_reverse()))
    }

    /// Build from an arbitrary member list (sorted internally).
    pub fn from_members(h: usize, mut members: Vec<OrdinalPattern>) -> Result<Self> {
        check_order(h)?;
        if members.iter().any(|p| p.order() != h) {
            return Err(OpdError::InvalidInput("member of wrong order".into()));
        }
        members.sort();
        members.dedup();
        Ok(PatternHalfSet { h, members })
    }
}

/// Deterministic half-set: the lexicographically smaller member of each
/// `{π, S(π)}` pair.
pub fn canonical_half(h: usize) -> Result<PatternHalfSet> {
    let members = all_patterns(h)?
        .into_iter()
        .filter(|p| *p < p.space_reverse())
        .collect();
    Ok(PatternHalfSet { h, members })
}
