//! Multi-indices `α ∈ ℕ^k` and the truncated index sets `I_{p,k}`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A finite multi-index. Ordered graded-lexicographically: by degree first,
/// then descending lexicographic order within a degree, so that
/// `(0,0) < (1,0) < (0,1) < (2,0) < (1,1) < (0,2)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zeros(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// The unit index `e_slot` over `len` slots.
    pub fn unit(len: usize, slot: usize) -> Self {
        let mut v = vec![0; len];
        v[slot] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, slot: usize) -> u32 {
        self.0.get(slot).copied().unwrap_or(0)
    }

    /// `|α| = Σ α_i`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `|α|₀ = #{i : α_i > 0}`.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&a| a > 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// `α⁻(slot)`, or `None` when `α_slot = 0`.
    pub fn decrement(&self, slot: usize) -> Option<MultiIndex> {
        match self.0.get(slot) {
            Some(&a) if a > 0 => {
                let mut v = self.0.clone();
                v[slot] -= 1;
                Some(MultiIndex(v))
            }
            _ => None,
        }
    }

    /// Slots with a positive entry together with that entry.
    pub fn support(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().enumerate().filter(|(_, &a)| a > 0).map(|(i, &a)| (i, a))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
            .then_with(|| self.0.len().cmp(&other.0.len()))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    /// Dash-joined entries, e.g. `0-2-1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split('-')
            .map(|part| {
                part.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("bad multi-index entry {part:?} in {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }
}

/// `I_{p,k}` in graded-lexicographic order. Has `C(p+k, k)` elements.
pub fn enumerate_multi_indices(max_degree: u32, slots: usize) -> Vec<MultiIndex> {
    let all: Vec<usize> = (0..slots).collect();
    enumerate_on_slots(max_degree, slots, &all)
}

/// Multi-indices of length `len` with degree ≤ `max_degree` whose support lies
/// in `slots` (which must be increasing), in graded-lexicographic order.
pub fn enumerate_on_slots(max_degree: u32, len: usize, slots: &[usize]) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; len];
    for degree in 0..=max_degree {
        compositions(degree, slots, &mut current, &mut out);
    }
    out
}

fn compositions(remaining: u32, slots: &[usize], current: &mut [u32], out: &mut Vec<MultiIndex>) {
    match slots {
        [] => {
            if remaining == 0 {
                out.push(MultiIndex(current.to_vec()));
            }
        }
        [last] => {
            current[*last] = remaining;
            out.push(MultiIndex(current.to_vec()));
            current[*last] = 0;
        }
        [first, rest @ ..] => {
            for a in (0..=remaining).rev() {
                current[*first] = a;
                compositions(remaining - a, rest, current, out);
            }
            current[*first] = 0;
        }
    }
}

/// `C(n, k)` in `u128`, saturating.
pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}
