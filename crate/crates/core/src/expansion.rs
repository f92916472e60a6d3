//! PQR feature expansion.
//!
//! A separation with `k` high-frequency features maps a `d`-dimensional
//! sparse vector into `D = d + k(k-1)/2 + k + 1` coordinates laid out as
//!
//! ```text
//! [0, d)                      linear      x_i            at i - 1
//! [d, d + k(k-1)/2)           high pairs  x_i * x_j      lexicographic in (rank i, rank j)
//! [.., .. + k)                shared      x_i * x_L      one per high feature, by rank
//! D - 1                       bias        1
//! ```
//!
//! where `x_L` is the sum of the active low-frequency values. A linear model
//! over this expansion equals the PQR quadratic form.

use crate::error::{Error, Result};
use crate::separation::FeatureSeparation;

/// Sparse vector over expanded slots, strictly increasing slot order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpandedVector {
    entries: Vec<(usize, f64)>,
}

impl ExpandedVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps pre-sorted entries.
    pub fn from_entries(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument(
                "expanded slots must be strictly increasing".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, slot: usize) -> Option<f64> {
        self.entries
            .binary_search_by_key(&slot, |&(s, _)| s)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Dot product against a dense weight vector.
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(s, v)| weights[s] * v).sum()
    }

    fn clear(&mut self) {
        self.entries.clear();
    }

    fn push(&mut self, slot: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((slot, value));
        }
    }
}

/// What an expanded slot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Original feature (1-based index).
    Linear(u32),
    /// Product of two high features, lower rank first.
    Pair(u32, u32),
    /// High feature times the low-frequency sum.
    Shared(u32),
    Bias,
}

/// Deterministic layout of the expanded coordinate space for one separation.
#[derive(Debug, Clone, PartialEq)]
pub struct PqrIndexMap {
    separation: FeatureSeparation,
    d: usize,
    k: usize,
    pair_base: usize,
    shared_base: usize,
    expanded_dim: usize,
}

impl PqrIndexMap {
    pub fn new(separation: FeatureSeparation) -> Self {
        let d = separation.dim() as usize;
        let k = separation.k();
        let pair_base = d;
        let shared_base = d + k * k.saturating_sub(1) / 2;
        let expanded_dim = shared_base + k + 1;
        Self {
            separation,
            d,
            k,
            pair_base,
            shared_base,
            expanded_dim,
        }
    }

    pub fn separation(&self) -> &FeatureSeparation {
        &self.separation
    }

    /// Original dimension `d`.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Expanded dimension `D`.
    pub fn expanded_dim(&self) -> usize {
        self.expanded_dim
    }

    pub fn bias_slot(&self) -> usize {
        self.expanded_dim - 1
    }

    pub fn linear_slot(&self, index: u32) -> Option<usize> {
        let i = index as usize;
        (1..=self.d).contains(&i).then(|| i - 1)
    }

    /// Slot of the pair with ranks `a < b`.
    #[inline]
    pub fn pair_slot_by_rank(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < b && b < self.k);
        self.pair_base + a * (2 * self.k - a - 1) / 2 + (b - a - 1)
    }

    /// Pair slot for two distinct high features, in either order.
    pub fn pair_slot(&self, i: u32, j: u32) -> Option<usize> {
        let (a, b) = (self.separation.rank(i)?, self.separation.rank(j)?);
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(self.pair_slot_by_rank(a, b)),
            std::cmp::Ordering::Greater => Some(self.pair_slot_by_rank(b, a)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn shared_slot(&self, index: u32) -> Option<usize> {
        self.separation.rank(index).map(|r| self.shared_base + r)
    }

    /// Inverse of the slot functions.
    pub fn slot_kind(&self, slot: usize) -> Option<Slot> {
        if slot < self.pair_base {
            return Some(Slot::Linear(slot as u32 + 1));
        }
        if slot < self.shared_base {
            let mut offset = slot - self.pair_base;
            let high = self.separation.high();
            for a in 0..self.k {
                let row = self.k - a - 1;
                if offset < row {
                    return Some(Slot::Pair(high[a], high[a + 1 + offset]));
                }
                offset -= row;
            }
            unreachable!("pair offset within k(k-1)/2");
        }
        if slot < self.shared_base + self.k {
            return Some(Slot::Shared(self.separation.high()[slot - self.shared_base]));
        }
        (slot == self.bias_slot()).then_some(Slot::Bias)
    }

    /// PQR expansion of `features`.
    pub fn expand(&self, features: &[(u32, f64)]) -> Result<ExpandedVector> {
        let mut out = ExpandedVector::new();
        let mut scratch = Vec::new();
        self.expand_into(features, &mut out, &mut scratch)?;
        Ok(out)
    }

    /// As [`PqrIndexMap::expand`], reusing caller buffers. `high` is scratch
    /// space for the `(rank, value)` pairs of active high features.
    pub fn expand_into(
        &self,
        features: &[(u32, f64)],
        out: &mut ExpandedVector,
        high: &mut Vec<(usize, f64)>,
    ) -> Result<()> {
        out.clear();
        high.clear();
        let mut low_sum = 0.0;
        for &(index, value) in features {
            let slot = self
                .linear_slot(index)
                .ok_or_else(|| Error::Dimension(format!("feature index {index} outside [1, {}]", self.d)))?;
            out.push(slot, value);
            match self.separation.rank(index) {
                Some(rank) => high.push((rank, value)),
                None => low_sum += value,
            }
        }
        high.sort_unstable_by_key(|&(r, _)| r);

        for (n, &(a, xa)) in high.iter().enumerate() {
            for &(b, xb) in &high[n + 1..] {
                out.push(self.pair_slot_by_rank(a, b), xa * xb);
            }
        }
        if low_sum != 0.0 {
            for &(rank, value) in high.iter() {
                out.push(self.shared_base + rank, value * low_sum);
            }
        }
        out.push(self.bias_slot(), 1.0);
        Ok(())
    }
}
