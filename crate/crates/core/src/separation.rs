//! Feature occurrence counting and the top-k high/low frequency split.

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::LabeledInstance;

/// Per-feature presence counts over a stream of instances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureCounts {
    counts: HashMap<u32, u64>,
    total: u64,
}

impl FeatureCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, instance: &LabeledInstance) {
        self.total += 1;
        for &(index, value) in &instance.features {
            if value != 0.0 {
                *self.counts.entry(index).or_insert(0) += 1;
            }
        }
    }

    /// Pointwise sum; counts over disjoint stream segments combine this way.
    pub fn merge(&mut self, other: &FeatureCounts) {
        self.total += other.total;
        for (&index, &count) in &other.counts {
            *self.counts.entry(index).or_insert(0) += count;
        }
    }

    pub fn get(&self, index: u32) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.counts.keys().copied().max()
    }

    /// `(index, count)` pairs in ascending index order.
    pub fn sorted(&self) -> Vec<(u32, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(&i, &c)| (i, c)).collect();
        v.sort_unstable_by_key(|&(i, _)| i);
        v
    }

    /// Writes `index count` lines sorted by index.
    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (index, count) in self.sorted() {
            writeln!(out, "{index} {count}")?;
        }
        Ok(())
    }
}

/// Counts feature presence in one pass.
pub fn count_features<I>(instances: I) -> Result<FeatureCounts>
where
    I: IntoIterator<Item = Result<LabeledInstance>>,
{
    let mut counts = FeatureCounts::new();
    for instance in instances {
        counts.observe(&instance?);
    }
    Ok(counts)
}

/// Counts over a seeded Bernoulli sample of the stream. A fraction of 1
/// consumes no randomness and equals [`count_features`].
pub fn count_features_sampled<I>(instances: I, fraction: f64, seed: u64) -> Result<FeatureCounts>
where
    I: IntoIterator<Item = Result<LabeledInstance>>,
{
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sample fraction {fraction} outside (0, 1]"
        )));
    }
    if fraction == 1.0 {
        return count_features(instances);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = FeatureCounts::new();
    for instance in instances {
        let instance = instance?;
        if rng.random::<f64>() < fraction {
            counts.observe(&instance);
        }
    }
    Ok(counts)
}

/// Bi-partition of `{1..d}` into the high-frequency list `H` (rank order)
/// and its complement `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeparation {
    dim: u32,
    high: Vec<u32>,
    ranks: HashMap<u32, usize>,
}

impl FeatureSeparation {
    /// Validates `high` against `dim`: no duplicates, every index in `[1, dim]`.
    pub fn new(dim: u32, high: Vec<u32>) -> Result<Self> {
        let mut ranks = HashMap::with_capacity(high.len());
        for (rank, &index) in high.iter().enumerate() {
            if index == 0 || index > dim {
                return Err(Error::InvalidArgument(format!(
                    "high-frequency index {index} outside [1, {dim}]"
                )));
            }
            if ranks.insert(index, rank).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate high-frequency index {index}"
                )));
            }
        }
        Ok(Self { dim, high, ranks })
    }

    /// Separation with `H = ∅`; the model reduces to a linear one.
    pub fn linear(dim: u32) -> Self {
        Self {
            dim,
            high: Vec::new(),
            ranks: HashMap::new(),
        }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.high.len()
    }

    pub fn high(&self) -> &[u32] {
        &self.high
    }

    /// Rank of `index` within `H`, or `None` when it is a low-frequency feature.
    #[inline]
    pub fn rank(&self, index: u32) -> Option<usize> {
        self.ranks.get(&index).copied()
    }

    pub fn is_high(&self, index: u32) -> bool {
        self.ranks.contains_key(&index)
    }

    pub fn is_low(&self, index: u32) -> bool {
        (1..=self.dim).contains(&index) && !self.is_high(index)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "pqr-sep v1 d={} k={}", self.dim, self.high.len())?;
        for index in &self.high {
            writeln!(out, "{index}")?;
        }
        Ok(())
    }

    /// Reads the block written by [`FeatureSeparation::write_to`], consuming
    /// exactly the header and `k` index lines.
    pub fn read_from<R: BufRead>(reader: &mut R) -> Result<Self> {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let (dim, k) = parse_sep_header(line.trim_end())?;
        let mut high = Vec::with_capacity(k);
        for n in 0..k {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::Format(format!(
                    "separation truncated: expected {k} indices, found {n}"
                )));
            }
            let index = line
                .trim_end()
                .parse()
                .map_err(|_| Error::Format(format!("bad separation index `{}`", line.trim_end())))?;
            high.push(index);
        }
        Self::new(dim, high).map_err(|e| Error::Format(e.to_string()))
    }
}

fn parse_sep_header(line: &str) -> Result<(u32, usize)> {
    let bad = || Error::Format(format!("bad separation header `{line}`"));
    let mut parts = line.split(' ');
    if parts.next() != Some("pqr-sep") || parts.next() != Some("v1") {
        return Err(bad());
    }
    let dim = parts
        .next()
        .and_then(|p| p.strip_prefix("d="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    let k = parts
        .next()
        .and_then(|p| p.strip_prefix("k="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((dim, k))
}

/// Picks the `k` most frequent indices in `[1, d]`. Ties go to the smaller
/// index; unseen features count as zero.
pub fn select_top_k(counts: &FeatureCounts, k: usize, dim: u32) -> Result<FeatureSeparation> {
    if k > dim as usize {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds dimension {dim}")));
    }
    let mut ranked: Vec<(u32, u64)> = counts
        .counts
        .iter()
        .filter(|&(&i, _)| i >= 1 && i <= dim)
        .map(|(&i, &c)| (i, c))
        .collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut high: Vec<u32> = ranked.iter().take(k).map(|&(i, _)| i).collect();
    if high.len() < k {
        let seen: HashSet<u32> = ranked.iter().map(|&(i, _)| i).collect();
        let missing = k - high.len();
        high.extend((1..=dim).filter(|i| !seen.contains(i)).take(missing));
    }
    FeatureSeparation::new(dim, high)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_line;
    use proptest::prelude::*;
    use rand::Rng;

    fn counts_of(pairs: &[(u32, u64)], total: u64) -> FeatureCounts {
        FeatureCounts {
            counts: pairs.iter().copied().collect(),
            total,
        }
    }

    #[test]
    fn counts_presence() {
        let lines = ["1 1:1 2:1", "1 2:5 3:1", "0 2:-1"];
        let counts = count_features(lines.iter().map(|l| Ok(parse_line(l).unwrap()))).unwrap();
        assert_eq!(counts.sorted(), vec![(1, 1), (2, 3), (3, 1)]);
        assert_eq!(counts.total(), 3);

        let empty = count_features(std::iter::empty()).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.total(), 0);

        let zero = count_features([Ok(parse_line("1 4:0 5:1").unwrap())]).unwrap();
        assert_eq!(zero.get(4), 0);
        assert_eq!(zero.get(5), 1);
    }

    #[test]
    fn top_k_breaks_ties_by_index() {
        let c = counts_of(&[(1, 10), (2, 5), (3, 5), (4, 1)], 10);
        assert_eq!(select_top_k(&c, 2, 4).unwrap().high(), &[1, 2]);
        let all = select_top_k(&c, 4, 4).unwrap();
        assert_eq!(all.high(), &[1, 2, 3, 4]);
        assert!((1..=4).all(|i| !all.is_low(i)));
        let none = select_top_k(&c, 0, 4).unwrap();
        assert_eq!(none.k(), 0);
        assert!((1..=4).all(|i| none.is_low(i)));
        assert!(matches!(select_top_k(&c, 5, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn top_k_fills_with_unseen_features() {
        let c = counts_of(&[(5, 2)], 2);
        assert_eq!(select_top_k(&c, 3, 6).unwrap().high(), &[5, 1, 2]);
    }

    #[test]
    fn separation_file_round_trip() {
        let sep = FeatureSeparation::new(10, vec![7, 2, 9]).unwrap();
        let mut bytes = Vec::new();
        sep.write_to(&mut bytes).unwrap();
        assert_eq!(
            String::from_utf8(bytes.clone()).unwrap(),
            "pqr-sep v1 d=10 k=3\n7\n2\n9\n"
        );
        let back = FeatureSeparation::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, sep);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, bytes);

        assert!(FeatureSeparation::read_from(&mut "pqr-sep v2 d=1 k=0\n".as_bytes()).is_err());
        assert!(FeatureSeparation::read_from(&mut "pqr-sep v1 d=3 k=2\n1\n".as_bytes()).is_err());
        assert!(FeatureSeparation::read_from(&mut "pqr-sep v1 d=3 k=2\n1\n1\n".as_bytes()).is_err());
        assert!(FeatureSeparation::new(3, vec![4]).is_err());
    }

    #[test]
    fn merge_adds_pointwise() {
        let mut a = counts_of(&[(1, 2), (2, 1)], 3);
        a.merge(&counts_of(&[(2, 4), (9, 1)], 5));
        assert_eq!(a.sorted(), vec![(1, 2), (2, 5), (9, 1)]);
        assert_eq!(a.total(), 8);
    }

    proptest! {
        #[test]
        fn top_k_is_deterministic_and_ordered(
            pairs in proptest::collection::vec((1u32..60, 1u64..8), 0..60),
            k in 0usize..60,
            seed in any::<u64>(),
        ) {
            let dim = 60u32;
            let map: HashMap<u32, u64> = pairs.into_iter().collect();
            let a = counts_of(&map.iter().map(|(&i, &c)| (i, c)).collect::<Vec<_>>(), 10);
            // Same contents, different insertion order and therefore a different iteration order.
            let mut shuffled: Vec<_> = map.iter().map(|(&i, &c)| (i, c)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let b = counts_of(&shuffled, 10);
            let sa = select_top_k(&a, k, dim).unwrap();
            let sb = select_top_k(&b, k, dim).unwrap();
            prop_assert_eq!(sa.high(), sb.high());
            prop_assert_eq!(sa.k(), k);

            let min_high = sa.high().iter().map(|&i| a.get(i)).min();
            let low: Vec<u32> = (1..=dim).filter(|&i| sa.is_low(i)).collect();
            prop_assert_eq!(low.len() + k, dim as usize);
            if let Some(min_high) = min_high {
                for &j in &low {
                    let cj = a.get(j);
                    prop_assert!(cj <= min_high);
                    if cj == min_high {
                        // boundary tie: every H member with this count has a smaller index
                        for &i in sa.high() {
                            if a.get(i) == cj {
                                prop_assert!(i < j);
                            }
                        }
                    }
                }
            }
        }
    }
}
