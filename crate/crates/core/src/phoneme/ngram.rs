use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Phoneme, PhonemeSequence};

/// Counts of m-consecutive-phoneme tuples for m = 1..=max_order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramStats {
    orders: Vec<BTreeMap<Vec<Phoneme>, u64>>,
}

impl NGramStats {
    pub fn new(max_order: usize) -> Self {
        Self {
            orders: vec![BTreeMap::new(); max_order],
        }
    }

    pub fn max_order(&self) -> usize {
        self.orders.len()
    }

    /// Adds every window of one sequence; windows never span two calls.
    pub fn add_sequence(&mut self, phones: &[Phoneme]) {
        for (i, table) in self.orders.iter_mut().enumerate() {
            for w in phones.windows(i + 1) {
                *table.entry(w.to_vec()).or_insert(0) += 1;
            }
        }
    }

    /// Adds another shard's counts. Associative and commutative.
    pub fn merge(&mut self, other: &NGramStats) {
        if other.orders.len() > self.orders.len() {
            self.orders.resize(other.orders.len(), BTreeMap::new());
        }
        for (mine, theirs) in self.orders.iter_mut().zip(&other.orders) {
            for (k, v) in theirs {
                *mine.entry(k.clone()).or_insert(0) += v;
            }
        }
    }

    /// Count table for order `m` (1-based); empty when `m` exceeds the counted orders.
    pub fn counts(&self, m: usize) -> Option<&BTreeMap<Vec<Phoneme>, u64>> {
        m.checked_sub(1).and_then(|i| self.orders.get(i))
    }

    /// N_m: number of distinct m-tuples observed.
    pub fn arrangements(&self, m: usize) -> usize {
        self.counts(m).map_or(0, BTreeMap::len)
    }

    pub fn total(&self, m: usize) -> u64 {
        self.counts(m).map_or(0, |t| t.values().sum())
    }

    /// Shannon entropy (bits) of the order-`m` distribution; 0 when empty.
    pub fn entropy(&self, m: usize) -> f64 {
        let Some(table) = self.counts(m) else {
            return 0.0;
        };
        let total = table.values().sum::<u64>() as f64;
        if total == 0.0 {
            return 0.0;
        }
        let s: f64 = table
            .values()
            .map(|&c| {
                let p = c as f64 / total;
                -p * p.log2()
            })
            .sum();
        s.max(0.0)
    }

    pub fn unigrams(&self) -> impl Iterator<Item = Phoneme> + '_ {
        self.counts(1)
            .into_iter()
            .flat_map(|t| t.keys().map(|k| k[0]))
    }
}

pub fn count_ngrams(seqs: &[PhonemeSequence], max_order: usize) -> NGramStats {
    let mut stats = NGramStats::new(max_order);
    for s in seqs {
        stats.add_sequence(&s.phones);
    }
    stats
}

/// Same result as [`count_ngrams`], counted in parallel shards.
pub fn count_ngrams_parallel(seqs: &[PhonemeSequence], max_order: usize) -> NGramStats {
    seqs.par_iter()
        .fold(
            || NGramStats::new(max_order),
            |mut acc, s| {
                acc.add_sequence(&s.phones);
                acc
            },
        )
        .reduce(
            || NGramStats::new(max_order),
            |mut a, b| {
                a.merge(&b);
                a
            },
        )
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyConfigError {
    #[error("at least one weight is required")]
    Empty,
    #[error("weight {index} is negative or not finite: {value}")]
    BadWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    Sum(f64),
}

/// Per-order weights w_1..w_M of the extended entropy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyConfig {
    weights: Vec<f64>,
}

impl EntropyConfig {
    pub fn new(weights: Vec<f64>) -> Result<Self, EntropyConfigError> {
        if weights.is_empty() {
            return Err(EntropyConfigError::Empty);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(EntropyConfigError::BadWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(EntropyConfigError::Sum(sum));
        }
        Ok(Self { weights })
    }

    pub fn uniform(max_order: usize) -> Result<Self, EntropyConfigError> {
        if max_order == 0 {
            return Err(EntropyConfigError::Empty);
        }
        Self::new(vec![1.0 / max_order as f64; max_order])
    }

    pub fn max_order(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for EntropyConfig {
    /// M = 4 with w_m = 0.25.
    fn default() -> Self {
        Self {
            weights: vec![0.25; 4],
        }
    }
}

/// S = Σ_m w_m S_m with S_m the entropy of the order-m distribution.
///
/// Orders beyond `stats.max_order()` contribute nothing; count with at least
/// `cfg.max_order()` to get the full value.
pub fn extended_entropy(stats: &NGramStats, cfg: &EntropyConfig) -> f64 {
    cfg.weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * stats.entropy(i + 1))
        .sum::<f64>()
        .max(0.0)
}

pub fn coverage_gaps(stats: &NGramStats, inventory: &BTreeSet<Phoneme>) -> BTreeSet<Phoneme> {
    let covered: BTreeSet<Phoneme> = stats.unigrams().collect();
    inventory.difference(&covered).copied().collect()
}

/// Side-by-side N_m table for several corpora.
pub fn arrangement_table(corpora: &[(&str, &NGramStats)], max_order: usize) -> String {
    let width = corpora.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(8);
    let mut out = format!("{:<4}", "m");
    for (name, _) in corpora {
        let _ = write!(out, " {name:>width$}");
    }
    out.push('\n');
    for m in 1..=max_order {
        let _ = write!(out, "{m:<4}");
        for (_, stats) in corpora {
            let _ = write!(out, " {:>width$}", stats.arrangements(m));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq(s: &str) -> PhonemeSequence {
        PhonemeSequence::parse(s).unwrap()
    }

    fn key(s: &str) -> Vec<Phoneme> {
        seq(s).phones
    }

    #[test]
    fn two_script_counts() {
        let stats = count_ngrams(&[seq("a b"), seq("b a")], 2);
        let uni = stats.counts(1).unwrap();
        assert_eq!(uni[&key("a")], 2);
        assert_eq!(uni[&key("b")], 2);
        let bi = stats.counts(2).unwrap();
        assert_eq!(bi.len(), 2);
        assert_eq!(bi[&key("a b")], 1);
        assert_eq!(bi[&key("b a")], 1);
        // no cross-boundary (b, b)
        assert!(!bi.contains_key(&key("b b")));
    }

    #[test]
    fn single_phone() {
        let stats = count_ngrams(&[seq("a")], 4);
        assert_eq!(stats.arrangements(1), 1);
        for m in 2..=4 {
            assert_eq!(stats.arrangements(m), 0);
        }
    }

    #[test]
    fn empty_corpus() {
        let stats = count_ngrams(&[], 4);
        assert!((1..=4).all(|m| stats.arrangements(m) == 0));
        assert_eq!(extended_entropy(&stats, &EntropyConfig::default()), 0.0);
        assert_eq!(coverage_gaps(&stats, &Phoneme::inventory()), Phoneme::inventory());
    }

    #[test]
    fn entropy_fixed_points() {
        let stats = count_ngrams(&[seq("a b"), seq("b a")], 4);
        assert!((stats.entropy(1) - 1.0).abs() < 1e-15);
        assert!((stats.entropy(2) - 1.0).abs() < 1e-15);
        assert_eq!(stats.entropy(3), 0.0);
        assert!((extended_entropy(&stats, &EntropyConfig::default()) - 0.5).abs() < 1e-12);

        let degenerate = count_ngrams(&[seq("a a a")], 4);
        assert_eq!(extended_entropy(&degenerate, &EntropyConfig::default()), 0.0);

        let eight = count_ngrams(
            &["a", "i", "u", "e", "o", "k", "s", "t"].map(seq),
            4,
        );
        assert!((extended_entropy(&eight, &EntropyConfig::default()) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn gaps() {
        let inv: BTreeSet<Phoneme> = [Phoneme::A, Phoneme::K, Phoneme::Dy].into();
        let stats = count_ngrams(&[seq("k a")], 1);
        assert_eq!(coverage_gaps(&stats, &inv), [Phoneme::Dy].into());
        let full = count_ngrams(&[seq("k a dy")], 1);
        assert!(coverage_gaps(&full, &inv).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(EntropyConfig::new(vec![]).is_err());
        assert!(EntropyConfig::new(vec![0.5, 0.6]).is_err());
        assert!(EntropyConfig::new(vec![1.5, -0.5]).is_err());
        assert_eq!(EntropyConfig::uniform(4).unwrap(), EntropyConfig::default());
        assert_eq!(EntropyConfig::uniform(3).unwrap().max_order(), 3);
    }

    #[test]
    fn arrangement_table_layout() {
        let a = count_ngrams(&[seq("a b")], 2);
        let b = count_ngrams(&[seq("a b"), seq("b a")], 2);
        let t = arrangement_table(&[("toy", &a), ("toy2", &b)], 2);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].split_whitespace().eq(["1", "2", "2"]));
        assert!(lines[2].split_whitespace().eq(["2", "1", "2"]));
    }

    fn corpus() -> impl Strategy<Value = Vec<PhonemeSequence>> {
        let alphabet = &Phoneme::ALL[..10];
        proptest::collection::vec(
            proptest::collection::vec(proptest::sample::select(alphabet), 0..12)
                .prop_map(PhonemeSequence::new),
            0..12,
        )
    }

    proptest! {
        #[test]
        fn adding_never_decreases_arrangements(c in corpus(), extra in corpus()) {
            let before = count_ngrams(&c, 4);
            let mut all = c.clone();
            all.extend(extra);
            let after = count_ngrams(&all, 4);
            for m in 1..=4 {
                prop_assert!(after.arrangements(m) >= before.arrangements(m));
                prop_assert!(after.arrangements(m) as u64 <= after.total(m));
            }
        }

        #[test]
        fn order_invariance(c in corpus()) {
            let mut rev = c.clone();
            rev.reverse();
            let a = count_ngrams(&c, 4);
            let b = count_ngrams(&rev, 4);
            prop_assert_eq!(&a, &b);
            let cfg = EntropyConfig::default();
            prop_assert_eq!(extended_entropy(&a, &cfg).to_bits(), extended_entropy(&b, &cfg).to_bits());
            prop_assert_eq!(coverage_gaps(&a, &Phoneme::inventory()), coverage_gaps(&b, &Phoneme::inventory()));
        }

        #[test]
        fn merge_is_associative_and_commutative(a in corpus(), b in corpus(), c in corpus()) {
            let (sa, sb, sc) = (count_ngrams(&a, 3), count_ngrams(&b, 3), count_ngrams(&c, 3));
            let mut left = sa.clone();
            left.merge(&sb);
            left.merge(&sc);
            let mut bc = sb.clone();
            bc.merge(&sc);
            let mut right = sa.clone();
            right.merge(&bc);
            prop_assert_eq!(&left, &right);
            let mut ba = sb.clone();
            ba.merge(&sa);
            let mut ab = sa.clone();
            ab.merge(&sb);
            prop_assert_eq!(ab, ba);
            let all: Vec<_> = a.iter().chain(&b).chain(&c).cloned().collect();
            prop_assert_eq!(&count_ngrams_parallel(&all, 3), &left);
        }
    }
}
