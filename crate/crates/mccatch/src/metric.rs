//! Metric spaces: element storage plus a pluggable distance contract.
//!
//! A [`MetricSpace`] owns the elements of one dataset and knows how to
//! measure the distance between any two of them. Three payload kinds are
//! supported: real-valued vectors under an L_p norm, words under the
//! unit-cost edit distance, and opaque elements whose distances come from
//! a caller-provided callback. Every element is addressed by a dense
//! 0-based id.
//!
//! The space also reports the transformation cost `t` of its metric: the
//! number of bits needed to describe turning one element into another
//! element that is one unit of distance away. It is the per-unit currency
//! used by the compression-based scores.

use std::fmt;
use std::sync::Arc;

use crate::detect::code_length;
use crate::error::{McCatchError, Result};

/// Distance callback for externally defined metrics. Receives two element
/// ids and must return a nonnegative, symmetric distance.
pub type ExternalDistanceFn = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

enum Payload {
    /// Row-major coordinates, `dim` per element, under the L_p norm.
    Vectors { dim: usize, p: f64, data: Vec<f64> },
    /// One word per element; distances are unit-cost Levenshtein over
    /// Unicode scalar values.
    Words {
        items: Vec<Vec<char>>,
        alphabet_size: u64,
        max_word_len: u64,
    },
    /// Caller-provided distance over `n` opaque elements.
    External {
        n: usize,
        cost: f64,
        dist: ExternalDistanceFn,
    },
}

/// A dataset bound to its distance function.
///
/// Distance evaluation is pure, so a space may be queried from many
/// threads concurrently; it is immutable after construction.
pub struct MetricSpace {
    payload: Payload,
}

impl fmt::Debug for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.payload {
            Payload::Vectors { dim, p, data } => f
                .debug_struct("MetricSpace::Vectors")
                .field("n", &(data.len() / dim.max(&1)))
                .field("dim", dim)
                .field("p", p)
                .finish(),
            Payload::Words { items, .. } => f
                .debug_struct("MetricSpace::Words")
                .field("n", &items.len())
                .finish(),
            Payload::External { n, cost, .. } => f
                .debug_struct("MetricSpace::External")
                .field("n", n)
                .field("cost", cost)
                .finish(),
        }
    }
}

impl MetricSpace {
    /// Builds a vector space under the L_p norm (`p >= 1`).
    ///
    /// All rows must share one dimensionality and contain finite
    /// coordinates only; NaN or infinite values are rejected here rather
    /// than poisoning distances later.
    pub fn vectors(rows: Vec<Vec<f64>>, p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 || !p.is_finite() {
            return Err(McCatchError::Config(format!(
                "L_p exponent must be a finite real >= 1, got {p}"
            )));
        }
        let dim = match rows.first() {
            Some(r) => r.len(),
            None => 0,
        };
        if dim == 0 && !rows.is_empty() {
            return Err(McCatchError::InvalidInput(
                "vector elements must have at least one coordinate".into(),
            ));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(McCatchError::InvalidInput(format!(
                    "row {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(McCatchError::InvalidInput(format!(
                        "row {i} contains a non-finite coordinate"
                    )));
                }
                data.push(v);
            }
        }
        Ok(Self {
            payload: Payload::Vectors { dim, p, data },
        })
    }

    /// Builds a word space under the unit-cost edit distance, deriving the
    /// alphabet size and longest-word length from the data.
    pub fn words(items: Vec<String>) -> Result<Self> {
        let mut alphabet = std::collections::BTreeSet::new();
        let mut max_len = 0u64;
        for w in &items {
            let len = w.chars().count() as u64;
            max_len = max_len.max(len);
            alphabet.extend(w.chars());
        }
        // Degenerate corpora (all-empty words) still need positive metadata.
        Self::words_with_metadata(items, alphabet.len().max(1) as u64, max_len.max(1))
    }

    /// Builds a word space with explicit alphabet metadata, used when the
    /// corpus at hand is a sample of a larger known universe.
    pub fn words_with_metadata(
        items: Vec<String>,
        alphabet_size: u64,
        max_word_len: u64,
    ) -> Result<Self> {
        if alphabet_size == 0 || max_word_len == 0 {
            return Err(McCatchError::Config(
                "edit-distance metadata (alphabet size, longest word) must be positive".into(),
            ));
        }
        let items = items.into_iter().map(|w| w.chars().collect()).collect();
        Ok(Self {
            payload: Payload::Words {
                items,
                alphabet_size,
                max_word_len,
            },
        })
    }

    /// Builds a space over `n` opaque elements with a caller-provided
    /// distance and transformation cost. The cost is never inferred for
    /// unknown spaces.
    pub fn external(n: usize, cost: f64, dist: ExternalDistanceFn) -> Result<Self> {
        if cost.is_nan() || cost <= 0.0 || !cost.is_finite() {
            return Err(McCatchError::Config(format!(
                "transformation cost must be a positive finite real, got {cost}"
            )));
        }
        Ok(Self {
            payload: Payload::External { n, cost, dist },
        })
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        match &self.payload {
            Payload::Vectors { dim, data, .. } => {
                if *dim == 0 {
                    0
                } else {
                    data.len() / dim
                }
            }
            Payload::Words { items, .. } => items.len(),
            Payload::External { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance between elements `a` and `b`.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        match &self.payload {
            Payload::Vectors { dim, p, data } => {
                let xa = &data[a * dim..(a + 1) * dim];
                let xb = &data[b * dim..(b + 1) * dim];
                lp_distance(xa, xb, *p)
            }
            Payload::Words { items, .. } => edit_distance(&items[a], &items[b]) as f64,
            Payload::External { dist, .. } => dist(a, b),
        }
    }

    /// L_p parameters and row access for vector payloads, used by the
    /// tree to keep leaf scans on contiguous memory. `None` for word and
    /// external payloads.
    pub(crate) fn vector_params(&self) -> Option<(usize, f64)> {
        match &self.payload {
            Payload::Vectors { dim, p, .. } => Some((*dim, *p)),
            _ => None,
        }
    }

    pub(crate) fn vector_row(&self, i: usize) -> &[f64] {
        match &self.payload {
            Payload::Vectors { dim, data, .. } => &data[i * dim..(i + 1) * dim],
            _ => unreachable!("vector_row on a non-vector payload"),
        }
    }

    /// Transformation cost `t` of this space: the dimensionality for
    /// vectors; for words, the bits to pick one of the three edit
    /// operations, the character involved, and its position; the given
    /// cost for external spaces.
    pub fn transformation_cost(&self) -> f64 {
        match &self.payload {
            Payload::Vectors { dim, .. } => *dim as f64,
            Payload::Words {
                alphabet_size,
                max_word_len,
                ..
            } => {
                code_length(3.0)
                    + code_length(*alphabet_size as f64)
                    + code_length(*max_word_len as f64)
            }
            Payload::External { cost, .. } => *cost,
        }
    }
}

pub(crate) fn lp_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            acc += d * d;
        }
        acc.sqrt()
    } else if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        let acc: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).sum();
        acc.powf(1.0 / p)
    }
}

/// Unit-cost Levenshtein distance: insertions, deletions, and
/// substitutions all cost one.
pub fn edit_distance(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SplitMix64;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn identical_vectors_have_zero_distance() {
        let s = MetricSpace::vectors(vec![vec![1.0, 2.0], vec![1.0, 2.0]], 2.0).unwrap();
        assert_eq!(s.distance(0, 1), 0.0);
    }

    #[test]
    fn euclidean_matches_pythagoras() {
        let s = MetricSpace::vectors(vec![vec![0.0, 0.0], vec![3.0, 4.0]], 2.0).unwrap();
        assert_eq!(s.distance(0, 1), 5.0);
    }

    #[test]
    fn one_substitution_costs_one() {
        let s = MetricSpace::words(vec!["smith".into(), "smyth".into()]).unwrap();
        assert_eq!(s.distance(0, 1), 1.0);
    }

    #[test]
    fn edit_distance_matches_hand_checked_table() {
        let table: &[(&str, &str, usize)] = &[
            ("", "", 0),
            ("a", "", 1),
            ("", "abc", 3),
            ("kitten", "sitting", 3),
            ("flaw", "lawn", 2),
            ("saturday", "sunday", 3),
            ("gumbo", "gambol", 2),
            ("book", "back", 2),
            ("abc", "abc", 0),
            ("abc", "cba", 2),
            ("intention", "execution", 5),
            ("horse", "ros", 3),
            ("distance", "instance", 2),
            ("aaaa", "aa", 2),
            ("ab", "ba", 2),
            ("abcdef", "azced", 3),
            ("pale", "bale", 1),
            ("pale", "bake", 2),
            ("smith", "smyth", 1),
            ("levenshtein", "frankenstein", 6),
        ];
        for &(a, b, want) in table {
            assert_eq!(edit_distance(&chars(a), &chars(b)), want, "{a:?} vs {b:?}");
            assert_eq!(edit_distance(&chars(b), &chars(a)), want, "{b:?} vs {a:?}");
        }
    }

    #[test]
    fn vector_transformation_cost_is_dimensionality() {
        let s = MetricSpace::vectors(vec![vec![0.0, 0.0, 0.0]], 2.0).unwrap();
        assert_eq!(s.transformation_cost(), 3.0);
    }

    #[test]
    fn word_transformation_cost_sums_code_lengths() {
        let s = MetricSpace::words_with_metadata(vec!["abc".into()], 26, 10).unwrap();
        let want = code_length(3.0) + code_length(26.0) + code_length(10.0);
        assert!((s.transformation_cost() - want).abs() < 1e-12);
    }

    #[test]
    fn external_transformation_cost_passes_through() {
        let s = MetricSpace::external(2, 7.0, Arc::new(|_, _| 1.0)).unwrap();
        assert_eq!(s.transformation_cost(), 7.0);
    }

    #[test]
    fn non_finite_coordinates_are_rejected() {
        assert!(MetricSpace::vectors(vec![vec![f64::NAN]], 2.0).is_err());
        assert!(MetricSpace::vectors(vec![vec![f64::INFINITY, 0.0]], 2.0).is_err());
    }

    #[test]
    fn mixed_dimensionality_is_rejected() {
        assert!(MetricSpace::vectors(vec![vec![0.0, 1.0], vec![2.0]], 2.0).is_err());
    }

    #[test]
    fn sub_one_lp_exponent_is_rejected() {
        assert!(MetricSpace::vectors(vec![vec![0.0]], 0.5).is_err());
    }

    fn random_vector_space(rng: &mut SplitMix64, n: usize, dim: usize, p: f64) -> MetricSpace {
        let rows = (0..n)
            .map(|_| (0..dim).map(|_| rng.next_f64() * 10.0 - 5.0).collect())
            .collect();
        MetricSpace::vectors(rows, p).unwrap()
    }

    #[test]
    fn triangle_inequality_holds_on_random_triples() {
        for &p in &[1.0, 2.0, 3.0] {
            let mut rng = SplitMix64::new(0x7261 + p as u64);
            let s = random_vector_space(&mut rng, 64, 3, p);
            for _ in 0..1000 {
                let a = (rng.next_u64() % 64) as usize;
                let b = (rng.next_u64() % 64) as usize;
                let c = (rng.next_u64() % 64) as usize;
                let lhs = s.distance(a, c);
                let rhs = s.distance(a, b) + s.distance(b, c);
                assert!(lhs <= rhs + 1e-9, "p={p} triple ({a},{b},{c})");
                assert!((s.distance(a, b) - s.distance(b, a)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn triangle_inequality_holds_exactly_for_words() {
        let mut rng = SplitMix64::new(0x776f7264);
        let words: Vec<String> = (0..48)
            .map(|_| {
                let len = (rng.next_u64() % 8) as usize;
                (0..len)
                    .map(|_| char::from(b'a' + (rng.next_u64() % 4) as u8))
                    .collect()
            })
            .collect();
        let s = MetricSpace::words(words).unwrap();
        for _ in 0..1000 {
            let a = (rng.next_u64() % 48) as usize;
            let b = (rng.next_u64() % 48) as usize;
            let c = (rng.next_u64() % 48) as usize;
            assert!(s.distance(a, c) <= s.distance(a, b) + s.distance(b, c));
        }
    }
}
