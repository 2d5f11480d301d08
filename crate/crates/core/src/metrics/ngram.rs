use std::collections::HashMap;
use std::hash::Hash;

/// Multiset of n-grams of a single order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts<T: Eq + Hash> {
    order: usize,
    counts: HashMap<Vec<T>, usize>,
    total: usize,
}

impl<T: Eq + Hash + Clone> NGramCounts<T> {
    pub fn from_units(units: &[T], order: usize) -> Self {
        assert!(order >= 1, "n-gram order must be at least 1");
        let mut counts = HashMap::new();
        let mut total = 0;
        for window in units.windows(order) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
            total += 1;
        }
        Self { order, counts, total }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of n-gram occurrences (with multiplicity).
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn get(&self, gram: &[T]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T], usize)> {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Sum over n-grams of `min(self[g], other[g])`.
    pub fn overlap(&self, other: &Self) -> usize {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.counts.iter().map(|(g, &c)| c.min(large.get(g))).sum()
    }

    /// Elementwise maximum, used to merge multiple references.
    pub fn max_merge(&mut self, other: &Self) {
        debug_assert_eq!(self.order, other.order);
        for (g, &c) in &other.counts {
            let slot = self.counts.entry(g.clone()).or_insert(0);
            if c > *slot {
                self.total += c - *slot;
                *slot = c;
            }
        }
    }
}
