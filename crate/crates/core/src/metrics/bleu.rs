use std::ops::AddAssign;

use super::ngram::NGramCounts;
use super::tokenize::TokenSequence;
use super::MetricScore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Smoothing {
    #[default]
    None,
    /// Adds `k` to the match and total counts of every order above 1.
    AddK(f64),
}

impl Smoothing {
    pub const DEFAULT_K: f64 = 0.1;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            smoothing: Smoothing::None,
        }
    }
}

impl BleuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::InvalidInput("BLEU max_order must be at least 1".into()));
        }
        if let Smoothing::AddK(k) = self.smoothing {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "BLEU smoothing constant must be positive, got {k}"
                )));
            }
        }
        Ok(())
    }
}

/// Word n-grams of every order `1..=max_order` for one segment.
#[derive(Debug, Clone)]
pub struct WordNGrams {
    len: usize,
    orders: Vec<NGramCounts<String>>,
}

impl WordNGrams {
    pub fn new(tokens: &TokenSequence, max_order: usize) -> Self {
        let units = tokens.tokens();
        Self {
            len: units.len(),
            orders: (1..=max_order).map(|n| NGramCounts::from_units(units, n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_order(&self) -> usize {
        self.orders.len()
    }
}

/// Additive BLEU sufficient statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: Vec<usize>,
    pub totals: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn zero(max_order: usize) -> Self {
        Self {
            matches: vec![0; max_order],
            totals: vec![0; max_order],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    /// Clipped matches of `hyp` against the per-n-gram maximum over `refs`.
    /// The effective reference length is the one closest to the hypothesis
    /// length, the shorter one on ties.
    pub fn between(hyp: &WordNGrams, refs: &[&WordNGrams]) -> Self {
        let max_order = hyp.max_order();
        let mut stats = Self::zero(max_order);
        stats.hyp_len = hyp.len;
        stats.ref_len = closest_ref_len(hyp.len, refs.iter().map(|r| r.len));
        for n in 0..max_order {
            let hyp_n = &hyp.orders[n];
            stats.totals[n] = hyp_n.total();
            let matched = match refs {
                [single] => hyp_n.overlap(&single.orders[n]),
                _ => {
                    let mut merged = refs[0].orders[n].clone();
                    for r in &refs[1..] {
                        merged.max_merge(&r.orders[n]);
                    }
                    hyp_n.overlap(&merged)
                }
            };
            stats.matches[n] = matched;
        }
        stats
    }

    pub fn score(&self, smoothing: Smoothing) -> MetricScore {
        let max_order = self.totals.len();
        let mut components = vec![0.0; max_order];
        if self.hyp_len == 0 {
            let value = if self.ref_len == 0 { 100.0 } else { 0.0 };
            return MetricScore {
                value,
                components,
                brevity_penalty: Some(if self.ref_len == 0 { 1.0 } else { 0.0 }),
            };
        }
        let bp = if self.hyp_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };

        // Orders longer than the hypothesis have no n-grams and are left out
        // of the geometric mean.
        let mut log_sum = 0.0;
        let mut effective = 0usize;
        let mut zero = false;
        for (n, component) in components.iter_mut().enumerate().take(max_order) {
            let total = self.totals[n];
            if total == 0 {
                continue;
            }
            effective += 1;
            let matched = self.matches[n] as f64;
            let p = match smoothing {
                Smoothing::AddK(k) if n > 0 => (matched + k) / (total as f64 + k),
                _ => matched / total as f64,
            };
            *component = p;
            if p == 0.0 {
                zero = true;
            } else {
                log_sum += p.ln();
            }
        }
        let value = if zero {
            0.0
        } else {
            (100.0 * bp * (log_sum / effective as f64).exp()).min(100.0)
        };
        MetricScore {
            value,
            components,
            brevity_penalty: Some(bp),
        }
    }
}

impl AddAssign<&BleuStats> for BleuStats {
    fn add_assign(&mut self, rhs: &BleuStats) {
        for (a, b) in self.matches.iter_mut().zip(&rhs.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&rhs.totals) {
            *a += b;
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

fn closest_ref_len(hyp_len: usize, ref_lens: impl Iterator<Item = usize>) -> usize {
    ref_lens.min_by_key(|&r| (r.abs_diff(hyp_len), r)).unwrap_or(0)
}

pub fn sentence_bleu(hyp: &TokenSequence, refs: &[TokenSequence], config: &BleuConfig) -> Result<MetricScore> {
    config.validate()?;
    if refs.is_empty() {
        return Err(Error::InvalidInput("BLEU needs at least one reference".into()));
    }
    let hyp = WordNGrams::new(hyp, config.max_order);
    let refs: Vec<WordNGrams> = refs.iter().map(|r| WordNGrams::new(r, config.max_order)).collect();
    let ref_views: Vec<&WordNGrams> = refs.iter().collect();
    Ok(BleuStats::between(&hyp, &ref_views).score(config.smoothing))
}

/// Micro-averaged BLEU. `refs[i]` holds every reference of segment `i`.
pub fn corpus_bleu(hyps: &[TokenSequence], refs: &[Vec<TokenSequence>], config: &BleuConfig) -> Result<MetricScore> {
    config.validate()?;
    if hyps.len() != refs.len() {
        return Err(Error::alignment(("hypotheses", hyps.len()), ("references", refs.len())));
    }
    if hyps.is_empty() {
        return Err(Error::InvalidInput("corpus is empty".into()));
    }
    let mut total = BleuStats::zero(config.max_order);
    for (i, (hyp, seg_refs)) in hyps.iter().zip(refs).enumerate() {
        if seg_refs.is_empty() {
            return Err(Error::InvalidInput(format!("segment {i} has no reference")));
        }
        let hyp = WordNGrams::new(hyp, config.max_order);
        let seg_refs: Vec<WordNGrams> = seg_refs.iter().map(|r| WordNGrams::new(r, config.max_order)).collect();
        let views: Vec<&WordNGrams> = seg_refs.iter().collect();
        total += &BleuStats::between(&hyp, &views);
    }
    Ok(total.score(config.smoothing))
}
