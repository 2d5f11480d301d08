use std::ops::AddAssign;

use super::ngram::NGramCounts;
use super::MetricScore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChrfConfig {
    pub char_order: usize,
    pub beta: f64,
}

impl Default for ChrfConfig {
    fn default() -> Self {
        Self {
            char_order: 6,
            beta: 2.0,
        }
    }
}

impl ChrfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.char_order == 0 {
            return Err(Error::InvalidInput("chrF char_order must be at least 1".into()));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "chrF beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Character n-grams of orders `1..=char_order`, whitespace removed.
#[derive(Debug, Clone)]
pub struct CharNGrams {
    orders: Vec<NGramCounts<char>>,
}

impl CharNGrams {
    pub fn new(text: &str, char_order: usize) -> Self {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        Self {
            orders: (1..=char_order).map(|n| NGramCounts::from_units(&chars, n)).collect(),
        }
    }
}

/// Per-order `(hyp_total, ref_total, matches)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChrfStats {
    pub per_order: Vec<[usize; 3]>,
}

impl ChrfStats {
    pub fn zero(char_order: usize) -> Self {
        Self {
            per_order: vec![[0; 3]; char_order],
        }
    }

    pub fn between(hyp: &CharNGrams, reference: &CharNGrams) -> Self {
        Self {
            per_order: hyp
                .orders
                .iter()
                .zip(&reference.orders)
                .map(|(h, r)| [h.total(), r.total(), h.overlap(r)])
                .collect(),
        }
    }

    /// Mean of the per-order F-scores, skipping orders where neither side
    /// has any n-gram. With no such order at all the score is 100.
    pub fn score(&self, beta: f64) -> MetricScore {
        let beta2 = beta * beta;
        let mut components = vec![0.0; self.per_order.len()];
        let mut sum = 0.0;
        let mut used = 0usize;
        for (n, &[hyp_total, ref_total, matches]) in self.per_order.iter().enumerate() {
            if hyp_total == 0 && ref_total == 0 {
                continue;
            }
            used += 1;
            let f = if matches == 0 {
                0.0
            } else {
                let p = matches as f64 / hyp_total as f64;
                let r = matches as f64 / ref_total as f64;
                (1.0 + beta2) * p * r / (beta2 * p + r)
            };
            components[n] = f;
            sum += f;
        }
        let value = if used == 0 {
            100.0
        } else {
            (100.0 * sum / used as f64).clamp(0.0, 100.0)
        };
        MetricScore {
            value,
            components,
            brevity_penalty: None,
        }
    }
}

impl AddAssign<&ChrfStats> for ChrfStats {
    fn add_assign(&mut self, rhs: &ChrfStats) {
        for (a, b) in self.per_order.iter_mut().zip(&rhs.per_order) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
    }
}

pub fn sentence_chrf(hyp: &str, reference: &str, config: &ChrfConfig) -> Result<MetricScore> {
    config.validate()?;
    let h = CharNGrams::new(hyp, config.char_order);
    let r = CharNGrams::new(reference, config.char_order);
    Ok(ChrfStats::between(&h, &r).score(config.beta))
}

pub fn corpus_chrf<H: AsRef<str>, R: AsRef<str>>(hyps: &[H], refs: &[R], config: &ChrfConfig) -> Result<MetricScore> {
    config.validate()?;
    if hyps.len() != refs.len() {
        return Err(Error::alignment(("hypotheses", hyps.len()), ("references", refs.len())));
    }
    let mut total = ChrfStats::zero(config.char_order);
    for (h, r) in hyps.iter().zip(refs) {
        let h = CharNGrams::new(h.as_ref(), config.char_order);
        let r = CharNGrams::new(r.as_ref(), config.char_order);
        total += &ChrfStats::between(&h, &r);
    }
    Ok(total.score(config.beta))
}
