//! Lexical translation metrics.
//!
//! BLEU and chrF at sentence and corpus level. Both metrics are computed from
//! additive sufficient statistics, so the corpus variants are the
//! micro-average of per-segment counts and a one-segment corpus reproduces the
//! sentence score exactly.

mod bleu;
mod chrf;
mod ngram;
mod tokenize;

pub use bleu::{corpus_bleu, sentence_bleu, BleuConfig, BleuStats, Smoothing, WordNGrams};
pub use chrf::{corpus_chrf, sentence_chrf, CharNGrams, ChrfConfig, ChrfStats};
pub use ngram::NGramCounts;
pub use tokenize::{tokenize, TokenScheme, TokenSequence};

/// A score in `[0, 100]` with its per-order breakdown.
///
/// For BLEU `components[n-1]` is the (possibly smoothed) modified precision of
/// order `n`; for chrF it is the F-score of order `n`. Both are fractions in
/// `[0, 1]`. Orders that did not take part in the average report `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricScore {
    pub value: f64,
    pub components: Vec<f64>,
    /// BLEU only.
    pub brevity_penalty: Option<f64>,
}
