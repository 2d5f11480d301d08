//! Synthetic parallel corpora from forward and backward translations.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::textio::{join_lines, read_lines, AtomicWriter};

pub const DEFAULT_BT_TAG: &str = "<BT>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Genuine,
    SelfTrain,
    BackTranslate,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Genuine => "genuine",
            Provenance::SelfTrain => "self-train",
            Provenance::BackTranslate => "back-translate",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genuine" => Ok(Provenance::Genuine),
            "self-train" => Ok(Provenance::SelfTrain),
            "back-translate" => Ok(Provenance::BackTranslate),
            other => Err(Error::InvalidInput(format!("unknown provenance tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentPair {
    pub source: String,
    pub target: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<SegmentPair>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.source.as_str())
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.target.as_str())
    }

    /// Reads `<prefix>.src` and `<prefix>.tgt`, and `<prefix>.meta` when it
    /// exists. Without a meta file every pair is tagged genuine.
    pub fn read(prefix: impl AsRef<Path>) -> Result<Self> {
        let prefix = prefix.as_ref();
        let (src_path, tgt_path, meta_path) = corpus_paths(prefix);
        let sources = read_lines(&src_path)?;
        let targets = read_lines(&tgt_path)?;
        if sources.len() != targets.len() {
            return Err(Error::Alignment(vec![
                (src_path.display().to_string(), sources.len()),
                (tgt_path.display().to_string(), targets.len()),
            ]));
        }
        let tags = if meta_path.exists() {
            let tags = read_lines(&meta_path)?;
            if tags.len() != sources.len() {
                return Err(Error::Alignment(vec![
                    (src_path.display().to_string(), sources.len()),
                    (meta_path.display().to_string(), tags.len()),
                ]));
            }
            tags.iter().map(|t| t.parse()).collect::<Result<Vec<_>>>()?
        } else {
            vec![Provenance::Genuine; sources.len()]
        };
        Ok(Self {
            pairs: sources
                .into_iter()
                .zip(targets)
                .zip(tags)
                .map(|((source, target), provenance)| SegmentPair {
                    source,
                    target,
                    provenance,
                })
                .collect(),
        })
    }

    /// Stages `<prefix>.src`, `<prefix>.tgt` and optionally `<prefix>.meta`.
    pub fn stage(&self, prefix: impl AsRef<Path>, with_meta: bool, writer: &mut AtomicWriter) -> Result<()> {
        for p in &self.pairs {
            if p.source.contains('\n') || p.target.contains('\n') {
                return Err(Error::InvalidInput("segment contains a line break".into()));
            }
        }
        let (src_path, tgt_path, meta_path) = corpus_paths(prefix.as_ref());
        let sources: Vec<&str> = self.sources().collect();
        let targets: Vec<&str> = self.targets().collect();
        writer.stage(src_path, join_lines(&sources).as_bytes())?;
        writer.stage(tgt_path, join_lines(&targets).as_bytes())?;
        if with_meta {
            let tags: Vec<String> = self.pairs.iter().map(|p| p.provenance.to_string()).collect();
            writer.stage(meta_path, join_lines(&tags).as_bytes())?;
        }
        Ok(())
    }

    pub fn write(&self, prefix: impl AsRef<Path>, with_meta: bool) -> Result<()> {
        let mut writer = AtomicWriter::new();
        self.stage(prefix, with_meta, &mut writer)?;
        writer.commit()
    }
}

fn corpus_paths(prefix: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".src"), with(".tgt"), with(".meta"))
}

/// Pair filter. Token counts are whitespace tokens. Pairs with an empty side
/// are always dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    /// Upper bound on `max(src/tgt, tgt/src)` in tokens.
    pub max_length_ratio: f64,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Keep only the first occurrence of each (source, target) pair.
    pub dedup: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_length_ratio: 3.0,
            min_tokens: 1,
            max_tokens: 250,
            dedup: false,
        }
    }
}

impl FilterConfig {
    /// Drops empty pairs only.
    pub fn permissive() -> Self {
        Self {
            max_length_ratio: f64::INFINITY,
            min_tokens: 0,
            max_tokens: usize::MAX,
            dedup: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_length_ratio.is_nan() || self.max_length_ratio <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "max length ratio must be positive, got {}",
                self.max_length_ratio
            )));
        }
        if self.min_tokens > self.max_tokens {
            return Err(Error::InvalidInput(format!(
                "min tokens {} exceeds max tokens {}",
                self.min_tokens, self.max_tokens
            )));
        }
        Ok(())
    }

    fn keeps(&self, source: &str, target: &str) -> bool {
        let s = source.split_whitespace().count();
        let t = target.split_whitespace().count();
        if s == 0 || t == 0 {
            return false;
        }
        if s < self.min_tokens || t < self.min_tokens || s > self.max_tokens || t > self.max_tokens {
            return false;
        }
        let ratio = (s as f64 / t as f64).max(t as f64 / s as f64);
        ratio <= self.max_length_ratio
    }

    pub fn apply(&self, corpus: ParallelCorpus) -> ParallelCorpus {
        let mut seen = HashSet::new();
        let pairs = corpus
            .pairs
            .into_iter()
            .filter(|p| self.keeps(&p.source, &p.target))
            .filter(|p| !self.dedup || seen.insert((p.source.clone(), p.target.clone())))
            .collect();
        ParallelCorpus { pairs }
    }
}

/// Forward-translation pairs `(source, translation)`. Passing the `chosen`
/// lines of an MBR selection as `translations` gives MBR self-training data.
pub fn build_st_corpus<S: AsRef<str>, T: AsRef<str>>(
    sources: &[S],
    translations: &[T],
    filter: &FilterConfig,
) -> Result<ParallelCorpus> {
    filter.validate()?;
    if sources.len() != translations.len() {
        return Err(Error::alignment(
            ("sources", sources.len()),
            ("translations", translations.len()),
        ));
    }
    let corpus = ParallelCorpus {
        pairs: sources
            .iter()
            .zip(translations)
            .map(|(s, t)| SegmentPair {
                source: s.as_ref().to_string(),
                target: t.as_ref().to_string(),
                provenance: Provenance::SelfTrain,
            })
            .collect(),
    };
    Ok(filter.apply(corpus))
}

/// Back-translation pairs `(back_translation, target)`. The filter sees the
/// untagged text; the tag and one space are prepended afterwards.
pub fn build_bt_corpus<T: AsRef<str>, B: AsRef<str>>(
    targets: &[T],
    back_translations: &[B],
    tag: Option<&str>,
    filter: &FilterConfig,
) -> Result<ParallelCorpus> {
    filter.validate()?;
    if targets.len() != back_translations.len() {
        return Err(Error::alignment(
            ("targets", targets.len()),
            ("back-translations", back_translations.len()),
        ));
    }
    if let Some(tag) = tag {
        if tag.is_empty() || tag.chars().any(char::is_whitespace) {
            return Err(Error::InvalidInput(format!(
                "tag must be a single non-empty token, got {tag:?}"
            )));
        }
    }
    let corpus = ParallelCorpus {
        pairs: targets
            .iter()
            .zip(back_translations)
            .map(|(t, b)| SegmentPair {
                source: b.as_ref().to_string(),
                target: t.as_ref().to_string(),
                provenance: Provenance::BackTranslate,
            })
            .collect(),
    };
    let mut corpus = filter.apply(corpus);
    if let Some(tag) = tag {
        for p in &mut corpus.pairs {
            p.source = format!("{tag} {}", p.source);
        }
    }
    Ok(corpus)
}

/// Concatenates in order. With a seed the result is shuffled with ChaCha8
/// seeded from the 64-bit seed and a Fisher-Yates pass (`rand` 0.8
/// `SliceRandom::shuffle`).
pub fn merge_corpora(corpora: Vec<ParallelCorpus>, shuffle_seed: Option<u64>) -> ParallelCorpus {
    let mut pairs: Vec<SegmentPair> = corpora.into_iter().flat_map(|c| c.pairs).collect();
    if let Some(seed) = shuffle_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pairs.shuffle(&mut rng);
    }
    ParallelCorpus { pairs }
}
