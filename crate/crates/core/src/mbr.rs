//! Minimum Bayes risk selection over aligned multi-system candidates.
//!
//! Every candidate of a segment is scored as a hypothesis against every other
//! candidate as a pseudo-reference. The candidate with the highest mean
//! utility wins; ties go to the lowest system index.

use std::fmt::Write as _;
use std::path::Path;
use std::thread;

use crate::bridge::{Bridge, BridgeConfig, ScoreRequest};
use crate::error::{Error, Result};
use crate::metrics::{tokenize, BleuConfig, BleuStats, CharNGrams, ChrfConfig, ChrfStats, TokenScheme, WordNGrams};
use crate::textio::read_lines;

/// `m` source segments, each with one candidate from each of `n` systems.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    sources: Vec<String>,
    systems: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CandidateSet {
    /// `columns[s]` holds every line produced by system `s`.
    pub fn from_columns(sources: Vec<String>, systems: Vec<String>, columns: Vec<Vec<String>>) -> Result<Self> {
        if systems.len() != columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} system names for {} candidate columns",
                systems.len(),
                columns.len()
            )));
        }
        let m = sources.len();
        if columns.iter().any(|c| c.len() != m) {
            let mut counts = vec![("source".to_string(), m)];
            counts.extend(systems.iter().cloned().zip(columns.iter().map(Vec::len)));
            return Err(Error::Alignment(counts));
        }
        let rows = (0..m).map(|i| columns.iter().map(|c| c[i].clone()).collect()).collect();
        Self::from_rows(sources, systems, rows)
    }

    /// `rows[i]` holds the `n` candidates of segment `i` in system order.
    pub fn from_rows(sources: Vec<String>, systems: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        if systems.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "MBR needs at least 2 candidate systems, got {}",
                systems.len()
            )));
        }
        if rows.len() != sources.len() {
            return Err(Error::alignment(
                ("source", sources.len()),
                ("candidate rows", rows.len()),
            ));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != systems.len()) {
            return Err(Error::InvalidInput(format!(
                "segment {i} has {} candidates, expected {}",
                row.len(),
                systems.len()
            )));
        }
        Ok(Self { sources, systems, rows })
    }

    pub fn num_segments(&self) -> usize {
        self.sources.len()
    }

    pub fn num_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn systems(&self) -> &[String] {
        &self.systems
    }

    pub fn source(&self, segment: usize) -> &str {
        &self.sources[segment]
    }

    pub fn candidates(&self, segment: usize) -> &[String] {
        &self.rows[segment]
    }
}

/// Reads one candidate file per system plus the source file. Systems are
/// named by their file paths, in argument order.
pub fn load_candidates<P: AsRef<Path>>(candidate_paths: &[P], source_path: impl AsRef<Path>) -> Result<CandidateSet> {
    if candidate_paths.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "MBR needs at least 2 candidate files, got {}",
            candidate_paths.len()
        )));
    }
    let source_path = source_path.as_ref();
    let sources = read_lines(source_path)?;
    let mut systems = Vec::with_capacity(candidate_paths.len());
    let mut columns = Vec::with_capacity(candidate_paths.len());
    for p in candidate_paths {
        let p = p.as_ref();
        columns.push(read_lines(p)?);
        systems.push(p.display().to_string());
    }
    let m = sources.len();
    if columns.iter().any(|c| c.len() != m) {
        let mut counts = vec![(source_path.display().to_string(), m)];
        counts.extend(systems.iter().cloned().zip(columns.iter().map(Vec::len)));
        return Err(Error::Alignment(counts));
    }
    CandidateSet::from_columns(sources, systems, columns)
}

/// Scores every candidate of one segment against every other.
pub trait Utility {
    /// Returns `values` with `values[c][r]` = utility of candidate `c` as
    /// hypothesis against candidate `r` as reference.
    fn matrix(&mut self, source: &str, candidates: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Adapts a plain pairwise scoring function. When declared symmetric only
/// the upper triangle is evaluated and mirrored.
pub struct PairwiseUtility<F> {
    score: F,
    symmetric: bool,
}

impl<F: FnMut(&str, &str) -> f64> PairwiseUtility<F> {
    pub fn new(score: F) -> Self {
        Self {
            score,
            symmetric: false,
        }
    }

    pub fn symmetric(score: F) -> Self {
        Self { score, symmetric: true }
    }
}

impl<F: FnMut(&str, &str) -> f64> Utility for PairwiseUtility<F> {
    fn matrix(&mut self, _source: &str, candidates: &[String]) -> Result<Vec<Vec<f64>>> {
        let n = candidates.len();
        let mut values = vec![vec![0.0; n]; n];
        for c in 0..n {
            let start = if self.symmetric { c } else { 0 };
            for r in start..n {
                let v = (self.score)(&candidates[c], &candidates[r]);
                values[c][r] = v;
                if self.symmetric {
                    values[r][c] = v;
                }
            }
        }
        Ok(values)
    }
}

/// Sentence BLEU with per-candidate n-gram tables built once per segment.
pub struct BleuUtility {
    config: BleuConfig,
    scheme: TokenScheme,
}

impl BleuUtility {
    pub fn new(config: BleuConfig, scheme: TokenScheme) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, scheme })
    }
}

impl Utility for BleuUtility {
    fn matrix(&mut self, _source: &str, candidates: &[String]) -> Result<Vec<Vec<f64>>> {
        let grams: Vec<WordNGrams> = candidates
            .iter()
            .map(|c| WordNGrams::new(&tokenize(c, self.scheme), self.config.max_order))
            .collect();
        Ok(grams
            .iter()
            .map(|h| {
                grams
                    .iter()
                    .map(|r| BleuStats::between(h, &[r]).score(self.config.smoothing).value)
                    .collect()
            })
            .collect())
    }
}

pub struct ChrfUtility {
    config: ChrfConfig,
}

impl ChrfUtility {
    pub fn new(config: ChrfConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Utility for ChrfUtility {
    fn matrix(&mut self, _source: &str, candidates: &[String]) -> Result<Vec<Vec<f64>>> {
        let grams: Vec<CharNGrams> = candidates
            .iter()
            .map(|c| CharNGrams::new(c, self.config.char_order))
            .collect();
        Ok(grams
            .iter()
            .map(|h| {
                grams
                    .iter()
                    .map(|r| ChrfStats::between(h, r).score(self.config.beta).value)
                    .collect()
            })
            .collect())
    }
}

/// Utility delegated to an external scorer process.
pub struct ExternalUtility {
    bridge: Bridge,
    uses_source: bool,
}

impl ExternalUtility {
    pub fn new(config: BridgeConfig, uses_source: bool) -> Result<Self> {
        Ok(Self {
            bridge: Bridge::new(config)?,
            uses_source,
        })
    }
}

impl Utility for ExternalUtility {
    fn matrix(&mut self, source: &str, candidates: &[String]) -> Result<Vec<Vec<f64>>> {
        let n = candidates.len();
        let src = if self.uses_source { source } else { "" };
        let requests: Vec<ScoreRequest> = (0..n)
            .flat_map(|c| (0..n).map(move |r| (c, r)))
            .map(|(c, r)| ScoreRequest::new(src, candidates[c].as_str(), candidates[r].as_str()))
            .collect();
        let flat = self.bridge.score(&requests)?;
        Ok(flat.chunks(n).map(<[f64]>::to_vec).collect())
    }
}

#[derive(Debug, Clone)]
pub enum UtilityKind {
    Bleu { config: BleuConfig, scheme: TokenScheme },
    Chrf(ChrfConfig),
    External(BridgeConfig),
}

#[derive(Debug, Clone)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    /// Count each candidate as one of its own pseudo-references.
    pub include_self: bool,
    /// Pass the source segment to the scorer. External utilities only.
    pub uses_source: bool,
}

impl UtilitySpec {
    pub fn chrf() -> Self {
        Self {
            kind: UtilityKind::Chrf(ChrfConfig::default()),
            include_self: true,
            uses_source: false,
        }
    }

    pub fn bleu() -> Self {
        Self {
            kind: UtilityKind::Bleu {
                config: BleuConfig {
                    max_order: 4,
                    smoothing: crate::metrics::Smoothing::AddK(crate::metrics::Smoothing::DEFAULT_K),
                },
                scheme: TokenScheme::PunctuationSplit,
            },
            include_self: true,
            uses_source: false,
        }
    }

    pub fn external(config: BridgeConfig) -> Self {
        Self {
            kind: UtilityKind::External(config),
            include_self: true,
            uses_source: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            UtilityKind::External(c) => c.validate().map_err(Error::from),
            UtilityKind::Bleu { config, .. } => {
                if self.uses_source {
                    return Err(Error::InvalidInput(
                        "native BLEU utility does not read the source".into(),
                    ));
                }
                config.validate()
            }
            UtilityKind::Chrf(config) => {
                if self.uses_source {
                    return Err(Error::InvalidInput(
                        "native chrF utility does not read the source".into(),
                    ));
                }
                config.validate()
            }
        }
    }

    /// A fresh scorer. External kinds spawn their own process lazily.
    pub fn instantiate(&self) -> Result<Box<dyn Utility + Send>> {
        self.validate()?;
        Ok(match &self.kind {
            UtilityKind::Bleu { config, scheme } => Box::new(BleuUtility::new(*config, *scheme)?),
            UtilityKind::Chrf(config) => Box::new(ChrfUtility::new(*config)?),
            UtilityKind::External(config) => Box::new(ExternalUtility::new(config.clone(), self.uses_source)?),
        })
    }
}

impl<U: Utility + ?Sized> Utility for Box<U> {
    fn matrix(&mut self, source: &str, candidates: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).matrix(source, candidates)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Best {
    pub index: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    pub segment_index: usize,
    pub values: Vec<Vec<f64>>,
    pub row_means: Vec<f64>,
    pub best: Best,
}

impl UtilityMatrix {
    pub fn from_values(segment_index: usize, values: Vec<Vec<f64>>, include_self: bool) -> Result<Self> {
        let n = values.len();
        if n == 0 || values.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput(format!(
                "segment {segment_index}: utility matrix is not square"
            )));
        }
        if !include_self && n < 2 {
            return Err(Error::InvalidInput("excluding self needs at least 2 candidates".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "segment {segment_index}: non-finite utility"
            )));
        }
        let row_means: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let (sum, count) = row
                    .iter()
                    .enumerate()
                    .filter(|&(r, _)| include_self || r != c)
                    .fold((0.0, 0usize), |(s, k), (_, v)| (s + v, k + 1));
                sum / count as f64
            })
            .collect();
        let best = argmax_first(&row_means);
        Ok(Self {
            segment_index,
            values,
            row_means,
            best,
        })
    }
}

/// Argmax keeping the earliest index on ties.
pub fn argmax_first(means: &[f64]) -> Best {
    let mut best = Best {
        index: 0,
        mean: means[0],
    };
    for (i, &m) in means.iter().enumerate().skip(1) {
        if m > best.mean {
            best = Best { index: i, mean: m };
        }
    }
    best
}

pub fn utility_matrix<U: Utility + ?Sized>(
    set: &CandidateSet,
    segment_index: usize,
    utility: &mut U,
    include_self: bool,
) -> Result<UtilityMatrix> {
    if segment_index >= set.num_segments() {
        return Err(Error::InvalidInput(format!(
            "segment index {segment_index} out of range for {} segments",
            set.num_segments()
        )));
    }
    let values = utility.matrix(set.source(segment_index), set.candidates(segment_index))?;
    UtilityMatrix::from_values(segment_index, values, include_self)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbrSelection {
    pub chosen: Vec<String>,
    pub indices: Vec<usize>,
    pub expected_utilities: Vec<f64>,
}

impl MbrSelection {
    pub fn from_matrices(set: &CandidateSet, matrices: &[UtilityMatrix]) -> Self {
        let indices: Vec<usize> = matrices.iter().map(|m| m.best.index).collect();
        Self {
            chosen: matrices
                .iter()
                .map(|m| set.candidates(m.segment_index)[m.best.index].clone())
                .collect(),
            indices,
            expected_utilities: matrices.iter().map(|m| m.best.mean).collect(),
        }
    }
}

/// Utility matrices for every segment. Segments are split into contiguous
/// blocks, one per worker, and every worker builds its own scorer with
/// `make_utility`. Results are assembled by segment index, so the output does
/// not depend on `workers`.
pub fn compute_matrices<F, U>(
    set: &CandidateSet,
    include_self: bool,
    workers: usize,
    make_utility: F,
) -> Result<Vec<UtilityMatrix>>
where
    F: Fn() -> Result<U> + Sync,
    U: Utility,
{
    let m = set.num_segments();
    let workers = workers.clamp(1, m.max(1));
    let block = m.div_ceil(workers).max(1);
    let run_block = |start: usize, end: usize| -> Result<Vec<UtilityMatrix>> {
        let mut utility = make_utility()?;
        (start..end)
            .map(|i| {
                utility_matrix(set, i, &mut utility, include_self).map_err(|e| Error::Segment {
                    segment: i,
                    source: Box::new(e),
                })
            })
            .collect()
    };
    if workers == 1 {
        return run_block(0, m);
    }
    let blocks: Vec<Result<Vec<UtilityMatrix>>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..m)
            .step_by(block)
            .map(|start| {
                let end = (start + block).min(m);
                let run_block = &run_block;
                scope.spawn(move || run_block(start, end))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("MBR worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(m);
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

pub fn mbr_matrices(set: &CandidateSet, utility: &UtilitySpec, workers: usize) -> Result<Vec<UtilityMatrix>> {
    utility.validate()?;
    compute_matrices(set, utility.include_self, workers, || utility.instantiate())
}

pub fn mbr_decode(set: &CandidateSet, utility: &UtilitySpec, workers: usize) -> Result<MbrSelection> {
    let matrices = mbr_matrices(set, utility, workers)?;
    Ok(MbrSelection::from_matrices(set, &matrices))
}

/// Tab-separated dump: `segment_index`, `candidate_index`, the candidate's
/// `n` utilities, `row_mean`. Reals use 6 decimal places.
pub fn format_matrix_tsv(matrices: &[UtilityMatrix]) -> String {
    let mut out = String::new();
    for m in matrices {
        for (c, row) in m.values.iter().enumerate() {
            write!(out, "{}\t{}", m.segment_index, c).unwrap();
            for v in row {
                write!(out, "\t{v:.6}").unwrap();
            }
            writeln!(out, "\t{:.6}", m.row_means[c]).unwrap();
        }
    }
    out
}
