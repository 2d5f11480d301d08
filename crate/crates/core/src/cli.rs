//! The `mbrforge` command line.

use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::bridge::BridgeConfig;
use crate::checkpoint::{average_checkpoints, lora_merge, LoraAdapter, TensorStore};
use crate::error::Error;
use crate::mbr::{format_matrix_tsv, load_candidates, mbr_matrices, MbrSelection, UtilityKind, UtilitySpec};
use crate::metrics::{
    tokenize, BleuConfig, BleuStats, CharNGrams, ChrfConfig, ChrfStats, Smoothing, TokenScheme, WordNGrams,
};
use crate::promptgen::{
    parse_chat_records, render_context, render_fewshot, render_stream, select_demos, ChatDocument, ContextWindow, Demo,
    RenderedPrompt, DEFAULT_FEWSHOT_K,
};
use crate::selftrain::{build_bt_corpus, build_st_corpus, merge_corpora, FilterConfig, ParallelCorpus};
use crate::textio::{join_lines, read_lines, AtomicWriter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mbrforge",
    version,
    about = "MBR selection, synthetic corpora, checkpoint tools and chat prompts for MT pipelines"
)]
pub struct Cli {
    /// Worker threads for mbr and eval. Output does not depend on this value.
    #[arg(long, global = true, env = "MBRFORGE_WORKERS", default_value_t = 1)]
    pub workers: usize,

    /// Seed for shuffling (merge) and random demo selection (prompts).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select one candidate per segment by maximum mean utility.
    Mbr(MbrArgs),
    /// Score a hypothesis file against a reference file.
    Eval(EvalArgs),
    /// Build a self-training corpus (source -> translation).
    BuildSt(BuildStArgs),
    /// Build a back-translation corpus (back-translation -> target).
    BuildBt(BuildBtArgs),
    /// Concatenate corpora, optionally shuffled with --seed.
    Merge(MergeArgs),
    /// Average TSF checkpoints elementwise (e.g. the 5 best dev checkpoints, or the last 5 epochs).
    Avg(AvgArgs),
    /// Merge a LoRA adapter into base weights.
    LoraMerge(LoraMergeArgs),
    /// Render LLM prompts from a chat document file.
    Prompts(PromptArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UtilityArg {
    Bleu,
    Chrf,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Bleu,
    Chrf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Whitespace,
    Punct,
}

impl From<SchemeArg> for TokenScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Whitespace => TokenScheme::Whitespace,
            SchemeArg::Punct => TokenScheme::PunctuationSplit,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SmoothingArg {
    None,
    AddK,
}

#[derive(Debug, Args)]
pub struct MetricOpts {
    /// BLEU tokenizer.
    #[arg(long, value_enum, default_value = "punct")]
    pub tokenize: SchemeArg,
    /// BLEU maximum n-gram order.
    #[arg(long, default_value_t = 4)]
    pub max_order: usize,
    /// Constant for add-k BLEU smoothing.
    #[arg(long, default_value_t = Smoothing::DEFAULT_K)]
    pub smoothing_k: f64,
    /// chrF maximum character n-gram order.
    #[arg(long, default_value_t = 6)]
    pub char_order: usize,
    /// chrF recall weight.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
}

impl MetricOpts {
    fn bleu(&self, smoothing: SmoothingArg) -> BleuConfig {
        BleuConfig {
            max_order: self.max_order,
            smoothing: match smoothing {
                SmoothingArg::None => Smoothing::None,
                SmoothingArg::AddK => Smoothing::AddK(self.smoothing_k),
            },
        }
    }

    fn chrf(&self) -> ChrfConfig {
        ChrfConfig {
            char_order: self.char_order,
            beta: self.beta,
        }
    }
}

#[derive(Debug, Args)]
pub struct MbrArgs {
    /// Source file, one segment per line.
    #[arg(long)]
    pub src: PathBuf,
    /// Candidate file from one system; repeat once per system (at least 2).
    #[arg(long = "cand", required = true, num_args = 1)]
    pub cands: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "chrf")]
    pub utility: UtilityArg,
    /// Scorer command line for --utility external.
    #[arg(long)]
    pub external_cmd: Option<String>,
    /// Count each candidate as one of its own references (default).
    #[arg(long, overrides_with = "exclude_self")]
    pub include_self: bool,
    /// Leave each candidate out of its own reference set.
    #[arg(long, overrides_with = "include_self")]
    pub exclude_self: bool,
    /// Do not send the source segment to the external scorer.
    #[arg(long)]
    pub no_source: bool,
    /// Requests per scorer batch.
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Seconds to wait for any single scorer response.
    #[arg(long, default_value_t = 300)]
    pub timeout_secs: u64,
    /// Restart a crashed scorer once per batch and replay the unanswered requests.
    #[arg(long)]
    pub restart_on_failure: bool,
    /// BLEU smoothing for the bleu utility.
    #[arg(long, value_enum, default_value = "add-k")]
    pub bleu_smoothing: SmoothingArg,
    #[command(flatten)]
    pub metric: MetricOpts,
    /// Output file for the selected lines.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional TSV dump of every utility matrix.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Hypothesis file, one segment per line
    #[arg(long)]
    pub hyp: PathBuf,
    /// Reference file aligned with --hyp
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    /// Print one score per line instead of the corpus score.
    #[arg(long)]
    pub sentence_level: bool,
    /// BLEU smoothing
    #[arg(long, value_enum, default_value = "none")]
    pub smoothing: SmoothingArg,
    #[command(flatten)]
    pub metric_opts: MetricOpts,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Maximum token-length ratio between the two sides, in either direction.
    #[arg(long, default_value_t = 3.0)]
    pub max_ratio: f64,
    /// Minimum whitespace tokens on each side.
    #[arg(long, default_value_t = 1)]
    pub min_tokens: usize,
    /// Maximum whitespace tokens on each side.
    #[arg(long, default_value_t = 250)]
    pub max_tokens: usize,
    /// Drop repeated (source, target) pairs.
    #[arg(long)]
    pub dedup: bool,
}

impl FilterArgs {
    fn config(&self) -> FilterConfig {
        FilterConfig {
            max_length_ratio: self.max_ratio,
            min_tokens: self.min_tokens,
            max_tokens: self.max_tokens,
            dedup: self.dedup,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildStArgs {
    /// Monolingual source file.
    #[arg(long)]
    pub src: PathBuf,
    /// Translations of --src, e.g. the output of `mbr`.
    #[arg(long)]
    pub hyp: PathBuf,
    /// Writes <prefix>.src, <prefix>.tgt and <prefix>.meta.
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct BuildBtArgs {
    /// Monolingual target file.
    #[arg(long)]
    pub tgt: PathBuf,
    /// Back-translations of --tgt.
    #[arg(long)]
    pub back: PathBuf,
    /// Prepend this token to every synthetic source; `--tag` alone uses <BT>.
    #[arg(long, num_args = 0..=1, default_missing_value = crate::selftrain::DEFAULT_BT_TAG)]
    pub tag: Option<String>,
    /// Writes <prefix>.src, <prefix>.tgt and <prefix>.meta
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Corpus prefix to read (<prefix>.src/.tgt[/.meta]); repeatable.
    #[arg(long = "corpus", required = true, num_args = 1)]
    pub corpora: Vec<PathBuf>,
    /// Writes <prefix>.src, <prefix>.tgt and <prefix>.meta
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct AvgArgs {
    /// TSF checkpoints to average.
    #[arg(long, required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Averaged checkpoint (TSF), written atomically
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LoraMergeArgs {
    /// Base weights (TSF).
    #[arg(long)]
    pub base: PathBuf,
    /// Adapter (TSF) holding <name>.lora_A (r x k) and <name>.lora_B (d x r) pairs.
    #[arg(long)]
    pub adapter: PathBuf,
    /// LoRA alpha; the update is scaled by alpha / rank.
    #[arg(long)]
    pub alpha: f64,
    /// Merged weights (TSF), written atomically
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PromptMode {
    Stream,
    Context,
    Fewshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PromptFormat {
    Jsonl,
    Plain,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    /// Layout: streaming history, context window, or few-shot demonstrations
    #[arg(long, value_enum)]
    pub mode: PromptMode,
    /// Chat records, one JSON object per line.
    #[arg(long)]
    pub doc: PathBuf,
    /// History turns (stream, default 3) or demonstrations (fewshot, default 5).
    #[arg(long)]
    pub k: Option<usize>,
    /// Context turns before the query (context mode).
    #[arg(long, default_value_t = 2)]
    pub before: usize,
    /// Context turns after the query (context mode).
    #[arg(long, default_value_t = 2)]
    pub after: usize,
    /// Leave the query turn out of the context lines (context mode).
    #[arg(long)]
    pub exclude_query_context: bool,
    /// Demonstration pool in the chat record format (fewshot mode). Turns
    /// with a reference and the query's language pair are eligible.
    #[arg(long)]
    pub demos: Option<PathBuf>,
    /// jsonl: {doc_id, turn_index, text, completion} per line; plain: text and
    /// completion followed by the separator line
    #[arg(long, value_enum, default_value = "jsonl")]
    pub format: PromptFormat,
    /// Line written after every prompt in plain format.
    #[arg(long, default_value = "<<<END>>>")]
    pub separator: String,
    /// Output file, written atomically
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(e) => e.exit_code(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Run(e) => {
                write!(f, "{e}")?;
                let mut source = std::error::Error::source(e);
                while let Some(s) = source {
                    if !e.to_string().contains(&s.to_string()) {
                        write!(f, ": {s}")?;
                    }
                    source = s.source();
                }
                Ok(())
            }
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `std::env::args`, runs the command and returns the exit status.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mbrforge: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult {
    if cli.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    match &cli.command {
        Command::Mbr(a) => cmd_mbr(a, cli.workers),
        Command::Eval(a) => cmd_eval(a, cli.workers),
        Command::BuildSt(a) => cmd_build_st(a),
        Command::BuildBt(a) => cmd_build_bt(a),
        Command::Merge(a) => cmd_merge(a, cli.seed),
        Command::Avg(a) => cmd_avg(a),
        Command::LoraMerge(a) => cmd_lora_merge(a),
        Command::Prompts(a) => cmd_prompts(a, cli.seed),
    }
}

fn cmd_mbr(a: &MbrArgs, workers: usize) -> CliResult {
    if a.cands.len() < 2 {
        return Err(usage("mbr needs at least two --cand files"));
    }
    let include_self = !a.exclude_self;
    let kind = match a.utility {
        UtilityArg::Bleu => UtilityKind::Bleu {
            config: a.metric.bleu(a.bleu_smoothing),
            scheme: a.metric.tokenize.into(),
        },
        UtilityArg::Chrf => UtilityKind::Chrf(a.metric.chrf()),
        UtilityArg::External => {
            let line = a
                .external_cmd
                .as_deref()
                .ok_or_else(|| usage("--utility external requires --external-cmd"))?;
            let mut config = BridgeConfig::from_command_line(line).map_err(|e| usage(e.to_string()))?;
            config.batch_size = a.batch_size;
            config.timeout = Duration::from_secs(a.timeout_secs);
            config.restart_on_failure = a.restart_on_failure;
            config.validate().map_err(|e| usage(e.to_string()))?;
            UtilityKind::External(config)
        }
    };
    if a.external_cmd.is_some() && !matches!(a.utility, UtilityArg::External) {
        return Err(usage("--external-cmd only applies to --utility external"));
    }
    let spec = UtilitySpec {
        uses_source: matches!(kind, UtilityKind::External(_)) && !a.no_source,
        kind,
        include_self,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;

    let set = load_candidates(&a.cands, &a.src)?;
    log::info!("{} segments x {} systems", set.num_segments(), set.num_systems());
    let matrices = mbr_matrices(&set, &spec, workers)?;
    let selection = MbrSelection::from_matrices(&set, &matrices);

    let mut writer = AtomicWriter::new();
    writer.stage(&a.out, join_lines(&selection.chosen).as_bytes())?;
    if let Some(path) = &a.matrix_out {
        writer.stage(path, format_matrix_tsv(&matrices).as_bytes())?;
    }
    writer.commit()?;
    Ok(())
}

fn read_aligned(hyp: &Path, reference: &Path) -> CliResult<(Vec<String>, Vec<String>)> {
    let hyps = read_lines(hyp)?;
    let refs = read_lines(reference)?;
    if hyps.len() != refs.len() {
        return Err(Error::Alignment(vec![
            (hyp.display().to_string(), hyps.len()),
            (reference.display().to_string(), refs.len()),
        ])
        .into());
    }
    if hyps.is_empty() {
        return Err(Error::InvalidInput("no segments to evaluate".into()).into());
    }
    Ok((hyps, refs))
}

/// Applies `f` to every index in contiguous blocks, one block per worker,
/// and returns the results in index order.
fn parallel_map<T: Send>(len: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, len.max(1));
    if workers == 1 {
        return (0..len).map(f).collect();
    }
    let block = len.div_ceil(workers);
    thread::scope(|scope| {
        let handles: Vec<_> = (0..len)
            .step_by(block)
            .map(|start| {
                let f = &f;
                scope.spawn(move || (start..(start + block).min(len)).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn cmd_eval(a: &EvalArgs, workers: usize) -> CliResult {
    let (hyps, refs) = read_aligned(&a.hyp, &a.reference)?;
    let out = match a.metric {
        MetricArg::Bleu => {
            let config = a.metric_opts.bleu(a.smoothing);
            config.validate().map_err(|e| usage(e.to_string()))?;
            let scheme: TokenScheme = a.metric_opts.tokenize.into();
            let stats = parallel_map(hyps.len(), workers, |i| {
                let h = WordNGrams::new(&tokenize(&hyps[i], scheme), config.max_order);
                let r = WordNGrams::new(&tokenize(&refs[i], scheme), config.max_order);
                BleuStats::between(&h, &[&r])
            });
            if a.sentence_level {
                stats
                    .iter()
                    .map(|s| format!("{:.2}", s.score(config.smoothing).value))
                    .collect()
            } else {
                let mut total = BleuStats::zero(config.max_order);
                for s in &stats {
                    total += s;
                }
                vec![format!("{:.2}", total.score(config.smoothing).value)]
            }
        }
        MetricArg::Chrf => {
            let config = a.metric_opts.chrf();
            config.validate().map_err(|e| usage(e.to_string()))?;
            let stats = parallel_map(hyps.len(), workers, |i| {
                ChrfStats::between(
                    &CharNGrams::new(&hyps[i], config.char_order),
                    &CharNGrams::new(&refs[i], config.char_order),
                )
            });
            if a.sentence_level {
                stats
                    .iter()
                    .map(|s| format!("{:.2}", s.score(config.beta).value))
                    .collect()
            } else {
                let mut total = ChrfStats::zero(config.char_order);
                for s in &stats {
                    total += s;
                }
                vec![format!("{:.2}", total.score(config.beta).value)]
            }
        }
    };
    print!("{}", join_lines(&out));
    Ok(())
}

fn check_filter(f: &FilterArgs) -> CliResult<FilterConfig> {
    let config = f.config();
    config.validate().map_err(|e| usage(e.to_string()))?;
    Ok(config)
}

fn cmd_build_st(a: &BuildStArgs) -> CliResult {
    let filter = check_filter(&a.filter)?;
    let sources = read_lines(&a.src)?;
    let hyps = read_lines(&a.hyp)?;
    if sources.len() != hyps.len() {
        return Err(Error::Alignment(vec![
            (a.src.display().to_string(), sources.len()),
            (a.hyp.display().to_string(), hyps.len()),
        ])
        .into());
    }
    let corpus = build_st_corpus(&sources, &hyps, &filter)?;
    log::info!("kept {} of {} pairs", corpus.len(), sources.len());
    corpus.write(&a.out_prefix, true)?;
    Ok(())
}

fn cmd_build_bt(a: &BuildBtArgs) -> CliResult {
    let filter = check_filter(&a.filter)?;
    let targets = read_lines(&a.tgt)?;
    let back = read_lines(&a.back)?;
    if targets.len() != back.len() {
        return Err(Error::Alignment(vec![
            (a.tgt.display().to_string(), targets.len()),
            (a.back.display().to_string(), back.len()),
        ])
        .into());
    }
    let corpus = build_bt_corpus(&targets, &back, a.tag.as_deref(), &filter)?;
    log::info!("kept {} of {} pairs", corpus.len(), targets.len());
    corpus.write(&a.out_prefix, true)?;
    Ok(())
}

fn cmd_merge(a: &MergeArgs, seed: Option<u64>) -> CliResult {
    let corpora = a
        .corpora
        .iter()
        .map(ParallelCorpus::read)
        .collect::<Result<Vec<_>, _>>()?;
    merge_corpora(corpora, seed).write(&a.out_prefix, true)?;
    Ok(())
}

fn cmd_avg(a: &AvgArgs) -> CliResult {
    let stores = a.inputs.iter().map(TensorStore::load).collect::<Result<Vec<_>, _>>()?;
    if stores.len() != 5 {
        log::info!("averaging {} checkpoints", stores.len());
    }
    average_checkpoints(&stores)?.save(&a.out)?;
    Ok(())
}

fn cmd_lora_merge(a: &LoraMergeArgs) -> CliResult {
    if !(a.alpha.is_finite() && a.alpha > 0.0) {
        return Err(usage(format!("--alpha must be positive, got {}", a.alpha)));
    }
    let base = TensorStore::load(&a.base)?;
    let adapter = LoraAdapter::from_store(&TensorStore::load(&a.adapter)?, a.alpha)?;
    lora_merge(&base, &adapter)?.save(&a.out)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct PromptRecord<'a> {
    doc_id: &'a str,
    turn_index: usize,
    #[serde(flatten)]
    prompt: &'a RenderedPrompt,
}

fn read_docs(path: &Path) -> CliResult<Vec<ChatDocument>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_chat_records(&text).map_err(|e| match e {
        Error::Prompt(m) => Error::Prompt(format!("{}: {m}", path.display())).into(),
        other => other.into(),
    })
}

fn cmd_prompts(a: &PromptArgs, seed: Option<u64>) -> CliResult {
    if a.demos.is_some() != (a.mode == PromptMode::Fewshot) {
        return Err(usage("--demos is required for, and only valid with, --mode fewshot"));
    }
    if a.separator.contains('\n') {
        return Err(usage("--separator must be a single line"));
    }
    let docs = read_docs(&a.doc)?;
    let pool: Vec<(String, String, Demo)> = match &a.demos {
        Some(path) => read_docs(path)?
            .into_iter()
            .flat_map(|d| d.turns)
            .filter_map(|t| {
                let reference = t.reference?;
                Some((t.src_lang, t.tgt_lang, (t.source, reference)))
            })
            .collect(),
        None => Vec::new(),
    };

    let mut rendered: Vec<(String, usize, RenderedPrompt)> = Vec::new();
    let mut skipped = 0usize;
    for doc in &docs {
        for (i, turn) in doc.turns.iter().enumerate() {
            let prompt = match a.mode {
                PromptMode::Stream => match render_stream(doc, i, a.k.unwrap_or(3)) {
                    Ok(p) => p,
                    Err(Error::Prompt(m)) if m.contains("needs a reference") => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                },
                PromptMode::Context => render_context(
                    doc,
                    i,
                    ContextWindow {
                        before: a.before,
                        after: a.after,
                        include_query: !a.exclude_query_context,
                    },
                )?,
                PromptMode::Fewshot => {
                    let k = a.k.unwrap_or(DEFAULT_FEWSHOT_K);
                    let eligible: Vec<Demo> = pool
                        .iter()
                        .filter(|(s, t, (src, _))| *s == turn.src_lang && *t == turn.tgt_lang && *src != turn.source)
                        .map(|(_, _, d)| d.clone())
                        .collect();
                    if eligible.len() < k {
                        skipped += 1;
                        continue;
                    }
                    let demos = select_demos(&eligible, k, seed)?;
                    let mut p = render_fewshot(&demos, &turn.source, (&turn.src_lang, &turn.tgt_lang), k)?;
                    p.completion = turn.reference.clone().unwrap_or_default();
                    p
                }
            };
            rendered.push((doc.doc_id.clone(), i, prompt));
        }
    }
    if skipped > 0 {
        let why = match a.mode {
            PromptMode::Fewshot => "lack enough demonstrations for their language pair",
            _ => "have history turns without references",
        };
        log::warn!("skipped {skipped} turns that {why}");
    }
    if rendered.is_empty() && skipped > 0 {
        return Err(Error::Prompt(format!("all {skipped} turns were skipped; nothing to render")).into());
    }

    let mut out = String::new();
    for (doc_id, turn_index, prompt) in &rendered {
        match a.format {
            PromptFormat::Jsonl => {
                let rec = PromptRecord {
                    doc_id,
                    turn_index: *turn_index,
                    prompt,
                };
                out.push_str(&serde_json::to_string(&rec).expect("serialisable"));
                out.push('\n');
            }
            PromptFormat::Plain => {
                out.push_str(&prompt.text);
                out.push_str(&prompt.completion);
                out.push('\n');
                out.push_str(&a.separator);
                out.push('\n');
            }
        }
    }
    crate::textio::write_atomic(&a.out, out.as_bytes())?;
    Ok(())
}
