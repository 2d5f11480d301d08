//! LLM prompt rendering for chat translation.
//!
//! Three layouts:
//!
//! * streaming: previous turns with their references, then the query turn
//!   with its machine translation, cut right after `Natural {tgt}: `;
//! * context-aware: a window of neighbouring turns with machine translations,
//!   then the query source cut after `Natural {tgt}: `;
//! * few-shot: `{src}: ...` / `{tgt}: ...` demonstration blocks.
//!
//! Every colon is followed by exactly one space. Lines are joined with LF and
//! the prompt text ends at the completion boundary.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FEWSHOT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Customer,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub speaker: Speaker,
    pub src_lang: String,
    pub tgt_lang: String,
    pub source: String,
    pub mt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

impl ChatTurn {
    pub fn validate(&self) -> Result<()> {
        if self.src_lang == self.tgt_lang {
            return Err(Error::Prompt(format!(
                "source and target language are both `{}`",
                self.src_lang
            )));
        }
        if self.source.is_empty() {
            return Err(Error::Prompt("turn has an empty source".into()));
        }
        for lang in [&self.src_lang, &self.tgt_lang] {
            if lang.is_empty() || lang.contains(':') || lang.contains('\n') {
                return Err(Error::Prompt(format!("bad language name {lang:?}")));
            }
        }
        let fields = [Some(&self.source), Some(&self.mt), self.reference.as_ref()];
        if fields.into_iter().flatten().any(|f| f.contains('\n')) {
            return Err(Error::Prompt("turn text contains a line break".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatDocument {
    pub doc_id: String,
    pub turns: Vec<ChatTurn>,
}

impl ChatDocument {
    pub fn new(doc_id: impl Into<String>, turns: Vec<ChatTurn>) -> Result<Self> {
        let doc_id = doc_id.into();
        if turns.is_empty() {
            return Err(Error::Prompt(format!("document `{doc_id}` has no turns")));
        }
        for t in &turns {
            t.validate()?;
        }
        Ok(Self { doc_id, turns })
    }
}

/// One line of the chat input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub doc_id: String,
    pub turn_index: usize,
    #[serde(flatten)]
    pub turn: ChatTurn,
}

/// Parses JSON-lines chat records. Documents appear in order of first
/// mention; turns within a document are ordered by `turn_index`.
pub fn parse_chat_records(text: &str) -> Result<Vec<ChatDocument>> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<(usize, ChatTurn)>> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ChatRecord =
            serde_json::from_str(line).map_err(|e| Error::Prompt(format!("line {}: {e}", lineno + 1)))?;
        if !grouped.contains_key(&rec.doc_id) {
            order.push(rec.doc_id.clone());
        }
        grouped.entry(rec.doc_id).or_default().push((rec.turn_index, rec.turn));
    }
    order
        .into_iter()
        .map(|doc_id| {
            let mut turns = grouped.remove(&doc_id).unwrap_or_default();
            turns.sort_by_key(|(i, _)| *i);
            if let Some(w) = turns.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Prompt(format!(
                    "document `{doc_id}` repeats turn_index {}",
                    w[0].0
                )));
            }
            ChatDocument::new(doc_id, turns.into_iter().map(|(_, t)| t).collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    /// Expected continuation; empty when the query has no reference.
    pub completion: String,
}

fn instruction(tgt_lang: &str) -> String {
    format!("Translate the following sentence into {tgt_lang} with a style bias towards Natural:")
}

fn check_index(doc: &ChatDocument, index: usize) -> Result<&ChatTurn> {
    doc.turns.get(index).ok_or_else(|| {
        Error::Prompt(format!(
            "turn {index} out of range for document `{}` with {} turns",
            doc.doc_id,
            doc.turns.len()
        ))
    })
}

pub fn render_stream(doc: &ChatDocument, index: usize, k_history: usize) -> Result<RenderedPrompt> {
    let query = check_index(doc, index)?;
    let mut lines = Vec::new();
    for (i, t) in doc
        .turns
        .iter()
        .enumerate()
        .take(index)
        .skip(index.saturating_sub(k_history))
    {
        let reference = t.reference.as_deref().ok_or_else(|| {
            Error::Prompt(format!(
                "document `{}` turn {i}: streaming history needs a reference",
                doc.doc_id
            ))
        })?;
        lines.push(format!(
            "Natural {}: {}, Translated {}: {}, Natural {}: {}",
            t.src_lang, t.source, t.tgt_lang, t.mt, t.tgt_lang, reference
        ));
    }
    lines.push(instruction(&query.tgt_lang));
    lines.push(format!(
        "Natural {}: {}, Translated {}: {}, Natural {}: ",
        query.src_lang, query.source, query.tgt_lang, query.mt, query.tgt_lang
    ));
    Ok(RenderedPrompt {
        text: lines.join("\n"),
        completion: query.reference.clone().unwrap_or_default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextWindow {
    pub before: usize,
    pub after: usize,
    /// List the query turn itself among the context lines.
    pub include_query: bool,
}

impl ContextWindow {
    pub fn symmetric(n: usize) -> Self {
        Self {
            before: n,
            after: n,
            include_query: true,
        }
    }
}

pub fn render_context(doc: &ChatDocument, index: usize, window: ContextWindow) -> Result<RenderedPrompt> {
    let query = check_index(doc, index)?;
    let start = index.saturating_sub(window.before);
    let end = index.saturating_add(window.after).min(doc.turns.len() - 1);
    let mut lines = Vec::new();
    for (i, t) in doc.turns.iter().enumerate().take(end + 1).skip(start) {
        if i == index && !window.include_query {
            continue;
        }
        lines.push(format!(
            "Natural {}: {}, Translated {}: {}",
            t.src_lang, t.source, t.tgt_lang, t.mt
        ));
    }
    lines.push(instruction(&query.tgt_lang));
    lines.push(format!(
        "Natural {}: {}, Natural {}: ",
        query.src_lang, query.source, query.tgt_lang
    ));
    Ok(RenderedPrompt {
        text: lines.join("\n"),
        completion: query.reference.clone().unwrap_or_default(),
    })
}

/// A `(source, reference)` demonstration.
pub type Demo = (String, String);

/// First `k` demos in list order, or a seeded random sample of `k`.
pub fn select_demos(pool: &[Demo], k: usize, seed: Option<u64>) -> Result<Vec<Demo>> {
    if pool.len() < k {
        return Err(Error::Prompt(format!(
            "few-shot prompt needs k={k} demonstrations, only {} available",
            pool.len()
        )));
    }
    Ok(match seed {
        None => pool[..k].to_vec(),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            pool.choose_multiple(&mut rng, k).cloned().collect()
        }
    })
}

pub fn render_fewshot(demos: &[Demo], query_source: &str, langs: (&str, &str), k: usize) -> Result<RenderedPrompt> {
    let (src_lang, tgt_lang) = langs;
    if demos.len() < k {
        return Err(Error::Prompt(format!(
            "few-shot prompt needs k={k} demonstrations, got {}",
            demos.len()
        )));
    }
    let mut text = String::new();
    for (source, reference) in &demos[..k] {
        text.push_str(&format!("{src_lang}: {source}\n{tgt_lang}: {reference}\n\n"));
    }
    text.push_str(&format!("{src_lang}: {query_source}\n{tgt_lang}: "));
    Ok(RenderedPrompt {
        text,
        completion: String::new(),
    })
}

/// Fields recovered from one rendered line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLine {
    pub src_lang: String,
    pub source: String,
    pub tgt_lang: String,
    pub mt: Option<String>,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub lines: Vec<ParsedLine>,
    pub instruction_lang: String,
    pub query: ParsedLine,
}

fn malformed(line: &str) -> Error {
    Error::Prompt(format!("cannot parse prompt line {line:?}"))
}

/// `Natural L1: X, Translated L2: Y` with the remainder after `Y` returned
/// unparsed when `tail_label` is set.
fn parse_translated(line: &str) -> Result<(String, String, String, &str)> {
    let rest = line.strip_prefix("Natural ").ok_or_else(|| malformed(line))?;
    let (src_lang, rest) = rest.split_once(": ").ok_or_else(|| malformed(line))?;
    let (source, rest) = rest.split_once(", Translated ").ok_or_else(|| malformed(line))?;
    let (tgt_lang, rest) = rest.split_once(": ").ok_or_else(|| malformed(line))?;
    Ok((src_lang.to_string(), source.to_string(), tgt_lang.to_string(), rest))
}

fn parse_stream_line(line: &str) -> Result<ParsedLine> {
    let (src_lang, source, tgt_lang, rest) = parse_translated(line)?;
    let label = format!(", Natural {tgt_lang}: ");
    let (mt, reference) = rest.rsplit_once(&label).ok_or_else(|| malformed(line))?;
    Ok(ParsedLine {
        src_lang,
        source,
        tgt_lang,
        mt: Some(mt.to_string()),
        reference: Some(reference.to_string()),
    })
}

fn parse_instruction(line: &str) -> Result<String> {
    line.strip_prefix("Translate the following sentence into ")
        .and_then(|r| r.strip_suffix(" with a style bias towards Natural:"))
        .map(str::to_string)
        .ok_or_else(|| malformed(line))
}

fn split_prompt(text: &str) -> Result<(Vec<&str>, &str, &str)> {
    let lines: Vec<&str> = text.split('\n').collect();
    match lines.as_slice() {
        [body @ .., instr, query] => Ok((body.to_vec(), instr, query)),
        _ => Err(Error::Prompt("prompt has fewer than two lines".into())),
    }
}

pub fn parse_stream(text: &str) -> Result<ParsedPrompt> {
    let (body, instr, query) = split_prompt(text)?;
    let lines = body.into_iter().map(parse_stream_line).collect::<Result<Vec<_>>>()?;
    let mut query = parse_stream_line(query)?;
    if query.reference.as_deref() != Some("") {
        return Err(malformed(text));
    }
    query.reference = None;
    Ok(ParsedPrompt {
        lines,
        instruction_lang: parse_instruction(instr)?,
        query,
    })
}

pub fn parse_context(text: &str) -> Result<ParsedPrompt> {
    let (body, instr, query_line) = split_prompt(text)?;
    let lines = body
        .into_iter()
        .map(|l| {
            let (src_lang, source, tgt_lang, mt) = parse_translated(l)?;
            Ok(ParsedLine {
                src_lang,
                source,
                tgt_lang,
                mt: Some(mt.to_string()),
                reference: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rest = query_line
        .strip_prefix("Natural ")
        .and_then(|r| r.strip_suffix(": "))
        .ok_or_else(|| malformed(query_line))?;
    let (src_lang, rest) = rest.split_once(": ").ok_or_else(|| malformed(query_line))?;
    let (source, tgt_lang) = rest.rsplit_once(", Natural ").ok_or_else(|| malformed(query_line))?;
    Ok(ParsedPrompt {
        lines,
        instruction_lang: parse_instruction(instr)?,
        query: ParsedLine {
            src_lang: src_lang.to_string(),
            source: source.to_string(),
            tgt_lang: tgt_lang.to_string(),
            mt: None,
            reference: None,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFewShot {
    pub src_lang: String,
    pub tgt_lang: String,
    pub demos: Vec<Demo>,
    pub query_source: String,
}

pub fn parse_fewshot(text: &str) -> Result<ParsedFewShot> {
    let lines: Vec<&str> = text.split('\n').collect();
    if lines.len() % 3 != 2 {
        return Err(Error::Prompt("few-shot prompt has an unexpected line count".into()));
    }
    let (query_line, tgt_label) = (lines[lines.len() - 2], lines[lines.len() - 1]);
    let tgt_lang = tgt_label.strip_suffix(": ").ok_or_else(|| malformed(tgt_label))?;
    let (src_lang, query_source) = query_line.split_once(": ").ok_or_else(|| malformed(query_line))?;
    let src_prefix = format!("{src_lang}: ");
    let tgt_prefix = format!("{tgt_lang}: ");
    let demos = lines[..lines.len() - 2]
        .chunks(3)
        .map(|block| {
            let source = block[0].strip_prefix(&src_prefix).ok_or_else(|| malformed(block[0]))?;
            let reference = block[1].strip_prefix(&tgt_prefix).ok_or_else(|| malformed(block[1]))?;
            if !block[2].is_empty() {
                return Err(malformed(block[2]));
            }
            Ok((source.to_string(), reference.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedFewShot {
        src_lang: src_lang.to_string(),
        tgt_lang: tgt_lang.to_string(),
        demos,
        query_source: query_source.to_string(),
    })
}
