//! Line-delimited client for external scorer processes.
//!
//! Wire format, one request per line on the child's stdin:
//!
//! ```text
//! src<TAB>mt<TAB>ref<LF>
//! ```
//!
//! Inside a field a backslash is written `\\`, a TAB `\t` and a LF `\n`.
//! Every batch is followed by one empty line. The child answers with one
//! decimal number per line on stdout, in request order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use thiserror::Error;

pub const MAX_BATCH_SIZE: usize = 4096;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("failed to spawn scorer `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scorer protocol error at request {request}: unparseable response {line:?}")]
    Protocol { request: usize, line: String },
    #[error("scorer exited before answering request {pending}{}", .status.as_deref().map(|s| format!(" ({s})")).unwrap_or_default())]
    Crash { pending: usize, status: Option<String> },
    #[error("scorer timed out after {timeout:?} waiting for request {pending}")]
    Timeout { pending: usize, timeout: Duration },
    #[error("invalid scorer request {request}: {reason}")]
    InvalidRequest { request: usize, reason: String },
    #[error("invalid bridge configuration: {0}")]
    Config(String),
    #[error("malformed escape sequence in {0:?}")]
    Escape(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScoreRequest {
    pub src: String,
    pub mt: String,
    pub reference: String,
}

impl ScoreRequest {
    pub fn new(src: impl Into<String>, mt: impl Into<String>, reference: impl Into<String>) -> Self {
        Self {
            src: src.into(),
            mt: mt.into(),
            reference: reference.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BridgeConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub batch_size: usize,
    /// Maximum wait for any single response line.
    pub timeout: Duration,
    /// Respawn the scorer once per batch and replay unanswered requests.
    pub restart_on_failure: bool,
}

impl BridgeConfig {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            batch_size: 64,
            timeout: Duration::from_secs(300),
            restart_on_failure: false,
        }
    }

    /// Splits a shell-style command line into program and arguments.
    pub fn from_command_line(line: &str) -> Result<Self, BridgeError> {
        let parts =
            shlex::split(line).ok_or_else(|| BridgeError::Config(format!("cannot parse command line {line:?}")))?;
        let config = Self::new(parts);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), BridgeError> {
        if self.command.is_empty() {
            return Err(BridgeError::Config("empty command".into()));
        }
        if self.batch_size == 0 || self.batch_size > MAX_BATCH_SIZE {
            return Err(BridgeError::Config(format!(
                "batch size must be in 1..={MAX_BATCH_SIZE}, got {}",
                self.batch_size
            )));
        }
        if self.timeout.is_zero() {
            return Err(BridgeError::Config("timeout must be positive".into()));
        }
        Ok(())
    }

    fn display_command(&self) -> String {
        shlex::try_join(self.command.iter().map(String::as_str)).unwrap_or_else(|_| self.command.join(" "))
    }
}

pub fn escape_field(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            other => out.push(other),
        }
    }
    out
}

pub fn unescape_field(field: &str) -> Result<String, BridgeError> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            _ => return Err(BridgeError::Escape(field.to_string())),
        }
    }
    Ok(out)
}

/// The request line without its terminating LF.
pub fn encode_request(request: &ScoreRequest) -> String {
    format!(
        "{}\t{}\t{}",
        escape_field(&request.src),
        escape_field(&request.mt),
        escape_field(&request.reference)
    )
}

pub fn decode_request(line: &str) -> Result<ScoreRequest, BridgeError> {
    let fields: Vec<&str> = line.split('\t').collect();
    match fields.as_slice() {
        [src, mt, reference] => Ok(ScoreRequest {
            src: unescape_field(src)?,
            mt: unescape_field(mt)?,
            reference: unescape_field(reference)?,
        }),
        _ => Err(BridgeError::Escape(line.to_string())),
    }
}

fn parse_score(line: &str, request: usize) -> Result<f64, BridgeError> {
    match line.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(BridgeError::Protocol {
            request,
            line: line.to_string(),
        }),
    }
}

struct ScorerProcess {
    child: Child,
    writer: Option<Sender<String>>,
    lines: Receiver<std::io::Result<String>>,
}

impl ScorerProcess {
    fn spawn(config: &BridgeConfig) -> Result<Self, BridgeError> {
        let mut child = Command::new(&config.command[0])
            .args(&config.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BridgeError::Spawn {
                command: config.display_command(),
                source,
            })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (payload_tx, payload_rx) = mpsc::channel::<String>();
        thread::spawn(move || {
            for payload in payload_rx {
                if stdin.write_all(payload.as_bytes()).and_then(|_| stdin.flush()).is_err() {
                    break;
                }
            }
        });
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            writer: Some(payload_tx),
            lines: rx,
        })
    }

    fn send(&self, payload: String) -> bool {
        self.writer.as_ref().is_some_and(|w| w.send(payload).is_ok())
    }

    fn exit_status(&mut self) -> Option<String> {
        self.writer.take();
        for _ in 0..50 {
            if let Ok(Some(status)) = self.child.try_wait() {
                return Some(status.to_string());
            }
            thread::sleep(Duration::from_millis(10));
        }
        None
    }
}

impl Drop for ScorerProcess {
    fn drop(&mut self) {
        self.writer.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A scorer process, spawned lazily and reused across batches.
///
/// One `Bridge` must not be shared between concurrent callers; run one per
/// worker instead.
pub struct Bridge {
    config: BridgeConfig,
    process: Option<ScorerProcess>,
}

impl Bridge {
    pub fn new(config: BridgeConfig) -> Result<Self, BridgeError> {
        config.validate()?;
        Ok(Self { config, process: None })
    }

    pub fn config(&self) -> &BridgeConfig {
        &self.config
    }

    /// One score per request, in request order.
    pub fn score(&mut self, requests: &[ScoreRequest]) -> Result<Vec<f64>, BridgeError> {
        for (i, r) in requests.iter().enumerate() {
            if r.mt.is_empty() {
                return Err(BridgeError::InvalidRequest {
                    request: i,
                    reason: "empty mt".into(),
                });
            }
        }
        let mut scores = Vec::with_capacity(requests.len());
        for (chunk_no, chunk) in requests.chunks(self.config.batch_size).enumerate() {
            let base = chunk_no * self.config.batch_size;
            scores.extend(self.score_chunk(chunk, base)?);
        }
        Ok(scores)
    }

    fn score_chunk(&mut self, chunk: &[ScoreRequest], base: usize) -> Result<Vec<f64>, BridgeError> {
        let mut scores = Vec::with_capacity(chunk.len());
        let mut restarted = false;
        loop {
            match self.attempt(chunk, base, &mut scores) {
                Ok(()) => return Ok(scores),
                Err(BridgeError::Crash { pending, status }) => {
                    self.process = None;
                    if !self.config.restart_on_failure || restarted {
                        return Err(BridgeError::Crash { pending, status });
                    }
                    log::warn!("scorer crashed at request {pending}, restarting and replaying");
                    restarted = true;
                }
                Err(e) => {
                    self.process = None;
                    return Err(e);
                }
            }
        }
    }

    /// Sends the unanswered tail of `chunk` and appends the answers to `scores`.
    fn attempt(&mut self, chunk: &[ScoreRequest], base: usize, scores: &mut Vec<f64>) -> Result<(), BridgeError> {
        if self.process.is_none() {
            self.process = Some(ScorerProcess::spawn(&self.config)?);
        }
        let process = self.process.as_mut().expect("spawned above");
        let first = scores.len();
        let mut payload = String::new();
        for r in &chunk[first..] {
            payload.push_str(&encode_request(r));
            payload.push('\n');
        }
        payload.push('\n');

        let crash = |process: &mut ScorerProcess, pending: usize| BridgeError::Crash {
            pending,
            status: process.exit_status(),
        };

        if !process.send(payload) {
            return Err(crash(process, base + first));
        }
        for i in first..chunk.len() {
            let index = base + i;
            match process.lines.recv_timeout(self.config.timeout) {
                Ok(Ok(line)) => scores.push(parse_score(&line, index)?),
                Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => return Err(crash(process, index)),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(BridgeError::Timeout {
                        pending: index,
                        timeout: self.config.timeout,
                    })
                }
            }
        }
        Ok(())
    }
}

/// Spawns a scorer, scores `requests` and shuts it down.
pub fn score_batch(requests: &[ScoreRequest], config: &BridgeConfig) -> Result<Vec<f64>, BridgeError> {
    Bridge::new(config.clone())?.score(requests)
}
