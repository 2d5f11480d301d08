use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parallel inputs disagree in length. Each entry is a (label, count) pair.
    #[error("alignment error: {}", describe_counts(.0))]
    Alignment(Vec<(String, usize)>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("tensor `{name}`: {reason}")]
    Tensor { name: String, reason: String },

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error("infinite divergence: component {index} has p={p} and q={q}")]
    InfiniteDivergence { index: usize, p: f64, q: f64 },

    #[error("prompt rendering: {0}")]
    Prompt(String),

    #[error("segment {segment}: {source}")]
    Segment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Bridge(#[from] crate::bridge::BridgeError),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn describe_counts(counts: &[(String, usize)]) -> String {
    counts
        .iter()
        .map(|(label, n)| format!("{label} has {n} lines"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn alignment(a: (&str, usize), b: (&str, usize)) -> Self {
        Error::Alignment(vec![(a.0.to_string(), a.1), (b.0.to_string(), b.1)])
    }

    /// Strips any segment wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Segment { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status for this error: 3 data, 4 bridge, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Bridge(_) => 4,
            Error::Io { .. } => 5,
            _ => 3,
        }
    }
}
