//! Machinery for chat translation pipelines: minimum Bayes risk selection over
//! multi-system outputs, self-training and back-translation corpus building,
//! checkpoint averaging, LoRA merging, the R-Drop penalty, and LLM prompt
//! rendering.

pub mod bridge;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod mbr;
pub mod metrics;
pub mod promptgen;
pub mod selftrain;
pub mod textio;

pub use error::{Error, Result};
