//! Tensor files and the numeric operations on them.

mod average;
mod lora;
mod rdrop;
mod tsf;

pub use average::average_checkpoints;
pub use lora::{lora_merge, LoraAdapter, LoraTarget, LORA_A_SUFFIX, LORA_B_SUFFIX};
pub use rdrop::{rdrop_loss, rdrop_penalty, ProbVector, DEFAULT_REG_ALPHA, KL_FLOOR};
pub use tsf::{Tensor, TensorStore, TSF_MAGIC};
