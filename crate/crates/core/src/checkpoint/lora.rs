use super::tsf::{Tensor, TensorStore};
use crate::error::{Error, Result};

pub const LORA_A_SUFFIX: &str = ".lora_A";
pub const LORA_B_SUFFIX: &str = ".lora_B";

/// Low-rank update for the base tensor `name`: `A` is `r×k`, `B` is `d×r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraTarget {
    pub name: String,
    pub a: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub rank: usize,
    pub alpha: f64,
    pub targets: Vec<LoraTarget>,
}

impl LoraAdapter {
    pub fn new(rank: usize, alpha: f64, targets: Vec<LoraTarget>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidInput("LoRA rank must be positive".into()));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidInput(format!("LoRA alpha must be positive, got {alpha}")));
        }
        for t in &targets {
            let bad = |what: &str, shape: &[usize]| Error::Tensor {
                name: t.name.clone(),
                reason: format!("{what} has shape {shape:?}, expected rank {rank}"),
            };
            match t.a.matrix_dims() {
                Some((r, _)) if r == rank => {}
                _ => return Err(bad("A", t.a.shape())),
            }
            match t.b.matrix_dims() {
                Some((_, r)) if r == rank => {}
                _ => return Err(bad("B", t.b.shape())),
            }
        }
        Ok(Self { rank, alpha, targets })
    }

    /// Collects `<name>.lora_A` / `<name>.lora_B` pairs from a tensor file.
    /// The rank is the row count of the first `A`.
    pub fn from_store(store: &TensorStore, alpha: f64) -> Result<Self> {
        let mut targets = Vec::new();
        for (name, tensor) in store.iter() {
            if let Some(base) = name.strip_suffix(LORA_A_SUFFIX) {
                let b_name = format!("{base}{LORA_B_SUFFIX}");
                let b = store.get(&b_name).ok_or_else(|| Error::Tensor {
                    name: b_name.clone(),
                    reason: "missing LoRA B factor".into(),
                })?;
                targets.push(LoraTarget {
                    name: base.to_string(),
                    a: tensor.clone(),
                    b: b.clone(),
                });
            } else if let Some(base) = name.strip_suffix(LORA_B_SUFFIX) {
                if store.get(&format!("{base}{LORA_A_SUFFIX}")).is_none() {
                    return Err(Error::Tensor {
                        name: format!("{base}{LORA_A_SUFFIX}"),
                        reason: "missing LoRA A factor".into(),
                    });
                }
            } else {
                return Err(Error::Tensor {
                    name: name.to_string(),
                    reason: format!("adapter tensors must end in {LORA_A_SUFFIX} or {LORA_B_SUFFIX}"),
                });
            }
        }
        let rank = targets
            .first()
            .and_then(|t| t.a.matrix_dims())
            .map(|(r, _)| r)
            .ok_or_else(|| Error::InvalidInput("adapter has no LoRA targets".into()))?;
        Self::new(rank, alpha, targets)
    }

    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }
}

/// `W' = W + (alpha/r)·B·A` for every target; other tensors are copied.
/// Products are accumulated in `f64`. Elements whose update is exactly zero
/// keep their original bits.
pub fn lora_merge(base: &TensorStore, adapter: &LoraAdapter) -> Result<TensorStore> {
    let mut updates = std::collections::HashMap::new();
    for t in &adapter.targets {
        let w = base.get(&t.name).ok_or_else(|| Error::Tensor {
            name: t.name.clone(),
            reason: "LoRA target not found in base".into(),
        })?;
        let (d, k) = w.matrix_dims().ok_or_else(|| Error::Tensor {
            name: t.name.clone(),
            reason: format!("base tensor has shape {:?}, expected a matrix", w.shape()),
        })?;
        let r = adapter.rank;
        if t.a.shape() != [r, k] || t.b.shape() != [d, r] {
            return Err(Error::Tensor {
                name: t.name.clone(),
                reason: format!(
                    "expected A {:?} and B {:?} for base {:?}, got A {:?} and B {:?}",
                    [r, k],
                    [d, r],
                    [d, k],
                    t.a.shape(),
                    t.b.shape()
                ),
            });
        }
        if updates.insert(t.name.as_str(), t).is_some() {
            return Err(Error::Tensor {
                name: t.name.clone(),
                reason: "targeted twice".into(),
            });
        }
    }

    let scale = adapter.scale();
    let mut out = TensorStore::new();
    for (name, w) in base.iter() {
        let merged = match updates.get(name) {
            None => w.clone(),
            Some(t) => {
                let (d, k) = w.matrix_dims().expect("checked above");
                let (a, b) = (t.a.data(), t.b.data());
                let r = adapter.rank;
                let mut data = w.data().to_vec();
                for i in 0..d {
                    for j in 0..k {
                        let mut delta = 0.0f64;
                        for s in 0..r {
                            delta += f64::from(b[i * r + s]) * f64::from(a[s * k + j]);
                        }
                        if delta != 0.0 {
                            let cell = &mut data[i * k + j];
                            *cell = (f64::from(*cell) + scale * delta) as f32;
                        }
                    }
                }
                Tensor::new(w.shape().to_vec(), data).map_err(|e| Error::Tensor {
                    name: name.to_string(),
                    reason: e.to_string(),
                })?
            }
        };
        out.insert(name, merged)?;
    }
    Ok(out)
}
