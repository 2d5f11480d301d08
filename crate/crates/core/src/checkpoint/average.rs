use super::tsf::{Tensor, TensorStore};
use crate::error::{Error, Result};

/// Elementwise mean of checkpoints that share names and shapes. Sums are
/// accumulated in `f64`; output order follows the first store.
pub fn average_checkpoints(stores: &[TensorStore]) -> Result<TensorStore> {
    let (first, rest) = stores
        .split_first()
        .ok_or_else(|| Error::InvalidInput("nothing to average".into()))?;
    for (k, other) in rest.iter().enumerate() {
        if other.len() != first.len() {
            let extra = other
                .names()
                .find(|n| first.get(n).is_none())
                .or_else(|| first.names().find(|n| other.get(n).is_none()))
                .unwrap_or_default();
            return Err(Error::Tensor {
                name: extra.to_string(),
                reason: format!("present in only some of the inputs (input {})", k + 1),
            });
        }
    }

    let count = stores.len() as f64;
    let mut out = TensorStore::new();
    for (name, base) in first.iter() {
        // seeded with the first store so that -0.0 survives averaging
        let mut acc: Vec<f64> = base.data().iter().map(|&v| f64::from(v)).collect();
        for (k, other) in rest.iter().enumerate() {
            let t = other.get(name).ok_or_else(|| Error::Tensor {
                name: name.to_string(),
                reason: format!("missing from input {}", k + 1),
            })?;
            if t.shape() != base.shape() {
                return Err(Error::Tensor {
                    name: name.to_string(),
                    reason: format!(
                        "shape {:?} in input {} differs from {:?}",
                        t.shape(),
                        k + 1,
                        base.shape()
                    ),
                });
            }
            for (a, &v) in acc.iter_mut().zip(t.data()) {
                *a += f64::from(v);
            }
        }
        let data = acc.into_iter().map(|s| (s / count) as f32).collect();
        out.insert(name, Tensor::new(base.shape().to_vec(), data)?)?;
    }
    Ok(out)
}
