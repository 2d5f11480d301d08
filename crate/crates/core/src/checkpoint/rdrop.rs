//! Symmetric KL penalty between two dropout passes.

use crate::error::{Error, Result};

/// Weight of the penalty in the training loss.
pub const DEFAULT_REG_ALPHA: f64 = 5.0;

/// Lower bound applied to every probability when flooring is requested.
pub const KL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty distribution".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("invalid probability {v}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `½·(KL(p‖q) + KL(q‖p))`.
///
/// Evaluated as `½·Σ (pᵢ − qᵢ)(ln pᵢ − ln qᵢ)`: each term is non-negative and
/// the expression is exactly symmetric. Components where both are zero
/// contribute nothing. A component that is zero on one side only is an
/// [`Error::InfiniteDivergence`] unless `floor` is set, in which case every
/// probability is raised to at least [`KL_FLOOR`].
pub fn rdrop_penalty(p: &ProbVector, q: &ProbVector, floor: bool) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "distributions have different lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut sum = 0.0;
    for (i, (&pi, &qi)) in p.values().iter().zip(q.values()).enumerate() {
        let (pi, qi) = if floor {
            (pi.max(KL_FLOOR), qi.max(KL_FLOOR))
        } else {
            (pi, qi)
        };
        if pi == qi {
            continue;
        }
        if pi == 0.0 || qi == 0.0 {
            return Err(Error::InfiniteDivergence { index: i, p: pi, q: qi });
        }
        sum += (pi - qi) * (pi.ln() - qi.ln());
    }
    Ok(0.5 * sum)
}

pub fn rdrop_loss(p: &ProbVector, q: &ProbVector, reg_alpha: f64, floor: bool) -> Result<f64> {
    if !reg_alpha.is_finite() || reg_alpha < 0.0 {
        return Err(Error::InvalidInput(format!(
            "reg_alpha must be non-negative, got {reg_alpha}"
        )));
    }
    Ok(reg_alpha * rdrop_penalty(p, q, floor)?)
}
