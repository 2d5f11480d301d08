//! The TSF tensor container.
//!
//! ```text
//! TSF1<LF>
//! name<TAB>f32<TAB>d0,d1,...<LF>     one header line per tensor
//! <LF>
//! little-endian f32 payloads, concatenated in header order
//! ```
//!
//! There is no padding and nothing follows the last payload.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textio::write_atomic;

pub const TSF_MAGIC: &[u8] = b"TSF1\n";

/// Row-major `f32` data with a shape of positive dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "shape {shape:?} must be non-empty with positive dimensions"
            )));
        }
        let expected = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidInput(format!("shape {shape:?} overflows")))?;
        if data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} at offset {i}",
                data[i]
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(rows, cols)` for two-dimensional tensors.
    pub fn matrix_dims(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            &[rows, cols] => Some((rows, cols)),
            _ => None,
        }
    }
}

/// Named tensors in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TensorStore {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl TensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.contains(['\t', '\n']) {
            return Err(Error::Tensor {
                name,
                reason: "names must be non-empty and free of TAB and LF".into(),
            });
        }
        if self.index.contains_key(&name) {
            return Err(Error::Tensor {
                name,
                reason: "duplicate name".into(),
            });
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = String::from_utf8(TSF_MAGIC.to_vec()).expect("ascii magic");
        for (name, t) in &self.entries {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            writeln!(header, "{name}\tf32\t{}", dims.join(",")).unwrap();
        }
        header.push('\n');
        let payload: usize = self.entries.iter().map(|(_, t)| t.len() * 4).sum();
        let mut out = Vec::with_capacity(header.len() + payload);
        out.extend_from_slice(header.as_bytes());
        for (_, t) in &self.entries {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(TSF_MAGIC)
            .ok_or_else(|| Error::Format("missing TSF1 magic".into()))?;
        let mut pos = 0;
        let mut headers = Vec::new();
        loop {
            let nl = rest[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Format("unterminated header".into()))?;
            let line = &rest[pos..pos + nl];
            pos += nl + 1;
            if line.is_empty() {
                break;
            }
            let line = std::str::from_utf8(line).map_err(|_| Error::Format("header is not UTF-8".into()))?;
            headers.push(parse_header_line(line)?);
        }

        let mut payload = &rest[pos..];
        let mut store = TensorStore::new();
        for (name, shape) in headers {
            let count: usize = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("tensor `{name}` shape overflows")))?;
            let nbytes = count
                .checked_mul(4)
                .filter(|&n| n <= payload.len())
                .ok_or_else(|| Error::Format(format!("payload truncated in tensor `{name}`")))?;
            let data: Vec<f32> = payload[..nbytes]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            payload = &payload[nbytes..];
            let tensor = Tensor::new(shape, data).map_err(|e| Error::Tensor {
                name: name.clone(),
                reason: e.to_string(),
            })?;
            store.insert(name, tensor)?;
        }
        if !payload.is_empty() {
            return Err(Error::Format(format!(
                "{} trailing bytes after last tensor",
                payload.len()
            )));
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}

fn parse_header_line(line: &str) -> Result<(String, Vec<usize>)> {
    let fields: Vec<&str> = line.split('\t').collect();
    let [name, dtype, dims] = fields.as_slice() else {
        return Err(Error::Format(format!("header line {line:?} does not have 3 fields")));
    };
    if *dtype != "f32" {
        return Err(Error::Format(format!(
            "tensor `{name}` has unsupported dtype `{dtype}`"
        )));
    }
    let shape = dims
        .split(',')
        .map(|d| match d.parse::<usize>() {
            // canonical decimal only, so that re-serialising is byte-identical
            Ok(v) if v > 0 && v.to_string() == d => Ok(v),
            _ => Err(Error::Format(format!("tensor `{name}` has bad dimension `{d}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name.to_string(), shape))
}
