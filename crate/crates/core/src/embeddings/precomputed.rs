use std::collections::HashMap;
use std::fmt::Write as _;

use super::EmbeddingError;

/// Externally produced per-token vectors (transformer or contextual
/// string embeddings), keyed by `(sentence id, token index)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedContextual {
    dim: usize,
    store: HashMap<(String, usize), Vec<f64>>,
}

impl PrecomputedContextual {
    pub fn new(dim: usize) -> Result<PrecomputedContextual, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::Parse { line: 0, message: "dimension must be positive".into() });
        }
        Ok(PrecomputedContextual { dim, store: HashMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn insert(&mut self, sentence_id: &str, index: usize, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::DimensionMismatch { line: 0, expected: self.dim, found: vector.len() });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(format!("{sentence_id}\t{index}")));
        }
        self.store.insert((sentence_id.to_string(), index), vector);
        Ok(())
    }

    pub fn get(&self, sentence_id: &str, index: usize) -> Result<&[f64], EmbeddingError> {
        // Tuple keys of owned strings can't be borrowed as (&str, usize).
        self.store
            .get(&(sentence_id.to_string(), index))
            .map(Vec::as_slice)
            .ok_or_else(|| EmbeddingError::MissingPrecomputed { sentence_id: sentence_id.to_string(), token_index: index })
    }

    /// Merges another store of the same dimension into this one.
    pub fn extend(&mut self, other: PrecomputedContextual) -> Result<(), EmbeddingError> {
        if other.dim != self.dim {
            return Err(EmbeddingError::DimensionMismatch { line: 0, expected: self.dim, found: other.dim });
        }
        self.store.extend(other.store);
        Ok(())
    }
}

/// Reads `#dim=<d>` then `<sentence-id>\t<token-index>\t v1 .. vd` records.
pub fn load_precomputed(bytes: &[u8]) -> Result<PrecomputedContextual, EmbeddingError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| EmbeddingError::Parse { line: 0, message: format!("invalid UTF-8 at byte {}", e.valid_up_to()) })?;
    let mut table: Option<PrecomputedContextual> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(d) = raw.strip_prefix("#dim=") {
            if table.is_some() {
                return Err(EmbeddingError::Parse { line, message: "repeated #dim header".into() });
            }
            let dim = d.trim().parse::<usize>().map_err(|_| EmbeddingError::Parse {
                line,
                message: format!("bad dimension {d:?}"),
            })?;
            table = Some(PrecomputedContextual::new(dim).map_err(|_| EmbeddingError::Parse {
                line,
                message: "dimension must be positive".into(),
            })?);
            continue;
        }
        if raw.starts_with('#') {
            continue;
        }
        let table = table
            .as_mut()
            .ok_or_else(|| EmbeddingError::Parse { line, message: "missing #dim=<d> header".into() })?;
        let mut parts = raw.splitn(3, '\t');
        let (Some(id), Some(index), Some(rest)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(EmbeddingError::Parse { line, message: "expected <sentence-id>\\t<token-index>\\t<values>".into() });
        };
        let index = index.trim().parse::<usize>().map_err(|_| EmbeddingError::Parse {
            line,
            message: format!("bad token index {index:?}"),
        })?;
        let values = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| EmbeddingError::Parse {
                    line,
                    message: format!("non-numeric component {t:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != table.dim {
            return Err(EmbeddingError::DimensionMismatch { line, expected: table.dim, found: values.len() });
        }
        table.store.insert((id.to_string(), index), values);
    }
    table.ok_or(EmbeddingError::Empty)
}

/// Records sorted by (sentence id, index) so output is deterministic.
pub fn serialize_precomputed(table: &PrecomputedContextual) -> Vec<u8> {
    let mut keys: Vec<&(String, usize)> = table.store.keys().collect();
    keys.sort();
    let mut out = format!("#dim={}\n", table.dim);
    for key in keys {
        let _ = write!(out, "{}\t{}\t", key.0, key.1);
        let v = &table.store[key];
        for (j, x) in v.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:?}");
        }
        out.push('\n');
    }
    out.into_bytes()
}
