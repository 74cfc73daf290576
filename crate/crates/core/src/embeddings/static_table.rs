use std::collections::HashMap;
use std::fmt::Write as _;

use unicode_normalization::UnicodeNormalization;

use super::EmbeddingError;
use crate::corpus::Diagnostic;
use crate::neural::ParamTensor;

/// What unknown surfaces map to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    #[default]
    Zero,
    MeanOfRows,
}

/// Word-to-vector lookup table (GloVe / word2vec / fastText text exports).
#[derive(Debug, Clone, PartialEq)]
pub struct StaticTable {
    vocab: HashMap<String, usize>,
    words: Vec<String>,
    pub matrix: ParamTensor,
    oov_vector: Vec<f64>,
}

impl StaticTable {
    /// Rows must be finite and all of length `dim > 0`. Duplicate words keep the first row.
    pub fn from_rows(words: Vec<String>, rows: Vec<Vec<f64>>, oov: OovPolicy) -> Result<StaticTable, EmbeddingError> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(EmbeddingError::Empty);
        }
        let mut vocab = HashMap::with_capacity(words.len());
        let mut kept_words = Vec::with_capacity(words.len());
        let mut data = Vec::with_capacity(words.len() * dim);
        for (w, row) in words.into_iter().zip(rows) {
            if row.len() != dim {
                return Err(EmbeddingError::DimensionMismatch { line: kept_words.len() + 1, expected: dim, found: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite(w));
            }
            if vocab.contains_key(&w) {
                continue;
            }
            vocab.insert(w.clone(), kept_words.len());
            kept_words.push(w);
            data.extend(row);
        }
        let matrix = ParamTensor::from_values("static", kept_words.len(), dim, data);
        let oov_vector = match oov {
            OovPolicy::Zero => vec![0.0; dim],
            OovPolicy::MeanOfRows => {
                let n = matrix.rows as f64;
                (0..dim)
                    .map(|j| (0..matrix.rows).map(|r| matrix.value[r * dim + j]).sum::<f64>() / n)
                    .collect()
            }
        };
        Ok(StaticTable { vocab, words: kept_words, matrix, oov_vector })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.vocab.contains_key(surface)
    }

    pub fn row_of(&self, surface: &str) -> Option<usize> {
        self.vocab.get(surface).copied()
    }

    pub fn oov_vector(&self) -> &[f64] {
        &self.oov_vector
    }

    pub(crate) fn set_oov_vector(&mut self, v: Vec<f64>) {
        assert_eq!(v.len(), self.dim());
        self.oov_vector = v;
    }

    /// Row for `surface`, or the OOV vector.
    pub fn lookup(&self, surface: &str) -> &[f64] {
        match self.vocab.get(surface) {
            Some(&r) => self.matrix.row(r),
            None => &self.oov_vector,
        }
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, EmbeddingError> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| EmbeddingError::Parse { line, message: format!("non-numeric component {tok:?}") })
}

/// Reads the whitespace-separated text format: an optional `<count> <dim>`
/// header, then `<token> v1 .. vd` per line.
pub fn load_static_vectors(bytes: &[u8], oov: OovPolicy) -> Result<(StaticTable, Vec<Diagnostic>), EmbeddingError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| EmbeddingError::Parse { line: 0, message: format!("invalid UTF-8 at byte {}", e.valid_up_to()) })?;
    let mut diagnostics = Vec::new();
    let mut words = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut dim: Option<usize> = None;
    let mut declared_count = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if words.is_empty() && dim.is_none() && fields.len() == 2 {
            if let (Ok(count), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if d == 0 {
                    return Err(EmbeddingError::Parse { line, message: "header declares dimension 0".into() });
                }
                dim = Some(d);
                declared_count = Some(count);
                continue;
            }
        }
        let word: String = fields[0].nfc().collect();
        let values = fields[1..].iter().map(|t| parse_f64(t, line)).collect::<Result<Vec<_>, _>>()?;
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected || expected == 0 {
            return Err(EmbeddingError::DimensionMismatch { line, expected, found: values.len() });
        }
        if let Some(first) = seen.get(&word) {
            diagnostics.push(Diagnostic {
                line,
                message: format!("duplicate token {word:?} (first on line {first}); keeping the first"),
            });
            continue;
        }
        seen.insert(word.clone(), line);
        words.push(word);
        rows.push(values);
    }
    if words.is_empty() {
        return Err(EmbeddingError::Empty);
    }
    if let Some(c) = declared_count {
        if c != words.len() + diagnostics.len() {
            diagnostics.push(Diagnostic {
                line: 1,
                message: format!("header declares {c} vectors, file has {}", words.len() + diagnostics.len()),
            });
        }
    }
    Ok((StaticTable::from_rows(words, rows, oov)?, diagnostics))
}

/// Writes the text format with a header; floats use shortest round-trip form.
pub fn serialize_static_vectors(table: &StaticTable) -> Vec<u8> {
    let mut out = format!("{} {}\n", table.len(), table.dim());
    for (r, w) in table.words.iter().enumerate() {
        out.push_str(w);
        for v in table.matrix.row(r) {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
    out.into_bytes()
}
