//! Versioned binary checkpoints.
//!
//! Layout: `b"SEQTAGCK"`, format version (u32), payload length (u64),
//! SHA-256 of the payload, payload. The payload holds the config text, the
//! tagset, the selected dev score, the embedding-stack descriptors and every
//! persisted parameter tensor as a named, shaped block of little-endian f64.
//! Precomputed vectors are not stored; re-attach them after loading.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{SequenceModel, TrainError, TrainingConfig};
use crate::corpus::{Category, Tag, TagSet};
use crate::crf::Transitions;
use crate::embeddings::{CharEncoder, EmbeddingStack, OovPolicy, PrecomputedContextual, Provider, StackEntry, StaticTable};
use crate::neural::{BiLstmEncoder, Linear, LstmCell, ParamTensor};

const MAGIC: &[u8; 8] = b"SEQTAGCK";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checkpoint corrupt: checksum mismatch")]
    ChecksumMismatch,
    #[error("checkpoint malformed: {0}")]
    Malformed(String),
}

const KIND_STATIC: u8 = 0;
const KIND_PRECOMPUTED: u8 = 1;
const KIND_CHAR: u8 = 2;

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&u32::try_from(v).expect("size fits in u32").to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn tensor(&mut self, name: &str, t: &ParamTensor) {
        self.str(name);
        self.u32(t.rows);
        self.u32(t.cols);
        for &v in &t.value {
            self.f64(v);
        }
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn malformed(m: impl Into<String>) -> CheckpointError {
    CheckpointError::Malformed(m.into())
}

impl<'a> Dec<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| malformed("unexpected end of payload"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn str(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| malformed("string is not UTF-8"))
    }
    fn tensor(&mut self) -> Result<ParamTensor, CheckpointError> {
        let name = self.str()?;
        let rows = self.u32()?;
        let cols = self.u32()?;
        let n = rows.checked_mul(cols).ok_or_else(|| malformed("tensor too large"))?;
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| malformed("tensor too large"))?)?;
        let value = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(ParamTensor::from_values(name, rows, cols, value))
    }
}

/// Every tensor that defines the model's predictions, trainable or not.
fn persisted(model: &SequenceModel) -> Vec<(String, &ParamTensor)> {
    let mut out: Vec<(String, &ParamTensor)> = Vec::new();
    for e in model.stack.entries() {
        match &e.provider {
            Provider::Static(t) => out.push((t.matrix.name.clone(), &t.matrix)),
            Provider::Char(c) => out.extend(c.params().into_iter().map(|p| (p.name.clone(), p))),
            Provider::Precomputed(_) => {}
        }
    }
    if let Some(enc) = &model.encoder {
        out.extend(enc.params().into_iter().map(|p| (p.name.clone(), p)));
    }
    for p in [&model.projection.weight, &model.projection.bias] {
        out.push((p.name.clone(), p));
    }
    out.extend(model.transitions.params().into_iter().map(|p| (p.name.clone(), p)));
    out
}

fn persisted_mut(model: &mut SequenceModel) -> Vec<&mut ParamTensor> {
    let mut out: Vec<&mut ParamTensor> = Vec::new();
    for e in model.stack.entries_mut() {
        match &mut e.provider {
            Provider::Static(t) => out.push(&mut t.matrix),
            Provider::Char(c) => out.extend(c.params_mut()),
            Provider::Precomputed(_) => {}
        }
    }
    if let Some(enc) = &mut model.encoder {
        out.extend(enc.params_mut());
    }
    out.extend(model.projection.params_mut());
    out.extend(model.transitions.params_mut());
    out
}

fn encode_payload(model: &SequenceModel) -> Vec<u8> {
    let mut e = Enc::default();
    e.str(&model.config.render());
    e.u32(model.tagset.len());
    for t in model.tagset.tags() {
        e.str(&t.code);
        e.str(t.category.name());
        e.str(&t.type_name);
    }
    match model.dev_score {
        Some(s) => {
            e.u8(1);
            e.f64(s);
        }
        None => {
            e.u8(0);
            e.f64(0.0);
        }
    }
    e.u32(model.stack.entries().len());
    for entry in model.stack.entries() {
        e.str(&entry.name);
        e.u8(entry.trainable as u8);
        match &entry.provider {
            Provider::Static(t) => {
                e.u8(KIND_STATIC);
                e.u32(t.dim());
                e.u32(t.len());
                for w in t.words() {
                    e.str(w);
                }
                e.tensor("oov", &ParamTensor::from_values("oov", 1, t.dim(), t.oov_vector().to_vec()));
            }
            Provider::Precomputed(p) => {
                e.u8(KIND_PRECOMPUTED);
                e.u32(p.dim());
            }
            Provider::Char(c) => {
                e.u8(KIND_CHAR);
                e.str(&c.chars().iter().collect::<String>());
                e.u32(c.embeddings.cols);
                e.u32(c.fwd.hidden());
            }
        }
    }
    let params = persisted(model);
    e.u32(params.len());
    for (name, t) in params {
        e.tensor(&name, t);
    }
    e.0
}

/// Serializes `model` into checkpoint bytes.
pub fn write_model(model: &SequenceModel) -> Vec<u8> {
    let payload = encode_payload(model);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&payload));
    out.extend_from_slice(&payload);
    out
}

/// Parses checkpoint bytes. Nothing is returned unless the whole file verifies.
pub fn read_model(bytes: &[u8]) -> Result<SequenceModel, CheckpointError> {
    if bytes.len() < 12 {
        if !MAGIC.starts_with(&bytes[..bytes.len().min(8)]) {
            return Err(CheckpointError::BadMagic);
        }
        return Err(CheckpointError::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    if &bytes[..8] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Truncated { expected: HEADER_LEN, found: bytes.len() });
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let expected = HEADER_LEN.saturating_add(len);
    if bytes.len() != expected {
        return Err(CheckpointError::Truncated { expected, found: bytes.len() });
    }
    let payload = &bytes[HEADER_LEN..];
    if Sha256::digest(payload).as_slice() != &bytes[20..52] {
        return Err(CheckpointError::ChecksumMismatch);
    }
    decode_payload(payload)
}

fn decode_payload(payload: &[u8]) -> Result<SequenceModel, CheckpointError> {
    let mut d = Dec { buf: payload, pos: 0 };
    let config = TrainingConfig::from_text(&d.str()?).map_err(|e| malformed(e.to_string()))?;
    let n_tags = d.u32()?;
    let mut tags = Vec::with_capacity(n_tags.min(1 << 16));
    for _ in 0..n_tags {
        let code = d.str()?;
        let cat = d.str()?;
        let category = Category::from_name(&cat).ok_or_else(|| malformed(format!("unknown category {cat:?}")))?;
        tags.push(Tag { code, category, type_name: d.str()? });
    }
    let tagset = Arc::new(TagSet::new(tags).map_err(|e| malformed(e.to_string()))?);
    let has_score = d.u8()? == 1;
    let score = d.f64()?;
    let n_entries = d.u32()?;
    let mut entries = Vec::new();
    let mut oov_vectors = Vec::new();
    for _ in 0..n_entries {
        let name = d.str()?;
        let trainable = d.u8()? == 1;
        let provider = match d.u8()? {
            KIND_STATIC => {
                let dim = d.u32()?;
                let n = d.u32()?;
                let words = (0..n).map(|_| d.str()).collect::<Result<Vec<_>, _>>()?;
                let oov = d.tensor()?;
                let table = StaticTable::from_rows(words, vec![vec![0.0; dim]; n], OovPolicy::Zero)
                    .map_err(|e| malformed(e.to_string()))?;
                if table.len() != n || oov.len() != dim {
                    return Err(malformed(format!("static provider {name}: inconsistent vocabulary")));
                }
                oov_vectors.push((entries.len(), oov.value));
                Provider::Static(table)
            }
            KIND_PRECOMPUTED => {
                Provider::Precomputed(PrecomputedContextual::new(d.u32()?).map_err(|e| malformed(e.to_string()))?)
            }
            KIND_CHAR => {
                let chars: Vec<char> = d.str()?.chars().collect();
                let char_dim = d.u32()?;
                let hidden = d.u32()?;
                Provider::Char(CharEncoder::from_parts(
                    chars.clone(),
                    ParamTensor::zeros("e", chars.len() + 1, char_dim),
                    LstmCell::zeros("f", char_dim, hidden),
                    LstmCell::zeros("b", char_dim, hidden),
                ))
            }
            k => return Err(malformed(format!("unknown provider kind {k}"))),
        };
        entries.push(StackEntry::new(name, provider, trainable));
    }
    let mut stack = EmbeddingStack::new(entries).map_err(|e| malformed(e.to_string()))?;
    for (i, v) in oov_vectors {
        if let Provider::Static(t) = &mut stack.entries_mut()[i].provider {
            t.set_oov_vector(v);
        }
    }
    let mut model = skeleton(stack, tagset, config);
    model.dev_score = has_score.then_some(score);

    let n_params = d.u32()?;
    let mut blocks = HashMap::new();
    for _ in 0..n_params {
        let t = d.tensor()?;
        blocks.insert(t.name.clone(), t);
    }
    if d.pos != payload.len() {
        return Err(malformed("trailing bytes after parameter blocks"));
    }
    let slots = persisted_mut(&mut model);
    if slots.len() != blocks.len() {
        return Err(malformed(format!("expected {} parameter blocks, found {}", slots.len(), blocks.len())));
    }
    for slot in slots {
        let block = blocks
            .remove(&slot.name)
            .ok_or_else(|| malformed(format!("missing parameter block {}", slot.name)))?;
        if (block.rows, block.cols) != (slot.rows, slot.cols) {
            return Err(malformed(format!(
                "{}: shape {}x{} does not match {}x{}",
                slot.name, block.rows, block.cols, slot.rows, slot.cols
            )));
        }
        slot.value = block.value;
    }
    Ok(model)
}

/// Zero-valued model with the shapes implied by `config`.
fn skeleton(stack: EmbeddingStack, tagset: Arc<TagSet>, config: TrainingConfig) -> SequenceModel {
    let input = stack.total_dim();
    let encoder = match config.architecture {
        super::Architecture::BiLstmCrf => Some(BiLstmEncoder {
            layers: (0..config.hidden_layers)
                .map(|l| {
                    let d = if l == 0 { input } else { 2 * config.hidden_size };
                    (
                        LstmCell::zeros(&format!("encoder.{l}.fwd"), d, config.hidden_size),
                        LstmCell::zeros(&format!("encoder.{l}.bwd"), d, config.hidden_size),
                    )
                })
                .collect(),
        }),
        super::Architecture::CrfOnly => None,
    };
    let feat = encoder.as_ref().map_or(input, BiLstmEncoder::output_dim);
    let t = tagset.len();
    SequenceModel {
        stack,
        encoder,
        projection: Linear {
            weight: ParamTensor::zeros("projection.weight", t, feat),
            bias: ParamTensor::zeros("projection.bias", t, 1),
        },
        transitions: Transitions::zeros(t),
        tagset,
        config,
        dev_score: None,
    }
}

/// Writes atomically: a sibling temp file is synced and renamed over `path`.
pub fn save_model(model: &SequenceModel, path: &Path) -> Result<(), TrainError> {
    let bytes = write_model(model);
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint");
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| CheckpointError::Io(e).into())
}

pub fn load_model(path: &Path) -> Result<SequenceModel, TrainError> {
    let bytes = fs::read(path).map_err(CheckpointError::Io)?;
    Ok(read_model(&bytes)?)
}
