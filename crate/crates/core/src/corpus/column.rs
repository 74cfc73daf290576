use std::sync::Arc;

use super::{CorpusError, Sentence, TagSet, TaggedCorpus, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Unknown tag codes are errors.
    Strict,
    /// Unknown tag codes are reported and the token is kept untagged.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub corpus: TaggedCorpus,
    pub diagnostics: Vec<Diagnostic>,
}

/// Comment lines: `#` alone or `# ` followed by text. `#\tRD_SYM` is a token.
fn is_comment(line: &str) -> bool {
    line == "#" || line.starts_with("# ")
}

/// `# id = <id>` comments name the sentence that follows them.
fn id_comment(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("# id")?.trim_start();
    rest.strip_prefix('=').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses a column file. Sentence ids default to `<source>:<line>` where
/// `line` is the 1-based line of the sentence's first token.
pub fn parse_column_file(
    bytes: &[u8],
    source: &str,
    tagset: Arc<TagSet>,
    mode: ParseMode,
) -> Result<Parsed, CorpusError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CorpusError::InvalidUtf8 { offset: e.valid_up_to() })?;
    parse_column_str(text, source, tagset, mode)
}

pub fn parse_column_str(
    text: &str,
    source: &str,
    tagset: Arc<TagSet>,
    mode: ParseMode,
) -> Result<Parsed, CorpusError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut sentences = Vec::new();
    let mut diagnostics = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut first_line = 0;
    let mut pending_id: Option<String> = None;

    let mut flush = |tokens: &mut Vec<Token>, first_line: usize, pending_id: &mut Option<String>| {
        if tokens.is_empty() {
            return Ok(());
        }
        let id = pending_id
            .take()
            .unwrap_or_else(|| format!("{source}:{first_line}"));
        sentences.push(Sentence::new(id, std::mem::take(tokens))?);
        Ok::<(), CorpusError>(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if is_comment(raw) {
            if let Some(id) = id_comment(raw) {
                if tokens.is_empty() {
                    pending_id = Some(id.to_string());
                }
            }
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        match fields.as_slice() {
            [] => flush(&mut tokens, first_line, &mut pending_id)?,
            [surface] => {
                if tokens.is_empty() {
                    first_line = line_no;
                }
                tokens.push(Token::new(surface, None)?);
            }
            [surface, code] => {
                if tokens.is_empty() {
                    first_line = line_no;
                }
                let gold = match tagset.ordinal(code) {
                    Some(g) => Some(g),
                    None if mode == ParseMode::Strict => {
                        return Err(CorpusError::UnknownTag { line: line_no, code: code.to_string() })
                    }
                    None => {
                        diagnostics.push(Diagnostic {
                            line: line_no,
                            message: format!("unknown tag {code:?}; token kept untagged"),
                        });
                        None
                    }
                };
                tokens.push(Token::new(surface, gold)?);
            }
            _ => return Err(CorpusError::Malformed { line: line_no, fields: fields.len() }),
        }
    }
    flush(&mut tokens, first_line, &mut pending_id)?;
    Ok(Parsed { corpus: TaggedCorpus::new(sentences, tagset), diagnostics })
}

/// Canonical column output: one `surface\ttag` line per token (surface only
/// when untagged), a blank line after every sentence.
pub fn write_column_file(corpus: &TaggedCorpus) -> Vec<u8> {
    let mut out = String::new();
    for sentence in &corpus.sentences {
        for token in sentence.tokens() {
            out.push_str(token.surface());
            if let Some(g) = token.gold {
                out.push('\t');
                out.push_str(corpus.tagset.code(g));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out.into_bytes()
}
