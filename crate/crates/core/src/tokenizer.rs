//! Text <-> token ids over a decode table, and vocabulary file loading.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::token::TokenId;

#[derive(Debug, Error)]
pub enum TokenizeError {
    #[error("no vocabulary entry matches the text at byte {offset}")]
    Untokenizable { offset: usize },
    #[error("token {token} is outside a vocabulary of size {vocab_size}")]
    OutOfVocabulary { token: TokenId, vocab_size: usize },
    #[error("tokenizer has {tokenizer} entries but the profile has {profile}")]
    VocabMismatch { tokenizer: usize, profile: usize },
    #[error("vocabulary file {path}: {message}")]
    BadVocabulary { path: String, message: String },
}

pub trait Tokenizer: Send + Sync {
    fn vocab_size(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizeError>;
    fn decode(&self, tokens: &[TokenId]) -> Result<String, TokenizeError>;
}

/// Greedy longest-match tokenizer. Duplicate entries resolve to the lowest id.
///
/// This is exact on vocabularies where greedy segmentation is unique (the
/// toy vocabularies are built that way). On a real BPE vocabulary it is an
/// approximation of the merge-based segmentation.
#[derive(Debug, Clone)]
pub struct GreedyTokenizer {
    decode: Vec<String>,
    lookup: HashMap<String, TokenId>,
    max_len: usize,
}

impl GreedyTokenizer {
    pub fn new(decode: Vec<String>) -> Self {
        let mut lookup = HashMap::with_capacity(decode.len());
        for (i, s) in decode.iter().enumerate() {
            if !s.is_empty() {
                lookup.entry(s.clone()).or_insert(TokenId(i as u32));
            }
        }
        let max_len = decode.iter().map(String::len).max().unwrap_or(0);
        GreedyTokenizer {
            decode,
            lookup,
            max_len,
        }
    }
}

impl Tokenizer for GreedyTokenizer {
    fn vocab_size(&self) -> usize {
        self.decode.len()
    }

    fn encode(&self, text: &str) -> Result<Vec<TokenId>, TokenizeError> {
        let mut tokens = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            let mut end = rest.len().min(self.max_len);
            let found = loop {
                if end == 0 {
                    break None;
                }
                if rest.is_char_boundary(end) {
                    if let Some(&id) = self.lookup.get(&rest[..end]) {
                        break Some((id, end));
                    }
                }
                end -= 1;
            };
            let (id, len) = found.ok_or(TokenizeError::Untokenizable { offset: pos })?;
            tokens.push(id);
            pos += len;
        }
        Ok(tokens)
    }

    fn decode(&self, tokens: &[TokenId]) -> Result<String, TokenizeError> {
        let mut out = String::new();
        for &t in tokens {
            let piece = self
                .decode
                .get(t.index())
                .ok_or(TokenizeError::OutOfVocabulary {
                    token: t,
                    vocab_size: self.decode.len(),
                })?;
            out.push_str(piece);
        }
        Ok(out)
    }
}

/// GPT-2 style byte-level alphabet: the printable Latin-1 bytes map to
/// themselves, every other byte `b` to `U+0100 + n` in byte order.
fn byte_level_table() -> HashMap<char, u8> {
    let mut printable: Vec<u8> = (b'!'..=b'~').collect();
    printable.extend(0xA1..=0xAC);
    printable.extend(0xAE..=0xFF);
    let mut map = HashMap::with_capacity(256);
    let mut extra = 0u32;
    for b in 0..=255u8 {
        let c = if printable.contains(&b) {
            char::from(b)
        } else {
            extra += 1;
            char::from_u32(0x100 + extra - 1).expect("valid code point")
        };
        map.insert(c, b);
    }
    map
}

/// Maps a byte-level vocabulary entry (e.g. `"Ġreturn"`) back to text.
pub fn decode_byte_level(entry: &str, table: &HashMap<char, u8>) -> String {
    let bytes: Option<Vec<u8>> = entry.chars().map(|c| table.get(&c).copied()).collect();
    match bytes {
        Some(b) => String::from_utf8_lossy(&b).into_owned(),
        None => entry.to_string(),
    }
}

/// Reads a decode table from JSON. Accepted shapes:
///
/// * an array of strings, index = token id;
/// * an object mapping token string to id;
/// * a tokenizer file with `model.vocab` (object) and optional
///   `added_tokens` (`[{"id", "content"}]`). When its decoder or
///   pre-tokenizer is `ByteLevel`, entries are mapped back to text.
///
/// Ids must cover `0..|V|` without gaps.
pub fn load_decode_table(path: &Path) -> Result<Vec<String>, TokenizeError> {
    let bad = |message: String| TokenizeError::BadVocabulary {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    decode_table_from_json(&json).map_err(bad)
}

pub fn decode_table_from_json(json: &serde_json::Value) -> Result<Vec<String>, String> {
    use serde_json::Value;
    match json {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| format!("entry {i} is not a string"))
            })
            .collect(),
        Value::Object(map) if map.contains_key("model") => {
            let vocab = map["model"]
                .get("vocab")
                .and_then(Value::as_object)
                .ok_or("tokenizer file has no model.vocab object")?;
            let mut pairs = id_pairs(vocab)?;
            if let Some(added) = map.get("added_tokens").and_then(Value::as_array) {
                for t in added {
                    let id = t.get("id").and_then(Value::as_u64).ok_or("added token without id")?;
                    let content = t
                        .get("content")
                        .and_then(Value::as_str)
                        .ok_or("added token without content")?;
                    pairs.push((id, content.to_string()));
                }
            }
            let byte_level = ["decoder", "pre_tokenizer"].iter().any(|k| {
                map.get(*k)
                    .map(|v| v.to_string().contains("\"ByteLevel\""))
                    .unwrap_or(false)
            });
            if byte_level {
                let table = byte_level_table();
                for (_, s) in pairs.iter_mut() {
                    *s = decode_byte_level(s, &table);
                }
            }
            dense(pairs)
        }
        Value::Object(map) => dense(id_pairs(map)?),
        _ => Err("expected a JSON array or object".into()),
    }
}

fn id_pairs(map: &serde_json::Map<String, serde_json::Value>) -> Result<Vec<(u64, String)>, String> {
    map.iter()
        .map(|(k, v)| {
            v.as_u64()
                .map(|id| (id, k.clone()))
                .ok_or_else(|| format!("id of {k:?} is not a non-negative integer"))
        })
        .collect()
}

fn dense(pairs: Vec<(u64, String)>) -> Result<Vec<String>, String> {
    let size = pairs.iter().map(|(id, _)| id + 1).max().unwrap_or(0) as usize;
    let mut table: Vec<Option<String>> = vec![None; size];
    for (id, s) in pairs {
        table[id as usize] = Some(s);
    }
    table
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| format!("no entry for token id {i}")))
        .collect()
}
