//! Deterministic whitespace-and-punctuation tokenization.
//!
//! Tokens carry byte offsets into the source text. The tokenizer guarantees
//! spans are in bounds, non-overlapping, and strictly increasing, and that
//! the original text can be reconstructed from spans plus the gaps between
//! them. Those properties are what downstream trigger spans rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Byte offset of the first byte of the token in the document text.
    pub start: usize,
    /// Byte offset one past the last byte of the token.
    pub end: usize,
}

pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token>;
}

/// Splits on whitespace, keeps runs of alphanumeric characters together, and
/// emits every other non-whitespace character as a single-character token.
/// "Murder." becomes ["Murder", "."].
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleTokenizer;

impl Tokenizer for SimpleTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        let mut tokens = Vec::new();
        let mut word_start: Option<usize> = None;
        for (idx, ch) in text.char_indices() {
            if ch.is_alphanumeric() || ch == '_' {
                if word_start.is_none() {
                    word_start = Some(idx);
                }
                continue;
            }
            if let Some(start) = word_start.take() {
                tokens.push(Token { surface: text[start..idx].to_string(), start, end: idx });
            }
            if !ch.is_whitespace() {
                let end = idx + ch.len_utf8();
                tokens.push(Token { surface: text[idx..end].to_string(), start: idx, end });
            }
        }
        if let Some(start) = word_start {
            tokens.push(Token { surface: text[start..].to_string(), start, end: text.len() });
        }
        tokens
    }
}

/// Tokenizes `text`, rejecting text that is empty or all whitespace.
pub fn tokenize(text: &str, tokenizer: &dyn Tokenizer) -> Result<Vec<Token>> {
    if text.trim().is_empty() {
        return Err(Error::validation("cannot tokenize empty text"));
    }
    let tokens = tokenizer.tokenize(text);
    debug_assert!(spans_are_valid(text, &tokens));
    Ok(tokens)
}

/// True when every span is in bounds, non-overlapping, and strictly
/// increasing. Used by tests as the span-invariant oracle.
pub fn spans_are_valid(text: &str, tokens: &[Token]) -> bool {
    let mut prev_end = 0usize;
    for tok in tokens {
        if tok.start >= tok.end || tok.end > text.len() || tok.start < prev_end {
            return false;
        }
        if text.get(tok.start..tok.end) != Some(tok.surface.as_str()) {
            return false;
        }
        prev_end = tok.end;
    }
    true
}

/// Rebuilds the original text from token surfaces plus the inter-token gaps.
/// Companion oracle to `spans_are_valid`: reconstruction equals the input
/// exactly when the spans are faithful.
pub fn reconstruct(text: &str, tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut cursor = 0usize;
    for tok in tokens {
        out.push_str(&text[cursor..tok.start]);
        out.push_str(&tok.surface);
        cursor = tok.end;
    }
    out.push_str(&text[cursor..]);
    out
}
