//! Small text utilities shared by the corpus loader, the discourse rules,
//! and the tokenizer.

use regex::Regex;
use std::sync::OnceLock;

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)[^\s]+").expect("static pattern"))
}

/// Remove raw URLs from `text`. Only the URL bytes are removed; all other
/// bytes, including any whitespace around the URL, stay untouched.
pub fn strip_urls(text: &str) -> String {
    url_pattern().replace_all(text, "").into_owned()
}

/// Remove control characters, keeping ordinary whitespace (`\n`, `\r`, `\t`).
pub fn strip_control_chars(text: &str) -> String {
    text.chars()
        .filter(|c| !c.is_control() || matches!(c, '\n' | '\r' | '\t'))
        .collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Split `text` into word tokens: maximal runs of alphanumeric characters
/// and apostrophes. Everything else (punctuation, hyphens, whitespace)
/// separates tokens.
pub fn word_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(&text[s..i]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}

/// Split `text` into word tokens plus single-character punctuation tokens.
/// Whitespace separates tokens and is dropped.
pub fn tokens_with_punct(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            if start.is_none() {
                start = Some(i);
            }
            continue;
        }
        if let Some(s) = start.take() {
            out.push(&text[s..i]);
        }
        if !c.is_whitespace() {
            out.push(&text[i..i + c.len_utf8()]);
        }
    }
    if let Some(s) = start {
        out.push(&text[s..]);
    }
    out
}
