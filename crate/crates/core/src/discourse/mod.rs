//! Rule-based discourse analysis (RDA) and its length-biased variant
//! (B-RDA).
//!
//! RDA splits a post into sentences, segments each sentence on discourse
//! connectives, and keeps only the sentences where a connective links two
//! verb-bearing segments (two "activities"). The survivors are joined back
//! together. B-RDA applies RDA only to posts longer than 200 words, since
//! aggressive filtering of short posts tends to empty them.

mod tagger;

pub use tagger::{DefaultTagger, Tagger};

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::word_length;
use crate::text::tokens_with_punct;

/// Which text transformation a corpus went through before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PreprocessMode {
    #[default]
    None,
    Rda,
    BRda,
}

impl PreprocessMode {
    pub fn label(self) -> &'static str {
        match self {
            PreprocessMode::None => "none",
            PreprocessMode::Rda => "rda",
            PreprocessMode::BRda => "b-rda",
        }
    }
}

impl std::fmt::Display for PreprocessMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error)]
pub enum DiscourseError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon has no entries")]
    EmptyLexicon,
    #[error("connective phrase {phrase:?} is invalid: {reason}")]
    BadPhrase { phrase: String, reason: String },
}

/// Coarse part-of-speech tags; OTHER is the fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Verb,
    Noun,
    Pron,
    Adj,
    Adv,
    Other,
}

/// One token with its tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub tag: PosTag,
}

/// A run of tagged tokens between connective boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub tokens: Vec<TaggedToken>,
    /// Index of the sentence this segment came from.
    pub source_sentence_index: usize,
    /// The connective that closed the previous segment and opened this one;
    /// `None` for a sentence's first segment.
    pub boundary_connective: Option<String>,
}

impl Segment {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn has_verb(&self) -> bool {
        self.tokens.iter().any(|t| t.tag == PosTag::Verb)
    }
}

/// Set of discourse connective phrases (1..=5 tokens each), matched
/// case-insensitively on token boundaries.
#[derive(Debug, Clone)]
pub struct ConnectiveLexicon {
    entries: HashSet<String>,
    max_tokens: usize,
}

const MAX_PHRASE_TOKENS: usize = 5;

impl ConnectiveLexicon {
    /// Build a lexicon from raw phrases. Phrases are lowercased and
    /// whitespace-normalized; empty or over-long phrases are rejected.
    pub fn from_phrases<I, S>(phrases: I) -> Result<Self, DiscourseError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut entries = HashSet::new();
        let mut max_tokens = 0;
        for phrase in phrases {
            let raw = phrase.as_ref();
            let lowered = raw.to_lowercase();
            let tokens = tokens_with_punct(&lowered);
            let normalized = tokens.join(" ");
            if normalized.is_empty() {
                return Err(DiscourseError::BadPhrase {
                    phrase: raw.to_string(),
                    reason: "empty after normalization".into(),
                });
            }
            let count = tokens.len();
            if count > MAX_PHRASE_TOKENS {
                return Err(DiscourseError::BadPhrase {
                    phrase: raw.to_string(),
                    reason: format!("{count} tokens exceeds the {MAX_PHRASE_TOKENS}-token cap"),
                });
            }
            max_tokens = max_tokens.max(count);
            entries.insert(normalized);
        }
        if entries.is_empty() {
            return Err(DiscourseError::EmptyLexicon);
        }
        Ok(ConnectiveLexicon {
            entries,
            max_tokens,
        })
    }

    /// A small built-in connective list for use when no external lexicon
    /// file is at hand.
    pub fn builtin() -> Self {
        ConnectiveLexicon::from_phrases(BUILTIN_CONNECTIVES.iter().copied())
            .expect("builtin list is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_normalized(&self, phrase: &str) -> bool {
        self.entries.contains(phrase)
    }

    fn max_tokens(&self) -> usize {
        self.max_tokens
    }
}

/// Common English discourse connectives (single and multi-word).
const BUILTIN_CONNECTIVES: &[&str] = &[
    "because",
    "but",
    "so",
    "so that",
    "although",
    "though",
    "however",
    "therefore",
    "thus",
    "hence",
    "since",
    "while",
    "whereas",
    "unless",
    "until",
    "till",
    "when",
    "whenever",
    "after",
    "before",
    "once",
    "as",
    "as if",
    "as though",
    "as long as",
    "as soon as",
    "as a result",
    "even if",
    "even though",
    "in order to",
    "in order that",
    "consequently",
    "meanwhile",
    "moreover",
    "furthermore",
    "nevertheless",
    "nonetheless",
    "otherwise",
    "instead",
    "instead of",
    "besides",
    "in addition",
    "in contrast",
    "on the other hand",
    "for example",
    "for instance",
    "in fact",
    "in particular",
    "rather",
    "then",
    "yet",
    "still",
    "also",
    "finally",
    "additionally",
    "afterward",
    "afterwards",
    "earlier",
    "later",
    "next",
    "on the contrary",
    "in other words",
    "by contrast",
    "by comparison",
    "in turn",
    "in the end",
    "in short",
    "in sum",
    "overall",
    "thereafter",
    "thereby",
    "accordingly",
    "and",
];

/// Read a lexicon file: one phrase per line, `#` starts a comment line,
/// blank lines ignored.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<ConnectiveLexicon, DiscourseError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| DiscourseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let phrases: Vec<&str> = content
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .collect();
    if phrases.is_empty() {
        return Err(DiscourseError::EmptyLexicon);
    }
    ConnectiveLexicon::from_phrases(phrases)
}

/// Abbreviations whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &["mr.", "mrs.", "dr.", "e.g.", "i.e.", "etc.", "vs."];

/// Split `text` into sentences on `.`, `!`, `?` runs followed by
/// whitespace or end of text, guarding a small list of abbreviations.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    let push_sentence = |from: usize, to: usize, sentences: &mut Vec<String>| {
        let s = text[from..to].trim();
        if !s.is_empty() {
            sentences.push(s.to_string());
        }
    };

    while i < chars.len() {
        let (_, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            // Extend over the whole terminator run.
            let mut j = i;
            while j + 1 < chars.len() && matches!(chars[j + 1].1, '.' | '!' | '?') {
                j += 1;
            }
            let run_len = j - i + 1;
            let end_byte = if j + 1 < chars.len() {
                chars[j + 1].0
            } else {
                text.len()
            };
            let followed_by_break = j + 1 >= chars.len() || chars[j + 1].1.is_whitespace();

            let guarded = run_len == 1 && c == '.' && {
                // The token containing this period, scanned back to the
                // previous whitespace.
                let token_start = text[..chars[i].0]
                    .rfind(char::is_whitespace)
                    .map(|p| p + text[p..].chars().next().map_or(1, char::len_utf8))
                    .unwrap_or(0);
                let token = text[token_start..end_byte].to_lowercase();
                ABBREVIATIONS.contains(&token.as_str())
            };

            if followed_by_break && !guarded {
                push_sentence(start, end_byte, &mut sentences);
                start = end_byte;
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    push_sentence(start, text.len(), &mut sentences);
    sentences
}

/// Tag `sentence` with the built-in tagger.
pub fn pos_tag(sentence: &str) -> Vec<TaggedToken> {
    DefaultTagger.tag_sentence(sentence)
}

fn segment_tagged(
    tokens: Vec<TaggedToken>,
    lexicon: &ConnectiveLexicon,
    sentence_index: usize,
) -> Vec<Segment> {
    let lowered: Vec<String> = tokens.iter().map(|t| t.surface.to_lowercase()).collect();
    let mut segments = Vec::new();
    let mut current: Vec<TaggedToken> = Vec::new();
    let mut pending_boundary: Option<String> = None;
    let mut i = 0usize;

    while i < tokens.len() {
        // Longest match first, capped by the lexicon's longest phrase.
        let mut matched: Option<usize> = None;
        let upper = lexicon.max_tokens().min(tokens.len() - i);
        for len in (1..=upper).rev() {
            let candidate = lowered[i..i + len].join(" ");
            if lexicon.contains_normalized(&candidate) {
                matched = Some(len);
                break;
            }
        }
        match matched {
            Some(len) => {
                segments.push(Segment {
                    tokens: std::mem::take(&mut current),
                    source_sentence_index: sentence_index,
                    boundary_connective: pending_boundary.take(),
                });
                pending_boundary = Some(lowered[i..i + len].join(" "));
                i += len;
            }
            None => {
                current.push(tokens[i].clone());
                i += 1;
            }
        }
    }
    segments.push(Segment {
        tokens: current,
        source_sentence_index: sentence_index,
        boundary_connective: pending_boundary,
    });
    segments
}

/// Split one tagged sentence into segments on lexicon connectives:
/// case-insensitive, longest-match, left to right, on token boundaries.
/// The matched connective belongs to neither segment; it is recorded as
/// the `boundary_connective` of the segment it opens.
pub fn segment_on_connectives(sentence: &str, lexicon: &ConnectiveLexicon) -> Vec<Segment> {
    segment_tagged(pos_tag(sentence), lexicon, 0)
}

/// True when the boundary between `left` and `right` connects two
/// activities: both segments contain at least one VERB token.
pub fn is_activity_link(left: &Segment, right: &Segment) -> bool {
    debug_assert!(right.boundary_connective.is_some());
    left.has_verb() && right.has_verb()
}

fn rda_with(text: &str, lexicon: &ConnectiveLexicon, tagger: &dyn Tagger) -> String {
    let mut kept = Vec::new();
    for (index, sentence) in split_sentences(text).into_iter().enumerate() {
        let segments = segment_tagged(tagger.tag_sentence(&sentence), lexicon, index);
        let keep = segments.windows(2).any(|pair| {
            pair[1].boundary_connective.is_some() && is_activity_link(&pair[0], &pair[1])
        });
        if keep {
            kept.push(sentence);
        }
    }
    kept.join(" ")
}

/// Rule-based discourse analysis: keep the sentences where a discourse
/// connective links two verb-bearing segments, joined by single spaces.
/// Returns an empty string when nothing qualifies.
pub fn rda(text: &str, lexicon: &ConnectiveLexicon) -> String {
    rda_with(text, lexicon, &DefaultTagger)
}

/// Length-biased RDA: posts of more than 200 words go through [`rda`],
/// shorter posts are returned verbatim.
pub fn b_rda(text: &str, lexicon: &ConnectiveLexicon) -> String {
    if word_length(text) > 200 {
        rda(text, lexicon)
    } else {
        text.to_string()
    }
}
