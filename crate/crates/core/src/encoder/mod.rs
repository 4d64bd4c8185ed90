//! Desk-scale sparse-attention sequence classifier.
//!
//! The encoder follows the Longformer recipe: token + positional
//! embeddings, transformer blocks whose self-attention combines a sliding
//! (optionally dilated) local window with a set of global positions, and a
//! 5-way classification head over the leading CLS slot. A dense
//! full-attention implementation doubles as a correctness oracle and as the
//! plain-transformer baseline.

mod attention;
mod checkpoint;
mod model;

pub use attention::{full_attention, sliding_window_attention};
pub use checkpoint::Checkpoint;
pub(crate) use model::{backward, forward};
pub use model::{
    encode_and_classify, longformer_layer, Activation, Gradients, LayerGrads, LayerParams,
    ModelParams, NUM_CLASSES,
};

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::text::{strip_control_chars, strip_urls, word_tokens};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";
const CLS_TOKEN: &str = "<cls>";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("attention row {row} has no allowed positions")]
    AllMaskedRow { row: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("checkpoint i/o failure at {path}: {source}")]
    CheckpointIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    BadCheckpoint(String),
}

/// Sparse attention layout: window size, dilation, and global positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttentionConfig {
    /// Window width; each token attends to `window / 2` neighbors per side.
    pub window: usize,
    /// Stride between attended window positions (1 = contiguous band).
    pub dilation: usize,
    /// Token indices that attend to, and are attended by, every valid
    /// position. Defaults to {0}, the CLS slot.
    pub global_positions: BTreeSet<usize>,
    pub max_len: usize,
    /// Attention heads per layer; the hidden size must divide evenly.
    pub heads: usize,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            window: 8,
            dilation: 1,
            global_positions: BTreeSet::from([0]),
            max_len: 512,
            heads: 1,
        }
    }
}

impl AttentionConfig {
    /// Dense variant: every position is global, which makes each layer an
    /// ordinary full-attention transformer block over the global
    /// projections.
    pub fn dense(max_len: usize) -> Self {
        AttentionConfig {
            window: 2,
            dilation: 1,
            global_positions: (0..max_len).collect(),
            max_len,
            heads: 1,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.max_len < 2 || self.max_len > 4096 {
            return Err(EncoderError::BadConfig(format!(
                "max_len must be in [2, 4096], got {}",
                self.max_len
            )));
        }
        if self.window == 0 || !self.window.is_multiple_of(2) {
            return Err(EncoderError::BadConfig(format!(
                "window must be positive and even, got {}",
                self.window
            )));
        }
        if self.window >= self.max_len {
            return Err(EncoderError::BadConfig(format!(
                "window {} must be smaller than max_len {}",
                self.window, self.max_len
            )));
        }
        if self.dilation == 0 {
            return Err(EncoderError::BadConfig(
                "dilation must be at least 1".into(),
            ));
        }
        if let Some(&p) = self.global_positions.iter().next_back() {
            if p >= self.max_len {
                return Err(EncoderError::BadConfig(format!(
                    "global position {p} outside [0, {})",
                    self.max_len
                )));
            }
        }
        if self.heads == 0 {
            return Err(EncoderError::BadConfig(
                "head count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Token ids padded to a fixed length, with the pre-padding length kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// Number of leading non-PAD positions (always ≥ 1: the CLS slot).
    pub valid_len: usize,
}

/// Word-level vocabulary with fixed special ids. Serializes as the plain
/// token list in id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = String;

    fn try_from(tokens: Vec<String>) -> Result<Self, String> {
        Vocabulary::from_ordered_tokens(tokens).map_err(|e| e.to_string())
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(vocab: Vocabulary) -> Vec<String> {
        vocab.tokens
    }
}

impl Vocabulary {
    fn from_ordered_tokens(tokens: Vec<String>) -> Result<Self, EncoderError> {
        if tokens.len() < 3
            || tokens[0] != PAD_TOKEN
            || tokens[1] != UNK_TOKEN
            || tokens[2] != CLS_TOKEN
        {
            return Err(EncoderError::BadCheckpoint(
                "vocabulary must start with <pad>, <unk>, <cls>".into(),
            ));
        }
        let lookup = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocabulary { tokens, lookup })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// Id of `token`, falling back to UNK for unseen tokens.
    pub fn id_of(&self, token: &str) -> u32 {
        self.lookup.get(token).copied().unwrap_or(UNK_ID)
    }

    /// All tokens in id order, specials first.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

fn clean_text(text: &str) -> String {
    strip_control_chars(&strip_urls(text))
}

/// Build a vocabulary from every corpus text: lowercased word tokens with
/// frequency ≥ `min_freq`, ordered by (frequency desc, token asc) after the
/// three specials.
pub fn build_vocab(corpus: &Corpus, min_freq: usize) -> Result<Vocabulary, EncoderError> {
    if min_freq < 1 {
        return Err(EncoderError::BadConfig(
            "min_freq must be at least 1".into(),
        ));
    }
    if corpus.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    let mut freq: HashMap<String, usize> = HashMap::new();
    for post in corpus.iter() {
        let cleaned = clean_text(&post.text).to_lowercase();
        for token in word_tokens(&cleaned) {
            *freq.entry(token.to_string()).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(String, usize)> =
        freq.into_iter().filter(|&(_, n)| n >= min_freq).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tokens = vec![
        PAD_TOKEN.to_string(),
        UNK_TOKEN.to_string(),
        CLS_TOKEN.to_string(),
    ];
    tokens.extend(entries.into_iter().map(|(t, _)| t));
    Vocabulary::from_ordered_tokens(tokens)
}

/// Convert `text` into a CLS-prefixed, PAD-padded id sequence of exactly
/// `max_len` ids, truncating longer texts.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> TokenSequence {
    assert!(max_len >= 2, "max_len must be at least 2");
    let cleaned = clean_text(text).to_lowercase();
    let mut ids = Vec::with_capacity(max_len);
    ids.push(CLS_ID);
    for token in word_tokens(&cleaned) {
        if ids.len() == max_len {
            break;
        }
        ids.push(vocab.id_of(token));
    }
    let valid_len = ids.len();
    ids.resize(max_len, PAD_ID);
    TokenSequence { ids, valid_len }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CausalCategory, Post, SplitTag};

    fn corpus_of(texts: &[&str]) -> Corpus {
        let posts = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Post {
                id: format!("p{i}"),
                text: t.to_string(),
                cause_detected: true,
                category: Some(CausalCategory::BiasOrAbuse),
                explanation: None,
            })
            .collect();
        Corpus::new(posts, SplitTag::Unsplit).expect("corpus")
    }

    #[test]
    fn vocab_orders_by_frequency_then_token() {
        let corpus = corpus_of(&["a b", "a"]);
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        assert_eq!(vocab.size(), 5);
        assert_eq!(vocab.id_of("a"), 3);
        assert_eq!(vocab.id_of("b"), 4);
    }

    #[test]
    fn vocab_min_freq_filters() {
        let corpus = corpus_of(&["a b", "a"]);
        let vocab = build_vocab(&corpus, 2).expect("vocab");
        assert_eq!(vocab.size(), 4);
        assert_eq!(vocab.id_of("a"), 3);
        assert_eq!(vocab.id_of("b"), UNK_ID);
    }

    #[test]
    fn unseen_token_maps_to_unk() {
        let corpus = corpus_of(&["hello world"]);
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        assert_eq!(vocab.id_of("absent"), UNK_ID);
    }

    #[test]
    fn vocab_ties_break_alphabetically() {
        let corpus = corpus_of(&["zeta alpha"]);
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        assert_eq!(vocab.id_of("alpha"), 3);
        assert_eq!(vocab.id_of("zeta"), 4);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let corpus = Corpus::new(vec![], SplitTag::Unsplit).expect("corpus");
        assert!(matches!(
            build_vocab(&corpus, 1),
            Err(EncoderError::EmptyCorpus)
        ));
    }

    #[test]
    fn vocab_is_case_insensitive() {
        let corpus = corpus_of(&["Hello HELLO hello"]);
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        assert_eq!(vocab.size(), 4);
        assert_eq!(vocab.id_of("hello"), 3);
    }

    #[test]
    fn tokenize_pads_and_records_length() {
        let corpus = corpus_of(&["hello world"]);
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        let seq = tokenize("hello hello", &vocab, 8);
        assert_eq!(seq.ids.len(), 8);
        assert_eq!(seq.ids[0], CLS_ID);
        assert_eq!(seq.ids[1], vocab.id_of("hello"));
        assert_eq!(seq.ids[2], vocab.id_of("hello"));
        assert_eq!(&seq.ids[3..], &[PAD_ID; 5]);
        assert_eq!(seq.valid_len, 3);
    }

    #[test]
    fn tokenize_truncates_to_max_len() {
        let corpus = corpus_of(&["w"]);
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        let long_text = vec!["w"; 5000].join(" ");
        let seq = tokenize(&long_text, &vocab, 4096);
        assert_eq!(seq.ids.len(), 4096);
        assert_eq!(seq.valid_len, 4096);
        assert!(seq.ids.iter().all(|&id| id != PAD_ID));
    }

    #[test]
    fn tokenize_empty_text_is_cls_only() {
        let corpus = corpus_of(&["w"]);
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        let seq = tokenize("", &vocab, 4);
        assert_eq!(seq.ids, vec![CLS_ID, PAD_ID, PAD_ID, PAD_ID]);
        assert_eq!(seq.valid_len, 1);
    }

    #[test]
    fn tokenize_drops_urls() {
        let corpus = corpus_of(&["look here now"]);
        let vocab = build_vocab(&corpus, 1).expect("vocab");
        let seq = tokenize("look https://spam.example/x here", &vocab, 8);
        assert_eq!(seq.valid_len, 3);
        assert_eq!(seq.ids[1], vocab.id_of("look"));
        assert_eq!(seq.ids[2], vocab.id_of("here"));
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let ok = AttentionConfig::default();
        assert!(ok.validate().is_ok());

        let mut bad = ok.clone();
        bad.window = 7;
        assert!(bad.validate().is_err());

        bad = ok.clone();
        bad.window = 512;
        assert!(bad.validate().is_err());

        bad = ok.clone();
        bad.dilation = 0;
        assert!(bad.validate().is_err());

        bad = ok.clone();
        bad.global_positions = BTreeSet::from([512]);
        assert!(bad.validate().is_err());

        bad = ok.clone();
        bad.max_len = 8192;
        assert!(bad.validate().is_err());

        bad = ok;
        bad.heads = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dense_config_marks_every_position_global() {
        let cfg = AttentionConfig::dense(16);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.global_positions.len(), 16);
    }
}
