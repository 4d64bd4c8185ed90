//! Core library for multi-class causal categorization of long social-media
//! posts.
//!
//! The pipeline runs in four stages, one module each:
//!
//! * [`corpus`] loads and validates annotated posts, computes length
//!   statistics, and produces stratified folds.
//! * [`discourse`] holds the rule-based discourse analysis (RDA) sentence
//!   filter and its budgeted variant (B-RDA) used to shorten long posts.
//! * [`encoder`] implements the sparse-attention sequence classifier,
//!   including a dense reference attention, the sliding-window kernel, and a
//!   directory-based checkpoint format.
//! * [`trainer`] trains the encoder (Adam-family optimizers, warmup/decay
//!   schedule, k-fold grid search) and provides a finite-difference gradient
//!   check.
//! * [`metrics`] computes precision/recall/F1 reports, Fleiss' kappa with
//!   agreement bands, and the Mann-Whitney U test.
//!
//! [`synthetic`] generates small labeled corpora for demos and sanity checks.

pub mod corpus;
pub mod discourse;
pub mod encoder;
pub mod metrics;
pub mod synthetic;
pub mod text;
pub mod trainer;

pub use corpus::{
    filter_candidates, length_stats, load_corpus, split_folds, word_length, CausalCategory,
    ColumnMap, Corpus, CorpusError, LengthStatsReport, Post, SplitTag,
};
pub use discourse::{
    b_rda, is_activity_link, load_lexicon, pos_tag, rda, segment_on_connectives, split_sentences,
    ConnectiveLexicon, DiscourseError, PosTag, PreprocessMode, Segment, TaggedToken,
};
pub use encoder::{
    build_vocab, encode_and_classify, full_attention, sliding_window_attention, tokenize,
    AttentionConfig, Checkpoint, EncoderError, ModelParams, TokenSequence, Vocabulary, CLS_ID,
    NUM_CLASSES, PAD_ID, UNK_ID,
};
pub use metrics::{
    evaluate, fleiss_kappa, kappa_interpretation, mann_whitney_u, mean_pairwise_agreement,
    EvalReport, KappaBand, MannWhitneyResult, MetricsError, PerClassMetrics, RatingMatrix,
};
pub use trainer::{
    gradient_check, grid_search, predict, predict_with_loss, train, GradCheckReport,
    GridCellResult, GridSearchReport, Hyperparams, OptimizerKind, TrainError, TrainRunResult,
};
