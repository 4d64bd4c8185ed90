//! Training loop for the sparse-attention classifier: Adam-family
//! optimizers, a triangular warmup/decay schedule, k-fold grid search, and
//! a finite-difference gradient check.

mod gradcheck;
mod grid;
mod optim;

pub use gradcheck::{gradient_check, gradient_check_with_fault, GradCheckReport, GradFault};
pub use grid::{grid_search, GridCellResult, GridSearchReport};
pub use optim::{AdamState, LinearSchedule, OptimizerKind};

use std::time::Instant;

use ndarray::Array1;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CausalCategory, Corpus, CorpusError, Post};
use crate::discourse::PreprocessMode;
use crate::encoder::{
    backward, build_vocab, encode_and_classify, forward, tokenize, AttentionConfig, Checkpoint,
    EncoderError, Gradients, ModelParams, TokenSequence,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("post {id} is not labeled with a candidate category")]
    Uncategorized { id: String },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("loss diverged to {loss} at epoch {epoch}, step {step}")]
    DivergedLoss {
        epoch: usize,
        step: usize,
        loss: f64,
    },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// One training configuration. Values are checked against the supported
/// search space unless `allow_free_values` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub layers: usize,
    pub dropout: f64,
    pub hidden: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub warmup_fraction: f64,
    pub seed: u64,
    /// Accept values outside the declared search space.
    pub allow_free_values: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            layers: 2,
            dropout: 0.2,
            hidden: 64,
            learning_rate: 1e-5,
            optimizer: OptimizerKind::Adam,
            batch_size: 32,
            epochs: 5,
            warmup_fraction: 0.1,
            seed: 42,
            allow_free_values: false,
        }
    }
}

pub const LAYER_CHOICES: &[usize] = &[1, 2, 3];
pub const DROPOUT_CHOICES: &[f64] = &[0.0, 0.2, 0.4, 0.6, 0.8];
pub const HIDDEN_CHOICES: &[usize] = &[64, 128, 256];
pub const LEARNING_RATE_CHOICES: &[f64] = &[1e-5, 3e-5, 5e-5];
pub const BATCH_CHOICES: &[usize] = &[8, 16, 32, 64];
pub const EPOCH_CHOICES: &[usize] = &[5, 10, 15];

fn close_to_any(value: f64, choices: &[f64]) -> bool {
    choices
        .iter()
        .any(|&c| (value - c).abs() <= 1e-12 * c.abs().max(1.0))
}

impl Hyperparams {
    /// Reject values that are unusable (always) or outside the declared
    /// search space (unless `allow_free_values`).
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidHyperparams(msg));
        if self.layers == 0 {
            return bad("layers must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad(format!(
                "warmup fraction must be in [0, 1], got {}",
                self.warmup_fraction
            ));
        }
        if self.allow_free_values {
            return Ok(());
        }
        if !LAYER_CHOICES.contains(&self.layers) {
            return bad(format!(
                "layers must be one of {LAYER_CHOICES:?}, got {}",
                self.layers
            ));
        }
        if !close_to_any(self.dropout, DROPOUT_CHOICES) {
            return bad(format!(
                "dropout must be one of {DROPOUT_CHOICES:?}, got {}",
                self.dropout
            ));
        }
        if !HIDDEN_CHOICES.contains(&self.hidden) {
            return bad(format!(
                "hidden must be one of {HIDDEN_CHOICES:?}, got {}",
                self.hidden
            ));
        }
        if !close_to_any(self.learning_rate, LEARNING_RATE_CHOICES) {
            return bad(format!(
                "learning rate must be one of {LEARNING_RATE_CHOICES:?}, got {}",
                self.learning_rate
            ));
        }
        if !BATCH_CHOICES.contains(&self.batch_size) {
            return bad(format!(
                "batch size must be one of {BATCH_CHOICES:?}, got {}",
                self.batch_size
            ));
        }
        if !EPOCH_CHOICES.contains(&self.epochs) {
            return bad(format!(
                "epochs must be one of {EPOCH_CHOICES:?}, got {}",
                self.epochs
            ));
        }
        Ok(())
    }
}

/// Everything a finished run produces. The embedded checkpoint carries
/// `PreprocessMode::None`; callers that transformed the corpus first stamp
/// the actual mode before saving.
#[derive(Debug)]
pub struct TrainRunResult {
    pub checkpoint: Checkpoint,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub validation_loss: Option<f64>,
    pub validation_accuracy: Option<f64>,
    pub train_seconds: f64,
    pub validate_seconds: f64,
    pub infer_seconds: f64,
}

impl TrainRunResult {
    /// Short plain-text summary of losses, metrics, and timings.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        out.push_str("epoch  train loss\n");
        for (epoch, loss) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!("{:<5}  {loss:.6}\n", epoch + 1));
        }
        if let (Some(loss), Some(acc)) = (self.validation_loss, self.validation_accuracy) {
            out.push_str(&format!("validation loss      {loss:.6}\n"));
            out.push_str(&format!("validation accuracy  {acc:.4}\n"));
        }
        out.push_str(&format!(
            "time taken (s): train {:.2}, validate {:.2}, infer {:.2}\n",
            self.train_seconds, self.validate_seconds, self.infer_seconds
        ));
        out
    }
}

/// Index of a post's candidate category in code order (0-based).
fn class_index(post: &Post) -> Result<usize, TrainError> {
    post.category
        .and_then(|c| CausalCategory::CANDIDATES.iter().position(|&x| x == c))
        .ok_or_else(|| TrainError::Uncategorized {
            id: post.id.clone(),
        })
}

fn log_sum_exp(logits: &Array1<f64>) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Categorical cross-entropy of `class` under the logits.
pub(crate) fn cross_entropy(logits: &Array1<f64>, class: usize) -> f64 {
    log_sum_exp(logits) - logits[class]
}

/// Gradient of the cross-entropy at the logits: softmax minus one-hot.
pub(crate) fn cross_entropy_dlogits(logits: &Array1<f64>, class: usize) -> Array1<f64> {
    let lse = log_sum_exp(logits);
    let mut d = logits.mapv(|l| (l - lse).exp());
    d[class] -= 1.0;
    d
}

/// Mean loss over `batch` without touching gradients (no dropout).
pub(crate) fn batch_loss(
    params: &ModelParams,
    config: &AttentionConfig,
    batch: &[(TokenSequence, usize)],
) -> f64 {
    let total: f64 = batch
        .iter()
        .map(|(seq, class)| cross_entropy(&forward(seq, params, config, None, false).0, *class))
        .sum();
    total / batch.len() as f64
}

/// Mean loss over `batch` and the gradients of that mean.
pub(crate) fn batch_loss_and_grads(
    params: &ModelParams,
    config: &AttentionConfig,
    batch: &[(TokenSequence, usize)],
    mut dropout: Option<(&mut StdRng, f64)>,
) -> (f64, Gradients) {
    let mut grads = Gradients::zeros_like(params);
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (seq, class) in batch {
        let pass_dropout = dropout.as_mut().map(|(rng, rate)| (&mut **rng, *rate));
        let (logits, cache) = forward(seq, params, config, pass_dropout, true);
        total += cross_entropy(&logits, *class);
        let dlogits = cross_entropy_dlogits(&logits, *class) * scale;
        backward(
            &dlogits,
            &cache.expect("cache requested"),
            params,
            config,
            &mut grads,
        );
    }
    (total * scale, grads)
}

fn labeled_examples(
    corpus: &Corpus,
    vocab: &crate::encoder::Vocabulary,
    max_len: usize,
) -> Result<Vec<(TokenSequence, usize)>, TrainError> {
    corpus
        .iter()
        .map(|post| Ok((tokenize(&post.text, vocab, max_len), class_index(post)?)))
        .collect()
}

/// Train a fresh model on `train_corpus`. When `validation` is given, the
/// result carries validation loss and accuracy computed with dropout off.
/// Deterministic for a fixed seed, data, and configuration.
pub fn train(
    train_corpus: &Corpus,
    validation: Option<&Corpus>,
    hyper: &Hyperparams,
    config: &AttentionConfig,
) -> Result<TrainRunResult, TrainError> {
    hyper.validate()?;
    config.validate()?;
    if !hyper.hidden.is_multiple_of(config.heads) {
        return Err(TrainError::InvalidHyperparams(format!(
            "hidden size {} is not divisible by {} attention heads",
            hyper.hidden, config.heads
        )));
    }
    if train_corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }

    let vocab = build_vocab(train_corpus, 1)?;
    let examples = labeled_examples(train_corpus, &vocab, config.max_len)?;
    let val_examples = match validation {
        Some(val) => Some(labeled_examples(val, &vocab, config.max_len)?),
        None => None,
    };

    let mut params = ModelParams::init(
        vocab.size(),
        hyper.hidden,
        hyper.layers,
        config.max_len,
        crate::encoder::Activation::Gelu,
        hyper.seed,
    );

    let n = examples.len();
    let steps_per_epoch = n.div_ceil(hyper.batch_size);
    let total_steps = hyper.epochs * steps_per_epoch;
    let schedule = LinearSchedule::new(hyper.learning_rate, hyper.warmup_fraction, total_steps);
    let mut state = AdamState::new(&params);
    let mut rng = StdRng::seed_from_u64(hyper.seed);

    let train_start = Instant::now();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    let mut global_step = 0usize;
    let mut indices: Vec<usize> = (0..n).collect();

    for epoch in 0..hyper.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss_sum = 0.0;
        for chunk in indices.chunks(hyper.batch_size) {
            let batch: Vec<(TokenSequence, usize)> =
                chunk.iter().map(|&i| examples[i].clone()).collect();
            let dropout = (hyper.dropout > 0.0).then_some((&mut rng, hyper.dropout));
            let (loss, grads) = batch_loss_and_grads(&params, config, &batch, dropout);
            if !loss.is_finite() {
                return Err(TrainError::DivergedLoss {
                    epoch,
                    step: global_step,
                    loss,
                });
            }
            let lr = schedule.lr_at(global_step);
            state.apply(&mut params, &grads, hyper.optimizer, lr);
            global_step += 1;
            epoch_loss_sum += loss * chunk.len() as f64;
        }
        epoch_losses.push(epoch_loss_sum / n as f64);
    }
    let train_seconds = train_start.elapsed().as_secs_f64();

    let checkpoint = Checkpoint {
        params,
        vocab,
        config: config.clone(),
        preprocess_mode: PreprocessMode::None,
    };

    let mut validation_loss = None;
    let mut validation_accuracy = None;
    let mut validate_seconds = 0.0;
    if let Some(val_examples) = &val_examples {
        let validate_start = Instant::now();
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (seq, class) in val_examples {
            let logits = encode_and_classify(seq, &checkpoint.params, &checkpoint.config);
            loss_sum += cross_entropy(&logits, *class);
            if argmax(&logits) == *class {
                correct += 1;
            }
        }
        validation_loss = Some(loss_sum / val_examples.len() as f64);
        validation_accuracy = Some(correct as f64 / val_examples.len() as f64);
        validate_seconds = validate_start.elapsed().as_secs_f64();
    }

    let infer_start = Instant::now();
    let infer_corpus = validation.unwrap_or(train_corpus);
    let _ = predict(&checkpoint, infer_corpus);
    let infer_seconds = infer_start.elapsed().as_secs_f64();

    Ok(TrainRunResult {
        checkpoint,
        epoch_losses,
        validation_loss,
        validation_accuracy,
        train_seconds,
        validate_seconds,
        infer_seconds,
    })
}

fn argmax(logits: &Array1<f64>) -> usize {
    let mut best = 0;
    for k in 1..logits.len() {
        if logits[k] > logits[best] {
            best = k;
        }
    }
    best
}

/// Classify every post in `corpus`. Ties at the top logit go to the
/// lowest category code. Deterministic: dropout never applies here.
pub fn predict(checkpoint: &Checkpoint, corpus: &Corpus) -> Vec<CausalCategory> {
    corpus
        .iter()
        .map(|post| {
            let seq = tokenize(&post.text, &checkpoint.vocab, checkpoint.config.max_len);
            let logits = encode_and_classify(&seq, &checkpoint.params, &checkpoint.config);
            CausalCategory::CANDIDATES[argmax(&logits)]
        })
        .collect()
}

/// Classify every post and compute the mean cross-entropy against the gold
/// labels. Errors when the corpus is empty or any post lacks a candidate
/// category.
pub fn predict_with_loss(
    checkpoint: &Checkpoint,
    corpus: &Corpus,
) -> Result<(Vec<CausalCategory>, f64), TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut predictions = Vec::with_capacity(corpus.len());
    let mut loss_sum = 0.0;
    for post in corpus.iter() {
        let class = class_index(post)?;
        let seq = tokenize(&post.text, &checkpoint.vocab, checkpoint.config.max_len);
        let logits = encode_and_classify(&seq, &checkpoint.params, &checkpoint.config);
        loss_sum += cross_entropy(&logits, class);
        predictions.push(CausalCategory::CANDIDATES[argmax(&logits)]);
    }
    Ok((predictions, loss_sum / corpus.len() as f64))
}
