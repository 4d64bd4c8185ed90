//! `train`: fit the classifier on a corpus and save a checkpoint.
//!
//! The corpus is preprocessed with the configured mode first, and the saved
//! checkpoint is stamped with that mode so `eval` can refuse mismatched
//! corpora later. Reruns with the same configuration and seed produce
//! byte-identical checkpoints.

use causecat_core::trainer::train;
use causecat_core::{filter_candidates, Corpus, SplitTag};
use serde::Serialize;

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::output::OutDir;

use super::{lexicon_for_mode, load_input_corpus, require_path, transform_corpus};

pub const CHECKPOINT_DIR: &str = "checkpoint";

#[derive(Debug, Serialize)]
struct TrainSummary<'a> {
    model: String,
    mode: &'a str,
    seed: u64,
    train_posts: usize,
    validation_posts: Option<usize>,
    epoch_losses: &'a [f64],
    validation_loss: Option<f64>,
    validation_accuracy: Option<f64>,
    train_seconds: f64,
    validate_seconds: f64,
    infer_seconds: f64,
    checkpoint_dir: &'a str,
}

/// Keep only labeled candidate posts; error out if none remain.
fn candidates_only(role: &str, corpus: &Corpus) -> Result<Corpus, Failure> {
    let candidates = filter_candidates(corpus);
    if candidates.is_empty() {
        return Err(Failure::data(format!(
            "{role} has no labeled candidate posts"
        )));
    }
    Ok(candidates)
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let train_path = match &config.train_corpus {
        Some(path) => path.as_path(),
        None => require_path(&config.corpus, "a training corpus", "--train-corpus")?,
    };
    let raw_train = load_input_corpus("training corpus", train_path, SplitTag::Train)?;
    let raw_validation = match &config.test_corpus {
        Some(path) => Some(load_input_corpus(
            "validation corpus",
            path,
            SplitTag::Test,
        )?),
        None => None,
    };

    let lexicon = lexicon_for_mode(config)?;
    let train_corpus = candidates_only(
        "training corpus",
        &transform_corpus(&raw_train, config.mode, lexicon.as_ref()),
    )?;
    let validation = match &raw_validation {
        Some(raw) => Some(candidates_only(
            "validation corpus",
            &transform_corpus(raw, config.mode, lexicon.as_ref()),
        )?),
        None => None,
    };

    let out = OutDir::create(config)?;
    let mut result = train(
        &train_corpus,
        validation.as_ref(),
        &config.hyperparams,
        &config.attention,
    )?;
    result.checkpoint.preprocess_mode = config.mode;

    // Stage the checkpoint in a sibling directory, then promote it with a
    // rename so a crash can never leave a half-written checkpoint behind.
    let staged = out.path(&format!("{CHECKPOINT_DIR}.tmp"));
    if staged.exists() {
        std::fs::remove_dir_all(&staged)
            .map_err(|e| crate::fail::io_failure("clear", &staged, e))?;
    }
    result.checkpoint.save(&staged)?;
    let checkpoint_path = out.promote_dir(&staged, CHECKPOINT_DIR)?;

    let summary = TrainSummary {
        model: super::model_label(config.mode, &config.attention),
        mode: config.mode.label(),
        seed: config.seed,
        train_posts: train_corpus.len(),
        validation_posts: validation.as_ref().map(Corpus::len),
        epoch_losses: &result.epoch_losses,
        validation_loss: result.validation_loss,
        validation_accuracy: result.validation_accuracy,
        train_seconds: result.train_seconds,
        validate_seconds: result.validate_seconds,
        infer_seconds: result.infer_seconds,
        checkpoint_dir: CHECKPOINT_DIR,
    };
    out.write_json("train_result.json", &summary)?;
    let text_path = out.write_text("train_result.txt", &result.summary_text())?;

    println!("wrote {}", checkpoint_path.display());
    println!("wrote {}", text_path.display());
    print!("{}", result.summary_text());
    Ok(())
}
