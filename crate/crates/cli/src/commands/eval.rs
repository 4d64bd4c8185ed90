//! `eval`: score a checkpoint on a corpus.
//!
//! Emits the headline precision/recall/F1/accuracy row, a per-class
//! breakdown, and the confusion matrix. With `--compare` a second checkpoint
//! is scored on the same stratified folds and the two per-fold macro-F1
//! samples are compared with the Mann-Whitney U test.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use causecat_core::discourse::PreprocessMode;
use causecat_core::metrics::{evaluate, mann_whitney_u, EvalReport};
use causecat_core::trainer::{predict, predict_with_loss};
use causecat_core::{filter_candidates, split_folds, CausalCategory, Checkpoint, Corpus, SplitTag};
use serde::Serialize;

use crate::config::RunConfig;
use crate::fail::{missing_input, Failure};
use crate::output::OutDir;

use super::{lexicon_for_mode, load_input_corpus, model_label, require_path, transform_corpus};

#[derive(Debug, Serialize)]
struct ComparisonBlock {
    baseline: PathBuf,
    compare: PathBuf,
    folds: usize,
    fold_f1_baseline: Vec<f64>,
    fold_f1_compare: Vec<f64>,
    mean_f1_baseline: f64,
    mean_f1_compare: f64,
    u: f64,
    p: f64,
    exact: bool,
    alpha: f64,
    significant: bool,
}

#[derive(Debug, Serialize)]
struct EvalDocument<'a> {
    model: String,
    #[serde(flatten)]
    report: &'a EvalReport,
    comparison: Option<&'a ComparisonBlock>,
}

fn load_checkpoint(role: &str, path: &Path) -> Result<Checkpoint, Failure> {
    if !path.is_dir() {
        return Err(missing_input(role, path));
    }
    Ok(Checkpoint::load(path)?)
}

/// A checkpoint can only score a corpus prepared the way it was trained.
fn check_compatible(
    path: &Path,
    checkpoint: &Checkpoint,
    mode: PreprocessMode,
) -> Result<(), Failure> {
    if checkpoint.preprocess_mode != mode {
        return Err(Failure::data(format!(
            "incompatible checkpoint {}: trained with preprocessing '{}' but this run uses '{}'",
            path.display(),
            checkpoint.preprocess_mode.label(),
            mode.label()
        )));
    }
    Ok(())
}

fn gold_labels(corpus: &Corpus) -> Vec<CausalCategory> {
    corpus
        .iter()
        .map(|p| p.category.expect("candidate posts carry a category"))
        .collect()
}

fn macro_f1_of(checkpoint: &Checkpoint, corpus: &Corpus) -> Result<f64, Failure> {
    let preds = predict(checkpoint, corpus);
    Ok(evaluate(&preds, &gold_labels(corpus))?.macro_f1)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn comparison_text(cmp: &ComparisonBlock) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "Mann-Whitney U over per-fold macro F1 ({} folds)",
        cmp.folds
    )
    .expect("string write");
    writeln!(
        out,
        "  baseline: {}  (mean F1 {:.4})",
        cmp.baseline.display(),
        cmp.mean_f1_baseline
    )
    .expect("string write");
    writeln!(
        out,
        "  compare:  {}  (mean F1 {:.4})",
        cmp.compare.display(),
        cmp.mean_f1_compare
    )
    .expect("string write");
    writeln!(
        out,
        "  U = {:.1}, p = {:.4} ({}), alpha = {:.2}",
        cmp.u,
        cmp.p,
        if cmp.exact {
            "exact"
        } else {
            "normal approximation"
        },
        cmp.alpha
    )
    .expect("string write");
    writeln!(
        out,
        "  verdict: {}",
        if cmp.significant {
            "significant difference"
        } else {
            "no significant difference"
        }
    )
    .expect("string write");
    out
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let checkpoint_path = require_path(&config.checkpoint, "a checkpoint", "--checkpoint")?;
    let checkpoint = load_checkpoint("checkpoint", checkpoint_path)?;
    check_compatible(checkpoint_path, &checkpoint, config.mode)?;

    let corpus_path = match &config.test_corpus {
        Some(path) => path.as_path(),
        None => require_path(&config.corpus, "an evaluation corpus", "--test-corpus")?,
    };
    let raw = load_input_corpus("evaluation corpus", corpus_path, SplitTag::Test)?;
    let candidates = filter_candidates(&raw);
    if candidates.is_empty() {
        return Err(Failure::data(format!(
            "evaluation corpus {} has no labeled candidate posts",
            corpus_path.display()
        )));
    }
    let lexicon = lexicon_for_mode(config)?;
    let corpus = transform_corpus(&candidates, config.mode, lexicon.as_ref());

    let out = OutDir::create(config)?;
    let (preds, loss) = predict_with_loss(&checkpoint, &corpus)?;
    let mut report = evaluate(&preds, &gold_labels(&corpus))?;
    report.mean_loss = Some(loss);
    let label = model_label(config.mode, &checkpoint.config);

    let comparison = match &config.compare {
        Some(compare_path) => {
            let other = load_checkpoint("comparison checkpoint", compare_path)?;
            check_compatible(compare_path, &other, config.mode)?;
            let folds = split_folds(&corpus, config.folds, config.seed)?;
            let mut f1_baseline = Vec::with_capacity(folds.len());
            let mut f1_compare = Vec::with_capacity(folds.len());
            for (_, validation) in &folds {
                f1_baseline.push(macro_f1_of(&checkpoint, validation)?);
                f1_compare.push(macro_f1_of(&other, validation)?);
            }
            let test = mann_whitney_u(&f1_baseline, &f1_compare, 0.05)?;
            Some(ComparisonBlock {
                baseline: checkpoint_path.to_path_buf(),
                compare: compare_path.clone(),
                folds: config.folds,
                mean_f1_baseline: mean(&f1_baseline),
                mean_f1_compare: mean(&f1_compare),
                fold_f1_baseline: f1_baseline,
                fold_f1_compare: f1_compare,
                u: test.u,
                p: test.p,
                exact: test.exact,
                alpha: test.alpha,
                significant: test.significant,
            })
        }
        None => None,
    };

    let document = EvalDocument {
        model: label.clone(),
        report: &report,
        comparison: comparison.as_ref(),
    };
    out.write_json("eval.json", &document)?;

    let mut text = report.to_text(&label);
    if let Some(cmp) = &comparison {
        text.push('\n');
        text.push_str(&comparison_text(cmp));
    }
    let text_path = out.write_text("eval.txt", &text)?;
    out.write_text("per_class.txt", &report.per_class_text())?;
    out.write_text("confusion.csv", &report.confusion_csv())?;

    println!("wrote {}", text_path.display());
    print!("{text}");
    Ok(())
}
