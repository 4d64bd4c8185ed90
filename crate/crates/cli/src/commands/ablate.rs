//! `ablate`: train and score all six combinations of attention family
//! (dense transformer vs. sliding-window Longformer) and preprocessing
//! (none, RDA, B-RDA) under one shared seed, so the contribution of each
//! piece can be read off a single table.

use std::fmt::Write as _;

use causecat_core::discourse::PreprocessMode;
use causecat_core::metrics::evaluate;
use causecat_core::trainer::{predict_with_loss, train};
use causecat_core::{
    filter_candidates, split_folds, AttentionConfig, CausalCategory, Corpus, SplitTag,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::output::OutDir;

use super::{load_input_corpus, model_label, require_path, transform_corpus};

/// One ablation cell. Also the row schema `plot` accepts back.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub loss: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AblationDocument {
    pub rows: Vec<AblationRow>,
}

pub fn rows_to_text(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<24} {:>9} {:>9} {:>12} {:>9}",
        "Model", "Accuracy", "Macro F1", "Weighted F1", "Loss"
    )
    .expect("string write");
    for row in rows {
        writeln!(
            out,
            "{:<24} {:>9.4} {:>9.4} {:>12.4} {:>9.4}",
            row.model, row.accuracy, row.macro_f1, row.weighted_f1, row.loss
        )
        .expect("string write");
    }
    out
}

fn gold_labels(corpus: &Corpus) -> Vec<CausalCategory> {
    corpus
        .iter()
        .map(|p| p.category.expect("candidate posts carry a category"))
        .collect()
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    // Every variant including "none" is trained; the lexicon is needed for
    // four of the six cells, so require it up front.
    let lexicon_path = require_path(&config.lexicon, "the ablation needs a lexicon", "--lexicon")?;
    if !lexicon_path.is_file() {
        return Err(crate::fail::missing_input("lexicon", lexicon_path));
    }
    let lexicon = causecat_core::discourse::load_lexicon(lexicon_path)?;

    // Either an explicit train/test pair, or one corpus split with the
    // seeded stratified folds (the first fold's split is used).
    let (train_raw, eval_raw) =
        if let (Some(train_path), Some(test_path)) = (&config.train_corpus, &config.test_corpus) {
            (
                load_input_corpus("training corpus", train_path, SplitTag::Train)?,
                load_input_corpus("test corpus", test_path, SplitTag::Test)?,
            )
        } else {
            let path = require_path(
                &config.corpus,
                "a corpus (either --corpus or --train-corpus with --test-corpus)",
                "--corpus",
            )?;
            let full = load_input_corpus("corpus", path, SplitTag::Unsplit)?;
            let candidates = filter_candidates(&full);
            let mut folds = split_folds(&candidates, config.folds, config.seed)?;
            folds.truncate(1);
            let (train_part, eval_part) = folds.pop().expect("at least one fold");
            (train_part, eval_part)
        };

    let train_candidates = filter_candidates(&train_raw);
    let eval_candidates = filter_candidates(&eval_raw);
    if train_candidates.is_empty() || eval_candidates.is_empty() {
        return Err(Failure::data(
            "ablation needs labeled candidate posts in both splits",
        ));
    }

    let out = OutDir::create(config)?;
    let mut dense = AttentionConfig::dense(config.attention.max_len);
    dense.heads = config.attention.heads;
    let families = [dense, config.attention.clone()];
    let modes = [
        PreprocessMode::None,
        PreprocessMode::Rda,
        PreprocessMode::BRda,
    ];

    let mut rows = Vec::with_capacity(6);
    for family in &families {
        for &mode in &modes {
            let train_set = transform_corpus(&train_candidates, mode, Some(&lexicon));
            let eval_set = transform_corpus(&eval_candidates, mode, Some(&lexicon));
            let result = train(&train_set, None, &config.hyperparams, family)?;
            let (preds, loss) = predict_with_loss(&result.checkpoint, &eval_set)?;
            let report = evaluate(&preds, &gold_labels(&eval_set))?;
            rows.push(AblationRow {
                model: model_label(mode, family),
                accuracy: report.accuracy,
                macro_f1: report.macro_f1,
                weighted_f1: report.weighted_f1,
                loss,
            });
        }
    }

    out.write_json("ablation.json", &AblationDocument { rows: rows.clone() })?;
    let text = rows_to_text(&rows);
    let text_path = out.write_text("ablation.txt", &text)?;

    println!("wrote {}", text_path.display());
    print!("{text}");
    Ok(())
}
