//! `preprocess`: apply the configured discourse filter to a corpus and write
//! the transformed copy plus a per-post length report.
//!
//! Mode `none` copies the input byte for byte, so a pipeline can always be
//! run with a uniform preprocessing stage. The other modes rewrite the text
//! column only; ids, labels, and explanations pass through unchanged.

use std::fmt::Write as _;
use std::fs;

use causecat_core::discourse::PreprocessMode;
use causecat_core::{word_length, Corpus, SplitTag};
use serde::Serialize;

use crate::config::RunConfig;
use crate::fail::{io_failure, Failure};
use crate::output::OutDir;

use super::{lexicon_for_mode, load_input_corpus, require_path, transform_corpus};

pub const OUTPUT_NAME: &str = "preprocessed.csv";

#[derive(Debug, Serialize)]
struct PostDelta {
    id: String,
    original_words: usize,
    transformed_words: usize,
    empty: bool,
}

#[derive(Debug, Serialize)]
struct PreprocessReport {
    mode: String,
    total_posts: usize,
    empty_outputs: usize,
    empty_pct: f64,
    total_original_words: usize,
    total_transformed_words: usize,
    posts: Vec<PostDelta>,
}

impl PreprocessReport {
    fn build(mode: PreprocessMode, original: &Corpus, transformed: &Corpus) -> Self {
        let posts: Vec<PostDelta> = original
            .iter()
            .zip(transformed.iter())
            .map(|(before, after)| {
                let transformed_words = word_length(&after.text);
                PostDelta {
                    id: before.id.clone(),
                    original_words: word_length(&before.text),
                    transformed_words,
                    empty: transformed_words == 0,
                }
            })
            .collect();
        let total_posts = posts.len();
        let empty_outputs = posts.iter().filter(|p| p.empty).count();
        let empty_pct = if total_posts == 0 {
            0.0
        } else {
            100.0 * empty_outputs as f64 / total_posts as f64
        };
        PreprocessReport {
            mode: mode.label().to_string(),
            total_posts,
            empty_outputs,
            empty_pct,
            total_original_words: posts.iter().map(|p| p.original_words).sum(),
            total_transformed_words: posts.iter().map(|p| p.transformed_words).sum(),
            posts,
        }
    }

    fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<12} {:>10} {:>12} {:>6}",
            "Post", "Original", "Transformed", "Empty"
        )
        .expect("string write");
        for post in &self.posts {
            writeln!(
                out,
                "{:<12} {:>10} {:>12} {:>6}",
                post.id,
                post.original_words,
                post.transformed_words,
                if post.empty { "yes" } else { "" }
            )
            .expect("string write");
        }
        writeln!(out, "mode: {}", self.mode).expect("string write");
        writeln!(
            out,
            "words: {} -> {}",
            self.total_original_words, self.total_transformed_words
        )
        .expect("string write");
        writeln!(
            out,
            "empty outputs: {} of {} ({:.2}%)",
            self.empty_outputs, self.total_posts, self.empty_pct
        )
        .expect("string write");
        out
    }
}

/// Serialize a corpus back to the CSV schema it was loaded from.
fn corpus_to_csv(corpus: &Corpus) -> Result<Vec<u8>, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["id", "text", "cd", "category", "explanation"])
        .map_err(|e| Failure::data(format!("cannot write csv header: {e}")))?;
    for post in corpus.iter() {
        let cd = if post.cause_detected { "1" } else { "0" };
        let category = post
            .category
            .map(|c| c.code().to_string())
            .unwrap_or_default();
        let explanation = post
            .explanation
            .as_ref()
            .map(|s| s.join(", "))
            .unwrap_or_default();
        writer
            .write_record([
                post.id.as_str(),
                post.text.as_str(),
                cd,
                &category,
                &explanation,
            ])
            .map_err(|e| Failure::data(format!("cannot write csv row: {e}")))?;
    }
    writer
        .into_inner()
        .map_err(|e| Failure::data(format!("cannot finish csv output: {e}")))
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let input = match &config.corpus {
        Some(path) => path.as_path(),
        None => require_path(&config.train_corpus, "a corpus to preprocess", "--corpus")?,
    };
    let original = load_input_corpus("corpus", input, SplitTag::Unsplit)?;

    let transformed;
    let output_bytes = if config.mode == PreprocessMode::None {
        // A byte-identical copy: re-serializing could change quoting or line
        // endings, so the raw input bytes are copied through instead.
        transformed = original.clone();
        fs::read(input).map_err(|e| io_failure("read", input, e))?
    } else {
        let lexicon = lexicon_for_mode(config)?;
        transformed = transform_corpus(&original, config.mode, lexicon.as_ref());
        corpus_to_csv(&transformed)?
    };

    let out = OutDir::create(config)?;
    let written = out.write_bytes(OUTPUT_NAME, &output_bytes)?;

    let report = PreprocessReport::build(config.mode, &original, &transformed);
    out.write_json("preprocess_report.json", &report)?;
    let report_path = out.write_text("preprocess_report.txt", &report.to_text())?;

    println!("wrote {}", written.display());
    println!("wrote {}", report_path.display());
    println!(
        "{} posts, {} empty after {} ({:.2}%)",
        report.total_posts, report.empty_outputs, report.mode, report.empty_pct
    );
    Ok(())
}
