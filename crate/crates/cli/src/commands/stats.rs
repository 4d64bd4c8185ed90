//! `stats`: corpus statistics. Writes the per-category word-length table
//! (count, min/max/average length, share of posts over 200/300/400 words)
//! and the per-split category counts.

use std::fmt::Write as _;

use causecat_core::{filter_candidates, length_stats, CausalCategory, Corpus, SplitTag};
use serde::Serialize;

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::output::OutDir;

use super::{load_input_corpus, require_path};

#[derive(Debug, Serialize)]
struct CountRow {
    label: String,
    train: usize,
    test: usize,
    total: usize,
}

#[derive(Debug, Serialize)]
struct CountsReport {
    /// True when separate train/test files were given; false for a single
    /// unsplit corpus.
    split: bool,
    rows: Vec<CountRow>,
}

impl CountsReport {
    fn build(train: Option<&Corpus>, test: Option<&Corpus>, unsplit: Option<&Corpus>) -> Self {
        let split = unsplit.is_none();
        let count = |corpus: Option<&Corpus>, category: Option<CausalCategory>| -> usize {
            corpus.map_or(0, |c| c.iter().filter(|p| p.category == category).count())
        };
        let mut rows = Vec::new();
        let mut total_train = 0;
        let mut total_test = 0;
        for category in CausalCategory::CANDIDATES {
            let (label, cat) = (category.label().to_string(), Some(category));
            let (tr, te) = if split {
                (count(train, cat), count(test, cat))
            } else {
                (count(unsplit, cat), 0)
            };
            total_train += tr;
            total_test += te;
            rows.push(CountRow {
                label,
                train: tr,
                test: te,
                total: tr + te,
            });
        }
        let (tr, te) = if split {
            (count(train, None), count(test, None))
        } else {
            (count(unsplit, None), 0)
        };
        total_train += tr;
        total_test += te;
        rows.push(CountRow {
            label: "No reason".into(),
            train: tr,
            test: te,
            total: tr + te,
        });
        rows.push(CountRow {
            label: "Total".into(),
            train: total_train,
            test: total_test,
            total: total_train + total_test,
        });
        CountsReport { split, rows }
    }

    fn to_text(&self) -> String {
        let mut out = String::new();
        if self.split {
            writeln!(
                out,
                "{:<18} {:>6} {:>6} {:>6}",
                "Category", "Train", "Test", "Total"
            )
            .expect("string write");
            for row in &self.rows {
                writeln!(
                    out,
                    "{:<18} {:>6} {:>6} {:>6}",
                    row.label, row.train, row.test, row.total
                )
                .expect("string write");
            }
        } else {
            writeln!(out, "{:<18} {:>6}", "Category", "Posts").expect("string write");
            for row in &self.rows {
                writeln!(out, "{:<18} {:>6}", row.label, row.total).expect("string write");
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
struct StatsDocument<'a> {
    lengths: &'a causecat_core::LengthStatsReport,
    counts: &'a CountsReport,
}

pub fn run(config: &RunConfig) -> Result<(), Failure> {
    let (train, test, unsplit) = if let Some(path) = &config.corpus {
        let corpus = load_input_corpus("corpus", path, SplitTag::Unsplit)?;
        (None, None, Some(corpus))
    } else {
        let train_path = require_path(
            &config.train_corpus,
            "a corpus (either --corpus or --train-corpus)",
            "--train-corpus",
        )?;
        let train = load_input_corpus("training corpus", train_path, SplitTag::Train)?;
        let test = match &config.test_corpus {
            Some(path) => Some(load_input_corpus("test corpus", path, SplitTag::Test)?),
            None => None,
        };
        (Some(train), test, None)
    };

    // Length statistics run over the candidate posts of everything given.
    let mut posts = Vec::new();
    for corpus in [train.as_ref(), test.as_ref(), unsplit.as_ref()]
        .into_iter()
        .flatten()
    {
        posts.extend(corpus.iter().cloned());
    }
    let combined = Corpus::new(posts, SplitTag::Unsplit)?;
    let candidates = filter_candidates(&combined);
    let lengths = length_stats(&candidates)?;
    let counts = CountsReport::build(train.as_ref(), test.as_ref(), unsplit.as_ref());

    let out = OutDir::create(config)?;
    out.write_json(
        "stats.json",
        &StatsDocument {
            lengths: &lengths,
            counts: &counts,
        },
    )?;
    let lengths_path = out.write_text("stats.txt", &lengths.to_text())?;
    let counts_path = out.write_text("counts.txt", &counts.to_text())?;

    println!("wrote {}", lengths_path.display());
    println!("wrote {}", counts_path.display());
    print!("{}", lengths.to_text());
    Ok(())
}
