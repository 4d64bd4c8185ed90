//! Corpus loading, validation, candidate filtering, length statistics, and
//! stratified fold splitting.
//!
//! A corpus is a CSV file of annotated posts. Each row carries an id, the
//! post text, a cause-detected flag, an optional causal category, and an
//! optional comma-separated list of explanation spans. Rows that violate the
//! schema are rejected with a row number; nothing is skipped silently.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::strip_urls;

/// The five causal categories plus the "no reason" marker used when no
/// cause was detected or annotators could not identify one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CausalCategory {
    NoReason,
    BiasOrAbuse,
    JobsAndCareer,
    Medication,
    Relationship,
    Alienation,
}

impl CausalCategory {
    /// The five categories that mark a post as a candidate, in code order.
    pub const CANDIDATES: [CausalCategory; 5] = [
        CausalCategory::BiasOrAbuse,
        CausalCategory::JobsAndCareer,
        CausalCategory::Medication,
        CausalCategory::Relationship,
        CausalCategory::Alienation,
    ];

    /// Numeric annotation code (0 through 5).
    pub fn code(self) -> u8 {
        match self {
            CausalCategory::NoReason => 0,
            CausalCategory::BiasOrAbuse => 1,
            CausalCategory::JobsAndCareer => 2,
            CausalCategory::Medication => 3,
            CausalCategory::Relationship => 4,
            CausalCategory::Alienation => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CausalCategory::NoReason),
            1 => Some(CausalCategory::BiasOrAbuse),
            2 => Some(CausalCategory::JobsAndCareer),
            3 => Some(CausalCategory::Medication),
            4 => Some(CausalCategory::Relationship),
            5 => Some(CausalCategory::Alienation),
            _ => None,
        }
    }

    /// Human-readable label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            CausalCategory::NoReason => "No reason",
            CausalCategory::BiasOrAbuse => "Bias or Abuse",
            CausalCategory::JobsAndCareer => "Jobs and career",
            CausalCategory::Medication => "Medication",
            CausalCategory::Relationship => "Relationship",
            CausalCategory::Alienation => "Alienation",
        }
    }
}

impl std::fmt::Display for CausalCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Which split a corpus (or fold part) belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Test,
    Unsplit,
}

/// One annotated post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub cause_detected: bool,
    /// Present exactly when `cause_detected` is true; one of the five
    /// candidate categories.
    pub category: Option<CausalCategory>,
    /// Verbatim spans the annotators marked as the expressed reason.
    pub explanation: Option<Vec<String>>,
}

/// An ordered collection of posts with unique ids and a split tag.
#[derive(Debug, Clone)]
pub struct Corpus {
    posts: Vec<Post>,
    split_tag: SplitTag,
}

impl Corpus {
    /// Build a corpus, enforcing id uniqueness and the flag/category
    /// consistency rule.
    pub fn new(posts: Vec<Post>, split_tag: SplitTag) -> Result<Self, CorpusError> {
        let mut seen = std::collections::HashSet::new();
        for post in &posts {
            if !seen.insert(post.id.clone()) {
                return Err(CorpusError::DuplicateId {
                    id: post.id.clone(),
                });
            }
            let consistent = match (post.cause_detected, post.category) {
                (true, Some(cat)) => cat != CausalCategory::NoReason,
                (false, None) => true,
                _ => false,
            };
            if !consistent {
                return Err(CorpusError::InconsistentPost {
                    id: post.id.clone(),
                });
            }
        }
        Ok(Corpus { posts, split_tag })
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Post> {
        self.posts.iter()
    }

    /// Same posts under a different split tag.
    pub fn with_split_tag(&self, split_tag: SplitTag) -> Corpus {
        Corpus {
            posts: self.posts.clone(),
            split_tag,
        }
    }

    /// Apply `f` to every post text, keeping annotations unchanged.
    pub fn map_texts(&self, mut f: impl FnMut(&str) -> String) -> Corpus {
        let posts = self
            .posts
            .iter()
            .map(|p| Post {
                text: f(&p.text),
                ..p.clone()
            })
            .collect();
        Corpus {
            posts,
            split_tag: self.split_tag,
        }
    }
}

/// Maps the logical fields onto CSV header names, so differently headed
/// exports can be loaded without editing the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub id: String,
    pub text: String,
    pub cd: String,
    pub category: String,
    pub explanation: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: "id".into(),
            text: "text".into(),
            cd: "cd".into(),
            category: "category".into(),
            explanation: "explanation".into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse failure: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {name:?} in header")]
    MissingColumn { name: String },
    #[error("row {row}: field is not valid UTF-8")]
    EncodingError { row: usize },
    #[error("row {row}: bad category code {found:?}")]
    BadCategoryCode { row: usize, found: String },
    #[error("row {row}: bad cause-detected flag {found:?} (expected 0 or 1)")]
    BadCdFlag { row: usize, found: String },
    #[error("duplicate post id {id:?}")]
    DuplicateId { id: String },
    #[error("post {id:?} has an inconsistent cause flag / category pair")]
    InconsistentPost { id: String },
    #[error("post {id:?} has no category; length statistics need categorized posts")]
    Uncategorized { id: String },
    #[error("need at least {needed} posts for {k} folds, corpus has {len}")]
    TooFewItems { k: usize, needed: usize, len: usize },
    #[error("fold count must be at least 2, got {k}")]
    BadFoldCount { k: usize },
}

/// Load a corpus from a CSV file.
///
/// Post texts are cleaned of raw URLs on the way in; everything else is
/// preserved byte for byte. Malformed rows abort the load with their
/// 1-based data row number.
pub fn load_corpus(
    path: impl AsRef<Path>,
    columns: &ColumnMap,
    split_tag: SplitTag,
) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);

    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn {
                name: name.to_string(),
            })
    };
    let id_ix = find(&columns.id)?;
    let text_ix = find(&columns.text)?;
    let cd_ix = find(&columns.cd)?;
    let cat_ix = find(&columns.category)?;
    let expl_ix = find(&columns.explanation)?;

    let mut posts = Vec::new();
    for (row_0, record) in reader.byte_records().enumerate() {
        let row = row_0 + 1;
        let record = record?;
        let field = |ix: usize| -> Result<&str, CorpusError> {
            let bytes = record.get(ix).unwrap_or(b"");
            std::str::from_utf8(bytes).map_err(|_| CorpusError::EncodingError { row })
        };

        let id = field(id_ix)?.trim().to_string();
        let text = strip_urls(field(text_ix)?);

        let cd_raw = field(cd_ix)?.trim();
        let cause_detected = match cd_raw {
            "0" => false,
            "1" => true,
            other => {
                return Err(CorpusError::BadCdFlag {
                    row,
                    found: other.to_string(),
                });
            }
        };

        let cat_raw = field(cat_ix)?.trim();
        let category = if cat_raw.is_empty() || cat_raw == "-" {
            None
        } else {
            let code: u8 = cat_raw.parse().map_err(|_| CorpusError::BadCategoryCode {
                row,
                found: cat_raw.to_string(),
            })?;
            match CausalCategory::from_code(code) {
                Some(CausalCategory::NoReason) => None,
                Some(cat) => Some(cat),
                None => {
                    return Err(CorpusError::BadCategoryCode {
                        row,
                        found: cat_raw.to_string(),
                    })
                }
            }
        };
        // A detected cause must come with one of the five categories, and a
        // post without a detected cause must not carry one.
        if cause_detected != category.is_some() {
            return Err(CorpusError::BadCategoryCode {
                row,
                found: cat_raw.to_string(),
            });
        }

        let expl_raw = field(expl_ix)?.trim();
        let explanation = if expl_raw.is_empty() || expl_raw == "-" {
            None
        } else {
            let spans: Vec<String> = expl_raw
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if spans.is_empty() {
                None
            } else {
                Some(spans)
            }
        };

        posts.push(Post {
            id,
            text,
            cause_detected,
            category,
            explanation,
        });
    }

    Corpus::new(posts, split_tag)
}

/// Number of words in `text`, counting maximal whitespace-separated runs.
pub fn word_length(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Keep only the posts whose cause flag is set.
pub fn filter_candidates(corpus: &Corpus) -> Corpus {
    let posts = corpus
        .iter()
        .filter(|p| p.cause_detected)
        .cloned()
        .collect();
    Corpus {
        posts,
        split_tag: corpus.split_tag,
    }
}

/// Length summary for one group of posts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub avg_len: f64,
    /// Percentage of posts strictly longer than 200 / 300 / 400 words.
    pub pct_over_200: f64,
    pub pct_over_300: f64,
    pub pct_over_400: f64,
}

fn summarize(lengths: &[usize]) -> Option<LengthSummary> {
    if lengths.is_empty() {
        return None;
    }
    let count = lengths.len();
    let total: usize = lengths.iter().sum();
    let pct =
        |bound: usize| 100.0 * lengths.iter().filter(|&&l| l > bound).count() as f64 / count as f64;
    Some(LengthSummary {
        count,
        min_len: *lengths.iter().min().expect("non-empty"),
        max_len: *lengths.iter().max().expect("non-empty"),
        avg_len: total as f64 / count as f64,
        pct_over_200: pct(200),
        pct_over_300: pct(300),
        pct_over_400: pct(400),
    })
}

/// Per-category row of the length report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryLengthRow {
    pub category: CausalCategory,
    /// `None` when the category has no posts (min/max are undefined).
    pub stats: Option<LengthSummary>,
}

/// Word-length statistics over a candidate corpus, one row per category
/// plus an overall row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LengthStatsReport {
    pub per_category: Vec<CategoryLengthRow>,
    pub overall: Option<LengthSummary>,
}

impl LengthStatsReport {
    /// Plain-text table: category, count, min/max/average length, and the
    /// share of posts above 200/300/400 words.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<18} {:>6} {:>7} {:>7} {:>8} {:>7} {:>7} {:>7}",
            "Causal category", "Total", "Min. L", "Max. L", "Avg. L", ">200", ">300", ">400"
        )
        .expect("string write");
        let mut row = |label: &str, stats: &Option<LengthSummary>| match stats {
            Some(s) => writeln!(
                out,
                "{:<18} {:>6} {:>7} {:>7} {:>8.2} {:>7.2} {:>7.2} {:>7.2}",
                label,
                s.count,
                s.min_len,
                s.max_len,
                s.avg_len,
                s.pct_over_200,
                s.pct_over_300,
                s.pct_over_400
            )
            .expect("string write"),
            None => writeln!(
                out,
                "{:<18} {:>6} {:>7} {:>7} {:>8} {:>7} {:>7} {:>7}",
                label, 0, "-", "-", "-", "-", "-", "-"
            )
            .expect("string write"),
        };
        for entry in &self.per_category {
            row(entry.category.label(), &entry.stats);
        }
        row("Overall", &self.overall);
        out
    }
}

/// Compute the length report over `corpus`, which must contain only
/// categorized candidate posts.
pub fn length_stats(corpus: &Corpus) -> Result<LengthStatsReport, CorpusError> {
    let mut by_category: BTreeMap<CausalCategory, Vec<usize>> = BTreeMap::new();
    let mut all = Vec::with_capacity(corpus.len());
    for post in corpus.iter() {
        let category = post.category.ok_or_else(|| CorpusError::Uncategorized {
            id: post.id.clone(),
        })?;
        let len = word_length(&post.text);
        by_category.entry(category).or_default().push(len);
        all.push(len);
    }
    let per_category = CausalCategory::CANDIDATES
        .iter()
        .map(|&category| CategoryLengthRow {
            category,
            stats: summarize(by_category.get(&category).map_or(&[][..], |v| v)),
        })
        .collect();
    Ok(LengthStatsReport {
        per_category,
        overall: summarize(&all),
    })
}

/// Split `corpus` into `k` stratified folds.
///
/// Posts are grouped by category, each group is shuffled with the seeded
/// generator, and items are dealt round-robin across folds with a pointer
/// that carries over from one group to the next. That keeps both the fold
/// sizes and each category's presence per fold within one item of even.
/// Returns `(train, validation)` pairs; the validation part of fold `i` is
/// the i-th fold, the train part is everything else.
pub fn split_folds(
    corpus: &Corpus,
    k: usize,
    seed: u64,
) -> Result<Vec<(Corpus, Corpus)>, CorpusError> {
    if k < 2 {
        return Err(CorpusError::BadFoldCount { k });
    }
    if corpus.len() < k {
        return Err(CorpusError::TooFewItems {
            k,
            needed: k,
            len: corpus.len(),
        });
    }

    let mut strata: BTreeMap<Option<CausalCategory>, Vec<usize>> = BTreeMap::new();
    for (ix, post) in corpus.iter().enumerate() {
        strata.entry(post.category).or_default().push(ix);
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next_fold = 0usize;
    for (_, mut indices) in strata {
        indices.shuffle(&mut rng);
        for ix in indices {
            folds[next_fold].push(ix);
            next_fold = (next_fold + 1) % k;
        }
    }

    let subset = |indices: &[usize]| {
        let mut sorted: Vec<usize> = indices.to_vec();
        sorted.sort_unstable();
        sorted
            .iter()
            .map(|&ix| corpus.posts()[ix].clone())
            .collect::<Vec<_>>()
    };

    let mut out = Vec::with_capacity(k);
    for val_ix in 0..k {
        let val_posts = subset(&folds[val_ix]);
        let train_indices: Vec<usize> = (0..k)
            .filter(|&f| f != val_ix)
            .flat_map(|f| folds[f].iter().copied())
            .collect();
        let train_posts = subset(&train_indices);
        out.push((
            Corpus {
                posts: train_posts,
                split_tag: SplitTag::Train,
            },
            Corpus {
                posts: val_posts,
                split_tag: SplitTag::Test,
            },
        ));
    }
    Ok(out)
}
