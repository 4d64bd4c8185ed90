//! The six subcommands and their shared input plumbing.

pub mod ablate;
pub mod eval;
pub mod plot;
pub mod preprocess;
pub mod stats;
pub mod train;

use std::path::{Path, PathBuf};

use causecat_core::discourse::{b_rda, load_lexicon, rda, ConnectiveLexicon, PreprocessMode};
use causecat_core::{load_corpus, AttentionConfig, ColumnMap, Corpus, SplitTag};

use crate::config::RunConfig;
use crate::fail::{missing_input, Failure};

/// Unwrap an optional input path, turning absence into a usage error that
/// names the missing flag.
pub(crate) fn require_path<'a>(
    path: &'a Option<PathBuf>,
    what: &str,
    flag: &str,
) -> Result<&'a Path, Failure> {
    path.as_deref().ok_or_else(|| {
        Failure::usage(format!(
            "{what} is required (set {flag} or the config file)"
        ))
    })
}

/// Load a corpus CSV, mapping a missing file to a usage error and malformed
/// contents to data errors.
pub(crate) fn load_input_corpus(role: &str, path: &Path, tag: SplitTag) -> Result<Corpus, Failure> {
    if !path.is_file() {
        return Err(missing_input(role, path));
    }
    Ok(load_corpus(path, &ColumnMap::default(), tag)?)
}

/// Load the connective lexicon when the preprocessing mode needs one.
/// Returns `None` for mode `none`.
pub(crate) fn lexicon_for_mode(config: &RunConfig) -> Result<Option<ConnectiveLexicon>, Failure> {
    if config.mode == PreprocessMode::None {
        return Ok(None);
    }
    let path = require_path(
        &config.lexicon,
        &format!("mode {} needs a lexicon", config.mode),
        "--lexicon",
    )?;
    if !path.is_file() {
        return Err(missing_input("lexicon", path));
    }
    Ok(Some(load_lexicon(path)?))
}

/// Apply the configured preprocessing to every post text.
pub(crate) fn transform_corpus(
    corpus: &Corpus,
    mode: PreprocessMode,
    lexicon: Option<&ConnectiveLexicon>,
) -> Corpus {
    match mode {
        PreprocessMode::None => corpus.clone(),
        PreprocessMode::Rda => {
            let lex = lexicon.expect("rda preprocessing needs a loaded lexicon");
            corpus.map_texts(|text| rda(text, lex))
        }
        PreprocessMode::BRda => {
            let lex = lexicon.expect("b-rda preprocessing needs a loaded lexicon");
            corpus.map_texts(|text| b_rda(text, lex))
        }
    }
}

/// Human-readable model label: attention family plus preprocessing prefix,
/// e.g. "Longformer" or "B-RDA + Transformer".
pub(crate) fn model_label(mode: PreprocessMode, config: &AttentionConfig) -> String {
    let family = if config.global_positions.len() >= config.max_len {
        "Transformer"
    } else {
        "Longformer"
    };
    match mode {
        PreprocessMode::None => family.to_string(),
        PreprocessMode::Rda => format!("RDA + {family}"),
        PreprocessMode::BRda => format!("B-RDA + {family}"),
    }
}
