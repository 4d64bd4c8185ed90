//! Run configuration: one optional JSON file plus command-line overrides.
//!
//! Precedence is strict: a flag beats the config file, which beats the
//! built-in default. The fully resolved configuration is snapshotted as
//! `config.resolved.json` inside the output directory of every run, so a run
//! can always be reproduced from its outputs alone.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use causecat_core::discourse::PreprocessMode;
use causecat_core::trainer::OptimizerKind;
use causecat_core::{AttentionConfig, Hyperparams};
use serde::{Deserialize, Serialize};

use crate::fail::Failure;

/// Partial attention settings; unset fields keep the library defaults
/// (window 8, dilation 1, global position 0, max_len 512, 1 head).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttentionPatch {
    pub window: Option<usize>,
    pub dilation: Option<usize>,
    pub global_positions: Option<Vec<usize>>,
    pub max_len: Option<usize>,
    pub heads: Option<usize>,
}

impl AttentionPatch {
    fn apply(&self, config: &mut AttentionConfig) {
        if let Some(window) = self.window {
            config.window = window;
        }
        if let Some(dilation) = self.dilation {
            config.dilation = dilation;
        }
        if let Some(globals) = &self.global_positions {
            config.global_positions = globals.iter().copied().collect();
        }
        if let Some(max_len) = self.max_len {
            config.max_len = max_len;
        }
        if let Some(heads) = self.heads {
            config.heads = heads;
        }
    }
}

/// On-disk JSON configuration. Every field is optional; unknown keys are
/// rejected so typos surface as usage errors instead of being ignored.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<PathBuf>,
    pub train_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub compare: Option<PathBuf>,
    pub reports: Vec<PathBuf>,
    pub mode: Option<PreprocessMode>,
    pub hyperparams: Option<Hyperparams>,
    pub attention: Option<AttentionPatch>,
    pub folds: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Everything a flag may override. Each subcommand fills in the parts its
/// surface exposes and leaves the rest `None`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub corpus: Option<PathBuf>,
    pub train_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub compare: Option<PathBuf>,
    pub reports: Vec<PathBuf>,
    pub mode: Option<PreprocessMode>,
    pub folds: Option<usize>,
    pub layers: Option<usize>,
    pub dropout: Option<f64>,
    pub hidden: Option<usize>,
    pub learning_rate: Option<f64>,
    pub optimizer: Option<OptimizerKind>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub warmup_fraction: Option<f64>,
    pub allow_free_values: bool,
    pub window: Option<usize>,
    pub dilation: Option<usize>,
    pub max_len: Option<usize>,
    pub heads: Option<usize>,
    pub global_positions: Option<String>,
}

/// Fully resolved configuration a command runs with.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub corpus: Option<PathBuf>,
    pub train_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub compare: Option<PathBuf>,
    pub reports: Vec<PathBuf>,
    pub mode: PreprocessMode,
    pub hyperparams: Hyperparams,
    pub attention: AttentionConfig,
    pub folds: usize,
    pub out: PathBuf,
    pub seed: u64,
}

fn load_file_config(path: &Path) -> Result<FileConfig, Failure> {
    if !path.exists() {
        return Err(Failure::usage(format!(
            "config file not found: {}",
            path.display()
        )));
    }
    let bytes = fs::read(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Failure::usage(format!("cannot parse config {}: {e}", path.display())))
}

/// Merge the config file (if any) with the flag overrides and validate the
/// result. Semantic problems in either source are usage errors.
pub fn resolve(
    command: &str,
    config_path: Option<&Path>,
    ov: Overrides,
) -> Result<RunConfig, Failure> {
    let file = match config_path {
        Some(path) => load_file_config(path)?,
        None => FileConfig::default(),
    };

    // The master seed feeds every stochastic component. Precedence:
    // --seed flag, then the file's top-level seed, then the file's
    // hyperparameter seed (which itself defaults to 42).
    let file_hyper = file.hyperparams.clone().unwrap_or_default();
    let seed = ov.seed.or(file.seed).unwrap_or(file_hyper.seed);

    let mut hyperparams = file_hyper;
    hyperparams.seed = seed;
    if let Some(layers) = ov.layers {
        hyperparams.layers = layers;
    }
    if let Some(dropout) = ov.dropout {
        hyperparams.dropout = dropout;
    }
    if let Some(hidden) = ov.hidden {
        hyperparams.hidden = hidden;
    }
    if let Some(lr) = ov.learning_rate {
        hyperparams.learning_rate = lr;
    }
    if let Some(optimizer) = ov.optimizer {
        hyperparams.optimizer = optimizer;
    }
    if let Some(batch) = ov.batch_size {
        hyperparams.batch_size = batch;
    }
    if let Some(epochs) = ov.epochs {
        hyperparams.epochs = epochs;
    }
    if let Some(warmup) = ov.warmup_fraction {
        hyperparams.warmup_fraction = warmup;
    }
    hyperparams.allow_free_values |= ov.allow_free_values;

    let mut attention = AttentionConfig::default();
    if let Some(patch) = &file.attention {
        patch.apply(&mut attention);
    }
    if let Some(window) = ov.window {
        attention.window = window;
    }
    if let Some(dilation) = ov.dilation {
        attention.dilation = dilation;
    }
    if let Some(max_len) = ov.max_len {
        attention.max_len = max_len;
    }
    if let Some(heads) = ov.heads {
        attention.heads = heads;
    }
    if let Some(spec) = &ov.global_positions {
        attention.global_positions = parse_global_positions(spec)?;
    }

    let folds = ov.folds.or(file.folds).unwrap_or(5);

    let resolved = RunConfig {
        command: command.to_string(),
        corpus: ov.corpus.or(file.corpus),
        train_corpus: ov.train_corpus.or(file.train_corpus),
        test_corpus: ov.test_corpus.or(file.test_corpus),
        lexicon: ov.lexicon.or(file.lexicon),
        checkpoint: ov.checkpoint.or(file.checkpoint),
        compare: ov.compare.or(file.compare),
        reports: if ov.reports.is_empty() {
            file.reports
        } else {
            ov.reports
        },
        mode: ov.mode.or(file.mode).unwrap_or_default(),
        hyperparams,
        attention,
        folds,
        out: ov.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        seed,
    };

    resolved
        .hyperparams
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    resolved
        .attention
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    if !resolved
        .hyperparams
        .hidden
        .is_multiple_of(resolved.attention.heads)
    {
        return Err(Failure::usage(format!(
            "hidden size {} is not divisible by {} attention heads",
            resolved.hyperparams.hidden, resolved.attention.heads
        )));
    }
    if resolved.folds < 2 {
        return Err(Failure::usage(format!(
            "fold count must be at least 2, got {}",
            resolved.folds
        )));
    }
    Ok(resolved)
}

/// Parser for `--mode`.
pub fn parse_mode(s: &str) -> Result<PreprocessMode, String> {
    match s {
        "none" => Ok(PreprocessMode::None),
        "rda" => Ok(PreprocessMode::Rda),
        "b-rda" => Ok(PreprocessMode::BRda),
        other => Err(format!("unknown mode {other:?} (none, rda, b-rda)")),
    }
}

/// Parser for `--optimizer`.
pub fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    s.parse()
}

fn parse_global_positions(spec: &str) -> Result<BTreeSet<usize>, Failure> {
    let mut positions = BTreeSet::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let pos: usize = part
            .parse()
            .map_err(|_| Failure::usage(format!("bad global position {part:?} in {spec:?}")))?;
        positions.insert(pos);
    }
    Ok(positions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(json: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().expect("temp file");
        file.write_all(json.as_bytes()).expect("write config");
        file
    }

    #[test]
    fn defaults_apply_without_a_config_file() {
        let cfg = resolve("stats", None, Overrides::default()).expect("resolve");
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.mode, PreprocessMode::None);
        assert_eq!(cfg.folds, 5);
        assert_eq!(cfg.out, PathBuf::from("out"));
        assert_eq!(cfg.attention, AttentionConfig::default());
    }

    #[test]
    fn flags_beat_the_config_file() {
        let file = write_config(
            r#"{
                "seed": 7,
                "mode": "rda",
                "out": "from-file",
                "hyperparams": {"learning_rate": 3e-5, "batch_size": 16},
                "attention": {"window": 16, "max_len": 64}
            }"#,
        );
        let ov = Overrides {
            seed: Some(9),
            mode: Some(PreprocessMode::BRda),
            out: Some(PathBuf::from("from-flag")),
            batch_size: Some(8),
            window: Some(4),
            ..Overrides::default()
        };
        let cfg = resolve("train", Some(file.path()), ov).expect("resolve");
        assert_eq!(cfg.seed, 9);
        assert_eq!(
            cfg.hyperparams.seed, 9,
            "master seed reaches the hyperparameters"
        );
        assert_eq!(cfg.mode, PreprocessMode::BRda);
        assert_eq!(cfg.out, PathBuf::from("from-flag"));
        assert_eq!(cfg.hyperparams.batch_size, 8, "flag wins");
        assert_eq!(
            cfg.hyperparams.learning_rate, 3e-5,
            "file survives where no flag is set"
        );
        assert_eq!(cfg.attention.window, 4);
        assert_eq!(cfg.attention.max_len, 64, "file patch survives");
    }

    #[test]
    fn unknown_config_keys_are_usage_errors() {
        let file = write_config(r#"{"lexcion": "typo.txt"}"#);
        let err = resolve("stats", Some(file.path()), Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(
            err.to_string().contains("lexcion"),
            "message names the bad key: {err}"
        );
    }

    #[test]
    fn missing_config_file_is_a_usage_error() {
        let err = resolve(
            "stats",
            Some(Path::new("/no/such/config.json")),
            Overrides::default(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err
            .to_string()
            .starts_with("error[usage]: config file not found"));
    }

    #[test]
    fn off_grid_hyperparameters_are_rejected_unless_freed() {
        let file = write_config(r#"{"hyperparams": {"learning_rate": 0.5}}"#);
        let err = resolve("train", Some(file.path()), Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);

        let freed =
            write_config(r#"{"hyperparams": {"learning_rate": 0.5, "allow_free_values": true}}"#);
        resolve("train", Some(freed.path()), Overrides::default()).expect("free values accepted");
    }

    #[test]
    fn head_divisibility_is_checked_up_front() {
        let file = write_config(r#"{"hyperparams": {"hidden": 64}, "attention": {"heads": 3}}"#);
        let err = resolve("train", Some(file.path()), Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("divisible"));
    }

    #[test]
    fn global_positions_flag_parses_into_a_set() {
        let ov = Overrides {
            global_positions: Some("0, 5,9".into()),
            ..Overrides::default()
        };
        let cfg = resolve("train", None, ov).expect("resolve");
        assert_eq!(cfg.attention.global_positions, BTreeSet::from([0, 5, 9]));

        let bad = Overrides {
            global_positions: Some("0,x".into()),
            ..Overrides::default()
        };
        assert_eq!(resolve("train", None, bad).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn hyperparameter_seed_is_used_when_nothing_else_sets_one() {
        let file = write_config(r#"{"hyperparams": {"seed": 11}}"#);
        let cfg = resolve("train", Some(file.path()), Overrides::default()).expect("resolve");
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.hyperparams.seed, 11);
    }
}
