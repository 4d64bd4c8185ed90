//! `causecat` — command-line front end for the causal-categorization
//! pipeline: corpus statistics, discourse preprocessing, training,
//! evaluation, ablations, and report plotting.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 training
//! divergence. All failures are printed to stderr as `error[<kind>]: ...`.

mod commands;
mod config;
mod fail;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use causecat_core::discourse::PreprocessMode;
use causecat_core::trainer::OptimizerKind;
use config::Overrides;
use fail::Failure;

/// Multi-class causal categorization of long social-media posts.
#[derive(Debug, Parser)]
#[command(name = "causecat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory; every file of the run is written below it.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed for every stochastic component.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
struct DataArgs {
    /// Unsplit corpus CSV (columns: id, text, cd, category, explanation).
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,
    /// Training-split corpus CSV.
    #[arg(long, value_name = "FILE")]
    train_corpus: Option<PathBuf>,
    /// Test-split corpus CSV.
    #[arg(long, value_name = "FILE")]
    test_corpus: Option<PathBuf>,
    /// Connective lexicon: one phrase per line, `#` starts a comment.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Preprocessing mode: none, rda, or b-rda.
    #[arg(long, value_parser = config::parse_mode)]
    mode: Option<PreprocessMode>,
}

#[derive(Debug, Args, Default)]
struct ModelArgs {
    /// Encoder layer count.
    #[arg(long)]
    layers: Option<usize>,
    /// Dropout probability.
    #[arg(long)]
    dropout: Option<f64>,
    /// Hidden width of the encoder.
    #[arg(long)]
    hidden: Option<usize>,
    /// Peak learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Optimizer: adam, adamax, or adamw.
    #[arg(long, value_parser = config::parse_optimizer)]
    optimizer: Option<OptimizerKind>,
    /// Mini-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Warmup fraction of the total step budget.
    #[arg(long)]
    warmup: Option<f64>,
    /// Accept hyperparameter values outside the declared search sets.
    #[arg(long)]
    allow_free_values: bool,
    /// Attention window width (even).
    #[arg(long)]
    window: Option<usize>,
    /// Attention window dilation.
    #[arg(long)]
    dilation: Option<usize>,
    /// Maximum sequence length.
    #[arg(long)]
    max_len: Option<usize>,
    /// Attention heads per layer.
    #[arg(long)]
    heads: Option<usize>,
    /// Comma-separated global attention positions.
    #[arg(long, value_name = "POS,POS,...")]
    global_positions: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Corpus statistics: word-length table and per-split category counts.
    Stats {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Apply discourse preprocessing and write the transformed corpus.
    Preprocess {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train the classifier and save a checkpoint.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a checkpoint; optionally compare it against a second one.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Checkpoint directory to evaluate.
        #[arg(long, value_name = "DIR")]
        checkpoint: Option<PathBuf>,
        /// Second checkpoint for a Mann-Whitney U comparison.
        #[arg(long, value_name = "DIR")]
        compare: Option<PathBuf>,
        /// Fold count for the per-fold F1 samples of the comparison.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Train and score all six preprocessing x attention variants.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Fold count used to split an unsplit corpus.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Turn report JSON files into CSV tables and SVG bar charts.
    Plot {
        #[command(flatten)]
        common: CommonArgs,
        /// Report JSON files (eval, ablation, or multi-model shape).
        #[arg(value_name = "REPORT")]
        reports: Vec<PathBuf>,
    },
}

impl DataArgs {
    fn fill(self, ov: &mut Overrides) {
        ov.corpus = self.corpus;
        ov.train_corpus = self.train_corpus;
        ov.test_corpus = self.test_corpus;
        ov.lexicon = self.lexicon;
        ov.mode = self.mode;
    }
}

impl ModelArgs {
    fn fill(self, ov: &mut Overrides) {
        ov.layers = self.layers;
        ov.dropout = self.dropout;
        ov.hidden = self.hidden;
        ov.learning_rate = self.lr;
        ov.optimizer = self.optimizer;
        ov.batch_size = self.batch;
        ov.epochs = self.epochs;
        ov.warmup_fraction = self.warmup;
        ov.allow_free_values = self.allow_free_values;
        ov.window = self.window;
        ov.dilation = self.dilation;
        ov.max_len = self.max_len;
        ov.heads = self.heads;
        ov.global_positions = self.global_positions;
    }
}

impl CommonArgs {
    fn fill(&self, ov: &mut Overrides) {
        ov.out = self.out.clone();
        ov.seed = self.seed;
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Stats { common, data } => {
            let mut ov = Overrides::default();
            common.fill(&mut ov);
            data.fill(&mut ov);
            let config = config::resolve("stats", common.config.as_deref(), ov)?;
            commands::stats::run(&config)
        }
        Command::Preprocess { common, data } => {
            let mut ov = Overrides::default();
            common.fill(&mut ov);
            data.fill(&mut ov);
            let config = config::resolve("preprocess", common.config.as_deref(), ov)?;
            commands::preprocess::run(&config)
        }
        Command::Train {
            common,
            data,
            model,
        } => {
            let mut ov = Overrides::default();
            common.fill(&mut ov);
            data.fill(&mut ov);
            model.fill(&mut ov);
            let config = config::resolve("train", common.config.as_deref(), ov)?;
            commands::train::run(&config)
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            compare,
            folds,
        } => {
            let mut ov = Overrides::default();
            common.fill(&mut ov);
            data.fill(&mut ov);
            ov.checkpoint = checkpoint;
            ov.compare = compare;
            ov.folds = folds;
            let config = config::resolve("eval", common.config.as_deref(), ov)?;
            commands::eval::run(&config)
        }
        Command::Ablate {
            common,
            data,
            model,
            folds,
        } => {
            let mut ov = Overrides::default();
            common.fill(&mut ov);
            data.fill(&mut ov);
            model.fill(&mut ov);
            ov.folds = folds;
            let config = config::resolve("ablate", common.config.as_deref(), ov)?;
            commands::ablate::run(&config)
        }
        Command::Plot { common, reports } => {
            let mut ov = Overrides::default();
            common.fill(&mut ov);
            ov.reports = reports;
            let config = config::resolve("plot", common.config.as_deref(), ov)?;
            commands::plot::run(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            let text = err.to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprint!("error[usage]: {text}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
