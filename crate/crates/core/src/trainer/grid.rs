//! K-fold cross-validated grid search over hyperparameter cells.

use serde::{Deserialize, Serialize};

use crate::corpus::{split_folds, Corpus};
use crate::encoder::AttentionConfig;

use super::{train, Hyperparams, TrainError};

/// Cross-validation outcome of one hyperparameter cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCellResult {
    pub hyper: Hyperparams,
    pub fold_accuracies: Vec<f64>,
    pub fold_losses: Vec<f64>,
    pub mean_accuracy: f64,
    pub mean_loss: f64,
}

/// All cells ranked by mean validation accuracy (descending), mean
/// validation loss breaking ties (ascending).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchReport {
    pub k: usize,
    pub cells: Vec<GridCellResult>,
}

fn rank(cells: &mut [GridCellResult]) {
    cells.sort_by(|a, b| {
        b.mean_accuracy
            .total_cmp(&a.mean_accuracy)
            .then(a.mean_loss.total_cmp(&b.mean_loss))
    });
}

/// Run `k`-fold cross-validation for every cell of `grid` and rank the
/// results. Every fold of every cell trains from scratch; all runs share
/// the attention configuration.
pub fn grid_search(
    corpus: &Corpus,
    grid: &[Hyperparams],
    k: usize,
    config: &AttentionConfig,
) -> Result<GridSearchReport, TrainError> {
    if grid.is_empty() {
        return Err(TrainError::InvalidHyperparams(
            "grid must be non-empty".into(),
        ));
    }
    let mut cells = Vec::with_capacity(grid.len());
    for hyper in grid {
        hyper.validate()?;
        let folds = split_folds(corpus, k, hyper.seed)?;
        let mut fold_accuracies = Vec::with_capacity(k);
        let mut fold_losses = Vec::with_capacity(k);
        for (fold_train, fold_val) in &folds {
            let run = train(fold_train, Some(fold_val), hyper, config)?;
            fold_accuracies.push(run.validation_accuracy.expect("validation corpus given"));
            fold_losses.push(run.validation_loss.expect("validation corpus given"));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        cells.push(GridCellResult {
            hyper: hyper.clone(),
            mean_accuracy: mean(&fold_accuracies),
            mean_loss: mean(&fold_losses),
            fold_accuracies,
            fold_losses,
        });
    }
    rank(&mut cells);
    Ok(GridSearchReport { k, cells })
}

fn distinct_sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl GridSearchReport {
    /// Ranked table of all cells plus the learning-rate × batch-size
    /// loss/accuracy matrix.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "grid search: {} cells, {}-fold cross-validation\n",
            self.cells.len(),
            self.k
        );
        out.push_str(
            "rank  layers  dropout  hidden  lr       optimizer  batch  epochs  mean acc  mean loss\n",
        );
        for (i, cell) in self.cells.iter().enumerate() {
            let h = &cell.hyper;
            out.push_str(&format!(
                "{:<4}  {:<6}  {:<7}  {:<6}  {:<7}  {:<9}  {:<5}  {:<6}  {:<8.4}  {:.4}\n",
                i + 1,
                h.layers,
                h.dropout,
                h.hidden,
                format!("{:e}", h.learning_rate),
                h.optimizer,
                h.batch_size,
                h.epochs,
                cell.mean_accuracy,
                cell.mean_loss,
            ));
        }
        out.push('\n');
        out.push_str(&self.lr_batch_matrix_text());
        out
    }

    /// Matrix of "loss / accuracy" means, learning rates as rows and batch
    /// sizes as columns; "-" marks combinations absent from the grid.
    pub fn lr_batch_matrix_text(&self) -> String {
        let rates = distinct_sorted(self.cells.iter().map(|c| c.hyper.learning_rate));
        let mut batches: Vec<usize> = self.cells.iter().map(|c| c.hyper.batch_size).collect();
        batches.sort_unstable();
        batches.dedup();

        let mut out = String::from("loss / accuracy by learning rate and batch size\n");
        out.push_str(&format!("{:<10}", "lr"));
        for b in &batches {
            out.push_str(&format!("  {:<17}", format!("batch {b}")));
        }
        out.push('\n');
        for lr in &rates {
            out.push_str(&format!("{:<10}", format!("{lr:e}")));
            for b in &batches {
                let matching: Vec<&GridCellResult> = self
                    .cells
                    .iter()
                    .filter(|c| c.hyper.learning_rate == *lr && c.hyper.batch_size == *b)
                    .collect();
                if matching.is_empty() {
                    out.push_str(&format!("  {:<17}", "-"));
                } else {
                    let n = matching.len() as f64;
                    let loss: f64 = matching.iter().map(|c| c.mean_loss).sum::<f64>() / n;
                    let acc: f64 = matching.iter().map(|c| c.mean_accuracy).sum::<f64>() / n;
                    out.push_str(&format!("  {:<17}", format!("{loss:.4} / {acc:.4}")));
                }
            }
            out.push('\n');
        }
        out
    }
}
