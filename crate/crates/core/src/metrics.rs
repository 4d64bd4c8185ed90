//! Evaluation metrics: multi-class precision/recall/F1 reports, inter-rater
//! agreement (Fleiss' kappa with interpretation bands), and the
//! Mann-Whitney U test for comparing fold scores.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::corpus::CausalCategory;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction and gold label counts differ: {preds} vs {golds}")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("cannot evaluate an empty prediction set")]
    EmptyInput,
    #[error("label {0:?} is outside the five candidate categories")]
    InvalidCategory(CausalCategory),
    #[error("rating matrix is invalid: {0}")]
    InvalidMatrix(String),
    #[error("expected agreement is 1: every rating is in a single category")]
    DegenerateAgreement,
    #[error("both samples must be non-empty")]
    EmptySample,
}

/// Precision, recall, and F1 for a single category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassMetrics {
    pub category: CausalCategory,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of gold items in this category.
    pub support: usize,
    /// True when precision or recall had a zero denominator and was
    /// reported as 0.
    pub zero_denominator: bool,
}

/// Full evaluation report over the five candidate categories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// One entry per candidate category, in code order.
    pub per_class: Vec<PerClassMetrics>,
    pub accuracy: f64,
    /// Unweighted means over the classes present in the data (non-zero
    /// support or at least one prediction).
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// F1 averaged with gold-support weights.
    pub weighted_f1: f64,
    /// Confusion counts; rows are gold categories, columns predictions,
    /// both in code order.
    pub confusion: Vec<Vec<usize>>,
    /// Mean per-item loss when the caller has one (e.g. cross-entropy).
    pub mean_loss: Option<f64>,
}

impl EvalReport {
    /// One-line summary table: precision / recall / F1 / accuracy, all
    /// macro-averaged, for a named model.
    pub fn to_text(&self, model: &str) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<28} {:>10} {:>10} {:>10} {:>10}",
            "Model", "Precision", "Recall", "F-measure", "Accuracy"
        )
        .expect("string write");
        writeln!(
            out,
            "{:<28} {:>10.3} {:>10.3} {:>10.3} {:>10.3}",
            model, self.macro_precision, self.macro_recall, self.macro_f1, self.accuracy
        )
        .expect("string write");
        out
    }

    /// Per-class table with one category per row.
    pub fn per_class_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<18} {:>10} {:>10} {:>10} {:>8}",
            "Category", "Precision", "Recall", "F-measure", "Support"
        )
        .expect("string write");
        for row in &self.per_class {
            writeln!(
                out,
                "{:<18} {:>10.3} {:>10.3} {:>10.3} {:>8}",
                row.category.label(),
                row.precision,
                row.recall,
                row.f1,
                row.support
            )
            .expect("string write");
        }
        out
    }

    /// Confusion matrix as CSV, with a header row of predicted labels and
    /// one row per gold label.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for cat in CausalCategory::CANDIDATES {
            out.push(',');
            out.push_str(cat.label());
        }
        out.push('\n');
        for (i, cat) in CausalCategory::CANDIDATES.iter().enumerate() {
            out.push_str(cat.label());
            for j in 0..CausalCategory::CANDIDATES.len() {
                out.push(',');
                let _ = write!(out, "{}", self.confusion[i][j]);
            }
            out.push('\n');
        }
        out
    }
}

fn candidate_index(cat: CausalCategory) -> Result<usize, MetricsError> {
    CausalCategory::CANDIDATES
        .iter()
        .position(|&c| c == cat)
        .ok_or(MetricsError::InvalidCategory(cat))
}

/// Score `preds` against `golds` over the five candidate categories.
///
/// Per-class precision/recall/F1 use 0 for zero-denominator cases (flagged
/// per class). Macro averages run over the classes that actually occur in
/// the data, either as a gold label or as a prediction; weighted F1 uses
/// gold supports as weights.
pub fn evaluate(
    preds: &[CausalCategory],
    golds: &[CausalCategory],
) -> Result<EvalReport, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }

    let n_classes = CausalCategory::CANDIDATES.len();
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut correct = 0usize;
    for (&p, &g) in preds.iter().zip(golds) {
        let pi = candidate_index(p)?;
        let gi = candidate_index(g)?;
        confusion[gi][pi] += 1;
        if pi == gi {
            correct += 1;
        }
    }

    let mut per_class = Vec::with_capacity(n_classes);
    #[allow(clippy::needless_range_loop)] // `c` walks a row, a column, and CANDIDATES in lockstep
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let predicted: usize = (0..n_classes).map(|g| confusion[g][c]).sum();
        let support: usize = confusion[c].iter().sum();

        let mut zero_denominator = false;
        let precision = if predicted == 0 {
            zero_denominator = true;
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let recall = if support == 0 {
            zero_denominator = true;
            0.0
        } else {
            tp as f64 / support as f64
        };
        let f1 = if precision + recall == 0.0 {
            if tp == 0 && (predicted > 0 || support > 0) {
                zero_denominator = true;
            }
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(PerClassMetrics {
            category: CausalCategory::CANDIDATES[c],
            precision,
            recall,
            f1,
            support,
            zero_denominator,
        });
    }

    // A class takes part in the macro averages when it occurs in the data
    // at all: gold support or at least one prediction.
    let present: Vec<usize> = (0..n_classes)
        .filter(|&c| per_class[c].support > 0 || (0..n_classes).any(|g| confusion[g][c] > 0))
        .collect();
    let mean_over_present = |f: &dyn Fn(&PerClassMetrics) -> f64| {
        present.iter().map(|&c| f(&per_class[c])).sum::<f64>() / present.len() as f64
    };
    let macro_precision = mean_over_present(&|m| m.precision);
    let macro_recall = mean_over_present(&|m| m.recall);
    let macro_f1 = mean_over_present(&|m| m.f1);

    let total = preds.len() as f64;
    let weighted_f1 = per_class
        .iter()
        .map(|m| m.f1 * m.support as f64)
        .sum::<f64>()
        / total;

    Ok(EvalReport {
        per_class,
        accuracy: correct as f64 / total,
        macro_precision,
        macro_recall,
        macro_f1,
        weighted_f1,
        confusion,
        mean_loss: None,
    })
}

/// Item-by-category rating counts for a fixed panel of raters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingMatrix {
    counts: Vec<Vec<u32>>,
    raters: u32,
}

impl RatingMatrix {
    /// `counts[i][j]` is how many of the `raters` raters put item `i` in
    /// category `j`. Every row must sum to `raters`; at least one item, two
    /// categories, and two raters are required.
    pub fn new(counts: Vec<Vec<u32>>, raters: u32) -> Result<Self, MetricsError> {
        if raters < 2 {
            return Err(MetricsError::InvalidMatrix(format!(
                "need at least 2 raters, got {raters}"
            )));
        }
        if counts.is_empty() {
            return Err(MetricsError::InvalidMatrix("no items".into()));
        }
        let categories = counts[0].len();
        if categories < 2 {
            return Err(MetricsError::InvalidMatrix(format!(
                "need at least 2 categories, got {categories}"
            )));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != categories {
                return Err(MetricsError::InvalidMatrix(format!(
                    "row {i} has {} categories, expected {categories}",
                    row.len()
                )));
            }
            let sum: u32 = row.iter().sum();
            if sum != raters {
                return Err(MetricsError::InvalidMatrix(format!(
                    "row {i} sums to {sum}, expected {raters}"
                )));
            }
        }
        Ok(RatingMatrix { counts, raters })
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }

    pub fn categories(&self) -> usize {
        self.counts[0].len()
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }
}

/// Mean observed pairwise agreement across items (the P-bar term of
/// Fleiss' kappa), useful as a raw agreement figure next to kappa.
pub fn mean_pairwise_agreement(ratings: &RatingMatrix) -> f64 {
    let k = ratings.raters as f64;
    let per_item: f64 = ratings
        .counts
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&n| (n as f64) * (n as f64)).sum();
            (sq - k) / (k * (k - 1.0))
        })
        .sum();
    per_item / ratings.items() as f64
}

/// Fleiss' kappa over a rating matrix.
///
/// Errors with [`MetricsError::DegenerateAgreement`] when every rating is
/// in one category, which makes the expected agreement 1 and kappa
/// undefined.
pub fn fleiss_kappa(ratings: &RatingMatrix) -> Result<f64, MetricsError> {
    let n = ratings.items() as f64;
    let k = ratings.raters as f64;
    let p_bar = mean_pairwise_agreement(ratings);

    let mut p_e = 0.0;
    for j in 0..ratings.categories() {
        let col: u32 = ratings.counts.iter().map(|row| row[j]).sum();
        let p_j = col as f64 / (n * k);
        p_e += p_j * p_j;
    }
    if p_e >= 1.0 {
        return Err(MetricsError::DegenerateAgreement);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Agreement strength bands for interpreting a kappa value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KappaBand {
    LessThanChance,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl KappaBand {
    pub fn label(self) -> &'static str {
        match self {
            KappaBand::LessThanChance => "Less than chance agreement",
            KappaBand::Slight => "Slight agreement",
            KappaBand::Fair => "Fair agreement",
            KappaBand::Moderate => "Moderate agreement",
            KappaBand::Substantial => "Substantial agreement",
            KappaBand::AlmostPerfect => "Almost perfect agreement",
        }
    }
}

impl std::fmt::Display for KappaBand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Map a kappa value onto its agreement band.
///
/// Negative values mean less-than-chance agreement. The published bands
/// leave gaps between e.g. 0.20 and 0.21; values inside a gap belong to the
/// nearer band, with exact midpoints rounding up to the stronger one.
pub fn kappa_interpretation(kappa: f64) -> KappaBand {
    if kappa < 0.0 {
        KappaBand::LessThanChance
    } else if kappa < 0.205 {
        KappaBand::Slight
    } else if kappa < 0.405 {
        KappaBand::Fair
    } else if kappa < 0.605 {
        KappaBand::Moderate
    } else if kappa < 0.805 {
        KappaBand::Substantial
    } else {
        KappaBand::AlmostPerfect
    }
}

/// Outcome of a two-sided Mann-Whitney U test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MannWhitneyResult {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Whether the exact distribution was used (small samples, no ties)
    /// rather than the normal approximation.
    pub exact: bool,
    pub alpha: f64,
    pub significant: bool,
}

/// Rank the pooled values, assigning midranks to ties. Returns the rank sum
/// of sample `a` and the tie-group sizes.
fn rank_sum_of_first(a: &[f64], b: &[f64]) -> (f64, Vec<usize>) {
    let mut pooled: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite sample values"));

    let mut rank_sum_a = 0.0;
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // Ranks are 1-based; the tied block [i, j) shares the average rank.
        let midrank = (i + 1 + j) as f64 / 2.0;
        for entry in &pooled[i..j] {
            if entry.1 {
                rank_sum_a += midrank;
            }
        }
        tie_sizes.push(j - i);
        i = j;
    }
    (rank_sum_a, tie_sizes)
}

/// Exact distribution of the rank sum of a size-`k` subset of ranks
/// {1..n}: `ways[s]` counts subsets with rank sum `s`.
fn rank_sum_counts(n: usize, k: usize) -> Vec<Vec<f64>> {
    let max_sum = n * (n + 1) / 2;
    let mut ways = vec![vec![0.0f64; max_sum + 1]; k + 1];
    ways[0][0] = 1.0;
    for v in 1..=n {
        for j in (1..=k.min(v)).rev() {
            for s in (v..=max_sum).rev() {
                ways[j][s] += ways[j - 1][s - v];
            }
        }
    }
    ways
}

/// Two-sided Mann-Whitney U test comparing samples `a` and `b`.
///
/// Uses the exact permutation distribution when the pooled size is at most
/// 16 and there are no ties; otherwise the normal approximation with tie
/// correction and a 0.5 continuity correction. `U` is reported for `a`.
pub fn mann_whitney_u(a: &[f64], b: &[f64], alpha: f64) -> Result<MannWhitneyResult, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let n1 = a.len();
    let n2 = b.len();
    let n = n1 + n2;

    let (rank_sum_a, tie_sizes) = rank_sum_of_first(a, b);
    let u = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;
    let has_ties = tie_sizes.iter().any(|&t| t > 1);

    let (p, exact) = if n <= 16 && !has_ties {
        // Enumerate the exact null distribution of the rank sum by
        // counting k-subsets of {1..n} per sum.
        let ways = rank_sum_counts(n, n1);
        let total: f64 = ways[n1].iter().sum();
        let min_rank_sum = n1 * (n1 + 1) / 2;
        // Without ties the rank sum is an integer.
        let observed = rank_sum_a.round() as usize;
        let cdf_le: f64 = ways[n1][min_rank_sum..=observed].iter().sum();
        let cdf_ge: f64 = ways[n1][observed..].iter().sum();
        let p = (2.0 * (cdf_le.min(cdf_ge)) / total).min(1.0);
        (p, true)
    } else {
        let n1f = n1 as f64;
        let n2f = n2 as f64;
        let nf = n as f64;
        let mean = n1f * n2f / 2.0;
        let tie_term: f64 = tie_sizes
            .iter()
            .map(|&t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum();
        let variance = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
        if variance <= 0.0 {
            // Every pooled value identical: no evidence of difference.
            (1.0, false)
        } else {
            let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let p = (2.0 * (1.0 - normal.cdf(z))).clamp(0.0, 1.0);
            (p, false)
        }
    };

    Ok(MannWhitneyResult {
        u,
        p,
        exact,
        alpha,
        significant: p < alpha,
    })
}
