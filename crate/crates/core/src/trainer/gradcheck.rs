//! Finite-difference verification of the analytic gradients.
//!
//! Central differences around a sampled subset of coordinates, spread
//! across every parameter tensor, compared against the gradients the
//! backward pass produces for the same batch loss.

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::encoder::{AttentionConfig, ModelParams, TokenSequence};

use super::{batch_loss, batch_loss_and_grads};

/// How many coordinates to check, spread evenly over the tensors.
const TARGET_COORDS: usize = 240;
/// Relative-error denominators are floored here so coordinates with
/// near-zero gradients do not amplify finite-difference noise.
const DENOMINATOR_FLOOR: f64 = 1e-2;
const SAMPLING_SEED: u64 = 0x9E37_79B9;

/// Deliberate corruption of one tensor's analytic gradient, used as a
/// negative control: the check must flag it.
#[derive(Debug, Clone)]
pub struct GradFault {
    pub tensor: String,
    pub factor: f64,
}

/// Outcome of a gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Tensor holding the worst coordinate.
    pub worst_tensor: String,
    /// Flat index of the worst coordinate within its tensor.
    pub worst_flat_index: usize,
    pub coordinates_checked: usize,
    /// Largest relative error seen per tensor, in walk order.
    pub per_tensor_max: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "max relative error {:.3e} at {}[{}] over {} coordinates\n",
            self.max_relative_error,
            self.worst_tensor,
            self.worst_flat_index,
            self.coordinates_checked
        );
        for (name, err) in &self.per_tensor_max {
            out.push_str(&format!("  {name:<24} {err:.3e}\n"));
        }
        out
    }
}

/// Compare analytic gradients against central finite differences with
/// step `epsilon`, sampling at least [`TARGET_COORDS`] coordinates (or
/// every coordinate of small models). Panics when `epsilon` is outside
/// [1e-6, 1e-3] or the batch is empty.
pub fn gradient_check(
    params: &ModelParams,
    batch: &[(TokenSequence, usize)],
    config: &AttentionConfig,
    epsilon: f64,
) -> GradCheckReport {
    gradient_check_with_fault(params, batch, config, epsilon, None)
}

/// [`gradient_check`] with an optional injected gradient fault.
pub fn gradient_check_with_fault(
    params: &ModelParams,
    batch: &[(TokenSequence, usize)],
    config: &AttentionConfig,
    epsilon: f64,
    fault: Option<&GradFault>,
) -> GradCheckReport {
    assert!(
        (1e-6..=1e-3).contains(&epsilon),
        "epsilon must be in [1e-6, 1e-3], got {epsilon}"
    );
    assert!(
        !batch.is_empty(),
        "gradient check needs at least one example"
    );

    let (_, mut analytic) = batch_loss_and_grads(params, config, batch, None);
    if let Some(fault) = fault {
        analytic.scale_tensor(&fault.tensor, fault.factor);
    }

    let tensor_sizes: Vec<(String, usize)> = params
        .named_tensors()
        .iter()
        .map(|(name, t)| (name.clone(), t.len()))
        .collect();
    let per_tensor = TARGET_COORDS.div_ceil(tensor_sizes.len()).max(1);

    let mut rng = StdRng::seed_from_u64(SAMPLING_SEED);
    let mut probe = params.clone();
    let mut max_relative_error = 0.0f64;
    let mut worst_tensor = String::new();
    let mut worst_flat_index = 0usize;
    let mut coordinates_checked = 0usize;
    let mut per_tensor_max = Vec::with_capacity(tensor_sizes.len());

    for (ti, (name, len)) in tensor_sizes.iter().enumerate() {
        let amount = per_tensor.min(*len);
        let picks = rand::seq::index::sample(&mut rng, *len, amount);
        let mut tensor_max = 0.0f64;
        for idx in picks.iter() {
            let original = {
                let mut walk = probe.named_tensors_mut();
                let slice = walk[ti].1.as_slice_mut();
                let original = slice[idx];
                slice[idx] = original + epsilon;
                original
            };
            let loss_plus = batch_loss(&probe, config, batch);
            {
                let mut walk = probe.named_tensors_mut();
                walk[ti].1.as_slice_mut()[idx] = original - epsilon;
            }
            let loss_minus = batch_loss(&probe, config, batch);
            {
                let mut walk = probe.named_tensors_mut();
                walk[ti].1.as_slice_mut()[idx] = original;
            }

            let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
            let analytic_value = analytic.named_tensors()[ti].1.as_slice()[idx];
            let denominator = (analytic_value.abs() + numeric.abs()).max(DENOMINATOR_FLOOR);
            let relative = (analytic_value - numeric).abs() / denominator;
            coordinates_checked += 1;
            if relative > tensor_max {
                tensor_max = relative;
            }
            if relative > max_relative_error {
                max_relative_error = relative;
                worst_tensor = name.clone();
                worst_flat_index = idx;
            }
        }
        per_tensor_max.push((name.clone(), tensor_max));
    }

    if worst_tensor.is_empty() {
        worst_tensor = tensor_sizes[0].0.clone();
    }
    GradCheckReport {
        max_relative_error,
        worst_tensor,
        worst_flat_index,
        coordinates_checked,
        per_tensor_max,
    }
}
