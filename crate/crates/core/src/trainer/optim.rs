//! Adam-family optimizers and the triangular learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::encoder::{Gradients, ModelParams};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;
/// Decoupled weight decay for AdamW, applied uniformly to every parameter.
const WEIGHT_DECAY: f64 = 0.01;

/// Which optimizer updates the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Adamax,
    AdamW,
}

impl OptimizerKind {
    pub fn label(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Adamax => "adamax",
            OptimizerKind::AdamW => "adamw",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "adamax" => Ok(OptimizerKind::Adamax),
            "adamw" => Ok(OptimizerKind::AdamW),
            other => Err(format!("unknown optimizer {other:?} (adam, adamax, adamw)")),
        }
    }
}

/// First/second-moment accumulators, shaped like the parameters. For
/// Adamax the second container holds the infinity-norm accumulator.
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: usize,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> AdamState {
        AdamState {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            step: 0,
        }
    }

    /// One optimizer step with learning rate `lr` on gradients `grads`.
    pub fn apply(
        &mut self,
        params: &mut ModelParams,
        grads: &Gradients,
        kind: OptimizerKind,
        lr: f64,
    ) {
        self.step += 1;
        let t = self.step as f64;
        let bias1 = 1.0 - BETA1.powf(t);
        let bias2 = 1.0 - BETA2.powf(t);

        let mut p_walk = params.named_tensors_mut();
        let g_walk = grads.named_tensors();
        let mut m_walk = self.m.named_tensors_mut();
        let mut v_walk = self.v.named_tensors_mut();
        debug_assert_eq!(p_walk.len(), g_walk.len());

        for i in 0..p_walk.len() {
            debug_assert_eq!(p_walk[i].0, g_walk[i].0);
            let p = p_walk[i].1.as_slice_mut();
            let g = g_walk[i].1.as_slice();
            let m = m_walk[i].1.as_slice_mut();
            let v = v_walk[i].1.as_slice_mut();
            for j in 0..p.len() {
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
                match kind {
                    OptimizerKind::Adam | OptimizerKind::AdamW => {
                        v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
                        let m_hat = m[j] / bias1;
                        let v_hat = v[j] / bias2;
                        if kind == OptimizerKind::AdamW {
                            p[j] -= lr * WEIGHT_DECAY * p[j];
                        }
                        p[j] -= lr * m_hat / (v_hat.sqrt() + EPS);
                    }
                    OptimizerKind::Adamax => {
                        v[j] = (BETA2 * v[j]).max(g[j].abs());
                        p[j] -= (lr / bias1) * m[j] / (v[j] + EPS);
                    }
                }
            }
        }
    }
}

/// Triangular schedule: linear 0 → peak over the warmup steps, then
/// linear peak → 0 over the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LinearSchedule {
    /// Schedule for `total_steps` updates with the first
    /// ⌈fraction·total⌉ spent warming up.
    pub fn new(peak_lr: f64, warmup_fraction: f64, total_steps: usize) -> LinearSchedule {
        let warmup_steps = (warmup_fraction * total_steps as f64).ceil() as usize;
        LinearSchedule {
            peak_lr,
            warmup_steps: warmup_steps.min(total_steps),
            total_steps,
        }
    }

    /// Learning rate for update `step` (0-based). Zero at step 0, peak at
    /// the end of warmup, zero again at `total_steps`.
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.total_steps == 0 {
            return 0.0;
        }
        let step = step.min(self.total_steps);
        let w = self.warmup_steps;
        let t = self.total_steps;
        if step < w {
            self.peak_lr * step as f64 / w as f64
        } else if t == w {
            if step >= t {
                0.0
            } else {
                self.peak_lr
            }
        } else {
            self.peak_lr * (t - step) as f64 / (t - w) as f64
        }
    }
}
