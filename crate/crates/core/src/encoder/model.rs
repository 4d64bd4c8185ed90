//! Model parameters, the transformer block with merged local/global
//! attention, and the hand-written backward pass that training relies on.
//!
//! All computation runs in f64; checkpoints store f32 (see `checkpoint`).

use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::attention::{softmax_in_place, window_positions};
use super::{AttentionConfig, TokenSequence};

/// Number of candidate causal categories the head predicts.
pub const NUM_CLASSES: usize = 5;

const LN_EPS: f64 = 1e-5;
const INIT_RANGE: f64 = 0.05;

/// Feed-forward nonlinearity. Both options are smooth, which keeps the
/// finite-difference gradient check meaningful.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// tanh-approximated GELU.
    #[default]
    Gelu,
    Tanh,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()),
            Activation::Tanh => x.tanh(),
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => {
                let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Weights of one transformer block: the two attention streams, the output
/// projection, and the feed-forward sublayer with its normalizations.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub w_qs: Array2<f64>,
    pub w_ks: Array2<f64>,
    pub w_vs: Array2<f64>,
    pub w_qg: Array2<f64>,
    pub w_kg: Array2<f64>,
    pub w_vg: Array2<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    pub w_ff1: Array2<f64>,
    pub b_ff1: Array1<f64>,
    pub w_ff2: Array2<f64>,
    pub b_ff2: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
}

/// All trainable parameters plus the fixed sizes they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embedding: Array2<f64>,
    pub positional: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub classifier_w: Array2<f64>,
    pub classifier_b: Array1<f64>,
    pub activation: Activation,
}

/// Borrowed view of one parameter tensor, used to walk every tensor in a
/// fixed declared order (checkpointing, optimizers, gradient checks).
pub(crate) enum TensorRef<'a> {
    M(&'a Array2<f64>),
    V(&'a Array1<f64>),
}

pub(crate) enum TensorMut<'a> {
    M(&'a mut Array2<f64>),
    V(&'a mut Array1<f64>),
}

impl TensorRef<'_> {
    pub(crate) fn len(&self) -> usize {
        match self {
            TensorRef::M(a) => a.len(),
            TensorRef::V(a) => a.len(),
        }
    }

    pub(crate) fn shape(&self) -> Vec<usize> {
        match self {
            TensorRef::M(a) => a.shape().to_vec(),
            TensorRef::V(a) => a.shape().to_vec(),
        }
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        match self {
            TensorRef::M(a) => a.as_slice().expect("standard layout"),
            TensorRef::V(a) => a.as_slice().expect("standard layout"),
        }
    }
}

impl TensorMut<'_> {
    pub(crate) fn as_slice_mut(&mut self) -> &mut [f64] {
        match self {
            TensorMut::M(a) => a.as_slice_mut().expect("standard layout"),
            TensorMut::V(a) => a.as_slice_mut().expect("standard layout"),
        }
    }
}

/// Implements a named walk over every tensor of a parameter-shaped struct
/// in one fixed global order. The order is load-bearing: checkpoints,
/// optimizer state, and gradient sampling all index tensors by it.
macro_rules! impl_tensor_walk {
    ($ty:ty, $fn_name:ident, $ref_ty:ident, $iter:ident $(, $mut_:tt)?) => {
        impl $ty {
            pub(crate) fn $fn_name(& $($mut_)? self) -> Vec<(String, $ref_ty<'_>)> {
                let mut out: Vec<(String, $ref_ty<'_>)> = vec![
                    ("embedding".to_string(), $ref_ty::M(& $($mut_)? self.embedding)),
                    ("positional".to_string(), $ref_ty::M(& $($mut_)? self.positional)),
                ];
                for (ix, layer) in self.layers.$iter().enumerate() {
                    out.push((format!("layer{ix}.w_qs"), $ref_ty::M(& $($mut_)? layer.w_qs)));
                    out.push((format!("layer{ix}.w_ks"), $ref_ty::M(& $($mut_)? layer.w_ks)));
                    out.push((format!("layer{ix}.w_vs"), $ref_ty::M(& $($mut_)? layer.w_vs)));
                    out.push((format!("layer{ix}.w_qg"), $ref_ty::M(& $($mut_)? layer.w_qg)));
                    out.push((format!("layer{ix}.w_kg"), $ref_ty::M(& $($mut_)? layer.w_kg)));
                    out.push((format!("layer{ix}.w_vg"), $ref_ty::M(& $($mut_)? layer.w_vg)));
                    out.push((format!("layer{ix}.w_out"), $ref_ty::M(& $($mut_)? layer.w_out)));
                    out.push((format!("layer{ix}.b_out"), $ref_ty::V(& $($mut_)? layer.b_out)));
                    out.push((format!("layer{ix}.ln1_gain"), $ref_ty::V(& $($mut_)? layer.ln1_gain)));
                    out.push((format!("layer{ix}.ln1_bias"), $ref_ty::V(& $($mut_)? layer.ln1_bias)));
                    out.push((format!("layer{ix}.w_ff1"), $ref_ty::M(& $($mut_)? layer.w_ff1)));
                    out.push((format!("layer{ix}.b_ff1"), $ref_ty::V(& $($mut_)? layer.b_ff1)));
                    out.push((format!("layer{ix}.w_ff2"), $ref_ty::M(& $($mut_)? layer.w_ff2)));
                    out.push((format!("layer{ix}.b_ff2"), $ref_ty::V(& $($mut_)? layer.b_ff2)));
                    out.push((format!("layer{ix}.ln2_gain"), $ref_ty::V(& $($mut_)? layer.ln2_gain)));
                    out.push((format!("layer{ix}.ln2_bias"), $ref_ty::V(& $($mut_)? layer.ln2_bias)));
                }
                out.push(("classifier_w".to_string(), $ref_ty::M(& $($mut_)? self.classifier_w)));
                out.push(("classifier_b".to_string(), $ref_ty::V(& $($mut_)? self.classifier_b)));
                out
            }
        }
    };
}

impl_tensor_walk!(ModelParams, named_tensors, TensorRef, iter);
impl_tensor_walk!(ModelParams, named_tensors_mut, TensorMut, iter_mut, mut);
impl_tensor_walk!(Gradients, named_tensors, TensorRef, iter);
impl_tensor_walk!(Gradients, named_tensors_mut, TensorMut, iter_mut, mut);

impl ModelParams {
    /// Randomly initialized parameters: weights uniform in ±0.05 from the
    /// seeded generator, normalization gains 1 and biases 0.
    pub fn init(
        vocab_size: usize,
        hidden: usize,
        layers: usize,
        max_len: usize,
        activation: Activation,
        seed: u64,
    ) -> ModelParams {
        let mut rng = StdRng::seed_from_u64(seed);
        let ffn = 4 * hidden;
        let mut uniform_m = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-INIT_RANGE..=INIT_RANGE))
        };
        let layers = (0..layers)
            .map(|_| LayerParams {
                w_qs: uniform_m(hidden, hidden),
                w_ks: uniform_m(hidden, hidden),
                w_vs: uniform_m(hidden, hidden),
                w_qg: uniform_m(hidden, hidden),
                w_kg: uniform_m(hidden, hidden),
                w_vg: uniform_m(hidden, hidden),
                w_out: uniform_m(hidden, hidden),
                b_out: Array1::zeros(hidden),
                ln1_gain: Array1::ones(hidden),
                ln1_bias: Array1::zeros(hidden),
                w_ff1: uniform_m(hidden, ffn),
                b_ff1: Array1::zeros(ffn),
                w_ff2: uniform_m(ffn, hidden),
                b_ff2: Array1::zeros(hidden),
                ln2_gain: Array1::ones(hidden),
                ln2_bias: Array1::zeros(hidden),
            })
            .collect();
        ModelParams {
            embedding: uniform_m(vocab_size, hidden),
            positional: uniform_m(max_len, hidden),
            layers,
            classifier_w: uniform_m(hidden, NUM_CLASSES),
            classifier_b: Array1::zeros(NUM_CLASSES),
            activation,
        }
    }

    pub fn hidden(&self) -> usize {
        self.embedding.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn max_len(&self) -> usize {
        self.positional.nrows()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// True when every parameter is a finite real.
    pub fn all_finite(&self) -> bool {
        self.named_tensors()
            .iter()
            .all(|(_, t)| t.as_slice().iter().all(|v| v.is_finite()))
    }
}

/// Gradient accumulator shaped exactly like [`ModelParams`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub embedding: Array2<f64>,
    pub positional: Array2<f64>,
    pub layers: Vec<LayerGrads>,
    pub classifier_w: Array2<f64>,
    pub classifier_b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w_qs: Array2<f64>,
    pub w_ks: Array2<f64>,
    pub w_vs: Array2<f64>,
    pub w_qg: Array2<f64>,
    pub w_kg: Array2<f64>,
    pub w_vg: Array2<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub ln1_gain: Array1<f64>,
    pub ln1_bias: Array1<f64>,
    pub w_ff1: Array2<f64>,
    pub b_ff1: Array1<f64>,
    pub w_ff2: Array2<f64>,
    pub b_ff2: Array1<f64>,
    pub ln2_gain: Array1<f64>,
    pub ln2_bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Gradients {
        let zero_m = |a: &Array2<f64>| Array2::zeros(a.dim());
        let zero_v = |a: &Array1<f64>| Array1::zeros(a.len());
        Gradients {
            embedding: zero_m(&params.embedding),
            positional: zero_m(&params.positional),
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrads {
                    w_qs: zero_m(&l.w_qs),
                    w_ks: zero_m(&l.w_ks),
                    w_vs: zero_m(&l.w_vs),
                    w_qg: zero_m(&l.w_qg),
                    w_kg: zero_m(&l.w_kg),
                    w_vg: zero_m(&l.w_vg),
                    w_out: zero_m(&l.w_out),
                    b_out: zero_v(&l.b_out),
                    ln1_gain: zero_v(&l.ln1_gain),
                    ln1_bias: zero_v(&l.ln1_bias),
                    w_ff1: zero_m(&l.w_ff1),
                    b_ff1: zero_v(&l.b_ff1),
                    w_ff2: zero_m(&l.w_ff2),
                    b_ff2: zero_v(&l.b_ff2),
                    ln2_gain: zero_v(&l.ln2_gain),
                    ln2_bias: zero_v(&l.ln2_bias),
                })
                .collect(),
            classifier_w: zero_m(&params.classifier_w),
            classifier_b: zero_v(&params.classifier_b),
        }
    }

    /// Multiply the gradient of one named tensor by `factor` (testing hook
    /// for gradient-check fault injection).
    pub fn scale_tensor(&mut self, name: &str, factor: f64) {
        for (tensor_name, mut tensor) in self.named_tensors_mut() {
            if tensor_name == name {
                for v in tensor.as_slice_mut() {
                    *v *= factor;
                }
                return;
            }
        }
        panic!("no parameter tensor named {name:?}");
    }
}

/// Row-wise layer normalization cache: normalized inputs and the inverse
/// standard deviation per row.
struct NormCache {
    x_hat: Array2<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Array2<f64>, gain: &Array1<f64>, bias: &Array1<f64>) -> (Array2<f64>, NormCache) {
    let (rows, cols) = x.dim();
    let mut x_hat = Array2::zeros((rows, cols));
    let mut inv_std = Vec::with_capacity(rows);
    let mut y = Array2::zeros((rows, cols));
    for i in 0..rows {
        let row = x.row(i);
        let mean = row.sum() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        inv_std.push(inv);
        for j in 0..cols {
            let xh = (x[(i, j)] - mean) * inv;
            x_hat[(i, j)] = xh;
            y[(i, j)] = gain[j] * xh + bias[j];
        }
    }
    (y, NormCache { x_hat, inv_std })
}

fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &NormCache,
    gain: &Array1<f64>,
    dgain: &mut Array1<f64>,
    dbias: &mut Array1<f64>,
) -> Array2<f64> {
    let (rows, cols) = dy.dim();
    let mut dx = Array2::zeros((rows, cols));
    for i in 0..rows {
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for j in 0..cols {
            let d = dy[(i, j)];
            let xh = cache.x_hat[(i, j)];
            dgain[j] += d * xh;
            dbias[j] += d;
            let dxhat = d * gain[j];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xh;
        }
        mean_dxhat /= cols as f64;
        mean_dxhat_xhat /= cols as f64;
        let inv = cache.inv_std[i];
        for j in 0..cols {
            let dxhat = dy[(i, j)] * gain[j];
            dx[(i, j)] = inv * (dxhat - mean_dxhat - cache.x_hat[(i, j)] * mean_dxhat_xhat);
        }
    }
    dx
}

/// Attention bookkeeping for one layer: per head and row, the attended
/// columns with their softmax weight and whether the column was served by
/// the global projections.
struct AttnCache {
    /// rows[head][i] = (column, weight, column_uses_global_stream)
    rows: Vec<Vec<Vec<(usize, f64, bool)>>>,
    row_is_global: Vec<bool>,
}

/// Everything the backward pass needs from one block's forward run.
pub(crate) struct LayerCache {
    x: Array2<f64>,
    qs: Array2<f64>,
    ks: Array2<f64>,
    vs: Array2<f64>,
    qg: Array2<f64>,
    kg: Array2<f64>,
    vg: Array2<f64>,
    attn: AttnCache,
    concat: Array2<f64>,
    drop1: Option<Array2<f64>>,
    ln1: NormCache,
    y1: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    drop2: Option<Array2<f64>>,
    ln2: NormCache,
    gain1: Array1<f64>,
    gain2: Array1<f64>,
}

fn dropout_mask(rng: &mut StdRng, rows: usize, cols: usize, rate: f64) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_fn((rows, cols), |_| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

/// One transformer block forward pass over `x` (`n` rows of width `H`),
/// with attention restricted to the first `valid_len` rows. Rows past
/// `valid_len` get a zero attention result but still flow through the
/// residual/normalization/feed-forward path, keeping them finite.
pub(crate) fn layer_forward(
    x: &Array2<f64>,
    layer: &LayerParams,
    config: &AttentionConfig,
    valid_len: usize,
    activation: Activation,
    mut dropout: Option<(&mut StdRng, f64)>,
) -> (Array2<f64>, LayerCache) {
    let (n, hidden) = x.dim();
    assert!(valid_len <= n, "valid_len cannot exceed the row count");
    assert!(valid_len >= 1, "need at least the CLS row");
    assert!(
        hidden % config.heads == 0,
        "head count must divide the hidden size"
    );

    let qs = x.dot(&layer.w_qs);
    let ks = x.dot(&layer.w_ks);
    let vs = x.dot(&layer.w_vs);
    let qg = x.dot(&layer.w_qg);
    let kg = x.dot(&layer.w_kg);
    let vg = x.dot(&layer.w_vg);

    let globals: Vec<usize> = config
        .global_positions
        .iter()
        .copied()
        .filter(|&p| p < valid_len)
        .collect();
    let mut row_is_global = vec![false; valid_len];
    for &g in &globals {
        row_is_global[g] = true;
    }

    let heads = config.heads;
    let d_k = hidden / heads;
    let scale = 1.0 / (d_k as f64).sqrt();
    let mut concat = Array2::<f64>::zeros((n, hidden));
    let mut attn_rows: Vec<Vec<Vec<(usize, f64, bool)>>> = Vec::with_capacity(heads);

    for head in 0..heads {
        let c0 = head * d_k;
        let mut head_rows = Vec::with_capacity(valid_len);
        for i in 0..valid_len {
            // Collect (column, uses_global_stream) pairs for this row.
            let mut entries: Vec<(usize, f64, bool)> = Vec::new();
            if row_is_global[i] {
                for j in 0..valid_len {
                    let mut dot = 0.0;
                    for c in 0..d_k {
                        dot += qg[(i, c0 + c)] * kg[(j, c0 + c)];
                    }
                    entries.push((j, dot * scale, true));
                }
            } else {
                for j in window_positions(i, config.window, config.dilation, valid_len) {
                    if row_is_global[j] {
                        continue; // served by the global column pass below
                    }
                    let mut dot = 0.0;
                    for c in 0..d_k {
                        dot += qs[(i, c0 + c)] * ks[(j, c0 + c)];
                    }
                    entries.push((j, dot * scale, false));
                }
                for &j in &globals {
                    let mut dot = 0.0;
                    for c in 0..d_k {
                        dot += qs[(i, c0 + c)] * kg[(j, c0 + c)];
                    }
                    entries.push((j, dot * scale, true));
                }
            }

            let mut scores: Vec<f64> = entries.iter().map(|e| e.1).collect();
            softmax_in_place(&mut scores);
            for (entry, &w) in entries.iter_mut().zip(&scores) {
                entry.1 = w;
                let value = if entry.2 { &vg } else { &vs };
                for c in 0..d_k {
                    concat[(i, c0 + c)] += w * value[(entry.0, c0 + c)];
                }
            }
            head_rows.push(entries);
        }
        attn_rows.push(head_rows);
    }

    let mut a = concat.dot(&layer.w_out);
    for mut row in a.rows_mut() {
        row += &layer.b_out;
    }

    let drop1 = dropout
        .as_mut()
        .map(|(rng, rate)| dropout_mask(rng, n, hidden, *rate));
    if let Some(mask) = &drop1 {
        a *= mask;
    }

    let r1 = x + &a;
    let (y1, ln1) = layer_norm(&r1, &layer.ln1_gain, &layer.ln1_bias);

    let mut ff_pre = y1.dot(&layer.w_ff1);
    for mut row in ff_pre.rows_mut() {
        row += &layer.b_ff1;
    }
    let ff_act = ff_pre.mapv(|v| activation.apply(v));
    let mut ff = ff_act.dot(&layer.w_ff2);
    for mut row in ff.rows_mut() {
        row += &layer.b_ff2;
    }

    let drop2 = dropout
        .as_mut()
        .map(|(rng, rate)| dropout_mask(rng, n, hidden, *rate));
    if let Some(mask) = &drop2 {
        ff *= mask;
    }

    let r2 = &y1 + &ff;
    let (y2, ln2) = layer_norm(&r2, &layer.ln2_gain, &layer.ln2_bias);

    let cache = LayerCache {
        x: x.clone(),
        qs,
        ks,
        vs,
        qg,
        kg,
        vg,
        attn: AttnCache {
            rows: attn_rows,
            row_is_global,
        },
        concat,
        drop1,
        ln1,
        y1,
        ff_pre,
        ff_act,
        drop2,
        ln2,
        gain1: layer.ln1_gain.clone(),
        gain2: layer.ln2_gain.clone(),
    };
    (y2, cache)
}

fn add_row_sums(target: &mut Array1<f64>, source: &Array2<f64>) {
    for row in source.rows() {
        *target += &row;
    }
}

/// Backward pass of one block. Consumes the upstream gradient `dy2`,
/// accumulates parameter gradients into `grads`, and returns the gradient
/// with respect to the block input.
pub(crate) fn layer_backward(
    dy2: &Array2<f64>,
    cache: &LayerCache,
    layer: &LayerParams,
    grads: &mut LayerGrads,
    config: &AttentionConfig,
    activation: Activation,
) -> Array2<f64> {
    let (n, hidden) = dy2.dim();

    let dr2 = layer_norm_backward(
        dy2,
        &cache.ln2,
        &cache.gain2,
        &mut grads.ln2_gain,
        &mut grads.ln2_bias,
    );

    let mut dy1 = dr2.clone();
    let mut dff = dr2;
    if let Some(mask) = &cache.drop2 {
        dff *= mask;
    }

    add_row_sums(&mut grads.b_ff2, &dff);
    grads.w_ff2 += &cache.ff_act.t().dot(&dff);
    let dff_act = dff.dot(&layer.w_ff2.t());
    let dff_pre = &dff_act * &cache.ff_pre.mapv(|v| activation.derivative(v));
    add_row_sums(&mut grads.b_ff1, &dff_pre);
    grads.w_ff1 += &cache.y1.t().dot(&dff_pre);
    dy1 += &dff_pre.dot(&layer.w_ff1.t());

    let dr1 = layer_norm_backward(
        &dy1,
        &cache.ln1,
        &cache.gain1,
        &mut grads.ln1_gain,
        &mut grads.ln1_bias,
    );

    let mut dx = dr1.clone();
    let mut da = dr1;
    if let Some(mask) = &cache.drop1 {
        da *= mask;
    }

    add_row_sums(&mut grads.b_out, &da);
    grads.w_out += &cache.concat.t().dot(&da);
    let dconcat = da.dot(&layer.w_out.t());

    // Attention backward: route the per-row softmax gradient into the
    // sliding or global projections depending on how each column was
    // served in the forward pass.
    let heads = config.heads;
    let d_k = hidden / heads;
    let scale = 1.0 / (d_k as f64).sqrt();
    let mut dqs = Array2::<f64>::zeros((n, hidden));
    let mut dks = Array2::<f64>::zeros((n, hidden));
    let mut dvs = Array2::<f64>::zeros((n, hidden));
    let mut dqg = Array2::<f64>::zeros((n, hidden));
    let mut dkg = Array2::<f64>::zeros((n, hidden));
    let mut dvg = Array2::<f64>::zeros((n, hidden));

    for head in 0..heads {
        let c0 = head * d_k;
        for (i, entries) in cache.attn.rows[head].iter().enumerate() {
            let row_global = cache.attn.row_is_global[i];
            // dp_j = dO · V_j, then the softmax Jacobian.
            let mut dps = Vec::with_capacity(entries.len());
            let mut weighted_sum = 0.0;
            for &(j, p, col_global) in entries {
                let value = if col_global { &cache.vg } else { &cache.vs };
                let mut dp = 0.0;
                for c in 0..d_k {
                    dp += dconcat[(i, c0 + c)] * value[(j, c0 + c)];
                }
                dps.push(dp);
                weighted_sum += p * dp;
            }
            for (&(j, p, col_global), &dp) in entries.iter().zip(&dps) {
                let dscore = p * (dp - weighted_sum) * scale;
                let (key, dkey, dvalue) = if col_global {
                    (&cache.kg, &mut dkg, &mut dvg)
                } else {
                    (&cache.ks, &mut dks, &mut dvs)
                };
                let (query, dquery): (&Array2<f64>, &mut Array2<f64>) = if row_global {
                    (&cache.qg, &mut dqg)
                } else {
                    (&cache.qs, &mut dqs)
                };
                for c in 0..d_k {
                    dquery[(i, c0 + c)] += dscore * key[(j, c0 + c)];
                    dkey[(j, c0 + c)] += dscore * query[(i, c0 + c)];
                    dvalue[(j, c0 + c)] += p * dconcat[(i, c0 + c)];
                }
            }
        }
    }

    grads.w_qs += &cache.x.t().dot(&dqs);
    grads.w_ks += &cache.x.t().dot(&dks);
    grads.w_vs += &cache.x.t().dot(&dvs);
    grads.w_qg += &cache.x.t().dot(&dqg);
    grads.w_kg += &cache.x.t().dot(&dkg);
    grads.w_vg += &cache.x.t().dot(&dvg);

    dx += &dqs.dot(&layer.w_qs.t());
    dx += &dks.dot(&layer.w_ks.t());
    dx += &dvs.dot(&layer.w_vs.t());
    dx += &dqg.dot(&layer.w_qg.t());
    dx += &dkg.dot(&layer.w_kg.t());
    dx += &dvg.dot(&layer.w_vg.t());
    dx
}

/// Forward-pass bookkeeping for a whole sequence.
pub(crate) struct ForwardCache {
    pub(crate) ids: Vec<u32>,
    pub(crate) layers: Vec<LayerCache>,
    pub(crate) final_hidden: Array2<f64>,
}

/// Run the full model over the valid prefix of `seq`. Returns the 5-class
/// logits and, when `keep_cache` is set, the per-layer caches for backward.
pub(crate) fn forward(
    seq: &TokenSequence,
    params: &ModelParams,
    config: &AttentionConfig,
    mut dropout: Option<(&mut StdRng, f64)>,
    keep_cache: bool,
) -> (Array1<f64>, Option<ForwardCache>) {
    let len = seq.valid_len.min(config.max_len).max(1);
    let hidden = params.hidden();
    let mut x = Array2::<f64>::zeros((len, hidden));
    for pos in 0..len {
        let id = seq.ids[pos] as usize;
        for c in 0..hidden {
            x[(pos, c)] = params.embedding[(id, c)] + params.positional[(pos, c)];
        }
    }

    let mut caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let next_dropout = dropout.as_mut().map(|(rng, rate)| (&mut **rng, *rate));
        let (y, cache) = layer_forward(&x, layer, config, len, params.activation, next_dropout);
        x = y;
        if keep_cache {
            caches.push(cache);
        }
    }

    let cls = x.row(0);
    let mut logits = params.classifier_b.clone();
    for k in 0..NUM_CLASSES {
        for c in 0..hidden {
            logits[k] += params.classifier_w[(c, k)] * cls[c];
        }
    }

    let cache = keep_cache.then(|| ForwardCache {
        ids: seq.ids[..len].to_vec(),
        layers: caches,
        final_hidden: x,
    });
    (logits, cache)
}

/// Backward pass for one sequence given the loss gradient at the logits.
/// Accumulates into `grads`.
pub(crate) fn backward(
    dlogits: &Array1<f64>,
    cache: &ForwardCache,
    params: &ModelParams,
    config: &AttentionConfig,
    grads: &mut Gradients,
) {
    let hidden = params.hidden();
    let len = cache.ids.len();

    let cls = cache.final_hidden.row(0);
    for k in 0..NUM_CLASSES {
        grads.classifier_b[k] += dlogits[k];
        for c in 0..hidden {
            grads.classifier_w[(c, k)] += cls[c] * dlogits[k];
        }
    }

    let mut dy = Array2::<f64>::zeros((len, hidden));
    for c in 0..hidden {
        let mut acc = 0.0;
        for k in 0..NUM_CLASSES {
            acc += params.classifier_w[(c, k)] * dlogits[k];
        }
        dy[(0, c)] = acc;
    }

    for (layer_ix, layer) in params.layers.iter().enumerate().rev() {
        dy = layer_backward(
            &dy,
            &cache.layers[layer_ix],
            layer,
            &mut grads.layers[layer_ix],
            config,
            params.activation,
        );
    }

    for pos in 0..len {
        let id = cache.ids[pos] as usize;
        for c in 0..hidden {
            grads.embedding[(id, c)] += dy[(pos, c)];
            grads.positional[(pos, c)] += dy[(pos, c)];
        }
    }
}

/// One Longformer block applied to `x` with attention over the first
/// `valid_len` rows (inference only, no dropout).
pub fn longformer_layer(
    x: &Array2<f64>,
    layer: &LayerParams,
    config: &AttentionConfig,
    valid_len: usize,
    activation: Activation,
) -> Array2<f64> {
    layer_forward(x, layer, config, valid_len, activation, None).0
}

/// Full inference pass: embeddings, all blocks, classifier head over the
/// CLS position. Deterministic; dropout never applies here.
pub fn encode_and_classify(
    seq: &TokenSequence,
    params: &ModelParams,
    config: &AttentionConfig,
) -> Array1<f64> {
    forward(seq, params, config, None, false).0
}
