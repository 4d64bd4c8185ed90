//! Attention kernels: a dense masked reference and the sparse
//! sliding-window kernel.

use ndarray::Array2;

use super::{AttentionConfig, EncoderError};

/// Numerically stable softmax over a score slice, in place.
pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Dense scaled dot-product attention with a boolean mask.
///
/// Row `i` of the result is the softmax over `Q_i·K_j/sqrt(d_k)` for the
/// positions `j` where `mask[i][j]` is true, applied to the rows of `V`.
/// Masked positions contribute exactly zero. This implementation
/// materializes the full n-by-n weight matrix; it is the reference the
/// sparse kernel is checked against, and the baseline for the complexity
/// comparison.
pub fn full_attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
    mask: &Array2<bool>,
) -> Result<Array2<f64>, EncoderError> {
    let n = q.nrows();
    let d_k = q.ncols();
    if k.nrows() != n || v.nrows() != n || k.ncols() != d_k || v.ncols() != d_k {
        return Err(EncoderError::ShapeMismatch(format!(
            "Q {:?}, K {:?}, V {:?} must share one [n x d_k] shape",
            q.dim(),
            k.dim(),
            v.dim()
        )));
    }
    if mask.dim() != (n, n) {
        return Err(EncoderError::ShapeMismatch(format!(
            "mask {:?} must be [{n} x {n}]",
            mask.dim()
        )));
    }

    let scale = 1.0 / (d_k as f64).sqrt();
    let mut scores = q.dot(&k.t());
    scores *= scale;

    let mut weights = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let allowed: Vec<usize> = (0..n).filter(|&j| mask[(i, j)]).collect();
        if allowed.is_empty() {
            return Err(EncoderError::AllMaskedRow { row: i });
        }
        let mut row: Vec<f64> = allowed.iter().map(|&j| scores[(i, j)]).collect();
        softmax_in_place(&mut row);
        for (&j, &w) in allowed.iter().zip(&row) {
            weights[(i, j)] = w;
        }
    }
    Ok(weights.dot(v))
}

/// The positions row `i` attends to under a sliding window of width
/// `window` with dilation `dilation`, clipped to `[0, valid_len)`.
pub(crate) fn window_positions(
    i: usize,
    window: usize,
    dilation: usize,
    valid_len: usize,
) -> impl Iterator<Item = usize> {
    let half = (window / 2) as isize;
    let i = i as isize;
    let d = dilation as isize;
    let valid = valid_len as isize;
    (-half..=half).filter_map(move |k| {
        let j = i + k * d;
        (j >= 0 && j < valid).then_some(j as usize)
    })
}

/// Sparse sliding-window attention.
///
/// Token `i` attends exactly to `{i + k·dilation : k in [-w/2, w/2]}`
/// clipped to `[0, valid_len)`. Rows at or beyond `valid_len` come back as
/// zeros. Only O(n·w) score entries are ever computed; no n-by-n matrix is
/// formed.
pub fn sliding_window_attention(
    q: &Array2<f64>,
    k: &Array2<f64>,
    v: &Array2<f64>,
    config: &AttentionConfig,
    valid_len: usize,
) -> Array2<f64> {
    let n = q.nrows();
    let d_k = q.ncols();
    assert_eq!(k.dim(), (n, d_k), "K shape must match Q");
    assert_eq!(v.dim(), (n, d_k), "V shape must match Q");
    assert!(config.window.is_multiple_of(2), "window must be even");
    assert!(config.dilation >= 1, "dilation must be at least 1");
    assert!(valid_len <= n, "valid_len cannot exceed the row count");

    let scale = 1.0 / (d_k as f64).sqrt();
    let mut out = Array2::<f64>::zeros((n, d_k));
    let mut positions: Vec<usize> = Vec::with_capacity(config.window + 1);
    let mut scores: Vec<f64> = Vec::with_capacity(config.window + 1);

    for i in 0..valid_len {
        positions.clear();
        positions.extend(window_positions(
            i,
            config.window,
            config.dilation,
            valid_len,
        ));
        scores.clear();
        for &j in &positions {
            let mut dot = 0.0;
            for c in 0..d_k {
                dot += q[(i, c)] * k[(j, c)];
            }
            scores.push(dot * scale);
        }
        softmax_in_place(&mut scores);
        for (&j, &w) in positions.iter().zip(&scores) {
            for c in 0..d_k {
                out[(i, c)] += w * v[(j, c)];
            }
        }
    }
    out
}
