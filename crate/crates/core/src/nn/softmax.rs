use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Row-wise softmax with per-row max subtraction.
pub fn softmax(logits: &Matrix) -> Result<Matrix> {
    if !logits.is_finite() {
        return Err(Error::NonFinite("softmax input contains NaN or Inf".into()));
    }
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    Ok(out)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `ln softmax(row)[idx]` computed without forming the probabilities.
pub(crate) fn log_softmax_at(row: &[f64], idx: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    row[idx] - lse
}

/// Pulls a gradient w.r.t. probabilities back through softmax:
/// `∂L/∂z = p ⊙ (g − ⟨g, p⟩)`.
pub(crate) fn softmax_backward_row(p: &[f64], g: &[f64], out: &mut [f64]) {
    let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((o, &pv), &gv) in out.iter_mut().zip(p).zip(g) {
        *o = pv * (gv - dot);
    }
}
