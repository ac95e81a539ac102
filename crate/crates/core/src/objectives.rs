//! Training objectives over ID/OOD logit blocks, plus reference
//! contrastive and ranking losses on latent vectors.
//!
//! All batch losses are means over rows, and ID row `i` is paired with OOD
//! row `i`. Gradients are returned w.r.t. the logits, ready for
//! [`MlpModel::backward`](crate::nn::MlpModel::backward).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{log_softmax_at, softmax, softmax_backward_row};

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub loss: f64,
    /// `∂L/∂z_in`.
    pub d_logits_in: Matrix,
    /// `∂L/∂z_out`, absent for objectives that ignore OOD data.
    pub d_logits_out: Option<Matrix>,
    /// Named additive parts of `loss`.
    pub terms: BTreeMap<String, f64>,
}

impl LossResult {
    fn from_terms(terms: &[(&str, f64)], d_in: Matrix, d_out: Option<Matrix>) -> Self {
        Self {
            loss: terms.iter().map(|(_, v)| v).sum(),
            d_logits_in: d_in,
            d_logits_out: d_out,
            terms: terms.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// Hyperparameters shared by the OOD-aware objectives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveParams {
    /// Cosine (or outlier-exposure) regularisation strength. Negative values are allowed.
    pub lambda: f64,
    /// Ranking margin. Softmax cosines are non-negative, so only `γ < 0` lets the hinge switch off.
    pub gamma: f64,
    /// Strength of the L1 pull of OOD probabilities towards uniform.
    pub lambda1: f64,
    /// Strength of the squared pull of the true-class ID probability towards `alpha`.
    pub lambda2: f64,
    /// Target true-class probability on ID data, in `(0, 1]`.
    pub alpha: f64,
    /// Number of ID classes.
    pub k: usize,
    /// NT-Xent temperature.
    pub tau: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: -0.5,
            lambda1: 1.0,
            lambda2: 1.0,
            alpha: 0.9,
            k: 3,
            tau: 0.5,
        }
    }
}

impl ObjectiveParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("k = {} must be >= 2", self.k)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid(format!("tau = {} must be > 0", self.tau)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha = {} not in (0, 1]", self.alpha)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::invalid("lambda1 and lambda2 must be >= 0"));
        }
        if ![self.lambda, self.gamma, self.lambda1, self.lambda2]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::invalid("objective parameters must be finite"));
        }
        Ok(())
    }
}

fn check_labels(logits: &Matrix, labels: &[usize]) -> Result<()> {
    if logits.rows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.rows()
        )));
    }
    let k = logits.cols();
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
    }
    Ok(())
}

fn check_pairing(logits_in: &Matrix, logits_out: &Matrix) -> Result<()> {
    if logits_in.shape() != logits_out.shape() {
        return Err(Error::shape(format!(
            "ID logits {:?} and OOD logits {:?} must pair row-wise",
            logits_in.shape(),
            logits_out.shape()
        )));
    }
    Ok(())
}

/// Pulls per-row probability gradients back through softmax.
fn through_softmax(probs: &Matrix, d_probs: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for r in 0..probs.rows() {
        softmax_backward_row(probs.row(r), d_probs.row(r), out.row_mut(r));
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `uᵀv / (‖u‖‖v‖)`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape(format!("vectors of length {} and {}", u.len(), v.len())));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero-norm vector"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(dot / (nu * nv))
}

/// Mean row-wise cosine between two probability blocks and its gradients
/// w.r.t. each block.
fn mean_cosine(p: &Matrix, q: &Matrix) -> Result<(f64, Matrix, Matrix)> {
    let n = p.rows() as f64;
    let mut total = 0.0;
    let mut dp = Matrix::zeros(p.rows(), p.cols());
    let mut dq = Matrix::zeros(q.rows(), q.cols());
    for r in 0..p.rows() {
        let (pr, qr) = (p.row(r), q.row(r));
        let (np, nq) = (norm(pr), norm(qr));
        if np == 0.0 || nq == 0.0 {
            return Err(Error::invalid(format!("zero-norm probability row {r}")));
        }
        let s = pr.iter().zip(qr).map(|(a, b)| a * b).sum::<f64>() / (np * nq);
        total += s;
        // ∂s/∂p = q/(‖p‖‖q‖) − s·p/‖p‖²
        for (c, d) in dp.row_mut(r).iter_mut().enumerate() {
            *d = (qr[c] / (np * nq) - s * pr[c] / (np * np)) / n;
        }
        for (c, d) in dq.row_mut(r).iter_mut().enumerate() {
            *d = (pr[c] / (np * nq) - s * qr[c] / (nq * nq)) / n;
        }
    }
    Ok((total / n, dp, dq))
}

/// Mean negative log-likelihood of the true class; `∂L/∂z = (p − onehot)/N`.
pub fn cross_entropy_loss(logits_in: &Matrix, labels: &[usize]) -> Result<LossResult> {
    check_labels(logits_in, labels)?;
    let probs = softmax(logits_in)?;
    let n = logits_in.rows() as f64;
    let mut ce = 0.0;
    let mut d = probs;
    for (r, &y) in labels.iter().enumerate() {
        ce -= log_softmax_at(logits_in.row(r), y);
        d.row_mut(r)[y] -= 1.0;
    }
    for v in d.as_mut_slice() {
        *v /= n;
    }
    Ok(LossResult::from_terms(&[("ce", ce / n)], d, None))
}

/// Cross-entropy plus `λ` times the mean cosine between paired ID and OOD
/// softmax rows. `λ = −1` gives the minimax form.
pub fn ce_cosine_loss(
    logits_in: &Matrix,
    labels: &[usize],
    logits_out: &Matrix,
    lambda: f64,
) -> Result<LossResult> {
    check_pairing(logits_in, logits_out)?;
    if !lambda.is_finite() {
        return Err(Error::invalid("lambda must be finite"));
    }
    let ce = cross_entropy_loss(logits_in, labels)?;
    let p_in = softmax(logits_in)?;
    let p_out = softmax(logits_out)?;
    let (cos, dp_in, dp_out) = mean_cosine(&p_in, &p_out)?;

    let ce_value = ce.terms["ce"];
    if lambda == 0.0 {
        let zeros = Matrix::zeros(logits_out.rows(), logits_out.cols());
        return Ok(LossResult::from_terms(
            &[("ce", ce_value), ("cosine", 0.0)],
            ce.d_logits_in,
            Some(zeros),
        ));
    }
    let mut d_in = through_softmax(&p_in, &dp_in);
    for (d, g) in d_in.as_mut_slice().iter_mut().zip(ce.d_logits_in.as_slice()) {
        *d = g + lambda * *d;
    }
    let d_out = through_softmax(&p_out, &dp_out).map(|v| lambda * v);
    Ok(LossResult::from_terms(
        &[("ce", ce_value), ("cosine", lambda * cos)],
        d_in,
        Some(d_out),
    ))
}

/// Cosine margin ranking objective:
/// `max(0, γ + mean s(p_in, p_out)) + λ1·mean Σ_c |p_out,c − 1/k| + λ2·mean (p_in,y − α)²`.
///
/// The hinge has subgradient 0 at its kink, as does `|·|` at zero.
pub fn cosine_margin_ranking_loss(
    logits_in: &Matrix,
    labels: &[usize],
    logits_out: &Matrix,
    params: &ObjectiveParams,
) -> Result<LossResult> {
    check_pairing(logits_in, logits_out)?;
    check_labels(logits_in, labels)?;
    params.validate()?;
    if params.k != logits_in.cols() {
        return Err(Error::shape(format!(
            "k = {} but logits have {} columns",
            params.k,
            logits_in.cols()
        )));
    }
    let n = logits_in.rows() as f64;
    let k = params.k as f64;
    let p_in = softmax(logits_in)?;
    let p_out = softmax(logits_out)?;
    let (cos, dcos_in, dcos_out) = mean_cosine(&p_in, &p_out)?;

    let margin = params.gamma + cos;
    let (hinge, mut dp_in, mut dp_out) = if margin > 0.0 {
        (margin, dcos_in, dcos_out)
    } else {
        (
            0.0,
            Matrix::zeros(p_in.rows(), p_in.cols()),
            Matrix::zeros(p_out.rows(), p_out.cols()),
        )
    };

    let mut l1 = 0.0;
    for (p, d) in p_out.as_slice().iter().zip(dp_out.as_mut_slice()) {
        let dev = p - 1.0 / k;
        l1 += dev.abs();
        let sign = if dev > 0.0 {
            1.0
        } else if dev < 0.0 {
            -1.0
        } else {
            0.0
        };
        *d += params.lambda1 * sign / n;
    }
    l1 *= params.lambda1 / n;

    let mut l2 = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let dev = p_in.get(r, y) - params.alpha;
        l2 += dev * dev;
        dp_in.row_mut(r)[y] += params.lambda2 * 2.0 * dev / n;
    }
    l2 *= params.lambda2 / n;

    let d_in = through_softmax(&p_in, &dp_in);
    let d_out = through_softmax(&p_out, &dp_out);
    Ok(LossResult::from_terms(
        &[("hinge", hinge), ("l1", l1), ("l2", l2)],
        d_in,
        Some(d_out),
    ))
}

/// Outlier Exposure: cross-entropy plus `λ` times the mean cross-entropy of
/// OOD predictions against the uniform distribution.
pub fn outlier_exposure_loss(
    logits_in: &Matrix,
    labels: &[usize],
    logits_out: &Matrix,
    lambda: f64,
) -> Result<LossResult> {
    check_pairing(logits_in, logits_out)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda = {lambda} must be finite and >= 0")));
    }
    let ce = cross_entropy_loss(logits_in, labels)?;
    let ce_value = ce.terms["ce"];
    if lambda == 0.0 {
        let zeros = Matrix::zeros(logits_out.rows(), logits_out.cols());
        return Ok(LossResult::from_terms(
            &[("ce", ce_value), ("oe", 0.0)],
            ce.d_logits_in,
            Some(zeros),
        ));
    }
    let n = logits_out.rows() as f64;
    let k = logits_out.cols() as f64;
    let p_out = softmax(logits_out)?;
    let mut oe = 0.0;
    let mut d_out = Matrix::zeros(p_out.rows(), p_out.cols());
    for r in 0..logits_out.rows() {
        let row = logits_out.row(r);
        oe -= (0..row.len()).map(|c| log_softmax_at(row, c)).sum::<f64>() / k;
        for (d, p) in d_out.row_mut(r).iter_mut().zip(p_out.row(r)) {
            *d = lambda * (p - 1.0 / k) / n;
        }
    }
    Ok(LossResult::from_terms(
        &[("ce", ce_value), ("oe", lambda * oe / n)],
        ce.d_logits_in,
        Some(d_out),
    ))
}

/// NT-Xent over `2n` latent rows where `pairing[i]` is the positive partner of
/// row `i`. Returns the mean over all ordered positive pairs; the anchor itself
/// is excluded from each denominator.
pub fn ntxent_loss(latents: &Matrix, pairing: &[usize], tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau = {tau} must be > 0")));
    }
    let m = latents.rows();
    if m == 0 || pairing.len() != m {
        return Err(Error::shape(format!("{} partners for {m} latent rows", pairing.len())));
    }
    for (i, &j) in pairing.iter().enumerate() {
        if j >= m || j == i || pairing[j] != i {
            return Err(Error::invalid(format!("row {i} is not part of a positive pair")));
        }
    }
    let mut sims = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            sims.set(i, j, cosine_similarity(latents.row(i), latents.row(j))? / tau);
        }
    }
    let mut total = 0.0;
    for (i, &pos) in pairing.iter().enumerate() {
        let others = (0..m).filter(|&j| j != i).map(|j| sims.get(i, j));
        let max = others.clone().fold(f64::NEG_INFINITY, f64::max);
        let lse = others.map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        total += lse - sims.get(i, pos);
    }
    Ok(total / m as f64)
}

fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}

/// Contrastive pair loss: the distance for positive pairs, `max(0, γ − d)` for negatives.
pub fn pairwise_ranking_loss(z_a: &[f64], z_b: &[f64], positive: bool, gamma: f64) -> Result<f64> {
    let d = euclidean(z_a, z_b)?;
    Ok(if positive { d } else { (gamma - d).max(0.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletRegime {
    /// The negative is already beyond the margin; zero loss.
    Easy,
    /// The negative is farther than the positive but inside the margin.
    SemiHard,
    /// The negative is closer than the positive.
    Hard,
}

/// `max(0, γ + d(z, z⁺) − d(z, z⁻))` and the regime it falls in.
///
/// The regime is read off the loss value: zero loss is easy and loss above
/// `γ` means `d⁻ < d⁺`.
pub fn triplet_ranking_loss(
    z: &[f64],
    z_pos: &[f64],
    z_neg: &[f64],
    gamma: f64,
) -> Result<(f64, TripletRegime)> {
    let loss = (gamma + euclidean(z, z_pos)? - euclidean(z, z_neg)?).max(0.0);
    let regime = if loss == 0.0 {
        TripletRegime::Easy
    } else if loss > gamma {
        TripletRegime::Hard
    } else {
        TripletRegime::SemiHard
    };
    Ok((loss, regime))
}
