use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which end of a score scale indicates in-distribution data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsId,
    HigherIsOod,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::HigherIsId => Orientation::HigherIsOod,
            Orientation::HigherIsOod => Orientation::HigherIsId,
        }
    }
}

/// Area under the ROC curve for separating OOD from ID scores, via the
/// Mann-Whitney rank statistic with mid-ranks for ties.
///
/// Equals the fraction of (ood, id) pairs where the OOD example looks more
/// OOD-like, counting ties as one half.
pub fn auc_roc(scores_id: &[f64], scores_ood: &[f64], orientation: Orientation) -> Result<f64> {
    if scores_id.is_empty() || scores_ood.is_empty() {
        return Err(Error::invalid("AUC needs non-empty ID and OOD score lists"));
    }
    if scores_id.iter().chain(scores_ood).any(|v| v.is_nan()) {
        return Err(Error::invalid("AUC scores contain NaN"));
    }
    let sign = match orientation {
        Orientation::HigherIsOod => 1.0,
        Orientation::HigherIsId => -1.0,
    };
    // (oriented score, is_ood)
    let mut all: Vec<(f64, bool)> = scores_id
        .iter()
        .map(|&s| (sign * s, false))
        .chain(scores_ood.iter().map(|&s| (sign * s, true)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut ood_rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mid-rank
        let mid = (i + j) as f64 / 2.0 + 1.0;
        let ood_in_group = all[i..=j].iter().filter(|e| e.1).count();
        ood_rank_sum += mid * ood_in_group as f64;
        i = j + 1;
    }
    let n_ood = scores_ood.len() as f64;
    let n_id = scores_id.len() as f64;
    let u = ood_rank_sum - n_ood * (n_ood + 1.0) / 2.0;
    Ok(u / (n_ood * n_id))
}

/// Percentage of predictions equal to their label.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(100.0 * correct as f64 / labels.len() as f64)
}
