use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::objectives::{
    ce_cosine_loss, cosine_margin_ranking_loss, cross_entropy_loss, outlier_exposure_loss,
    LossResult, ObjectiveParams,
};
use crate::seed::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Plain cross-entropy.
    Ce,
    /// Cross-entropy plus an L1 penalty on all weight matrices.
    CeL1,
    /// Cross-entropy plus cosine regularisation between paired ID/OOD softmax rows.
    CeCosine,
    /// Cosine margin ranking with L1 (OOD) and L2 (ID) regularisers.
    CosineMargin,
    /// Cross-entropy plus uniform-target cross-entropy on OOD rows.
    OutlierExposure,
}

impl Objective {
    pub const ALL: [Objective; 5] = [
        Objective::Ce,
        Objective::CeL1,
        Objective::CeCosine,
        Objective::CosineMargin,
        Objective::OutlierExposure,
    ];

    pub fn uses_ood(self) -> bool {
        matches!(
            self,
            Objective::CeCosine | Objective::CosineMargin | Objective::OutlierExposure
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Ce => "ce",
            Objective::CeL1 => "ce_l1",
            Objective::CeCosine => "ce_cosine",
            Objective::CosineMargin => "cosine_margin",
            Objective::OutlierExposure => "outlier_exposure",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown objective {s:?}")))
    }
}

/// Loss of `objective` on one paired batch. The weight penalty of
/// [`Objective::CeL1`] is added by the trainer, not here.
pub fn compute_loss(
    objective: Objective,
    params: &ObjectiveParams,
    logits_in: &Matrix,
    labels: &[usize],
    logits_out: Option<&Matrix>,
) -> Result<LossResult> {
    let need_ood = || Error::MissingInput(format!("objective {objective} needs OOD logits"));
    match objective {
        Objective::Ce | Objective::CeL1 => cross_entropy_loss(logits_in, labels),
        Objective::CeCosine => {
            ce_cosine_loss(logits_in, labels, logits_out.ok_or_else(need_ood)?, params.lambda)
        }
        Objective::CosineMargin => {
            cosine_margin_ranking_loss(logits_in, labels, logits_out.ok_or_else(need_ood)?, params)
        }
        Objective::OutlierExposure => {
            outlier_exposure_loss(logits_in, labels, logits_out.ok_or_else(need_ood)?, params.lambda)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    /// Hidden layer widths; input and output widths come from the data.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub dropout_rate: f64,
    pub params: ObjectiveParams,
    /// Strength of the weight L1 penalty for [`Objective::CeL1`].
    pub ce_l1_strength: f64,
    /// Restore the best validation epoch at the end of training.
    pub rollback: bool,
    pub seed: u64,
    /// Overrides the initialisation sub-seed derived from `seed`.
    pub init_seed: Option<u64>,
    /// Overrides the dropout sub-seed derived from `seed`.
    pub dropout_seed: Option<u64>,
    /// Overrides the batch-order sub-seed derived from `seed`.
    pub shuffle_seed: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::CeCosine,
            hidden: vec![64, 64],
            epochs: 300,
            batch_size: 64,
            lr: 0.02,
            momentum: 0.9,
            weight_decay: 3e-4,
            dropout_rate: 0.2,
            params: ObjectiveParams::default(),
            ce_l1_strength: 1e-4,
            rollback: true,
            seed: 0,
            init_seed: None,
            dropout_seed: None,
            shuffle_seed: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be finite and >= 0", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} not in [0, 1)", self.momentum));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay {} must be >= 0", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0, 1)", self.dropout_rate));
        }
        if !(self.ce_l1_strength >= 0.0) {
            return bad("ce_l1_strength must be >= 0".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        self.params
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
            .unwrap_or_else(|| derive_seed(self.seed, stream::INIT))
    }

    pub fn dropout_seed(&self) -> u64 {
        self.dropout_seed
            .unwrap_or_else(|| derive_seed(self.seed, stream::DROPOUT))
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.shuffle_seed
            .unwrap_or_else(|| derive_seed(self.seed, stream::SHUFFLE))
    }
}
