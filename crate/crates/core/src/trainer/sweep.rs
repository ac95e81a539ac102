use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Benchmark;
use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::trainer::{init_model, train, validation_metrics, TrainConfig, ACCURACY_GUARD};

/// Overrides for one sweep point; absent fields keep the base config's value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
}

impl GridPoint {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        let mut c = base.clone();
        let p = &mut c.params;
        p.lambda = self.lambda.unwrap_or(p.lambda);
        p.gamma = self.gamma.unwrap_or(p.gamma);
        p.lambda1 = self.lambda1.unwrap_or(p.lambda1);
        p.lambda2 = self.lambda2.unwrap_or(p.lambda2);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    /// Position of the point in the submitted grid.
    pub index: usize,
    pub point: GridPoint,
    pub val_accuracy: Option<f64>,
    pub val_auc_entropy: Option<f64>,
    /// Within the accuracy guard of the best point.
    pub eligible: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub best_config: TrainConfig,
    pub best_index: usize,
    pub best_model: MlpModel,
    /// Sorted by the selection criterion, best first.
    pub leaderboard: Vec<LeaderboardRow>,
}

/// Trains one model per grid point (in parallel) and picks the highest
/// validation entropy-AUC among points within one accuracy point of the best
/// validation accuracy. Ties go to the earlier grid point.
pub fn sweep(base: &TrainConfig, grid: &[GridPoint], benchmark: &Benchmark) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let runs: Vec<Result<(MlpModel, f64, Option<f64>)>> = grid
        .par_iter()
        .map(|point| {
            let cfg = point.apply(base);
            let (model, _) = train(&cfg, benchmark, init_model(&cfg, benchmark)?)?;
            let (acc, auc) = validation_metrics(&model, &benchmark.val, benchmark.train_ood.as_ref())?;
            Ok((model, acc, auc))
        })
        .collect();

    let best_acc = runs
        .iter()
        .filter_map(|r| r.as_ref().ok().map(|(_, acc, _)| *acc))
        .fold(f64::NEG_INFINITY, f64::max);
    if !best_acc.is_finite() {
        let reasons: Vec<String> = runs
            .iter()
            .filter_map(|r| r.as_ref().err().map(ToString::to_string))
            .collect();
        return Err(Error::Divergence {
            epoch: base.epochs,
            reason: format!("every grid point failed: {}", reasons.join("; ")),
            history: Box::default(),
        });
    }

    let mut rows: Vec<LeaderboardRow> = runs
        .iter()
        .enumerate()
        .map(|(index, r)| match r {
            Ok((_, acc, auc)) => LeaderboardRow {
                index,
                point: grid[index],
                val_accuracy: Some(*acc),
                val_auc_entropy: *auc,
                eligible: *acc >= best_acc - ACCURACY_GUARD,
                error: None,
            },
            Err(e) => LeaderboardRow {
                index,
                point: grid[index],
                val_accuracy: None,
                val_auc_entropy: None,
                eligible: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let key = |r: &LeaderboardRow| {
        (
            r.error.is_none(),
            r.eligible,
            r.val_auc_entropy.unwrap_or(f64::NEG_INFINITY),
            r.val_accuracy.unwrap_or(f64::NEG_INFINITY),
        )
    };
    rows.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        kb.0.cmp(&ka.0)
            .then(kb.1.cmp(&ka.1))
            .then(kb.2.total_cmp(&ka.2))
            .then(kb.3.total_cmp(&ka.3))
            .then(a.index.cmp(&b.index))
    });

    let best_index = rows[0].index;
    let best_model = match runs.into_iter().nth(best_index) {
        Some(Ok((model, _, _))) => model,
        _ => unreachable!("the top row always trained successfully"),
    };
    Ok(SweepOutcome {
        best_config: grid[best_index].apply(base),
        best_index,
        best_model,
        leaderboard: rows,
    })
}
