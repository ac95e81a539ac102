use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Benchmark, DatasetSplit};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{accuracy, auc_roc, Orientation};
use crate::nn::{softmax, ForwardMode, Gradients, MlpModel, SgdMomentum};
use crate::scores::entropy;
use crate::seed::{self, derive_seed};
use crate::trainer::{compute_loss, Objective, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Training loss averaged over the epoch's examples (batch losses weighted by batch size).
    pub train_loss: f64,
    pub terms: BTreeMap<String, f64>,
    /// Validation ID accuracy, percent.
    pub val_accuracy: f64,
    /// Entropy AUC of validation ID vs validation OOD, percent.
    pub val_auc_entropy: Option<f64>,
}

/// Epochs (or grid points) whose validation accuracy trails the best by more
/// than this many points are not selectable.
pub const ACCURACY_GUARD: f64 = 1.0;

fn auc_key(auc: Option<f64>) -> f64 {
    auc.unwrap_or(f64::NEG_INFINITY)
}

/// Index of the best `(accuracy, entropy AUC)` pair: highest AUC among entries
/// within [`ACCURACY_GUARD`] of the best accuracy, then highest accuracy, then
/// the earliest entry.
pub fn select_best(metrics: &[(f64, Option<f64>)]) -> Option<usize> {
    let best_acc = metrics.iter().map(|m| m.0).fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<usize> = None;
    for (i, &(acc, auc)) in metrics.iter().enumerate() {
        if acc < best_acc - ACCURACY_GUARD {
            continue;
        }
        let better = best.is_none_or(|b| {
            let (b_acc, b_auc) = metrics[b];
            auc_key(auc) > auc_key(b_auc) || (auc_key(auc) == auc_key(b_auc) && acc > b_acc)
        });
        if better {
            best = Some(i);
        }
    }
    best
}

/// `a` is never selected over `b` when `b` came first and is at least as good on both axes.
fn dominated_by(a: &EpochRecord, b: &EpochRecord) -> bool {
    b.val_accuracy >= a.val_accuracy && auc_key(b.val_auc_entropy) >= auc_key(a.val_auc_entropy)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters the returned model holds (1-based).
    pub best_epoch: usize,
    pub rollback_applied: bool,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch.checked_sub(1)?)
    }
}

/// Validation accuracy (percent) and, when OOD data is given, the entropy
/// AUC (percent) of a single eval pass.
pub fn validation_metrics(
    model: &MlpModel,
    val: &DatasetSplit,
    val_ood: Option<&DatasetSplit>,
) -> Result<(f64, Option<f64>)> {
    let probs_id = softmax(&model.predict_logits(&val.features)?)?;
    let acc = accuracy(&probs_id.argmax_rows(), val.labels()?)?;
    let auc = match val_ood {
        Some(ood) => {
            let probs_ood = softmax(&model.predict_logits(&ood.features)?)?;
            let h_id: Vec<f64> = probs_id.row_iter().map(entropy).collect();
            let h_ood: Vec<f64> = probs_ood.row_iter().map(entropy).collect();
            Some(100.0 * auc_roc(&h_id, &h_ood, Orientation::HigherIsOod)?)
        }
        None => None,
    };
    Ok((acc, auc))
}

/// Endless reshuffle-free cycle over a fixed random order of OOD rows, so any
/// window of `len` consecutive draws covers every row.
struct OodStream {
    order: Vec<usize>,
    cursor: usize,
}

impl OodStream {
    fn new(len: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut seed::rng(seed));
        Self { order, cursor: 0 }
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                let i = self.order[self.cursor];
                self.cursor = (self.cursor + 1) % self.order.len();
                i
            })
            .collect()
    }
}

fn add_weight_l1(model: &MlpModel, grads: &mut Gradients, strength: f64) -> f64 {
    let mut penalty = 0.0;
    for (w, g) in model.weights().iter().zip(grads.weights.iter_mut()) {
        for (wv, gv) in w.as_slice().iter().zip(g.as_mut_slice()) {
            penalty += wv.abs();
            if *wv != 0.0 {
                *gv += strength * wv.signum();
            }
        }
    }
    strength * penalty
}

fn split_rows(m: &Matrix, at: usize) -> (Matrix, Matrix) {
    let top: Vec<usize> = (0..at).collect();
    let bottom: Vec<usize> = (at..m.rows()).collect();
    (m.select_rows(&top), m.select_rows(&bottom))
}

/// Mini-batch SGD over the ID training split, pairing every ID batch with an
/// equally sized batch from the cycled OOD stream when the objective needs it.
///
/// After every epoch the model is scored on the validation split (and on the
/// auxiliary OOD split for the entropy AUC); with `config.rollback` the best
/// epoch's parameters are restored at the end.
pub fn train(config: &TrainConfig, benchmark: &Benchmark, mut model: MlpModel) -> Result<(MlpModel, TrainHistory)> {
    config.validate()?;
    let train_split = &benchmark.train;
    let labels = train_split.labels()?;
    if model.input_dim() != train_split.dim() {
        return Err(Error::shape(format!(
            "model expects {} inputs, data has {}",
            model.input_dim(),
            train_split.dim()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= model.num_classes()) {
        return Err(Error::shape(format!(
            "label {bad} but model has {} outputs",
            model.num_classes()
        )));
    }
    let ood = if config.objective.uses_ood() {
        Some(benchmark.train_ood.as_ref().ok_or_else(|| {
            Error::MissingInput(format!(
                "objective {} needs the train_ood split of auxiliary outliers",
                config.objective
            ))
        })?)
    } else {
        None
    };
    if let Some(o) = ood {
        if o.dim() != train_split.dim() {
            return Err(Error::shape("train_ood and train have different widths"));
        }
    }
    model.set_dropout_rate(config.dropout_rate)?;

    let mut opt = SgdMomentum::new(&model, config.lr, config.momentum, config.weight_decay)?;
    let shuffle_seed = config.shuffle_seed();
    let dropout_seed = config.dropout_seed();
    let mut ood_stream = ood.map(|o| OodStream::new(o.len(), derive_seed(shuffle_seed, u64::MAX)));
    let val_ood = benchmark.train_ood.as_ref();

    let mut history = TrainHistory::default();
    let mut checkpoints: Vec<(EpochRecord, MlpModel)> = Vec::new();
    let mut step: u64 = 0;
    let n = train_split.len();

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(derive_seed(shuffle_seed, epoch as u64)));

        let mut loss_sum = 0.0;
        let mut term_sums: BTreeMap<String, f64> = BTreeMap::new();
        let diverged = |reason: String, history: &TrainHistory| Error::Divergence {
            epoch,
            reason,
            history: Box::new(history.clone()),
        };
        let or_diverged = |e: Error, history: &TrainHistory| match e {
            Error::NonFinite(m) => diverged(m, history),
            other => other,
        };
        for idx in order.chunks(config.batch_size) {
            let x_in = train_split.features.select_rows(idx);
            let y_in: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let inputs = match (ood, ood_stream.as_mut()) {
                (Some(o), Some(s)) => x_in.vstack(&o.features.select_rows(&s.take(idx.len())))?,
                _ => x_in,
            };
            let mode = ForwardMode::Train {
                seed: derive_seed(dropout_seed, step),
            };
            step += 1;
            let (logits, trace) = model.forward(&inputs, mode)?;
            if !logits.is_finite() {
                return Err(diverged("logits became non-finite".into(), &history));
            }
            let (z_in, z_out) = if ood.is_some() {
                let (a, b) = split_rows(&logits, idx.len());
                (a, Some(b))
            } else {
                (logits, None)
            };
            let mut result = compute_loss(config.objective, &config.params, &z_in, &y_in, z_out.as_ref())
                .map_err(|e| or_diverged(e, &history))?;
            let d_logits = match &result.d_logits_out {
                Some(d_out) if ood.is_some() => result.d_logits_in.vstack(d_out)?,
                _ => result.d_logits_in.clone(),
            };
            let mut grads = model.backward(&trace, &d_logits)?;
            if config.objective == Objective::CeL1 {
                let penalty = add_weight_l1(&model, &mut grads, config.ce_l1_strength);
                result.terms.insert("l1_weights".into(), penalty);
                result.loss += penalty;
            }

            if !result.loss.is_finite() {
                return Err(diverged(format!("loss became {}", result.loss), &history));
            }
            opt.step(&mut model, &grads).map_err(|e| or_diverged(e, &history))?;

            let weight = idx.len() as f64 / n as f64;
            loss_sum += weight * result.loss;
            for (k, v) in &result.terms {
                *term_sums.entry(k.clone()).or_default() += weight * v;
            }
        }

        let (val_accuracy, val_auc_entropy) =
            validation_metrics(&model, &benchmark.val, val_ood).map_err(|e| or_diverged(e, &history))?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum,
            terms: term_sums,
            val_accuracy,
            val_auc_entropy,
        };
        if config.rollback && !checkpoints.iter().any(|(c, _)| dominated_by(&record, c)) {
            checkpoints.retain(|(c, _)| !dominated_by(c, &record) || c.val_auc_entropy == record.val_auc_entropy);
            checkpoints.push((record.clone(), model.clone()));
        }
        history.epochs.push(record);
    }

    history.best_epoch = config.epochs;
    if config.rollback {
        let metrics: Vec<(f64, Option<f64>)> = history
            .epochs
            .iter()
            .map(|r| (r.val_accuracy, r.val_auc_entropy))
            .collect();
        let best_epoch = select_best(&metrics).expect("at least one epoch") + 1;
        if best_epoch != config.epochs {
            let (_, snapshot) = checkpoints
                .into_iter()
                .find(|(c, _)| c.epoch == best_epoch)
                .expect("the selected epoch is never pruned");
            model = snapshot;
            history.best_epoch = best_epoch;
            history.rollback_applied = true;
        }
    }
    Ok((model, history))
}
