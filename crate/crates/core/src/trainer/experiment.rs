use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{corrupt, Benchmark, CorruptionKind, CorruptionSpec, DatasetSplit};
use crate::error::Result;
use crate::metrics::{
    accuracy, auc_roc, export_decision_grid, export_histograms, mce, write_score_dump,
    CorruptionReport, ErrorTable, EvalReport, GridBounds, GridQuantity, ScoreDump, ScoreKind,
};
use crate::nn::{save_model, ForwardMode, MlpModel};
use crate::scores::{
    confidence_score, entropy_score, fit_mahalanobis, mahalanobis_score, mc_dropout_predict,
    mutual_information_score, PredictiveSamples,
};
use crate::seed::{derive_seed, stream};
use crate::trainer::{train, TrainConfig, TrainHistory};

pub const SEVERITIES: [u8; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// MC-Dropout passes; values above 1 switch the headline AUCs to MC averages.
    pub mc_passes: usize,
    pub mc_seed: u64,
    pub mahalanobis: bool,
    /// `None` picks `1e-6 · trace(Σ̂) / d`.
    pub mahalanobis_shrinkage: Option<f64>,
    pub corruption: bool,
    pub corruption_seed: u64,
    pub grid_resolution: usize,
    /// Padding of the data bounding box, as a fraction of its extent.
    pub grid_padding: f64,
    pub histogram_bins: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mc_passes: 30,
            mc_seed: 0,
            mahalanobis: true,
            mahalanobis_shrinkage: None,
            corruption: false,
            corruption_seed: 0,
            grid_resolution: 200,
            grid_padding: 0.2,
            histogram_bins: 20,
        }
    }
}

/// Builds the untrained model for `config` on `benchmark`'s shapes.
pub fn init_model(config: &TrainConfig, benchmark: &Benchmark) -> Result<MlpModel> {
    let k = benchmark
        .train
        .labels()?
        .iter()
        .max()
        .map_or(0, |m| m + 1)
        .max(config.params.k);
    let mut dims = vec![benchmark.train.dim()];
    dims.extend(&config.hidden);
    dims.push(k);
    MlpModel::init(&dims, config.dropout_rate, config.init_seed())
}

fn score_set(samples: &PredictiveSamples) -> BTreeMap<ScoreKind, Vec<f64>> {
    BTreeMap::from([
        (ScoreKind::Confidence, confidence_score(samples)),
        (ScoreKind::Entropy, entropy_score(samples)),
        (ScoreKind::MutualInformation, mutual_information_score(samples)),
    ])
}

fn aucs(
    id: &BTreeMap<ScoreKind, Vec<f64>>,
    ood: &BTreeMap<ScoreKind, Vec<f64>>,
) -> Result<BTreeMap<ScoreKind, f64>> {
    id.iter()
        .map(|(kind, s_id)| Ok((*kind, 100.0 * auc_roc(s_id, &ood[kind], kind.orientation())?)))
        .collect()
}

/// Accuracy and AUCs of `model` on the benchmark's test splits, plus the
/// per-example scores behind the headline AUCs.
pub fn evaluate(model: &MlpModel, benchmark: &Benchmark, config: &EvalConfig) -> Result<(EvalReport, Vec<ScoreDump>)> {
    let test_id = &benchmark.test_id;
    let test_ood = &benchmark.test_ood;
    let mut warnings = Vec::new();

    let det_id = PredictiveSamples::deterministic(model, &test_id.features)?;
    let det_ood = PredictiveSamples::deterministic(model, &test_ood.features)?;
    let acc = accuracy(&det_id.mean_probs().argmax_rows(), test_id.labels()?)?;
    let det_scores = (score_set(&det_id), score_set(&det_ood));
    let mut auc_det = aucs(&det_scores.0, &det_scores.1)?;

    let use_mc = config.mc_passes > 1 && model.dropout_rate() > 0.0;
    if config.mc_passes > 1 && !use_mc {
        warnings.push(
            "model has dropout_rate = 0: MC-Dropout passes are identical, mutual_information is 0".into(),
        );
    }
    if !use_mc {
        warnings.push("mutual_information is identically 0 without MC-Dropout passes".into());
    }
    let (mut scores_id, mut scores_ood, mut auc) = if use_mc {
        let mc_id = mc_dropout_predict(model, &test_id.features, config.mc_passes, config.mc_seed)?;
        let mc_ood = mc_dropout_predict(
            model,
            &test_ood.features,
            config.mc_passes,
            derive_seed(config.mc_seed, 1),
        )?;
        let (id, ood) = (score_set(&mc_id), score_set(&mc_ood));
        let auc = aucs(&id, &ood)?;
        (id, ood, auc)
    } else {
        (det_scores.0, det_scores.1, auc_det.clone())
    };

    if config.mahalanobis {
        let features = |split: &DatasetSplit| -> Result<_> {
            let (_, trace) = model.forward(&split.features, ForwardMode::Eval)?;
            Ok(trace.penultimate_features().clone())
        };
        let detector = fit_mahalanobis(
            &features(&benchmark.train)?,
            benchmark.train.labels()?,
            config.mahalanobis_shrinkage,
        )?;
        let m_id = mahalanobis_score(&detector, &features(test_id)?)?;
        let m_ood = mahalanobis_score(&detector, &features(test_ood)?)?;
        let value = 100.0 * auc_roc(&m_id, &m_ood, ScoreKind::Mahalanobis.orientation())?;
        auc.insert(ScoreKind::Mahalanobis, value);
        auc_det.insert(ScoreKind::Mahalanobis, value);
        scores_id.insert(ScoreKind::Mahalanobis, m_id);
        scores_ood.insert(ScoreKind::Mahalanobis, m_ood);
    }

    let dumps = scores_id
        .into_iter()
        .map(|(kind, id)| ScoreDump {
            kind,
            ood: scores_ood.remove(&kind).expect("same kinds"),
            id,
        })
        .collect();
    let report = EvalReport {
        accuracy: acc,
        auc,
        auc_deterministic: auc_det,
        auc_mode: if use_mc { "mc_dropout" } else { "deterministic" }.into(),
        mc_passes: if use_mc { config.mc_passes } else { 1 },
        mce: None,
        corruption: None,
        warnings,
        artifacts: Vec::new(),
        manifest: None,
    };
    Ok((report, dumps))
}

/// Error table over every corruption kind and severity on `split`, with the
/// clean error alongside.
pub fn corruption_eval(model: &MlpModel, split: &DatasetSplit, seed: u64) -> Result<CorruptionReport> {
    let labels = split.labels()?;
    let error_on = |s: &DatasetSplit| -> Result<f64> {
        let preds = model.predict_logits(&s.features)?.argmax_rows();
        Ok(100.0 - accuracy(&preds, labels)?)
    };
    let base = derive_seed(seed, stream::CORRUPT);
    let mut errors = ErrorTable::default();
    for (ki, kind) in CorruptionKind::ALL.into_iter().enumerate() {
        for sev in SEVERITIES {
            let spec = CorruptionSpec::new(kind, sev)?;
            let corrupted = corrupt(split, spec, derive_seed(base, (ki * 16 + sev as usize) as u64))?;
            errors.insert(kind.name(), sev, error_on(&corrupted)?);
        }
    }
    Ok(CorruptionReport {
        clean_error: error_on(split)?,
        mce: mce(&errors, &SEVERITIES)?,
        errors,
    })
}

/// Writes model, score dumps, decision grids, histograms and `results.json`
/// into `out_dir`. `report.artifacts` lists `written` followed by the
/// relative names of the files created here.
pub fn write_artifacts(
    out_dir: &Path,
    model: &MlpModel,
    benchmark: &Benchmark,
    report: &mut EvalReport,
    dumps: &[ScoreDump],
    config: &EvalConfig,
    written: &[&str],
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mut files: Vec<String> = written.iter().map(|s| s.to_string()).collect();
    if model.input_dim() == 2 {
        let all = benchmark
            .train
            .features
            .vstack(&benchmark.test_id.features)?
            .vstack(&benchmark.test_ood.features)?;
        let bounds = GridBounds::from_points(&all, config.grid_padding)?;
        for (q, name) in [
            (GridQuantity::PredictedClass, "grid_predicted_class.csv"),
            (GridQuantity::Confidence, "grid_confidence.csv"),
            (GridQuantity::Entropy, "grid_entropy.csv"),
        ] {
            export_decision_grid(model, bounds, config.grid_resolution, q, out_dir.join(name))?;
            files.push(name.to_string());
        }
    }
    export_histograms(dumps, config.histogram_bins, out_dir.join("histograms.csv"))?;
    files.push("histograms.csv".into());
    for d in dumps {
        let name = format!("scores_{}.csv", d.kind);
        write_score_dump(d, out_dir.join(&name))?;
        files.push(name);
    }
    files.push("results.json".into());
    report.artifacts = files;
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(out_dir.join("results.json"), text)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub model: MlpModel,
    pub history: TrainHistory,
    pub report: EvalReport,
}

/// Trains `config` on `benchmark`, evaluates it and, if `out_dir` is given,
/// writes `model.json`, `history.json` and every evaluation artifact there.
pub fn run_experiment(
    config: &TrainConfig,
    eval: &EvalConfig,
    benchmark: &Benchmark,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutput> {
    let model = init_model(config, benchmark)?;
    let (model, history) = train(config, benchmark, model)?;
    let (mut report, dumps) = evaluate(&model, benchmark, eval)?;
    if eval.corruption {
        let c = corruption_eval(&model, &benchmark.test_id, eval.corruption_seed)?;
        report.mce = Some(c.mce);
        report.corruption = Some(c);
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        save_model(&model, dir.join("model.json"))?;
        let mut text = serde_json::to_string_pretty(&history)?;
        text.push('\n');
        fs::write(dir.join("history.json"), text)?;
        write_artifacts(
            dir,
            &model,
            benchmark,
            &mut report,
            &dumps,
            eval,
            &["model.json", "history.json"],
        )?;
    }
    Ok(ExperimentOutput {
        model,
        history,
        report,
    })
}
