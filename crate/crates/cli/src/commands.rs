use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use oodkit::config::{GridFile, RunConfig};
use oodkit::data::{load_benchmark, make_benchmark, save_benchmark, SplitRole};
use oodkit::metrics::ScoreKind;
use oodkit::nn::{load_model, save_model};
use oodkit::trainer::{self, corruption_eval, evaluate, init_model, write_artifacts};
use oodkit::{Error, Result};
use serde::Serialize;

use crate::manifest::{ManifestBuilder, MANIFEST_FILE};

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(name.to_string())
}

fn add_inputs(m: &mut ManifestBuilder, config: Option<&Path>, data: &Path) {
    if let Some(c) = config {
        m.input(c);
    }
    for role in SplitRole::ALL {
        m.input(data.join(role.file_name()));
    }
}

fn train_seeds(m: ManifestBuilder, cfg: &RunConfig) -> ManifestBuilder {
    m.seed("train_seed", cfg.train.seed)
        .seed("init_seed", cfg.train.init_seed())
        .seed("dropout_seed", cfg.train.dropout_seed())
        .seed("shuffle_seed", cfg.train.shuffle_seed())
}

pub fn gen_data(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<String> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.data_seed = s;
    }
    let mut manifest = ManifestBuilder::new("gen-data", &cfg).seed("data_seed", cfg.data_seed);
    if let Some(c) = config {
        manifest.input(c);
    }
    let bench = make_benchmark(&cfg.data, cfg.data_seed)?;
    let files = save_benchmark(&bench, out)?;
    manifest.write(out, &files)?;
    let rows: Vec<String> = SplitRole::ALL
        .iter()
        .filter_map(|&r| bench.split(r).map(|s| format!("{} {}", r.name(), s.len())))
        .collect();
    Ok(format!("wrote {} ({})", out.display(), rows.join(", ")))
}

pub fn train(config: Option<&Path>, data: &Path, seed: Option<u64>, out: &Path) -> Result<String> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let mut manifest = train_seeds(ManifestBuilder::new("train", &cfg), &cfg);
    add_inputs(&mut manifest, config, data);
    let bench = load_benchmark(data)?;
    let model = init_model(&cfg.train, &bench)?;
    fs::create_dir_all(out)?;
    let (model, history) = match trainer::train(&cfg.train, &bench, model) {
        Ok(v) => v,
        Err(Error::Divergence { epoch, reason, history }) => {
            write_json(out, "history.json", &history)?;
            return Err(Error::Divergence { epoch, reason, history });
        }
        Err(e) => return Err(e),
    };
    save_model(&model, out.join("model.json"))?;
    let files = vec!["model.json".to_string(), write_json(out, "history.json", &history)?];
    manifest.write(out, &files)?;
    let best = history.best().expect("at least one epoch");
    Ok(format!(
        "trained {} for {} epochs; kept epoch {} (val accuracy {:.2}, val entropy AUC {})",
        cfg.train.objective,
        history.epochs.len(),
        history.best_epoch,
        best.val_accuracy,
        best.val_auc_entropy
            .map_or_else(|| "n/a".to_string(), |a| format!("{a:.2}")),
    ))
}

pub struct EvalOverrides {
    pub scores: Vec<ScoreKind>,
    pub mc_passes: Option<usize>,
    pub mahalanobis: Option<bool>,
    pub seed: Option<u64>,
}

pub fn eval(
    model_path: &Path,
    data: &Path,
    config: Option<&Path>,
    overrides: &EvalOverrides,
    out: &Path,
) -> Result<String> {
    let mut cfg = load_config(config)?;
    let e = &mut cfg.eval;
    if let Some(n) = overrides.mc_passes {
        if n == 0 {
            return Err(Error::Config("--mc-passes must be >= 1".into()));
        }
        e.mc_passes = n;
    }
    if let Some(m) = overrides.mahalanobis {
        e.mahalanobis = m;
    }
    if let Some(s) = overrides.seed {
        e.mc_seed = s;
    }
    let mut manifest = ManifestBuilder::new("eval", &cfg)
        .seed("mc_seed", cfg.eval.mc_seed)
        .seed("corruption_seed", cfg.eval.corruption_seed);
    manifest.input(model_path);
    add_inputs(&mut manifest, config, data);

    let model = load_model(model_path)?;
    let bench = load_benchmark(data)?;
    let (mut report, mut dumps) = evaluate(&model, &bench, &cfg.eval)?;
    if !overrides.scores.is_empty() {
        let keep: BTreeSet<ScoreKind> = overrides
            .scores
            .iter()
            .copied()
            .chain([ScoreKind::Mahalanobis])
            .collect();
        report.auc.retain(|k, _| keep.contains(k));
        report.auc_deterministic.retain(|k, _| keep.contains(k));
        dumps.retain(|d| keep.contains(&d.kind));
    }
    if cfg.eval.corruption {
        let c = corruption_eval(&model, &bench.test_id, cfg.eval.corruption_seed)?;
        report.mce = Some(c.mce);
        report.corruption = Some(c);
    }
    report.manifest = Some(MANIFEST_FILE.into());
    write_artifacts(out, &model, &bench, &mut report, &dumps, &cfg.eval, &[])?;
    manifest.write(out, &report.artifacts)?;
    let aucs: Vec<String> = report
        .auc
        .iter()
        .map(|(k, v)| format!("{k} {v:.2}"))
        .collect();
    Ok(format!(
        "accuracy {:.2}; AUC ({}) {}",
        report.accuracy,
        report.auc_mode,
        aucs.join(", ")
    ))
}

pub fn corrupt_eval(
    model_path: &Path,
    data: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<String> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.eval.corruption_seed = s;
    }
    let mut manifest =
        ManifestBuilder::new("corrupt-eval", &cfg).seed("corruption_seed", cfg.eval.corruption_seed);
    manifest.input(model_path);
    add_inputs(&mut manifest, config, data);
    let model = load_model(model_path)?;
    let bench = load_benchmark(data)?;
    let report = corruption_eval(&model, &bench.test_id, cfg.eval.corruption_seed)?;
    fs::create_dir_all(out)?;
    let files = vec![write_json(out, "corruption.json", &report)?];
    manifest.write(out, &files)?;
    Ok(format!(
        "mCE {:.2} over {} cells; clean error {:.2}",
        report.mce,
        report.errors.num_cells(),
        report.clean_error
    ))
}

pub fn sweep(config: Option<&Path>, grid_path: &Path, data: &Path, out: &Path) -> Result<String> {
    let cfg = load_config(config)?;
    let grid = GridFile::load(grid_path)?.points();
    let mut manifest = train_seeds(ManifestBuilder::new("sweep", &cfg), &cfg);
    manifest.input(grid_path);
    add_inputs(&mut manifest, config, data);
    let bench = load_benchmark(data)?;
    let outcome = trainer::sweep(&cfg.train, &grid, &bench)?;
    fs::create_dir_all(out)?;
    let mut files = vec![write_json(out, "leaderboard.json", &outcome.leaderboard)?];
    save_model(&outcome.best_model, out.join("best_model.json"))?;
    files.push("best_model.json".into());
    let best = RunConfig {
        train: outcome.best_config,
        ..cfg
    };
    fs::write(out.join("best_config.toml"), best.to_toml_string()?)?;
    files.push("best_config.toml".into());
    manifest.write(out, &files)?;
    Ok(format!(
        "{} grid points; best is point {} ({} eligible)",
        outcome.leaderboard.len(),
        outcome.best_index,
        outcome.leaderboard.iter().filter(|r| r.eligible).count()
    ))
}
