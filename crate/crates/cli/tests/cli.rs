use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FAST: &str = "[train]\nepochs = 15\n[eval]\nmc_passes = 5\ngrid_resolution = 10\n";

fn oodkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oodkit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OODKIT_OUT")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = oodkit(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        let ws = Self { dir };
        ok(&["gen-data", "--config", "run.toml", "--out", "data"], ws.path());
        ws
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn bytes(&self, rel: &str) -> Vec<u8> {
        fs::read(self.path().join(rel)).unwrap()
    }
}

#[test]
fn gen_data_writes_five_reproducible_splits() {
    let ws = Workspace::new(FAST);
    let p = ws.path();
    ok(&["gen-data", "--config", "run.toml", "--out", "again"], p);
    ok(&["gen-data", "--config", "run.toml", "--out", "other", "--seed", "9"], p);
    for (file, rows) in [
        ("train.csv", 1050),
        ("val.csv", 225),
        ("test_id.csv", 225),
        ("test_ood.csv", 1000),
        ("train_ood.csv", 1000),
    ] {
        let a = ws.bytes(&format!("data/{file}"));
        assert_eq!(a, ws.bytes(&format!("again/{file}")), "{file}");
        let b = ws.bytes(&format!("other/{file}"));
        assert_ne!(a, b, "{file}");
        let (ta, tb) = (String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
        assert_eq!(ta.lines().next(), Some("x0,x1,label"));
        assert_eq!(ta.lines().next(), tb.lines().next());
        assert_eq!(ta.lines().count(), rows + 1, "{file}");
    }
    let manifest = json(p.join("data/manifest.json"));
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 5);
    assert_eq!(manifest["seeds"]["data_seed"], 0);
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn train_and_eval_are_byte_identical_on_rerun() {
    let ws = Workspace::new(FAST);
    let p = ws.path();
    for run in ["a", "b"] {
        ok(&["train", "--config", "run.toml", "--data", "data", "--out", &format!("{run}/train")], p);
        ok(
            &[
                "eval",
                "--config",
                "run.toml",
                "--model",
                &format!("{run}/train/model.json"),
                "--data",
                "data",
                "--out",
                &format!("{run}/eval"),
            ],
            p,
        );
    }
    for file in ["train/model.json", "train/history.json", "eval/results.json", "eval/scores_entropy.csv", "eval/grid_confidence.csv"] {
        assert_eq!(ws.bytes(&format!("a/{file}")), ws.bytes(&format!("b/{file}")), "{file}");
    }
    let results = json(p.join("a/eval/results.json"));
    for kind in ["confidence", "entropy", "mutual_information", "mahalanobis"] {
        assert!(results["auc"][kind].is_number(), "{kind}");
    }
    assert_eq!(results["auc_mode"], "mc_dropout");
    assert_eq!(results["manifest"], "manifest.json");

    let manifest = json(p.join("a/eval/manifest.json"));
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert_eq!(listed, results["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect::<Vec<_>>());
    assert!(manifest["inputs"].as_array().unwrap().len() >= 6);
}

#[test]
fn eval_flags_filter_scores() {
    let ws = Workspace::new(FAST);
    let p = ws.path();
    ok(&["train", "--config", "run.toml", "--data", "data", "--out", "train"], p);
    ok(
        &[
            "eval", "--model", "train/model.json", "--data", "data", "--out", "eval", "--scores", "confidence,entropy",
            "--mahalanobis", "false", "--mc-passes", "1",
        ],
        p,
    );
    let results = json(p.join("eval/results.json"));
    let keys: Vec<&String> = results["auc"].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["confidence", "entropy"]);
    assert_eq!(results["auc_mode"], "deterministic");
    assert!(!p.join("eval/scores_mahalanobis.csv").exists());
}

#[test]
fn corrupt_eval_reports_every_cell() {
    let ws = Workspace::new(FAST);
    let p = ws.path();
    ok(&["train", "--config", "run.toml", "--data", "data", "--out", "train"], p);
    let stdout = ok(&["corrupt-eval", "--model", "train/model.json", "--data", "data", "--out", "c"], p);
    assert!(stdout.contains("25 cells"));
    let report = json(p.join("c/corruption.json"));
    let errors = report["errors"].as_object().unwrap();
    assert_eq!(errors.len(), 5);
    assert!(errors.values().all(|row| row.as_object().unwrap().len() == 5));
    assert!(report["mce"].is_number() && report["clean_error"].is_number());
}

#[test]
fn sweep_writes_one_row_per_point() {
    let ws = Workspace::new(FAST);
    let p = ws.path();
    fs::write(p.join("grid.toml"), "[[point]]\nlambda = 0.0\n[[point]]\nlambda = 1.0\n").unwrap();
    for out in ["s1", "s2"] {
        ok(&["sweep", "--config", "run.toml", "--grid", "grid.toml", "--data", "data", "--out", out], p);
    }
    let rows = json(p.join("s1/leaderboard.json"));
    assert_eq!(rows.as_array().unwrap().len(), 2);
    for file in ["leaderboard.json", "best_model.json", "best_config.toml"] {
        assert_eq!(ws.bytes(&format!("s1/{file}")), ws.bytes(&format!("s2/{file}")), "{file}");
    }

    let best = rows[0]["index"].as_u64().unwrap();
    let lambda = [0.0, 1.0][best as usize];
    let replay = fs::read_to_string(p.join("s1/best_config.toml")).unwrap();
    assert!(replay.contains(&format!("lambda = {lambda:?}")));
    fs::write(p.join("empty.toml"), "").unwrap();
    let out = oodkit(&["sweep", "--config", "run.toml", "--grid", "empty.toml", "--data", "data", "--out", "s3"], p);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_ood_split_is_a_data_error() {
    let ws = Workspace::new("[train]\nobjective = \"cosine_margin\"\nepochs = 2\n");
    let p = ws.path();
    fs::remove_file(p.join("data/train_ood.csv")).unwrap();
    let out = oodkit(&["train", "--config", "run.toml", "--data", "data", "--out", "t"], p);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("train_ood"), "{stderr}");
}

#[test]
fn exit_codes_separate_error_classes() {
    let ws = Workspace::new(FAST);
    let p = ws.path();
    fs::write(p.join("bad.toml"), "[train]\nepochz = 3\n").unwrap();
    let out = oodkit(&["train", "--config", "bad.toml", "--data", "data", "--out", "t"], p);
    assert_eq!(out.status.code(), Some(2));

    let out = oodkit(&["train", "--data", "nowhere", "--out", "t"], p);
    assert_eq!(out.status.code(), Some(3));

    fs::write(p.join("hot.toml"), "[train]\nobjective = \"ce\"\nepochs = 5\nlr = 1e6\n").unwrap();
    let out = oodkit(&["train", "--config", "hot.toml", "--data", "data", "--out", "hot"], p);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
    assert!(p.join("hot/history.json").exists());
}

#[test]
fn output_root_comes_from_the_environment() {
    let ws = Workspace::new(FAST);
    let root = ws.path().join("root");
    let out = Command::new(env!("CARGO_BIN_EXE_oodkit"))
        .args(["gen-data", "--seed", "2"])
        .current_dir(ws.path())
        .env("OODKIT_OUT", &root)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(root.join("gen-data/train.csv").is_file());
}
