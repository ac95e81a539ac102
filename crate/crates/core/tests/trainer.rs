use oodkit::data::{make_benchmark, make_default_benchmark, BenchmarkConfig};
use oodkit::trainer::{
    init_model, select_best, sweep, train, validation_metrics, GridPoint, Objective, TrainConfig, ACCURACY_GUARD,
};
use oodkit::Error;

fn quick(objective: Objective, epochs: usize) -> TrainConfig {
    TrainConfig { objective, epochs, ..TrainConfig::default() }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn training_is_deterministic() {
    let bench = make_default_benchmark(3).unwrap();
    let cfg = quick(Objective::CosineMargin, 8);
    let (a, ha) = train(&cfg, &bench, init_model(&cfg, &bench).unwrap()).unwrap();
    let (b, hb) = train(&cfg, &bench, init_model(&cfg, &bench).unwrap()).unwrap();
    assert_eq!(bits(&a.flatten_params()), bits(&b.flatten_params()));
    assert_eq!(ha, hb);
}

#[test]
fn zero_learning_rate_leaves_parameters_alone() {
    let bench = make_default_benchmark(0).unwrap();
    let cfg = TrainConfig { lr: 0.0, dropout_rate: 0.0, ..quick(Objective::CeCosine, 4) };
    let init = init_model(&cfg, &bench).unwrap();
    let (model, history) = train(&cfg, &bench, init.clone()).unwrap();
    assert_eq!(bits(&model.flatten_params()), bits(&init.flatten_params()));
    let first = &history.epochs[0];
    for e in &history.epochs {
        assert_eq!(e.val_accuracy, first.val_accuracy);
        assert_eq!(e.val_auc_entropy, first.val_auc_entropy);
    }

    let cfg = TrainConfig { objective: Objective::Ce, ..cfg };
    let (_, history) = train(&cfg, &bench, init.clone()).unwrap();
    let first = history.epochs[0].train_loss;
    assert!(history.epochs.iter().all(|e| (e.train_loss - first).abs() < 1e-12));
}

#[test]
fn rollback_restores_the_best_validation_epoch() {
    let bench = make_default_benchmark(1).unwrap();
    let cfg = quick(Objective::CosineMargin, 30);
    let (model, history) = train(&cfg, &bench, init_model(&cfg, &bench).unwrap()).unwrap();
    assert!(history.best_epoch >= 1 && history.best_epoch <= cfg.epochs);
    assert_eq!(history.rollback_applied, history.best_epoch != cfg.epochs);

    let best = history.best().unwrap();
    let (acc, auc) = validation_metrics(&model, &bench.val, bench.train_ood.as_ref()).unwrap();
    assert_eq!(acc, best.val_accuracy);
    assert_eq!(auc, best.val_auc_entropy);

    let top_acc = history.epochs.iter().map(|e| e.val_accuracy).fold(0.0, f64::max);
    for e in history.epochs.iter().filter(|e| e.val_accuracy >= top_acc - ACCURACY_GUARD) {
        assert!(e.val_auc_entropy.unwrap() <= auc.unwrap());
    }
}

#[test]
fn without_rollback_the_last_epoch_is_kept() {
    let bench = make_default_benchmark(1).unwrap();
    let cfg = TrainConfig { rollback: false, ..quick(Objective::Ce, 5) };
    let (_, history) = train(&cfg, &bench, init_model(&cfg, &bench).unwrap()).unwrap();
    assert_eq!(history.best_epoch, 5);
    assert!(!history.rollback_applied);
}

#[test]
fn selection_rule_applies_the_accuracy_guard() {
    assert_eq!(select_best(&[]), None);
    let m = [(100.0, Some(60.0)), (99.5, Some(90.0)), (98.0, Some(99.0)), (99.5, Some(90.0))];
    assert_eq!(select_best(&m), Some(1));
    let m = [(97.0, None), (98.0, None), (98.0, None)];
    assert_eq!(select_best(&m), Some(1));
}

#[test]
fn ce_loss_falls_over_twenty_epochs() {
    let bench = make_default_benchmark(0).unwrap();
    let cfg = TrainConfig { rollback: false, ..quick(Objective::Ce, 20) };
    let (_, history) = train(&cfg, &bench, init_model(&cfg, &bench).unwrap()).unwrap();
    assert!(history.epochs[19].train_loss < history.epochs[0].train_loss);
}

#[test]
fn ood_objectives_require_an_ood_stream() {
    let mut bench = make_default_benchmark(0).unwrap();
    bench.train_ood = None;
    for objective in [Objective::CeCosine, Objective::CosineMargin, Objective::OutlierExposure] {
        let cfg = quick(objective, 1);
        let err = train(&cfg, &bench, init_model(&cfg, &bench).unwrap()).unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)), "{err}");
        assert!(err.to_string().contains("train_ood"), "{err}");
    }
    let cfg = quick(Objective::Ce, 1);
    assert!(train(&cfg, &bench, init_model(&cfg, &bench).unwrap()).is_ok());
}

#[test]
fn divergence_carries_the_history() {
    let bench = make_default_benchmark(0).unwrap();
    let cfg = TrainConfig { lr: 1e6, momentum: 0.0, ..quick(Objective::OutlierExposure, 50) };
    match train(&cfg, &bench, init_model(&cfg, &bench).unwrap()) {
        Err(Error::Divergence { epoch, history, .. }) => {
            assert!(epoch >= 1);
            assert_eq!(history.epochs.len(), epoch - 1);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn sub_seeds_are_isolated() {
    let a = make_default_benchmark(0).unwrap();
    let b = make_default_benchmark(1).unwrap();
    assert_ne!(a.train.features, b.train.features);
    let cfg = quick(Objective::CeCosine, 3);
    assert_eq!(init_model(&cfg, &a).unwrap(), init_model(&cfg, &b).unwrap());

    let other_dropout = TrainConfig { dropout_seed: Some(12345), ..cfg.clone() };
    let other_shuffle = TrainConfig { shuffle_seed: Some(12345), ..cfg.clone() };
    let other_init = TrainConfig { init_seed: Some(12345), ..cfg.clone() };
    assert_eq!(init_model(&other_dropout, &a).unwrap(), init_model(&cfg, &a).unwrap());
    assert_eq!(init_model(&other_shuffle, &a).unwrap(), init_model(&cfg, &a).unwrap());
    assert_ne!(init_model(&other_init, &a).unwrap(), init_model(&cfg, &a).unwrap());

    let run = |c: &TrainConfig| train(c, &a, init_model(c, &a).unwrap()).unwrap().0;
    let base = run(&cfg);
    assert_ne!(run(&other_dropout), base);
    assert_ne!(run(&other_shuffle), base);
    assert_eq!(run(&cfg.clone()), base);
}

#[test]
fn odd_sized_ood_stream_trains() {
    let data = BenchmarkConfig { points_per_ood_component: 101, ..BenchmarkConfig::default() };
    let bench = make_benchmark(&data, 4).unwrap();
    assert_ne!(bench.train_ood.as_ref().unwrap().len() % 64, 0);
    let cfg = quick(Objective::OutlierExposure, 3);
    assert!(train(&cfg, &bench, init_model(&cfg, &bench).unwrap()).is_ok());
}

#[test]
fn singleton_sweep_returns_its_point() {
    let bench = make_default_benchmark(0).unwrap();
    let base = quick(Objective::CeCosine, 3);
    let point = GridPoint { lambda: Some(0.5), ..GridPoint::default() };
    let out = sweep(&base, &[point], &bench).unwrap();
    assert_eq!(out.best_index, 0);
    assert_eq!(out.best_config.params.lambda, 0.5);
    assert_eq!(out.leaderboard.len(), 1);
}

#[test]
fn sweep_leaderboard_is_sorted_and_replayable() {
    let bench = make_default_benchmark(2).unwrap();
    let base = quick(Objective::CosineMargin, 10);
    let grid: Vec<GridPoint> = [-0.4, -0.5, -0.6]
        .iter()
        .map(|&g| GridPoint { gamma: Some(g), ..GridPoint::default() })
        .collect();
    let out = sweep(&base, &grid, &bench).unwrap();
    assert_eq!(out.leaderboard.len(), 3);
    let again = sweep(&base, &grid, &bench).unwrap();
    assert_eq!(out.leaderboard, again.leaderboard);

    let metrics: Vec<(f64, Option<f64>)> = (0..grid.len())
        .map(|i| {
            let row = out.leaderboard.iter().find(|r| r.index == i).unwrap();
            (row.val_accuracy.unwrap(), row.val_auc_entropy)
        })
        .collect();
    assert_eq!(select_best(&metrics), Some(out.best_index));
    assert_eq!(out.leaderboard[0].index, out.best_index);
    for pair in out.leaderboard.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(a.eligible >= b.eligible);
        if a.eligible == b.eligible {
            assert!(a.val_auc_entropy >= b.val_auc_entropy);
        }
    }

    let replay_cfg = out.best_config.clone();
    let (replay, _) = train(&replay_cfg, &bench, init_model(&replay_cfg, &bench).unwrap()).unwrap();
    assert_eq!(bits(&replay.flatten_params()), bits(&out.best_model.flatten_params()));
    let (acc, auc) = validation_metrics(&replay, &bench.val, bench.train_ood.as_ref()).unwrap();
    assert_eq!(Some(acc), out.leaderboard[0].val_accuracy);
    assert_eq!(auc, out.leaderboard[0].val_auc_entropy);
}

#[test]
fn empty_sweep_is_a_config_error() {
    let bench = make_default_benchmark(0).unwrap();
    assert!(matches!(sweep(&TrainConfig::default(), &[], &bench), Err(Error::Config(_))));
}
