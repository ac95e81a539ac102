//! Training loop, hyperparameter sweeps and the end-to-end experiment pipeline.

mod experiment;
mod settings;
mod sweep;
mod train;

pub use experiment::{
    corruption_eval, evaluate, init_model, run_experiment, write_artifacts, EvalConfig,
    ExperimentOutput, SEVERITIES,
};
pub use settings::{compute_loss, Objective, TrainConfig};
pub use sweep::{sweep, GridPoint, LeaderboardRow, SweepOutcome};
pub use train::{select_best, train, validation_metrics, EpochRecord, TrainHistory, ACCURACY_GUARD};
