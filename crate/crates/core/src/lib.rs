//! Out-of-distribution aware training for small classifiers.
//!
//! The crate trains a ReLU MLP with cosine-regularised cross-entropy, a cosine
//! margin ranking objective or the usual baselines, scores test inputs by
//! confidence, entropy, MC-Dropout mutual information or Mahalanobis distance,
//! and reports AUC-ROC, accuracy and mean corruption error on a synthetic
//! Gaussian-mixture benchmark.
//!
//! ```no_run
//! use oodkit::data::make_default_benchmark;
//! use oodkit::trainer::{run_experiment, EvalConfig, Objective, TrainConfig};
//!
//! let bench = make_default_benchmark(0)?;
//! let config = TrainConfig { objective: Objective::CeCosine, ..TrainConfig::default() };
//! let out = run_experiment(&config, &EvalConfig::default(), &bench, None)?;
//! println!("accuracy {:.2}%, AUCs {:?}", out.report.accuracy, out.report.auc);
//! # Ok::<(), oodkit::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
mod error;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod objectives;
pub mod scores;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
