//! Evaluation metrics and plot-data exports.

mod auc;
mod export;
mod mce;
mod report;

pub use auc::{accuracy, auc_roc, Orientation};
pub use export::{
    decision_grid, export_decision_grid, export_histograms, histogram_rows, write_score_dump,
    GridBounds, GridQuantity, HistogramRow, ScoreDump,
};
pub use mce::{mce, ErrorTable};
pub use report::{round2, CorruptionReport, EvalReport, ScoreKind};
