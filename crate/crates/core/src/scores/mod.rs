//! Uncertainty scores for OOD detection.
//!
//! Orientation: confidence and Mahalanobis grow towards ID data, entropy and
//! mutual information grow towards OOD data.

mod mahalanobis;
mod predictive;

pub use mahalanobis::{fit_mahalanobis, mahalanobis_score, MahalanobisDetector};
pub use predictive::{
    confidence_score, entropy, entropy_score, mc_dropout_predict, mutual_information_score,
    PredictiveSamples,
};
