use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::metrics::{ErrorTable, Orientation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Confidence,
    Entropy,
    MutualInformation,
    Mahalanobis,
}

impl ScoreKind {
    pub const PREDICTIVE: [ScoreKind; 3] = [
        ScoreKind::Confidence,
        ScoreKind::Entropy,
        ScoreKind::MutualInformation,
    ];

    pub fn orientation(self) -> Orientation {
        match self {
            ScoreKind::Confidence | ScoreKind::Mahalanobis => Orientation::HigherIsId,
            ScoreKind::Entropy | ScoreKind::MutualInformation => Orientation::HigherIsOod,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Confidence => "confidence",
            ScoreKind::Entropy => "entropy",
            ScoreKind::MutualInformation => "mutual_information",
            ScoreKind::Mahalanobis => "mahalanobis",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rounds a percentage to two decimals, the precision used in reports.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn ser_round2<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round2(*v))
}

fn ser_round2_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_some(&round2(*v)),
        None => s.serialize_none(),
    }
}

fn ser_round2_map<S: Serializer>(m: &BTreeMap<ScoreKind, f64>, s: S) -> Result<S::Ok, S::Error> {
    let rounded: BTreeMap<ScoreKind, f64> = m.iter().map(|(k, v)| (*k, round2(*v))).collect();
    rounded.serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionReport {
    /// Error percent per kind and severity.
    pub errors: ErrorTable,
    #[serde(serialize_with = "ser_round2")]
    pub clean_error: f64,
    #[serde(serialize_with = "ser_round2")]
    pub mce: f64,
}

/// Accuracy and AUC-ROC summary of one evaluated model. All values are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(serialize_with = "ser_round2")]
    pub accuracy: f64,
    /// Headline AUCs: MC-Dropout averages when `auc_mode` is `mc_dropout`.
    #[serde(serialize_with = "ser_round2_map")]
    pub auc: BTreeMap<ScoreKind, f64>,
    /// AUCs from a single eval-mode pass; mutual information is then zero everywhere.
    #[serde(serialize_with = "ser_round2_map")]
    pub auc_deterministic: BTreeMap<ScoreKind, f64>,
    pub auc_mode: String,
    pub mc_passes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "ser_round2_opt")]
    pub mce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionReport>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}
