use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error percentages indexed by corruption kind, then severity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorTable {
    pub cells: BTreeMap<String, BTreeMap<u8, f64>>,
}

impl ErrorTable {
    pub fn insert(&mut self, kind: impl Into<String>, severity: u8, error_percent: f64) {
        self.cells.entry(kind.into()).or_default().insert(severity, error_percent);
    }

    pub fn num_cells(&self) -> usize {
        self.cells.values().map(BTreeMap::len).sum()
    }

    pub fn scaled(&self, factor: f64) -> ErrorTable {
        ErrorTable {
            cells: self
                .cells
                .iter()
                .map(|(k, row)| (k.clone(), row.iter().map(|(&s, &v)| (s, v * factor)).collect()))
                .collect(),
        }
    }
}

/// Unnormalised mean corruption error: the sum over corruption kinds of the
/// error averaged over `severities`.
pub fn mce(table: &ErrorTable, severities: &[u8]) -> Result<f64> {
    if table.cells.is_empty() || severities.is_empty() {
        return Err(Error::invalid("mCE needs at least one kind and one severity"));
    }
    let mut total = 0.0;
    for (kind, row) in &table.cells {
        let mut sum = 0.0;
        for s in severities {
            sum += row
                .get(s)
                .ok_or_else(|| Error::invalid(format!("missing cell {kind} / severity {s}")))?;
        }
        total += sum / severities.len() as f64;
    }
    Ok(total)
}
