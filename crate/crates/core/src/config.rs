//! Versioned TOML run configuration and sweep grid files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::BenchmarkConfig;
use crate::error::{Error, Result};
use crate::trainer::{EvalConfig, GridPoint, TrainConfig};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Everything needed to reproduce a run: data geometry, training and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub data_seed: u64,
    pub data: BenchmarkConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            data_seed: 0,
            data: BenchmarkConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported config format_version {}",
                self.format_version
            )));
        }
        self.data.validate()?;
        self.train.validate()?;
        if self.eval.mc_passes == 0 || self.eval.grid_resolution < 2 || self.eval.histogram_bins == 0 {
            return Err(Error::Config(
                "eval needs mc_passes >= 1, grid_resolution >= 2 and histogram_bins >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A sweep grid: explicit `[[point]]` overrides, and/or `[axes]` whose
/// cartesian product is appended after them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridFile {
    pub point: Vec<GridPoint>,
    pub axes: Option<GridAxes>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridAxes {
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

fn axis(values: &[f64]) -> Vec<Option<f64>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().copied().map(Some).collect()
    }
}

impl GridFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = self.point.clone();
        if let Some(a) = &self.axes {
            for lambda in axis(&a.lambda) {
                for gamma in axis(&a.gamma) {
                    for lambda1 in axis(&a.lambda1) {
                        for lambda2 in axis(&a.lambda2) {
                            out.push(GridPoint {
                                lambda,
                                gamma,
                                lambda1,
                                lambda2,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}
