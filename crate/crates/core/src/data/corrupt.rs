use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    UniformNoise,
    Translate,
    Scale,
    Rotate,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 5] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::UniformNoise,
        CorruptionKind::Translate,
        CorruptionKind::Scale,
        CorruptionKind::Rotate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::UniformNoise => "uniform_noise",
            CorruptionKind::Translate => "translate",
            CorruptionKind::Scale => "scale",
            CorruptionKind::Rotate => "rotate",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unsupported corruption kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8) -> Result<Self> {
        if !(1..=5).contains(&severity) {
            return Err(Error::invalid(format!("severity {severity} not in 1..=5")));
        }
        Ok(Self { kind, severity })
    }
}

/// Applies a 2-D corruption. Rows, dimension and labels are preserved.
///
/// | kind | effect at severity `s` |
/// |---|---|
/// | gaussian_noise | `+ N(0, (0.1 s)²)` per coordinate |
/// | uniform_noise | `+ U(−0.15 s, 0.15 s)` per coordinate |
/// | translate | shift by `0.2 s` along one seed-chosen direction |
/// | scale | multiply by `1 + 0.1 s` |
/// | rotate | rotate about the origin by `5° · s` |
pub fn corrupt(split: &DatasetSplit, spec: CorruptionSpec, seed: u64) -> Result<DatasetSplit> {
    let spec = CorruptionSpec::new(spec.kind, spec.severity)?;
    if split.dim() != 2 {
        return Err(Error::shape(format!(
            "corruptions are defined for 2-D data, got {} columns",
            split.dim()
        )));
    }
    let s = spec.severity as f64;
    let mut rng = seed::rng(seed);
    let mut out = split.clone();
    let data = out.features.as_mut_slice();
    match spec.kind {
        CorruptionKind::GaussianNoise => {
            let normal = Normal::new(0.0, 0.1 * s).expect("positive std");
            for v in data.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        CorruptionKind::UniformNoise => {
            let half = 0.15 * s;
            for v in data.iter_mut() {
                *v += rng.random_range(-half..half);
            }
        }
        CorruptionKind::Translate => {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let (dx, dy) = (0.2 * s * angle.cos(), 0.2 * s * angle.sin());
            for p in data.chunks_exact_mut(2) {
                p[0] += dx;
                p[1] += dy;
            }
        }
        CorruptionKind::Scale => {
            let factor = 1.0 + 0.1 * s;
            for v in data.iter_mut() {
                *v *= factor;
            }
        }
        CorruptionKind::Rotate => {
            let (sin, cos) = (5.0 * s).to_radians().sin_cos();
            for p in data.chunks_exact_mut(2) {
                let (x, y) = (p[0], p[1]);
                p[0] = cos * x - sin * y;
                p[1] = sin * x + cos * y;
            }
        }
    }
    Ok(out)
}
