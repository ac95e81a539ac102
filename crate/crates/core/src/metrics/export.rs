//! CSV exports for decision-boundary plots and score histograms.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{argmax, Matrix};
use crate::metrics::ScoreKind;
use crate::nn::{softmax, MlpModel};
use crate::scores::entropy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridBounds {
    /// Bounding box of `points` padded by `pad` times its extent on every side.
    pub fn from_points(points: &Matrix, pad: f64) -> Result<Self> {
        if points.cols() != 2 || points.rows() == 0 {
            return Err(Error::shape("grid bounds need non-empty 2-D points"));
        }
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in points.row_iter() {
            x_min = x_min.min(r[0]);
            x_max = x_max.max(r[0]);
            y_min = y_min.min(r[1]);
            y_max = y_max.max(r[1]);
        }
        let (px, py) = ((x_max - x_min) * pad, (y_max - y_min) * pad);
        Ok(Self {
            x_min: x_min - px,
            x_max: x_max + px,
            y_min: y_min - py,
            y_max: y_max + py,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridQuantity {
    PredictedClass,
    Confidence,
    Entropy,
}

/// Evaluates `quantity` on a `resolution × resolution` grid, rows ordered by
/// `x1` then `x0`. Returns `(x0, x1, value)` triples.
pub fn decision_grid(
    model: &MlpModel,
    bounds: GridBounds,
    resolution: usize,
    quantity: GridQuantity,
) -> Result<Vec<[f64; 3]>> {
    if model.input_dim() != 2 {
        return Err(Error::shape(format!(
            "decision grids need a 2-D input model, got {} inputs",
            model.input_dim()
        )));
    }
    if resolution < 2 {
        return Err(Error::invalid("grid resolution must be >= 2"));
    }
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    let mut points = Vec::with_capacity(resolution * resolution * 2);
    for j in 0..resolution {
        let y = step(bounds.y_min, bounds.y_max, j);
        for i in 0..resolution {
            points.push(step(bounds.x_min, bounds.x_max, i));
            points.push(y);
        }
    }
    let inputs = Matrix::from_vec(resolution * resolution, 2, points)?;
    let probs = softmax(&model.predict_logits(&inputs)?)?;
    Ok(inputs
        .row_iter()
        .zip(probs.row_iter())
        .map(|(x, p)| {
            let value = match quantity {
                GridQuantity::PredictedClass => argmax(p) as f64,
                GridQuantity::Confidence => p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                GridQuantity::Entropy => entropy(p),
            };
            [x[0], x[1], value]
        })
        .collect())
}

/// Writes a decision grid as CSV with header `x0,x1,value`.
pub fn export_decision_grid(
    model: &MlpModel,
    bounds: GridBounds,
    resolution: usize,
    quantity: GridQuantity,
    path: impl AsRef<Path>,
) -> Result<()> {
    let grid = decision_grid(model, bounds, resolution, quantity)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x0,x1,value")?;
    for [x, y, v] in grid {
        writeln!(w, "{x},{y},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Per-example scores of one kind for both populations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDump {
    pub kind: ScoreKind,
    pub id: Vec<f64>,
    pub ood: Vec<f64>,
}

/// Writes `example_id,score,is_ood`; ID rows come first.
pub fn write_score_dump(dump: &ScoreDump, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "example_id,score,is_ood")?;
    let rows = dump
        .id
        .iter()
        .map(|s| (s, 0))
        .chain(dump.ood.iter().map(|s| (s, 1)));
    for (i, (s, ood)) in rows.enumerate() {
        writeln!(w, "{i},{s},{ood}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub kind: ScoreKind,
    pub population: &'static str,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Bins both populations of every dump over a shared range per score kind.
/// The last bin is closed on the right.
pub fn histogram_rows(dumps: &[ScoreDump], bins: usize) -> Result<Vec<HistogramRow>> {
    if bins == 0 {
        return Err(Error::invalid("histograms need at least one bin"));
    }
    let mut rows = Vec::new();
    for dump in dumps {
        let all = dump.id.iter().chain(&dump.ood);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        for (population, values) in [("id", &dump.id), ("ood", &dump.ood)] {
            let mut counts = vec![0usize; bins];
            for &v in values {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
            for (b, count) in counts.into_iter().enumerate() {
                rows.push(HistogramRow {
                    kind: dump.kind,
                    population,
                    bin_lo: lo + width * b as f64,
                    bin_hi: if b + 1 == bins { hi } else { lo + width * (b + 1) as f64 },
                    count,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes histogram CSV with header `score_kind,population,bin_lo,bin_hi,count`.
pub fn export_histograms(dumps: &[ScoreDump], bins: usize, path: impl AsRef<Path>) -> Result<()> {
    let rows = histogram_rows(dumps, bins)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "score_kind,population,bin_lo,bin_hi,count")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.kind, r.population, r.bin_lo, r.bin_hi, r.count)?;
    }
    w.flush()?;
    Ok(())
}
