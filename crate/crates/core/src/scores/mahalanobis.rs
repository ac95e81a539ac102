use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Class-conditional Gaussians with one tied covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisDetector {
    class_means: Vec<Vec<f64>>,
    covariance: Matrix,
    precision: Matrix,
    shrinkage: f64,
}

impl MahalanobisDetector {
    /// Builds a detector from explicit means and a precision matrix.
    pub fn from_parts(class_means: Vec<Vec<f64>>, precision: Matrix) -> Result<Self> {
        let d = precision.rows();
        if class_means.is_empty() {
            return Err(Error::invalid("detector needs at least one class"));
        }
        if precision.cols() != d || class_means.iter().any(|m| m.len() != d) {
            return Err(Error::shape("means and precision must share the feature dimension"));
        }
        for i in 0..d {
            for j in 0..i {
                if (precision.get(i, j) - precision.get(j, i)).abs() > 1e-9 {
                    return Err(Error::invalid("precision matrix is not symmetric"));
                }
            }
        }
        let covariance = invert_spd(&precision)?;
        Ok(Self {
            class_means,
            covariance,
            precision,
            shrinkage: 0.0,
        })
    }

    pub fn class_means(&self) -> &[Vec<f64>] {
        &self.class_means
    }

    /// Pooled covariance before shrinkage.
    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn feature_dim(&self) -> usize {
        self.precision.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.class_means.len()
    }
}

fn to_dmatrix(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            // symmetrise away round-off from the triangular solves
            out.set(i, j, 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

fn invert_spd(m: &Matrix) -> Result<Matrix> {
    let chol = to_dmatrix(m)
        .cholesky()
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    let inv = chol.inverse();
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("inverse is not finite".into()));
    }
    Ok(from_dmatrix(&inv))
}

/// Fits per-class means and a pooled covariance `Σ̂`, then stores the
/// precision `(Σ̂ + εI)⁻¹`.
///
/// `shrinkage = None` uses `ε = 1e-6 · trace(Σ̂) / d`. With `Some(0.0)` a
/// singular covariance is an error.
pub fn fit_mahalanobis(features: &Matrix, labels: &[usize], shrinkage: Option<f64>) -> Result<MahalanobisDetector> {
    if labels.len() != features.rows() {
        return Err(Error::shape(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.rows()
        )));
    }
    let d = features.cols();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    if k == 0 || d == 0 {
        return Err(Error::invalid("no features to fit"));
    }
    let mut counts = vec![0usize; k];
    let mut means = vec![vec![0.0; d]; k];
    for (row, &y) in features.row_iter().zip(labels) {
        counts[y] += 1;
        for (m, v) in means[y].iter_mut().zip(row) {
            *m += v;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::invalid(format!("class {c} has fewer than 2 samples")));
    }
    for (m, &n) in means.iter_mut().zip(&counts) {
        for v in m.iter_mut() {
            *v /= n as f64;
        }
    }

    let mut cov = Matrix::zeros(d, d);
    let mut centred = vec![0.0; d];
    for (row, &y) in features.row_iter().zip(labels) {
        for ((c, v), m) in centred.iter_mut().zip(row).zip(&means[y]) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centred[i];
            let dst = cov.row_mut(i);
            for j in 0..d {
                dst[j] += ci * centred[j];
            }
        }
    }
    let n = features.rows() as f64;
    for v in cov.as_mut_slice() {
        *v /= n;
    }

    let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    let eps = match shrinkage {
        Some(e) if e < 0.0 || !e.is_finite() => {
            return Err(Error::invalid(format!("shrinkage {e} must be >= 0")))
        }
        Some(e) => e,
        None => 1e-6 * trace / d as f64,
    };
    let mut regularised = cov.clone();
    for i in 0..d {
        regularised.set(i, i, regularised.get(i, i) + eps);
    }
    let precision = invert_spd(&regularised).map_err(|_| {
        Error::Singular(format!(
            "pooled covariance with shrinkage {eps} is singular; use a positive shrinkage"
        ))
    })?;
    Ok(MahalanobisDetector {
        class_means: means,
        covariance: cov,
        precision,
        shrinkage: eps,
    })
}

/// `max_c −(x − μ_c)ᵀ Σ̂⁻¹ (x − μ_c)` per row; zero at a class mean, negative elsewhere.
pub fn mahalanobis_score(detector: &MahalanobisDetector, rows: &Matrix) -> Result<Vec<f64>> {
    let d = detector.feature_dim();
    if rows.cols() != d {
        return Err(Error::shape(format!(
            "features have {} columns, detector expects {d}",
            rows.cols()
        )));
    }
    let p = &detector.precision;
    let mut diff = vec![0.0; d];
    Ok(rows
        .row_iter()
        .map(|x| {
            detector
                .class_means
                .iter()
                .map(|mu| {
                    for ((o, a), b) in diff.iter_mut().zip(x).zip(mu) {
                        *o = a - b;
                    }
                    let q: f64 = (0..d)
                        .map(|i| diff[i] * p.row(i).iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>())
                        .sum();
                    -q
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}
