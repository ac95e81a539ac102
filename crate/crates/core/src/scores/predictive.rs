use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{softmax, ForwardMode, MlpModel};
use crate::seed::{derive_seed, stream};

/// `T` softmax passes over the same `N` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    passes: Vec<Matrix>,
}

impl PredictiveSamples {
    pub fn new(passes: Vec<Matrix>) -> Result<Self> {
        let first = passes
            .first()
            .ok_or_else(|| Error::invalid("at least one predictive pass is required"))?;
        let shape = first.shape();
        for (t, p) in passes.iter().enumerate() {
            if p.shape() != shape {
                return Err(Error::shape(format!("pass {t} has shape {:?}, expected {shape:?}", p.shape())));
            }
            for (r, row) in p.row_iter().enumerate() {
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-10 || row.iter().any(|&v| !(v >= 0.0)) {
                    return Err(Error::invalid(format!("pass {t} row {r} is not a probability vector")));
                }
            }
        }
        Ok(Self { passes })
    }

    /// A single eval-mode pass.
    pub fn deterministic(model: &MlpModel, inputs: &Matrix) -> Result<Self> {
        let logits = model.predict_logits(inputs)?;
        Ok(Self {
            passes: vec![softmax(&logits)?],
        })
    }

    pub fn passes(&self) -> &[Matrix] {
        &self.passes
    }

    pub fn num_passes(&self) -> usize {
        self.passes.len()
    }

    pub fn num_examples(&self) -> usize {
        self.passes[0].rows()
    }

    pub fn num_classes(&self) -> usize {
        self.passes[0].cols()
    }

    /// Average probability row per example.
    pub fn mean_probs(&self) -> Matrix {
        let (n, k) = self.passes[0].shape();
        let mut mean = Matrix::zeros(n, k);
        for p in &self.passes {
            for (m, v) in mean.as_mut_slice().iter_mut().zip(p.as_slice()) {
                *m += v;
            }
        }
        let t = self.passes.len() as f64;
        for m in mean.as_mut_slice() {
            *m /= t;
        }
        mean
    }
}

/// Runs `passes` stochastic forward passes. Pass `t` uses a seed derived from
/// `(seed, t)`, so results do not depend on how passes are scheduled.
pub fn mc_dropout_predict(model: &MlpModel, inputs: &Matrix, passes: usize, seed: u64) -> Result<PredictiveSamples> {
    if passes == 0 {
        return Err(Error::invalid("MC-Dropout needs at least one pass"));
    }
    let base = derive_seed(seed, stream::MC);
    let probs = (0..passes)
        .into_par_iter()
        .map(|t| {
            let mode = if model.dropout_rate() > 0.0 {
                ForwardMode::McDropout {
                    seed: derive_seed(base, t as u64),
                }
            } else {
                ForwardMode::Eval
            };
            let (logits, _) = model.forward(inputs, mode)?;
            softmax(&logits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PredictiveSamples { passes: probs })
}

/// Shannon entropy in nats with `0 · ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Maximum of the mean probability row.
pub fn confidence_score(samples: &PredictiveSamples) -> Vec<f64> {
    samples
        .mean_probs()
        .row_iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Entropy of the mean probability row.
pub fn entropy_score(samples: &PredictiveSamples) -> Vec<f64> {
    samples.mean_probs().row_iter().map(entropy).collect()
}

/// `H[p̄] − mean_t H[p_t]`. Values within rounding noise of zero (`≤ 1e-12`) are reported as exactly zero.
pub fn mutual_information_score(samples: &PredictiveSamples) -> Vec<f64> {
    let total = entropy_score(samples);
    let t = samples.num_passes() as f64;
    let mut expected = vec![0.0; total.len()];
    for p in samples.passes() {
        for (e, row) in expected.iter_mut().zip(p.row_iter()) {
            *e += entropy(row);
        }
    }
    total
        .iter()
        .zip(&expected)
        .map(|(h, e)| {
            let mi = h - e / t;
            if mi > 1e-12 {
                mi
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples(passes: &[&[&[f64]]]) -> PredictiveSamples {
        PredictiveSamples::new(passes.iter().map(|p| Matrix::from_rows(p).unwrap()).collect()).unwrap()
    }

    #[test]
    fn confidence_cases() {
        assert_eq!(confidence_score(&samples(&[&[&[1.0, 0.0, 0.0]]])), vec![1.0]);
        let u = 1.0 / 3.0;
        assert_eq!(confidence_score(&samples(&[&[&[u, u, u]]])), vec![u]);
        assert_eq!(confidence_score(&samples(&[&[&[1.0, 0.0]], &[&[0.0, 1.0]]])), vec![0.5]);
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy_score(&samples(&[&[&[0.0, 1.0, 0.0]]])), vec![0.0]);
        let u = 1.0 / 3.0;
        assert!((entropy_score(&samples(&[&[&[u, u, u]]]))[0] - 3f64.ln()).abs() < 1e-15);
        let h = entropy_score(&samples(&[&[&[0.5, 0.25, 0.25]]]))[0];
        assert!((h - 1.5 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_cases() {
        let same = samples(&[&[&[0.2, 0.8]], &[&[0.2, 0.8]]]);
        assert_eq!(mutual_information_score(&same), vec![0.0]);
        let split = samples(&[&[&[1.0, 0.0]], &[&[0.0, 1.0]]]);
        assert!((mutual_information_score(&split)[0] - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(mutual_information_score(&samples(&[&[&[0.3, 0.7]]])), vec![0.0]);
    }

    #[test]
    fn rejects_invalid_samples() {
        assert!(PredictiveSamples::new(vec![]).is_err());
        assert!(PredictiveSamples::new(vec![Matrix::from_rows(&[[0.5, 0.6]]).unwrap()]).is_err());
        assert!(PredictiveSamples::new(vec![Matrix::zeros(1, 2), Matrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn mc_passes_without_dropout_are_identical() {
        let m = MlpModel::init(&[2, 8, 3], 0.0, 1).unwrap();
        let x = Matrix::from_rows(&[[0.5, -0.5], [2.0, 1.0]]).unwrap();
        let s = mc_dropout_predict(&m, &x, 5, 9).unwrap();
        for p in s.passes() {
            assert_eq!(p, &s.passes()[0]);
        }
        let single = mc_dropout_predict(&m, &x, 1, 9).unwrap();
        assert_eq!(single, PredictiveSamples::deterministic(&m, &x).unwrap());
        assert!(mc_dropout_predict(&m, &x, 0, 9).is_err());
    }

    #[test]
    fn mc_passes_are_reproducible() {
        let m = MlpModel::init(&[2, 16, 3], 0.3, 1).unwrap();
        let x = Matrix::from_rows(&[[0.5, -0.5], [2.0, 1.0]]).unwrap();
        let a = mc_dropout_predict(&m, &x, 8, 4).unwrap();
        assert_eq!(a, mc_dropout_predict(&m, &x, 8, 4).unwrap());
        assert_ne!(a.passes()[0], a.passes()[1]);
    }

    fn prob_row(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("non-zero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn score_bounds(passes in prop::collection::vec(prob_row(4), 1..6)) {
            let mats = passes.iter().map(|r| Matrix::from_rows(std::slice::from_ref(r)).unwrap()).collect();
            let s = PredictiveSamples::new(mats).unwrap();
            let c = confidence_score(&s)[0];
            let h = entropy_score(&s)[0];
            let mi = mutual_information_score(&s)[0];
            prop_assert!((0.25 - 1e-12..=1.0 + 1e-12).contains(&c));
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= h + 1e-12);
            prop_assert!(h <= 4f64.ln() + 1e-12);
        }

        #[test]
        fn confidence_and_entropy_are_anti_monotone(q1 in 0.34f64..1.0, q2 in 0.34f64..1.0) {
            prop_assume!((q1 - q2).abs() > 1e-9);
            let row = |q: f64| vec![q, (1.0 - q) / 2.0, (1.0 - q) / 2.0];
            let s1 = PredictiveSamples::new(vec![Matrix::from_rows(&[row(q1)]).unwrap()]).unwrap();
            let s2 = PredictiveSamples::new(vec![Matrix::from_rows(&[row(q2)]).unwrap()]).unwrap();
            let dc = confidence_score(&s1)[0] - confidence_score(&s2)[0];
            let dh = entropy_score(&s1)[0] - entropy_score(&s2)[0];
            prop_assert!(dc * dh < 0.0);
        }
    }
}
