mod common;

use common::*;
use oodkit::nn::MlpModel;
use oodkit::objectives::ntxent_loss;
use oodkit::scores::{
    confidence_score, entropy_score, fit_mahalanobis, mahalanobis_score, mc_dropout_predict, mutual_information_score,
    PredictiveSamples,
};
use oodkit::Matrix;
use rand::Rng;

fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..d).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..d {
            if r != col {
                let f = m[r][col];
                let src = m[col].clone();
                for (v, s) in m[r].iter_mut().zip(src) {
                    *v -= f * s;
                }
            }
        }
    }
    m.into_iter().map(|r| r[d..].to_vec()).collect()
}

#[test]
fn mahalanobis_matches_brute_force_with_tied_covariance() {
    let mut rng = rng(21);
    for _ in 0..20 {
        let d = rng.random_range(1..6);
        let k = rng.random_range(2..4);
        let n = 40;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let det = fit_mahalanobis(&matrix(&x), &labels, None).unwrap();

        let means: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let members: Vec<&Vec<f64>> = x.iter().zip(&labels).filter(|(_, &y)| y == c).map(|(r, _)| r).collect();
                (0..d)
                    .map(|j| members.iter().map(|r| r[j]).sum::<f64>() / members.len() as f64)
                    .collect()
            })
            .collect();
        let mut cov = vec![vec![0.0; d]; d];
        for (row, &y) in x.iter().zip(&labels) {
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] += (row[i] - means[y][i]) * (row[j] - means[y][j]) / n as f64;
                }
            }
        }
        let eps = 1e-6 * (0..d).map(|i| cov[i][i]).sum::<f64>() / d as f64;
        assert!((det.shrinkage() - eps).abs() <= 1e-15 * eps.max(1.0));
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] += eps;
        }
        let prec = gauss_jordan_inverse(&cov);

        let queries: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let got = mahalanobis_score(&det, &matrix(&queries)).unwrap();
        for (q, g) in queries.iter().zip(got) {
            let want = means
                .iter()
                .map(|mu| {
                    let diff: Vec<f64> = q.iter().zip(mu).map(|(a, b)| a - b).collect();
                    -(0..d)
                        .map(|i| (0..d).map(|j| diff[i] * prec[i][j] * diff[j]).sum::<f64>())
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((g - want).abs() <= 1e-8 * want.abs().max(1.0), "{g} vs {want}");
        }
    }
}

#[test]
fn singular_covariance_without_shrinkage_is_an_error() {
    let x = matrix(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]]);
    assert!(fit_mahalanobis(&x, &[0, 0, 1, 1], Some(0.0)).is_err());
    assert!(fit_mahalanobis(&x, &[0, 0, 1, 1], None).is_ok());
}

fn h(p: &[f64]) -> f64 {
    -p.iter().map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum::<f64>()
}

#[test]
fn predictive_scores_match_direct_formulas() {
    let mut rng = rng(22);
    for _ in 0..50 {
        let t = rng.random_range(1..8);
        let n = rng.random_range(1..6);
        let k = rng.random_range(2..5);
        let passes: Vec<Vec<Vec<f64>>> = (0..t)
            .map(|_| random_block(&mut rng, n, k, 3.0).iter().map(|z| softmax(z)).collect())
            .collect();
        let samples = PredictiveSamples::new(passes.iter().map(|p| matrix(p)).collect()).unwrap();
        let conf = confidence_score(&samples);
        let ent = entropy_score(&samples);
        let mi = mutual_information_score(&samples);
        for i in 0..n {
            let mean: Vec<f64> = (0..k)
                .map(|c| passes.iter().map(|p| p[i][c]).sum::<f64>() / t as f64)
                .collect();
            let expected_h = passes.iter().map(|p| h(&p[i])).sum::<f64>() / t as f64;
            assert!((conf[i] - mean.iter().cloned().fold(0.0, f64::max)).abs() < 1e-12);
            assert!((ent[i] - h(&mean)).abs() < 1e-12);
            assert!((mi[i] - (h(&mean) - expected_h).max(0.0)).abs() < 1e-12);
            assert!(mi[i] >= 0.0 && mi[i] <= (k as f64).ln() + 1e-12);
        }
    }
}

#[test]
fn mc_dropout_is_reproducible_and_degenerates_without_dropout() {
    let model = MlpModel::init(&[2, 32, 32, 3], 0.3, 5).unwrap();
    let x = matrix(&random_block(&mut rng(23), 20, 2, 4.0));
    let a = mc_dropout_predict(&model, &x, 10, 77).unwrap();
    let b = mc_dropout_predict(&model, &x, 10, 77).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.passes()[0], a.passes()[1]);
    assert!(mutual_information_score(&a).iter().any(|&v| v > 0.0));

    let plain = MlpModel::init(&[2, 32, 32, 3], 0.0, 5).unwrap();
    let s = mc_dropout_predict(&plain, &x, 10, 77).unwrap();
    assert!(mutual_information_score(&s).iter().all(|&v| v == 0.0));
}

fn cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    dot / (u.iter().map(|a| a * a).sum::<f64>().sqrt() * v.iter().map(|a| a * a).sum::<f64>().sqrt())
}

#[test]
fn ntxent_matches_direct_summation() {
    let mut rng = rng(24);
    for _ in 0..50 {
        let n = rng.random_range(1..5);
        let d = rng.random_range(2..6);
        let tau = rng.random_range(0.2..2.0);
        let z = random_block(&mut rng, 2 * n, d, 2.0);
        let pairing: Vec<usize> = (0..2 * n).map(|i| if i < n { i + n } else { i - n }).collect();
        let mut total = 0.0;
        for i in 0..2 * n {
            let num = (cos(&z[i], &z[pairing[i]]) / tau).exp();
            let den: f64 = (0..2 * n).filter(|&j| j != i).map(|j| (cos(&z[i], &z[j]) / tau).exp()).sum();
            total += -(num / den).ln();
        }
        let want = total / (2 * n) as f64;
        let got = ntxent_loss(&matrix(&z), &pairing, tau).unwrap();
        assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
    }
}

#[test]
fn ntxent_worked_examples() {
    let z = matrix(&[vec![1.0, 2.0], vec![-0.5, 3.0]]);
    assert!(ntxent_loss(&z, &[1, 0], 0.5).unwrap().abs() < 1e-15);
    let same = Matrix::filled(4, 3, 1.0);
    let loss = ntxent_loss(&same, &[1, 0, 3, 2], 1.0).unwrap();
    assert!((loss - 3f64.ln()).abs() < 1e-12);
    assert!(ntxent_loss(&same, &[1, 0, 2, 3], 1.0).is_err());
}
