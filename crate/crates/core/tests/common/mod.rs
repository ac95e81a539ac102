#![allow(dead_code)]

use oodkit::objectives::ObjectiveParams;
use oodkit::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

pub fn random_block(rng: &mut ChaCha8Rng, n: usize, k: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..k).map(|_| rng.random_range(-scale..scale)).collect())
        .collect()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

pub fn ce(z_in: &[Vec<f64>], labels: &[usize]) -> f64 {
    z_in.iter()
        .zip(labels)
        .map(|(z, &y)| -softmax(z)[y].ln())
        .sum::<f64>()
        / z_in.len() as f64
}

pub fn mean_cos(z_in: &[Vec<f64>], z_out: &[Vec<f64>]) -> f64 {
    z_in.iter()
        .zip(z_out)
        .map(|(a, b)| cos(&softmax(a), &softmax(b)))
        .sum::<f64>()
        / z_in.len() as f64
}

pub fn ce_cosine(z_in: &[Vec<f64>], labels: &[usize], z_out: &[Vec<f64>], lambda: f64) -> f64 {
    ce(z_in, labels) + lambda * mean_cos(z_in, z_out)
}

pub fn cosine_margin(z_in: &[Vec<f64>], labels: &[usize], z_out: &[Vec<f64>], p: &ObjectiveParams) -> f64 {
    let n = z_in.len() as f64;
    let k = p.k as f64;
    let hinge = (p.gamma + mean_cos(z_in, z_out)).max(0.0);
    let l1: f64 = z_out
        .iter()
        .map(|z| softmax(z).iter().map(|q| (q - 1.0 / k).abs()).sum::<f64>())
        .sum::<f64>()
        / n;
    let l2: f64 = z_in
        .iter()
        .zip(labels)
        .map(|(z, &y)| (softmax(z)[y] - p.alpha).powi(2))
        .sum::<f64>()
        / n;
    hinge + p.lambda1 * l1 + p.lambda2 * l2
}

/// Distance of the cosine-margin loss from its non-differentiable points.
pub fn cosine_margin_kink_distance(z_in: &[Vec<f64>], z_out: &[Vec<f64>], p: &ObjectiveParams) -> f64 {
    let k = p.k as f64;
    let hinge = (p.gamma + mean_cos(z_in, z_out)).abs();
    let l1 = z_out
        .iter()
        .flat_map(|z| softmax(z).into_iter().map(|q| (q - 1.0 / k).abs()).collect::<Vec<_>>())
        .fold(f64::INFINITY, f64::min);
    hinge.min(l1)
}

pub fn outlier_exposure(z_in: &[Vec<f64>], labels: &[usize], z_out: &[Vec<f64>], lambda: f64) -> f64 {
    let oe: f64 = z_out
        .iter()
        .map(|z| {
            let p = softmax(z);
            -p.iter().map(|q| q.ln()).sum::<f64>() / p.len() as f64
        })
        .sum::<f64>()
        / z_out.len() as f64;
    ce(z_in, labels) + lambda * oe
}

/// Central differences of `f` over every coordinate of the two blocks.
pub fn numeric_gradient(
    z_in: &[Vec<f64>],
    z_out: &[Vec<f64>],
    h: f64,
    f: impl Fn(&[Vec<f64>], &[Vec<f64>]) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut g_in = Vec::new();
    let mut g_out = Vec::new();
    for r in 0..z_in.len() {
        for c in 0..z_in[r].len() {
            let (mut a, mut b) = (z_in.to_vec(), z_in.to_vec());
            a[r][c] += h;
            b[r][c] -= h;
            g_in.push((f(&a, z_out) - f(&b, z_out)) / (2.0 * h));
        }
    }
    for r in 0..z_out.len() {
        for c in 0..z_out[r].len() {
            let (mut a, mut b) = (z_out.to_vec(), z_out.to_vec());
            a[r][c] += h;
            b[r][c] -= h;
            g_out.push((f(z_in, &a) - f(z_in, &b)) / (2.0 * h));
        }
    }
    (g_in, g_out)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Pairwise AUC: fraction of (positive, negative) pairs ordered correctly, ties count one half.
pub fn brute_force_auc(positive: &[f64], negative: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in positive {
        for &n in negative {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (positive.len() * negative.len()) as f64
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
