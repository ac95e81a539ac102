use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::mlp::{Gradients, MlpModel};

/// SGD with classic (coupled) momentum and L2 weight decay.
///
/// Per parameter: `v ← μ·v + (g + wd·θ)`, then `θ ← θ − η·v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdMomentum {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity_w: Vec<Matrix>,
    velocity_b: Vec<Vec<f64>>,
}

impl SgdMomentum {
    pub fn new(model: &MlpModel, learning_rate: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid(format!("momentum {momentum} not in [0, 1)")));
        }
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::invalid(format!("learning rate {learning_rate} must be >= 0")));
        }
        if !weight_decay.is_finite() || weight_decay < 0.0 {
            return Err(Error::invalid(format!("weight decay {weight_decay} must be >= 0")));
        }
        let zeros = Gradients::zeros_like(model);
        Ok(Self {
            learning_rate,
            momentum,
            weight_decay,
            velocity_w: zeros.weights,
            velocity_b: zeros.biases,
        })
    }

    pub fn velocity(&self) -> (&[Matrix], &[Vec<f64>]) {
        (&self.velocity_w, &self.velocity_b)
    }

    /// Applies one update. A non-finite gradient leaves model and state untouched.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != self.velocity_w.len()
            || grads
                .weights
                .iter()
                .zip(&self.velocity_w)
                .any(|(g, v)| g.shape() != v.shape())
            || grads
                .biases
                .iter()
                .zip(&self.velocity_b)
                .any(|(g, v)| g.len() != v.len())
        {
            return Err(Error::shape("gradients do not match optimizer state"));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient; optimizer step aborted".into()));
        }

        let (mu, wd, lr) = (self.momentum, self.weight_decay, self.learning_rate);
        let update = |param: &mut [f64], grad: &[f64], vel: &mut [f64]| {
            for ((p, &g), v) in param.iter_mut().zip(grad).zip(vel.iter_mut()) {
                *v = mu * *v + (g + wd * *p);
                *p -= lr * *v;
            }
        };
        let (weights, biases) = model.params_mut();
        for l in 0..weights.len() {
            update(
                weights[l].as_mut_slice(),
                grads.weights[l].as_slice(),
                self.velocity_w[l].as_mut_slice(),
            );
            update(&mut biases[l], &grads.biases[l], &mut self.velocity_b[l]);
        }
        Ok(())
    }
}
