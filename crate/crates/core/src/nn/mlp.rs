//! Fully connected ReLU network with inverted dropout on hidden layers.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// How a forward pass treats dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// No dropout. Inverted dropout means no rescaling is needed here.
    Eval,
    /// Training pass with Bernoulli keep-masks drawn from `seed`.
    Train { seed: u64 },
    /// Test-time stochastic pass for MC-Dropout.
    McDropout { seed: u64 },
}

impl ForwardMode {
    fn dropout_seed(self) -> Option<u64> {
        match self {
            ForwardMode::Eval => None,
            ForwardMode::Train { seed } | ForwardMode::McDropout { seed } => Some(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    /// `weights[l]` has shape `(layer_dims[l + 1], layer_dims[l])`.
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    dropout_rate: f64,
}

/// Intermediate values of a forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub inputs: Matrix,
    /// Affine outputs `z_l` of every layer; the last one holds the logits.
    pub pre_activations: Vec<Matrix>,
    /// Hidden outputs after ReLU and dropout, i.e. the input of layer `l + 1`.
    pub activations: Vec<Matrix>,
    /// Scaled keep-masks (`0` or `1/keep`) per hidden layer, when dropout ran.
    pub masks: Option<Vec<Matrix>>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &Matrix {
        self.pre_activations.last().expect("trace has at least one layer")
    }

    /// Input of the final linear layer.
    pub fn penultimate_features(&self) -> &Matrix {
        self.activations.last().unwrap_or(&self.inputs)
    }
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// Flat view over all entries, weights first then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::invalid(format!(
            "an MLP needs at least input and output dims, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::invalid(format!(
            "layer dims must be positive, got {layer_dims:?}"
        )));
    }
    Ok(())
}

fn validate_dropout(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} not in [0, 1)")));
    }
    Ok(())
}

impl MlpModel {
    /// He-initialised model: `W ~ N(0, 2 / fan_in)`, zero biases.
    pub fn init(layer_dims: &[usize], dropout_rate: f64, seed: u64) -> Result<Self> {
        validate_dims(layer_dims)?;
        validate_dropout(dropout_rate)?;
        let mut rng = seed::rng(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .expect("positive std");
            let data = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            dropout_rate,
        })
    }

    /// Assembles a model from explicit parameters, checking every invariant.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        dropout_rate: f64,
    ) -> Result<Self> {
        validate_dims(&layer_dims)?;
        validate_dropout(dropout_rate)?;
        let n_layers = layer_dims.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(Error::shape(format!(
                "expected {n_layers} weight and bias blocks, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if weights[l].shape() != (pair[1], pair[0]) {
                return Err(Error::shape(format!(
                    "layer {l} weights are {:?}, expected {:?}",
                    weights[l].shape(),
                    (pair[1], pair[0])
                )));
            }
            if biases[l].len() != pair[1] {
                return Err(Error::shape(format!(
                    "layer {l} bias has length {}, expected {}",
                    biases[l].len(),
                    pair[1]
                )));
            }
            if !weights[l].is_finite() || biases[l].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {l} parameters")));
            }
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
            dropout_rate,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        validate_dropout(rate)?;
        self.dropout_rate = rate;
        Ok(())
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Matrix], &mut [Vec<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter vector in the same order as [`Gradients::flatten`].
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    /// Overwrites parameters from a flat vector laid out like [`Self::flatten_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.as_slice().len();
            w.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            let m = b.len();
            b.copy_from_slice(&flat[offset..offset + m]);
            offset += m;
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Matrix, mode: ForwardMode) -> Result<(Matrix, ForwardTrace)> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "input has {} features, model expects {}",
                inputs.cols(),
                self.input_dim()
            )));
        }
        let dropout = mode.dropout_seed().filter(|_| self.dropout_rate > 0.0);
        let mut rng = dropout.map(seed::rng);
        let keep = 1.0 - self.dropout_rate;

        let n_layers = self.weights.len();
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut activations = Vec::with_capacity(n_layers - 1);
        let mut masks = rng.as_ref().map(|_| Vec::with_capacity(n_layers - 1));

        for l in 0..n_layers {
            let input = if l == 0 { inputs } else { &activations[l - 1] };
            let mut z = input.matmul_transposed(&self.weights[l])?;
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&self.biases[l]) {
                    *v += b;
                }
            }
            if l + 1 < n_layers {
                let mut a = z.map(|v| v.max(0.0));
                if let (Some(rng), Some(masks)) = (rng.as_mut(), masks.as_mut()) {
                    let mut mask = Matrix::zeros(a.rows(), a.cols());
                    for (m, v) in mask.as_mut_slice().iter_mut().zip(a.as_mut_slice()) {
                        if rng.random::<f64>() < keep {
                            *m = 1.0 / keep;
                            *v *= *m;
                        } else {
                            *v = 0.0;
                        }
                    }
                    masks.push(mask);
                }
                activations.push(a);
            }
            pre_activations.push(z);
        }

        let trace = ForwardTrace {
            inputs: inputs.clone(),
            pre_activations,
            activations,
            masks,
        };
        Ok((trace.logits().clone(), trace))
    }

    /// Convenience eval-mode forward that drops the trace.
    pub fn predict_logits(&self, inputs: &Matrix) -> Result<Matrix> {
        self.forward(inputs, ForwardMode::Eval).map(|(z, _)| z)
    }

    /// Backpropagates `d_logits` through the trace, reusing its dropout masks.
    pub fn backward(&self, trace: &ForwardTrace, d_logits: &Matrix) -> Result<Gradients> {
        let n_layers = self.weights.len();
        if trace.pre_activations.len() != n_layers
            || trace.activations.len() + 1 != n_layers
            || trace.inputs.cols() != self.input_dim()
        {
            return Err(Error::shape("trace does not belong to this model"));
        }
        if d_logits.shape() != trace.logits().shape() {
            return Err(Error::shape(format!(
                "d_logits is {:?}, logits are {:?}",
                d_logits.shape(),
                trace.logits().shape()
            )));
        }

        let mut grads = Gradients::zeros_like(self);
        let mut delta = d_logits.clone();
        for l in (0..n_layers).rev() {
            let input = if l == 0 {
                &trace.inputs
            } else {
                &trace.activations[l - 1]
            };
            grads.weights[l] = delta.transposed_matmul(input)?;
            grads.biases[l] = delta.column_sums();
            if l == 0 {
                break;
            }
            let mut upstream = delta.matmul(&self.weights[l])?;
            let z = &trace.pre_activations[l - 1];
            let mask = trace.masks.as_ref().map(|m| &m[l - 1]);
            for (i, u) in upstream.as_mut_slice().iter_mut().enumerate() {
                if z.as_slice()[i] <= 0.0 {
                    *u = 0.0;
                } else if let Some(mask) = mask {
                    *u *= mask.as_slice()[i];
                }
            }
            delta = upstream;
        }
        Ok(grads)
    }
}
