//! JSON model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::mlp::MlpModel;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    layer_dims: Vec<usize>,
    dropout_rate: f64,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

pub fn model_to_json(model: &MlpModel) -> Result<String> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        layer_dims: model.layer_dims().to_vec(),
        dropout_rate: model.dropout_rate(),
        weights: model.weights().iter().map(Matrix::to_rows).collect(),
        biases: model.biases().to_vec(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn model_from_json(text: &str, origin: &Path) -> Result<MlpModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::parse(
            origin,
            format!("unsupported format_version {}", file.format_version),
        ));
    }
    let weights = file
        .weights
        .iter()
        .map(|rows| Matrix::from_rows(rows))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::parse(origin, e.to_string()))?;
    MlpModel::from_parts(file.layer_dims, weights, file.biases, file.dropout_rate)
        .map_err(|e| Error::parse(origin, e.to_string()))
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let mut text = model_to_json(model)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    model_from_json(&text, path)
}
