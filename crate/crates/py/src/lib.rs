//! Python bindings: datasets, models, training, losses and evaluation.

use std::collections::BTreeMap;

use oodkit::config::{GridFile, RunConfig};
use oodkit::data::{self, SplitRole};
use oodkit::metrics::{self, ErrorTable, Orientation};
use oodkit::nn::{self, ForwardMode, MlpModel};
use oodkit::objectives::{self, LossResult, ObjectiveParams};
use oodkit::trainer::{self, EvalConfig, SEVERITIES};
use oodkit::{Error, Matrix};
use pyo3::exceptions::{PyArithmeticError, PyFileNotFoundError, PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e {
        Error::MissingInput(m) => PyFileNotFoundError::new_err(m),
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        e @ (Error::Divergence { .. } | Error::NonFinite(_)) => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn json<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

fn run_config(toml: Option<&str>) -> PyResult<RunConfig> {
    toml.map_or_else(|| Ok(RunConfig::default()), |t| RunConfig::from_toml_str(t).map_err(err))
}

fn role(name: &str) -> PyResult<SplitRole> {
    SplitRole::ALL
        .into_iter()
        .find(|r| r.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown split {name:?}")))
}

/// All splits of one synthetic benchmark draw.
#[pyclass(name = "Benchmark", module = "oodkit_py", frozen)]
struct PyBenchmark {
    inner: data::Benchmark,
}

#[pymethods]
impl PyBenchmark {
    /// Samples the benchmark described by the `[data]` section of `config`.
    #[staticmethod]
    #[pyo3(signature = (seed=0, config=None))]
    fn generate(seed: u64, config: Option<&str>) -> PyResult<Self> {
        let cfg = run_config(config)?;
        let inner = data::make_benchmark(&cfg.data, seed).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(dir: &str) -> PyResult<Self> {
        Ok(Self { inner: data::load_benchmark(dir).map_err(err)? })
    }

    fn save(&self, dir: &str) -> PyResult<Vec<String>> {
        data::save_benchmark(&self.inner, dir).map_err(err)
    }

    /// `(features, labels)` of a split; labels are `None` for OOD splits.
    fn split(&self, name: &str) -> PyResult<(Rows, Option<Vec<usize>>)> {
        let s = self
            .inner
            .split(role(name)?)
            .ok_or_else(|| PyValueError::new_err(format!("benchmark has no {name} split")))?;
        Ok((s.features.to_rows(), s.labels.clone()))
    }

    fn sizes(&self) -> BTreeMap<&'static str, usize> {
        SplitRole::ALL
            .into_iter()
            .filter_map(|r| self.inner.split(r).map(|s| (r.name(), s.len())))
            .collect()
    }
}

/// ReLU multilayer perceptron with dropout.
#[pyclass(name = "Model", module = "oodkit_py", frozen)]
struct PyModel {
    inner: MlpModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (layer_dims, dropout_rate=0.0, seed=0))]
    fn new(layer_dims: Vec<usize>, dropout_rate: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: MlpModel::init(&layer_dims, dropout_rate, seed).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: nn::load_model(path).map_err(err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        nn::save_model(&self.inner, path).map_err(err)
    }

    #[getter]
    fn layer_dims(&self) -> Vec<usize> {
        self.inner.layer_dims().to_vec()
    }

    #[getter]
    fn dropout_rate(&self) -> f64 {
        self.inner.dropout_rate()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.flatten_params()
    }

    /// Eval-mode logits.
    fn logits(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let (z, _) = self.inner.forward(&matrix(x)?, ForwardMode::Eval).map_err(err)?;
        Ok(z.to_rows())
    }

    /// Eval-mode softmax probabilities.
    fn predict_proba(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let z = self.inner.predict_logits(&matrix(x)?).map_err(err)?;
        Ok(nn::softmax(&z).map_err(err)?.to_rows())
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        Ok(self.inner.predict_logits(&matrix(x)?).map_err(err)?.argmax_rows())
    }

    fn __repr__(&self) -> String {
        format!("Model(layer_dims={:?}, dropout_rate={})", self.inner.layer_dims(), self.inner.dropout_rate())
    }
}

/// Trains with the `[train]` section of `config`; returns `(model, history)`.
#[pyfunction]
#[pyo3(signature = (benchmark, config=None))]
fn train<'py>(py: Python<'py>, benchmark: &PyBenchmark, config: Option<&str>) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let cfg = run_config(config)?;
    let bench = &benchmark.inner;
    let result = py.detach(|| {
        let model = trainer::init_model(&cfg.train, bench)?;
        trainer::train(&cfg.train, bench, model)
    });
    let (model, history) = result.map_err(err)?;
    Ok((PyModel { inner: model }, json(py, &history)?))
}

/// Results dictionary of `model` on the benchmark's test splits.
#[pyfunction]
#[pyo3(signature = (model, benchmark, mc_passes=30, mahalanobis=true, seed=0, corruption=false))]
fn evaluate<'py>(
    py: Python<'py>,
    model: &PyModel,
    benchmark: &PyBenchmark,
    mc_passes: usize,
    mahalanobis: bool,
    seed: u64,
    corruption: bool,
) -> PyResult<Bound<'py, PyAny>> {
    if mc_passes == 0 {
        return Err(PyValueError::new_err("mc_passes must be >= 1"));
    }
    let cfg = EvalConfig { mc_passes, mahalanobis, mc_seed: seed, ..EvalConfig::default() };
    let report = py
        .detach(|| -> oodkit::Result<_> {
            let (mut report, _) = trainer::evaluate(&model.inner, &benchmark.inner, &cfg)?;
            if corruption {
                let c = trainer::corruption_eval(&model.inner, &benchmark.inner.test_id, seed)?;
                report.mce = Some(c.mce);
                report.corruption = Some(c);
            }
            Ok(report)
        })
        .map_err(err)?;
    json(py, &report)
}

/// Corruption error table of `model` on the benchmark's ID test split.
#[pyfunction]
#[pyo3(signature = (model, benchmark, seed=0))]
fn corruption_eval<'py>(py: Python<'py>, model: &PyModel, benchmark: &PyBenchmark, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let report = trainer::corruption_eval(&model.inner, &benchmark.inner.test_id, seed).map_err(err)?;
    json(py, &report)
}

/// Train, evaluate and optionally write every artifact to `out_dir`.
#[pyfunction]
#[pyo3(signature = (benchmark, config=None, out_dir=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    benchmark: &PyBenchmark,
    config: Option<&str>,
    out_dir: Option<&str>,
) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let cfg = run_config(config)?;
    let out = py
        .detach(|| trainer::run_experiment(&cfg.train, &cfg.eval, &benchmark.inner, out_dir.map(std::path::Path::new)))
        .map_err(err)?;
    Ok((PyModel { inner: out.model }, json(py, &out.report)?))
}

/// Sweeps a TOML grid; returns `(best_model, leaderboard)`.
#[pyfunction]
#[pyo3(signature = (benchmark, grid, config=None))]
fn sweep<'py>(py: Python<'py>, benchmark: &PyBenchmark, grid: &str, config: Option<&str>) -> PyResult<(PyModel, Bound<'py, PyAny>)> {
    let cfg = run_config(config)?;
    let points = GridFile::from_toml_str(grid).map_err(err)?.points();
    let outcome = py
        .detach(|| trainer::sweep(&cfg.train, &points, &benchmark.inner))
        .map_err(err)?;
    Ok((PyModel { inner: outcome.best_model }, json(py, &outcome.leaderboard)?))
}

type Rows = Vec<Vec<f64>>;
type Grads = (f64, Vec<Vec<f64>>, Option<Vec<Vec<f64>>>);

fn grads(r: LossResult) -> Grads {
    (r.loss, r.d_logits_in.to_rows(), r.d_logits_out.map(|m| m.to_rows()))
}

/// `(loss, d_logits_in, None)`.
#[pyfunction]
fn cross_entropy_loss(logits: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<Grads> {
    objectives::cross_entropy_loss(&matrix(logits)?, &labels).map(grads).map_err(err)
}

/// `(loss, d_logits_in, d_logits_out)`.
#[pyfunction]
#[pyo3(signature = (logits_in, labels, logits_out, lam=1.0))]
fn ce_cosine_loss(logits_in: Vec<Vec<f64>>, labels: Vec<usize>, logits_out: Vec<Vec<f64>>, lam: f64) -> PyResult<Grads> {
    objectives::ce_cosine_loss(&matrix(logits_in)?, &labels, &matrix(logits_out)?, lam)
        .map(grads)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (logits_in, labels, logits_out, gamma=-0.5, lambda1=1.0, lambda2=1.0, alpha=0.9))]
#[allow(clippy::too_many_arguments)]
fn cosine_margin_ranking_loss(
    logits_in: Vec<Vec<f64>>,
    labels: Vec<usize>,
    logits_out: Vec<Vec<f64>>,
    gamma: f64,
    lambda1: f64,
    lambda2: f64,
    alpha: f64,
) -> PyResult<Grads> {
    let z_in = matrix(logits_in)?;
    let params = ObjectiveParams { gamma, lambda1, lambda2, alpha, k: z_in.cols(), ..ObjectiveParams::default() };
    objectives::cosine_margin_ranking_loss(&z_in, &labels, &matrix(logits_out)?, &params)
        .map(grads)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (logits_in, labels, logits_out, lam=1.0))]
fn outlier_exposure_loss(logits_in: Vec<Vec<f64>>, labels: Vec<usize>, logits_out: Vec<Vec<f64>>, lam: f64) -> PyResult<Grads> {
    objectives::outlier_exposure_loss(&matrix(logits_in)?, &labels, &matrix(logits_out)?, lam)
        .map(grads)
        .map_err(err)
}

/// AUC-ROC in `[0, 1]` for separating OOD from ID scores.
#[pyfunction]
#[pyo3(signature = (scores_id, scores_ood, higher_is_ood=true))]
fn auc_roc(scores_id: Vec<f64>, scores_ood: Vec<f64>, higher_is_ood: bool) -> PyResult<f64> {
    let o = if higher_is_ood { Orientation::HigherIsOod } else { Orientation::HigherIsId };
    metrics::auc_roc(&scores_id, &scores_ood, o).map_err(err)
}

/// Sum over kinds of the error averaged over severities 1 to 5.
#[pyfunction]
fn mce(table: BTreeMap<String, BTreeMap<u8, f64>>) -> PyResult<f64> {
    metrics::mce(&ErrorTable { cells: table }, &SEVERITIES).map_err(err)
}

#[pymodule]
fn oodkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyBenchmark>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(corruption_eval, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(cross_entropy_loss, m)?)?;
    m.add_function(wrap_pyfunction!(ce_cosine_loss, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_margin_ranking_loss, m)?)?;
    m.add_function(wrap_pyfunction!(outlier_exposure_loss, m)?)?;
    m.add_function(wrap_pyfunction!(auc_roc, m)?)?;
    m.add_function(wrap_pyfunction!(mce, m)?)?;
    Ok(())
}
