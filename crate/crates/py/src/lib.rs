//! Python bindings for `signalfuse`.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use signalfuse::config::ExperimentConfig;
use signalfuse::dataset::{prepare_dataset, Dataset};
use signalfuse::eval::{self, ablation_run, noise_sweep};
use signalfuse::models::{self, ModelKind};
use signalfuse::report::report_csv;
use signalfuse::signalgen::confidence_from_logits;
use signalfuse::synthdata::{self, to_csv_string, GenConfig};
use signalfuse::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Capability(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn kind(name: &str) -> PyResult<ModelKind> {
    name.parse().map_err(py_err)
}

/// Experiment settings; accepts the same TOML as the command line.
#[pyclass(name = "Config")]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => ExperimentConfig::from_toml_str(t).map_err(py_err)?,
            None => ExperimentConfig::default(),
        };
        Ok(PyConfig { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig { inner: ExperimentConfig::load(&path).map_err(py_err)? })
    }

    fn to_toml(&self) -> String {
        self.inner.canonical()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn __repr__(&self) -> String {
        format!("Config(hash={})", &self.inner.hash()[..12])
    }
}

#[pyclass(name = "MarketSeries")]
struct PySeries {
    inner: synthdata::MarketSeries,
}

#[pymethods]
impl PySeries {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn prices(&self) -> Vec<f64> {
        self.inner.prices()
    }

    fn volumes(&self) -> Vec<f64> {
        self.inner.bars.iter().map(|b| b.volume).collect()
    }

    /// Extra features, one list per bar.
    fn feats(&self) -> Vec<Vec<f64>> {
        self.inner.bars.iter().map(|b| b.feats.clone()).collect()
    }

    fn to_csv(&self) -> PyResult<String> {
        to_csv_string(&self.inner, None).map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (n = 3000, seed = 42, n_extra_feats = 3))]
fn generate_series(n: usize, seed: u64, n_extra_feats: usize) -> PyResult<PySeries> {
    let cfg = GenConfig { n, seed, n_extra_feats, ..GenConfig::default() };
    Ok(PySeries { inner: synthdata::generate_series(&cfg).map_err(py_err)? })
}

/// Generated series with signals, split and windowed.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<PyConfig>) -> PyResult<Self> {
        let c = config.map(|c| c.inner).unwrap_or_default();
        let inner = prepare_dataset(&c.gen(), &c.signal(), &c.split(), c.k).map_err(py_err)?;
        Ok(PyDataset { inner })
    }

    #[getter]
    fn n_train(&self) -> usize {
        self.inner.train.len()
    }

    #[getter]
    fn n_val(&self) -> usize {
        self.inner.val.len()
    }

    #[getter]
    fn n_test(&self) -> usize {
        self.inner.test.len()
    }

    #[getter]
    fn d_f(&self) -> usize {
        self.inner.d_f()
    }

    fn test_targets(&self) -> Vec<f64> {
        self.inner.test_targets_raw()
    }

    /// Signal confidences of the whole series.
    fn confidences(&self) -> Vec<f64> {
        self.inner.signals.iter().map(|s| s.confidence).collect()
    }
}

#[pyclass(name = "Model")]
struct PyModel {
    inner: models::TrainedModel,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().tag()
    }

    #[getter]
    fn train_curve(&self) -> Vec<f64> {
        self.inner.train_curve.clone()
    }

    #[getter]
    fn val_curve(&self) -> Vec<f64> {
        self.inner.val_curve.clone()
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.inner.best_epoch
    }

    /// Test-set predictions in price units.
    fn predict(&self, data: &PyDataset) -> PyResult<Vec<f64>> {
        let z = self.inner.predict(&data.inner.test).map_err(py_err)?;
        Ok(z.into_iter().map(|v| data.inner.stats.price_from_std(v)).collect())
    }

    fn evaluate<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Bound<'py, PyDict>> {
        let r = eval::evaluate(&self.inner, &data.inner, self.inner.network.config.seed).map_err(py_err)?;
        let d = PyDict::new_bound(py);
        d.set_item("rmse", r.rmse)?;
        d.set_item("mae", r.mae)?;
        d.set_item("r2", r.r2)?;
        Ok(d)
    }

    /// Attention weights `[layer][head][query][key]` for one test window.
    fn attention(&self, data: &PyDataset, window: usize) -> PyResult<Vec<Vec<Vec<Vec<f64>>>>> {
        let w = data
            .inner
            .test
            .get(window)
            .ok_or_else(|| PyValueError::new_err(format!("window {window} out of range")))?;
        Ok(eval::attention_trace(&self.inner, w).map_err(py_err)?.weights)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel { inner: models::TrainedModel::load(&path).map_err(py_err)? })
    }
}

#[pyfunction]
#[pyo3(signature = (data, kind, config = None, seed = None))]
fn train(py: Python<'_>, data: &PyDataset, kind: &str, config: Option<PyConfig>, seed: Option<u64>) -> PyResult<PyModel> {
    let k = self::kind(kind)?;
    let c = config.map(|c| c.inner).unwrap_or_default();
    let mut mc = c.model();
    if let Some(s) = seed {
        mc.seed = s;
    }
    let d = &data.inner;
    let mut m = py
        .allow_threads(|| models::train(k, &d.train, &d.val, &mc))
        .map_err(py_err)?;
    m.stats = Some(d.stats.clone());
    Ok(PyModel { inner: m })
}

/// Runs the seeded ablation; returns the report CSV and one dict per run.
#[pyfunction]
#[pyo3(signature = (data, config = None, workers = 1))]
fn ablate<'py>(
    py: Python<'py>,
    data: &PyDataset,
    config: Option<PyConfig>,
    workers: usize,
) -> PyResult<(String, Vec<Bound<'py, PyDict>>)> {
    let c = config.map(|c| c.inner).unwrap_or_default();
    let d = &data.inner;
    let out = py
        .allow_threads(|| ablation_run(d, &c.model(), &c.ablation(workers)))
        .map_err(py_err)?;
    let mut runs = Vec::new();
    for r in &out.runs {
        let row = PyDict::new_bound(py);
        row.set_item("kind", r.kind.tag())?;
        row.set_item("seed", r.seed)?;
        row.set_item("rmse", r.rmse)?;
        row.set_item("mae", r.mae)?;
        row.set_item("r2", r.r2)?;
        runs.push(row);
    }
    Ok((report_csv(&out.report), runs))
}

/// Mean RMSE and % increase per model kind and σ.
#[pyfunction(name = "noise_sweep")]
#[pyo3(signature = (models, data, sigmas = vec![0.0, 0.05, 0.1, 0.2], n_noise_seeds = 5, noise_seed = 1234))]
fn py_noise_sweep<'py>(
    py: Python<'py>,
    models: Vec<PyRef<'py, PyModel>>,
    data: &PyDataset,
    sigmas: Vec<f64>,
    n_noise_seeds: usize,
    noise_seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let refs: Vec<&models::TrainedModel> = models.iter().map(|m| &m.inner).collect();
    let d = &data.inner;
    let curve = noise_sweep(&refs, &d.test, &d.stats, &sigmas, n_noise_seeds, noise_seed).map_err(py_err)?;
    curve
        .points
        .iter()
        .map(|p| {
            let row = PyDict::new_bound(py);
            row.set_item("kind", p.kind.tag())?;
            row.set_item("sigma", p.sigma)?;
            row.set_item("rmse", p.mean_rmse)?;
            row.set_item("pct_increase", p.pct_increase)?;
            Ok(row)
        })
        .collect()
}

/// `(t, p_two_tailed, df)` for the differences `a - b`.
#[pyfunction]
fn paired_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let r = eval::paired_t_test(&a, &b).map_err(py_err)?;
    Ok((r.t, r.p_two_tailed, r.df))
}

#[pyfunction]
fn cohens_d_paired(diffs: Vec<f64>) -> PyResult<f64> {
    eval::cohens_d_paired(&diffs).map_err(py_err)
}

/// `(mean, lo, hi)`.
#[pyfunction]
fn mean_ci95(samples: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    eval::mean_ci95(&samples).map_err(py_err)
}

#[pyfunction]
fn rmse(preds: Vec<f64>, targets: Vec<f64>) -> PyResult<f64> {
    eval::rmse(&preds, &targets).map_err(py_err)
}

#[pyfunction]
fn mae(preds: Vec<f64>, targets: Vec<f64>) -> PyResult<f64> {
    eval::mae(&preds, &targets).map_err(py_err)
}

#[pyfunction]
fn r2(preds: Vec<f64>, targets: Vec<f64>) -> PyResult<f64> {
    eval::r2(&preds, &targets).map_err(py_err)
}

#[pyfunction]
fn signal_confidence(logits: [f64; 3]) -> f64 {
    confidence_from_logits(&logits)
}

#[pymodule]
fn signalfuse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySeries>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate_series, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(ablate, m)?)?;
    m.add_function(wrap_pyfunction!(py_noise_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d_paired, m)?)?;
    m.add_function(wrap_pyfunction!(mean_ci95, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(signal_confidence, m)?)?;
    Ok(())
}
