//! Python bindings. Records cross the boundary as plain dicts.

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hemanet::data::{self, AnemiaLabel, CbcRecord, ClassMix, LabeledRecord, ReferenceRanges, SynthConfig};
use hemanet::experiment::{self, CompareConfig, Stage, StageConfig};
use hemanet::metrics::{self, ConfusionMatrix};
use hemanet::models::{self, ArchConfig, Family, OutputEncoding, TrainedModel};
use hemanet::nn::TrainConfig;
use hemanet::pipeline::{self, ModelPair, PipelineOptions};
use hemanet::preprocess::{split_dataset, FeatureSpec, SplitFractions};
use hemanet::{Error, ErrorClass};

fn py_err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.class() {
        ErrorClass::Usage => PyValueError::new_err(msg),
        ErrorClass::Data => PyIOError::new_err(msg),
        ErrorClass::Numeric => PyArithmeticError::new_err(msg),
    }
}

fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[derive(Serialize, Deserialize)]
struct FlatLabeled {
    #[serde(flatten)]
    record: CbcRecord,
    label: AnemiaLabel,
}

fn labeled_from_py(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<Vec<LabeledRecord>> {
    let rows: Vec<FlatLabeled> = from_py(py, obj)?;
    Ok(rows
        .into_iter()
        .map(|r| LabeledRecord { record: r.record, label: r.label })
        .collect())
}

fn labeled_to_py<'py>(py: Python<'py>, records: &[LabeledRecord]) -> PyResult<Bound<'py, PyAny>> {
    let rows: Vec<FlatLabeled> = records
        .iter()
        .map(|r| FlatLabeled { record: r.record, label: r.label })
        .collect();
    to_py(py, &rows)
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// A trained network together with its feature layout and scaling.
#[pyclass(name = "Model", module = "pyhemanet")]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel { inner: models::load_model(path).map_err(py_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel { inner: TrainedModel::from_json(text).map_err(py_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        models::save_model(&self.inner, path).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.network.family().as_str()
    }

    #[getter]
    fn encoding(&self) -> &'static str {
        self.inner.encoding.as_str()
    }

    #[getter]
    fn hidden(&self) -> usize {
        self.inner.network.hidden_width()
    }

    /// Raw network outputs for unlabeled records.
    fn predict(&self, py: Python<'_>, records: &Bound<'_, PyAny>) -> PyResult<Vec<Vec<f64>>> {
        let records: Vec<CbcRecord> = from_py(py, records)?;
        self.inner.predict_raw(&records, None).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(family={}, encoding={}, hidden={})",
            self.family(),
            self.encoding(),
            self.hidden()
        )
    }
}

/// Reference-range label for one record.
#[pyfunction]
fn rule_label(py: Python<'_>, record: &Bound<'_, PyAny>) -> PyResult<&'static str> {
    let record: CbcRecord = from_py(py, record)?;
    let label = data::rule_label(&record, &ReferenceRanges::default()).map_err(py_err)?;
    Ok(label.token())
}

/// `mix` is (microcytic, normocytic, macrocytic, non_anemic); defaults to an even split.
#[pyfunction]
#[pyo3(signature = (n, mix=None, seed=0, margin=0.05))]
fn synth_generate<'py>(
    py: Python<'py>,
    n: usize,
    mix: Option<(i64, i64, i64, i64)>,
    seed: u64,
    margin: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let mix = match mix {
        Some((a, b, c, d)) => ClassMix::from_counts(a, b, c, d),
        None => ClassMix::from_counts(1, 1, 1, 1).and_then(|m| m.scaled_to(n)),
    }
    .map_err(py_err)?;
    let cfg = SynthConfig { margin, ..SynthConfig::default() };
    let records = data::synth_generate(n, &mix, &cfg, seed).map_err(py_err)?;
    labeled_to_py(py, &records)
}

#[pyfunction]
fn load_csv<'py>(py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyAny>> {
    labeled_to_py(py, &data::load_csv(path).map_err(py_err)?)
}

#[pyfunction]
fn save_csv(py: Python<'_>, records: &Bound<'_, PyAny>, path: &str) -> PyResult<()> {
    data::save_csv(&labeled_from_py(py, records)?, path).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (records, family="ffnn", stage="diagnosis", hidden=50, epochs=1000,
                    learning_rate=0.05, momentum=0.9, encoding="onehot3", features="full9", seed=0))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    records: &Bound<'_, PyAny>,
    family: &str,
    stage: &str,
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    momentum: f64,
    encoding: &str,
    features: &str,
    seed: u64,
) -> PyResult<PyModel> {
    let data = labeled_from_py(py, records)?;
    let family: Family = parse(family)?;
    let config = StageConfig {
        arch: ArchConfig::new(family, hidden),
        stage: parse::<Stage>(stage)?,
        classify_encoding: parse::<OutputEncoding>(encoding)?,
        feature_spec: FeatureSpec::preset(features).map_err(py_err)?,
        train: TrainConfig { learning_rate, momentum, epochs, hidden_size: hidden, seed, ..TrainConfig::default() },
        joint_scaling: false,
    };
    let split = split_dataset(&data, SplitFractions::ALL_TRAIN, seed, true).map_err(py_err)?;
    let out = py
        .detach(|| experiment::train_stage(&config, &split.train, &split.validation, &split.test))
        .map_err(py_err)?;
    Ok(PyModel { inner: out.model })
}

/// Two-stage prediction; returns one report dict per record.
#[pyfunction]
#[pyo3(signature = (diagnosis, classifier, records, threshold=0.5))]
fn run_pipeline<'py>(
    py: Python<'py>,
    diagnosis: &PyModel,
    classifier: &PyModel,
    records: &Bound<'py, PyAny>,
    threshold: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<CbcRecord> = from_py(py, records)?;
    let pair = ModelPair::new(diagnosis.inner.clone(), classifier.inner.clone()).map_err(py_err)?;
    let opts = PipelineOptions { threshold, ..PipelineOptions::default() };
    let out = pipeline::run_pipeline(&pair, &records, &opts).map_err(py_err)?;
    to_py(py, &out.reports)
}

/// Trains every family on one split and returns both metric tables.
#[pyfunction]
#[pyo3(signature = (records, seed=0, hidden=50, epochs=1000))]
fn compare<'py>(
    py: Python<'py>,
    records: &Bound<'py, PyAny>,
    seed: u64,
    hidden: usize,
    epochs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let data = labeled_from_py(py, records)?;
    let base = CompareConfig::default();
    let cfg = CompareConfig {
        arch: ArchConfig::new(Family::Ffnn, hidden),
        train: TrainConfig { hidden_size: hidden, epochs, ..base.train },
        ..base
    };
    let (diag, pipe) = py
        .detach(|| {
            let out = experiment::compare(&data, &cfg, seed)?;
            Ok::<_, Error>((out.diagnosis_report()?, out.pipeline_report()?))
        })
        .map_err(py_err)?;
    to_py(py, &serde_json::json!({ "diagnosis": diag, "pipeline": pipe }))
}

/// Metrics of a confusion matrix given as rows of counts (rows are truth).
#[pyfunction]
#[pyo3(signature = (rows, name="model"))]
fn confusion_metrics<'py>(py: Python<'py>, rows: Vec<Vec<u64>>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let cm = ConfusionMatrix::from_counts(&rows).map_err(py_err)?;
    to_py(py, &metrics::model_metrics(name, &cm).map_err(py_err)?)
}

#[pyfunction]
fn f1_score(precision: f64, recall: f64) -> f64 {
    metrics::f1_score(precision, recall)
}

/// Largest relative gradient error per variant of `family`, over `configs` random setups.
#[pyfunction]
#[pyo3(signature = (family, configs=20, epsilon=1e-5, seed=0))]
fn gradcheck(family: &str, configs: u64, epsilon: f64, seed: u64) -> PyResult<Vec<(String, f64)>> {
    let family: Family = parse(family)?;
    experiment::gradcheck_variants(family)
        .iter()
        .map(|arch| {
            let mut worst = 0.0f64;
            for i in 0..configs {
                let r = experiment::random_gradcheck(arch, seed + i, epsilon).map_err(py_err)?;
                worst = worst.max(r.max_relative_error);
            }
            Ok((experiment::variant_name(arch), worst))
        })
        .collect()
}

#[pymodule]
fn pyhemanet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(rule_label, m)?)?;
    m.add_function(wrap_pyfunction!(synth_generate, m)?)?;
    m.add_function(wrap_pyfunction!(load_csv, m)?)?;
    m.add_function(wrap_pyfunction!(save_csv, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(confusion_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(f1_score, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
