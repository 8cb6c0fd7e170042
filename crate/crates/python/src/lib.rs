//! Python bindings: corpus synthesis/ingestion, feature extraction,
//! model training, classification, and the self-training loop.
//!
//! Build with `cargo build -p selftrain-python --release` and import the
//! produced cdylib as `selftrain_rs` (see python/smoke_test.py).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use selftrain_core::config::RunConfig;
use selftrain_core::corpus::synth::generate_synthetic;
use selftrain_core::corpus::{load_corpus, CorpusManifest, LabelClass, Role};
use selftrain_core::error::Error;
use selftrain_core::features::Epoch as CoreEpoch;
use selftrain_core::hmm::{
    classify as classify_frames, confidence, load_model_set, save_model_set, ModelSet,
    TrainOptions,
};
use selftrain_core::pipeline::{
    epochs_for_role, run_selftrain as core_run_selftrain, train_baseline, IterationReport,
    LoopConfig, ModelParams, PolicySpec, SchemeSpec, TrainingPool,
};
use selftrain_core::seed::derive_seed;
use selftrain_core::selector::ScoreKind;

fn to_py_err(err: Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_role(role: &str) -> PyResult<Role> {
    Role::parse(role)
        .ok_or_else(|| PyValueError::new_err(format!("unknown role {role:?}")))
}

/// Front-end configuration mirror of the core type.
#[pyclass(name = "FeatureConfig")]
#[derive(Clone)]
struct PyFeatureConfig {
    inner: selftrain_core::features::FeatureConfig,
}

#[pymethods]
impl PyFeatureConfig {
    #[new]
    #[pyo3(signature = (epoch_duration=1.0, frame_step=0.1, window_length=0.2,
                        num_cepstral=7, include_energy=true,
                        include_differential_energy=true))]
    fn new(
        epoch_duration: f64,
        frame_step: f64,
        window_length: f64,
        num_cepstral: usize,
        include_energy: bool,
        include_differential_energy: bool,
    ) -> PyResult<Self> {
        let inner = selftrain_core::features::FeatureConfig {
            epoch_duration,
            frame_step,
            window_length,
            num_cepstral,
            include_energy,
            include_differential_energy,
        };
        inner.validate().map_err(to_py_err)?;
        Ok(PyFeatureConfig { inner })
    }

    #[getter]
    fn frames_per_epoch(&self) -> usize {
        self.inner.frames_per_epoch()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn __repr__(&self) -> String {
        format!("FeatureConfig({})", self.inner.fingerprint())
    }
}

/// One labeled or unlabeled epoch with its feature matrix.
#[pyclass(name = "Epoch")]
#[derive(Clone)]
struct PyEpoch {
    inner: CoreEpoch,
}

#[pymethods]
impl PyEpoch {
    #[getter]
    fn record_id(&self) -> String {
        self.inner.id.record_id.clone()
    }

    #[getter]
    fn channel(&self) -> usize {
        self.inner.id.channel
    }

    #[getter]
    fn start(&self) -> f64 {
        self.inner.start
    }

    #[getter]
    fn gold_label(&self) -> Option<&'static str> {
        self.inner.gold_label.map(|c| c.name())
    }

    #[getter]
    fn auto_label(&self) -> Option<(&'static str, f64, usize)> {
        self.inner
            .auto_label
            .map(|a| (a.class.name(), a.confidence, a.iteration))
    }

    /// T x D feature matrix as nested lists.
    fn frames(&self) -> Vec<Vec<f64>> {
        self.inner
            .frames
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Epoch({} ch{} @{}s, gold={:?})",
            self.inner.id.record_id,
            self.inner.id.channel,
            self.inner.start,
            self.inner.gold_label.map(|c| c.name())
        )
    }
}

/// A corpus: records with roles, spans, and signals.
#[pyclass(name = "Corpus")]
struct PyCorpus {
    inner: selftrain_core::corpus::Corpus,
}

#[pymethods]
impl PyCorpus {
    /// Load a corpus from a manifest file.
    #[staticmethod]
    fn load(manifest_path: &str) -> PyResult<Self> {
        let manifest = CorpusManifest::load(Path::new(manifest_path)).map_err(to_py_err)?;
        let inner = load_corpus(&manifest).map_err(to_py_err)?;
        Ok(PyCorpus { inner })
    }

    /// Generate a synthetic corpus from the default specification.
    #[staticmethod]
    #[pyo3(signature = (seed, role="gold-train", scale=1.0, prefix="r"))]
    fn synthesize(seed: u64, role: &str, scale: f64, prefix: &str) -> PyResult<Self> {
        let role = parse_role(role)?;
        let mut spec = selftrain_core::corpus::synth::SynthSpec::default_spec().scaled(scale);
        spec.record_prefix = prefix.to_string();
        spec.seed = seed;
        let inner = generate_synthetic(&spec, role).map_err(to_py_err)?;
        Ok(PyCorpus { inner })
    }

    #[getter]
    fn num_records(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn record_ids(&self) -> Vec<String> {
        self.inner
            .records
            .iter()
            .map(|r| r.record.record_id.clone())
            .collect()
    }

    /// Per-class span seconds.
    fn duration_summary(&self) -> BTreeMap<String, f64> {
        let totals = self.inner.duration_summary();
        LabelClass::ALL
            .iter()
            .map(|c| (c.name().to_string(), totals[c.index()]))
            .collect()
    }

    /// Segment, extract features, and (for labeled roles) attach gold labels.
    #[pyo3(signature = (role, config=None, min_overlap=0.5))]
    fn epochs(
        &self,
        role: &str,
        config: Option<PyFeatureConfig>,
        min_overlap: f64,
    ) -> PyResult<Vec<PyEpoch>> {
        let role = parse_role(role)?;
        let cfg = config.map(|c| c.inner).unwrap_or_default();
        let epochs = epochs_for_role(&self.inner, role, &cfg, min_overlap).map_err(to_py_err)?;
        Ok(epochs.into_iter().map(|inner| PyEpoch { inner }).collect())
    }
}

/// Six trained per-class models.
#[pyclass(name = "ModelSet")]
struct PyModelSet {
    inner: ModelSet,
}

#[pymethods]
impl PyModelSet {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = load_model_set(Path::new(path)).map_err(to_py_err)?;
        Ok(PyModelSet { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_model_set(Path::new(path), &self.inner).map_err(to_py_err)
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint.clone()
    }

    /// Classify one epoch's frames. Returns (winner, confidence, scores).
    fn classify(&self, frames: Vec<Vec<f64>>) -> PyResult<(String, f64, BTreeMap<String, f64>)> {
        let t = frames.len();
        let d = frames.first().map_or(0, Vec::len);
        if t == 0 || d == 0 || frames.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("frames must be a non-empty T x D matrix"));
        }
        let flat: Vec<f64> = frames.into_iter().flatten().collect();
        let matrix = ndarray::Array2::from_shape_vec((t, d), flat)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let out = classify_frames(&self.inner, &matrix.view()).map_err(to_py_err)?;
        let conf = confidence(&out.scores, t).map_err(to_py_err)?;
        let scores = LabelClass::ALL
            .iter()
            .map(|c| (c.name().to_string(), out.scores[c.index()]))
            .collect();
        Ok((out.winner.name().to_string(), conf.value, scores))
    }
}

fn report_to_dict(py: Python<'_>, r: &IterationReport) -> PyResult<Py<PyAny>> {
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("iteration", r.iteration)?;
    dict.set_item("accuracy", r.accuracy)?;
    dict.set_item("stalled", r.stalled)?;
    let per_class = |values: &[f64; 6]| -> BTreeMap<String, f64> {
        LabelClass::ALL
            .iter()
            .map(|c| (c.name().to_string(), values[c.index()]))
            .collect()
    };
    dict.set_item("sensitivity", per_class(&r.sensitivity))?;
    dict.set_item("thresholds", per_class(&r.thresholds))?;
    let counts = |values: &[usize; 6]| -> BTreeMap<String, usize> {
        LabelClass::ALL
            .iter()
            .map(|c| (c.name().to_string(), values[c.index()]))
            .collect()
    };
    dict.set_item("selected", counts(&r.selected))?;
    dict.set_item("pool_sizes", counts(&r.pool_sizes))?;
    Ok(dict.into())
}

fn unwrap_epochs(epochs: Vec<PyEpoch>) -> Vec<CoreEpoch> {
    epochs.into_iter().map(|e| e.inner).collect()
}

/// Train baseline models from gold epochs and evaluate them.
#[pyfunction]
#[pyo3(signature = (gold, eval, states=5, mixtures=8, seed=0, config=None))]
fn train_baseline_models(
    py: Python<'_>,
    gold: Vec<PyEpoch>,
    eval: Vec<PyEpoch>,
    states: usize,
    mixtures: usize,
    seed: u64,
    config: Option<PyFeatureConfig>,
) -> PyResult<(PyModelSet, Py<PyAny>)> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let params = ModelParams {
        states,
        mixtures,
        train: TrainOptions::default(),
    };
    let pool = TrainingPool::from_gold(unwrap_epochs(gold)).map_err(to_py_err)?;
    let eval = unwrap_epochs(eval);
    let (models, report) =
        train_baseline(&pool, &eval, &params, &cfg.fingerprint(), seed).map_err(to_py_err)?;
    Ok((PyModelSet { inner: models }, report_to_dict(py, &report)?))
}

/// Run the full self-training loop; returns one report dict per iteration.
#[pyfunction]
#[pyo3(signature = (gold, eval, unlabeled, scheme="s1", iterations=7,
                    growth_factor=0.5, threshold=None, score="confidence",
                    include_background=false, states=5, mixtures=8, seed=0,
                    accuracy_drop=0.02, out_dir=None, config=None))]
#[allow(clippy::too_many_arguments)]
fn run_selftrain(
    py: Python<'_>,
    gold: Vec<PyEpoch>,
    eval: Vec<PyEpoch>,
    unlabeled: Vec<PyEpoch>,
    scheme: &str,
    iterations: usize,
    growth_factor: f64,
    threshold: Option<f64>,
    score: &str,
    include_background: bool,
    states: usize,
    mixtures: usize,
    seed: u64,
    accuracy_drop: f64,
    out_dir: Option<PathBuf>,
    config: Option<PyFeatureConfig>,
) -> PyResult<(Vec<Py<PyAny>>, PyModelSet, String)> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let score_kind = ScoreKind::parse(score)
        .ok_or_else(|| PyValueError::new_err(format!("unknown score kind {score:?}")))?;
    let scheme_spec = match scheme {
        "s1" => SchemeSpec::Volume { growth_factor },
        "s2" => {
            let t = threshold.ok_or_else(|| {
                PyValueError::new_err("scheme s2 requires a threshold")
            })?;
            SchemeSpec::Threshold {
                thresholds: [t; 6],
                score_kind,
            }
        }
        other => {
            return Err(PyValueError::new_err(format!("unknown scheme {other:?}")))
        }
    };
    let params = ModelParams {
        states,
        mixtures,
        train: TrainOptions::default(),
    };
    let loop_cfg = LoopConfig {
        max_iterations: iterations,
        accuracy_drop,
        seed,
    };
    let policy = PolicySpec {
        scheme: scheme_spec,
        include_background,
    };
    let output = core_run_selftrain(
        unwrap_epochs(gold),
        &unwrap_epochs(eval),
        unwrap_epochs(unlabeled),
        &params,
        &loop_cfg,
        &policy,
        &cfg,
        out_dir.as_deref(),
    )
    .map_err(to_py_err)?;
    let reports = output
        .reports
        .iter()
        .map(|r| report_to_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    Ok((
        reports,
        PyModelSet {
            inner: output.models,
        },
        output.stop.as_str().to_string(),
    ))
}

/// Derive a labeled sub-seed from a root seed, as the CLI does.
#[pyfunction]
fn derive_stage_seed(root: u64, label: &str) -> u64 {
    derive_seed(root, label)
}

/// The six class names in code order.
#[pyfunction]
fn label_classes() -> Vec<&'static str> {
    LabelClass::ALL.iter().map(|c| c.name()).collect()
}

/// Default run configuration as a dict of config-file keys.
#[pyfunction]
fn default_config() -> BTreeMap<String, String> {
    RunConfig::default().to_map().into_iter().collect()
}

#[pymodule]
fn selftrain_rs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFeatureConfig>()?;
    m.add_class::<PyEpoch>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyModelSet>()?;
    m.add_function(wrap_pyfunction!(train_baseline_models, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftrain, m)?)?;
    m.add_function(wrap_pyfunction!(derive_stage_seed, m)?)?;
    m.add_function(wrap_pyfunction!(label_classes, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
