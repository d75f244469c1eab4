//! Python bindings: embedding fit, corpus handling, tessellation, predictor
//! training, synthetic data and the evaluation metrics.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use svs_tessellate::corpus::{BuiltCorpus, ClipRecord, QuerySequence, ReferenceCorpus};
use svs_tessellate::embedding::{fit_embedding, EmbeddingConfig, EmbeddingModel, Regularization};
use svs_tessellate::predictor::{tessellate_supervised, train_predictor, PredictorModel, TrainingConfig};
use svs_tessellate::synth::{generate, SynthKind, SynthSpec};
use svs_tessellate::tessellate::{tessellate_local, tessellate_viterbi, CandidateParams, Mode, TessellationPath};
use svs_tessellate::transfer::{self, Interval, SoundFeatureClip};
use svs_tessellate::{Error, FeatureMatrix};

create_exception!(svs_py, SvsError, PyException);
create_exception!(svs_py, NumericFailure, SvsError);
create_exception!(svs_py, FormatError, SvsError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::InvalidArgument(_) => PyValueError::new_err(msg),
        Error::NumericFailure { .. } => NumericFailure::new_err(msg),
        Error::Format { .. } | Error::Json { .. } | Error::Ingestion(_) => FormatError::new_err(msg),
        Error::Io { .. } => PyOSError::new_err(msg),
        _ => SvsError::new_err(msg),
    }
}

fn matrix(rows: Vec<Vec<f64>>, what: &str) -> PyResult<FeatureMatrix> {
    if rows.is_empty() {
        return Err(PyValueError::new_err(format!("{what} has no rows")));
    }
    FeatureMatrix::from_rows(&rows).map_err(to_py)
}

fn rows(m: &FeatureMatrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Fitted map from raw appearance (and semantics) into the joint space.
#[pyclass(name = "Embedding", module = "svs_py")]
struct PyEmbedding {
    inner: EmbeddingModel,
}

#[pymethods]
impl PyEmbedding {
    #[staticmethod]
    #[pyo3(signature = (appearance, semantics=None, pca_dim=None, svs_dim=2000, lambda_scale=0.1))]
    fn fit(
        appearance: Vec<Vec<f64>>,
        semantics: Option<Vec<Vec<f64>>>,
        pca_dim: Option<usize>,
        svs_dim: usize,
        lambda_scale: f64,
    ) -> PyResult<Self> {
        let app = matrix(appearance, "appearance")?;
        let sem = semantics.map(|s| matrix(s, "semantics")).transpose()?;
        let config = EmbeddingConfig {
            pca_dim,
            svs_dim,
            regularization: Regularization::CrossCovarianceScale(lambda_scale),
        };
        let inner = fit_embedding(&app, sem.as_ref(), &config).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: EmbeddingModel::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    #[getter]
    fn svs_dim(&self) -> usize {
        self.inner.svs_dim()
    }

    #[getter]
    fn correlations(&self) -> Vec<f64> {
        self.inner.cca.correlations.clone()
    }

    fn project_appearance(&self, appearance: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let m = matrix(appearance, "appearance")?;
        Ok(rows(&self.inner.project_appearance_rows(&m).map_err(to_py)?))
    }
}

/// Reference clips embedded in the joint space.
#[pyclass(name = "Corpus", module = "svs_py")]
struct PyCorpus {
    inner: BuiltCorpus,
}

#[pymethods]
impl PyCorpus {
    /// Builds a corpus from rows already in the joint space. `appearance`
    /// defaults to the semantics rows.
    #[staticmethod]
    #[pyo3(signature = (semantics, video_ids, clip_indices, task="summary", appearance=None))]
    fn from_rows(
        semantics: Vec<Vec<f64>>,
        video_ids: Vec<String>,
        clip_indices: Vec<usize>,
        task: &str,
        appearance: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let sem = matrix(semantics, "semantics")?;
        if video_ids.len() != sem.rows() || clip_indices.len() != sem.rows() {
            return Err(PyValueError::new_err("video_ids and clip_indices need one entry per row"));
        }
        let app = match appearance {
            Some(a) => matrix(a, "appearance")?,
            None => sem.clone(),
        };
        let clips = video_ids
            .into_iter()
            .zip(clip_indices)
            .enumerate()
            .map(|(j, (v, i))| ClipRecord::new(v, i, app.row(j).to_vec()))
            .collect();
        let dim = sem.cols();
        let corpus = ReferenceCorpus::from_parts(parse(task)?, clips, sem, Some(app)).map_err(to_py)?;
        Ok(Self {
            inner: BuiltCorpus {
                corpus,
                embedding: EmbeddingModel::identity(dim),
            },
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: BuiltCorpus::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.corpus.len()
    }

    #[getter]
    fn svs_dim(&self) -> usize {
        self.inner.corpus.svs_dim()
    }

    #[getter]
    fn task(&self) -> String {
        self.inner.corpus.task.to_string()
    }

    #[getter]
    fn embedding(&self) -> PyEmbedding {
        PyEmbedding {
            inner: self.inner.embedding.clone(),
        }
    }

    /// `(video_id, clip_index)` of every clip, in corpus order.
    fn clip_ids(&self) -> Vec<(String, usize)> {
        self.inner
            .corpus
            .clips
            .iter()
            .map(|c| (c.video_id.clone(), c.clip_index))
            .collect()
    }

    fn semantics(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.corpus.svs_semantics)
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(task={}, clips={}, videos={}, svs_dim={})",
            self.inner.corpus.task,
            self.inner.corpus.len(),
            self.inner.corpus.video_boundaries.len(),
            self.inner.corpus.svs_dim()
        )
    }
}

/// LSTM semantics predictor for supervised tessellation.
#[pyclass(name = "Predictor", module = "svs_py")]
struct PyPredictor {
    model: PredictorModel,
    #[pyo3(get)]
    loss_history: Vec<f64>,
}

#[pymethods]
impl PyPredictor {
    #[staticmethod]
    #[pyo3(signature = (corpus, hidden=1000, epochs=100, learning_rate=1e-3, clip_norm=5.0, seed=7))]
    fn train(
        py: Python<'_>,
        corpus: &PyCorpus,
        hidden: usize,
        epochs: usize,
        learning_rate: f64,
        clip_norm: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let config = TrainingConfig {
            hidden,
            epochs,
            learning_rate,
            clip_norm,
            seed,
            ..TrainingConfig::default()
        };
        let reference = &corpus.inner.corpus;
        let trained = py.detach(|| train_predictor(reference, &config)).map_err(to_py)?;
        Ok(Self {
            model: trained.model,
            loss_history: trained.loss_history,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let (model, loss_history) = PredictorModel::load(path).map_err(to_py)?;
        Ok(Self { model, loss_history })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.model.save(path, &self.loss_history).map_err(to_py)
    }

    #[getter]
    fn svs_dim(&self) -> usize {
        self.model.svs_dim()
    }
}

fn path_dict<'py>(py: Python<'py>, path: &TessellationPath) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("assignments", path.assignments.clone())?;
    d.set_item("data_energies", path.data_energies.clone())?;
    d.set_item("path_energy", path.path_energy)?;
    Ok(d)
}

/// Assigns a reference clip to every row of `query` (joint-space points).
/// Returns a dict with `assignments`, `data_energies` and `path_energy`.
#[pyfunction]
#[pyo3(signature = (corpus, query, mode="viterbi", top_k=5, rel_threshold=0.05, predictor=None))]
fn tessellate<'py>(
    py: Python<'py>,
    corpus: &PyCorpus,
    query: Vec<Vec<f64>>,
    mode: &str,
    top_k: usize,
    rel_threshold: f64,
    predictor: Option<&PyPredictor>,
) -> PyResult<Bound<'py, PyDict>> {
    let q = QuerySequence::new("query", matrix(query, "query")?);
    let params = CandidateParams {
        r_prime: top_k,
        rel_threshold,
    };
    let reference = &corpus.inner.corpus;
    let path = match (parse::<Mode>(mode)?, predictor) {
        (Mode::Local, _) => tessellate_local(&q, reference),
        (Mode::Viterbi, _) => tessellate_viterbi(&q, reference, params),
        (Mode::Supervised, Some(p)) => tessellate_supervised(&q, reference, &p.model, params),
        (Mode::Supervised, None) => return Err(PyValueError::new_err("supervised mode needs a predictor")),
    }
    .map_err(to_py)?;
    path_dict(py, &path)
}

/// Generates a synthetic corpus from a JSON spec. Returns a dict with the
/// reference `corpus`, the `queries` (lists of joint-space rows) and the
/// hidden `reference_states` and `query_states`.
#[pyfunction]
#[pyo3(signature = (kind, spec_json, task="summary"))]
fn synth<'py>(py: Python<'py>, kind: &str, spec_json: &str, task: &str) -> PyResult<Bound<'py, PyDict>> {
    let kind: SynthKind = parse(kind)?;
    let spec: SynthSpec = serde_json::from_str(spec_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let generated = generate(kind, &spec).map_err(to_py)?;
    let corpus = generated.corpus(parse(task)?).map_err(to_py)?;
    let dim = corpus.svs_dim();
    let queries: Vec<Vec<Vec<f64>>> = generated
        .query_sequences()
        .map_err(to_py)?
        .iter()
        .map(|q| rows(&q.svs_appearance))
        .collect();
    let d = PyDict::new(py);
    d.set_item(
        "corpus",
        PyCorpus {
            inner: BuiltCorpus {
                corpus,
                embedding: EmbeddingModel::identity(dim),
            },
        },
    )?;
    d.set_item("queries", queries)?;
    d.set_item("reference_states", generated.reference_states.clone())?;
    d.set_item("query_states", generated.query_states.clone())?;
    Ok(d)
}

fn interval(bounds: (f64, f64)) -> PyResult<Interval> {
    Interval::new(bounds.0, bounds.1, 0, 0.0).map_err(to_py)
}

#[pyfunction]
fn interval_iou(a: (f64, f64), b: (f64, f64)) -> PyResult<f64> {
    Ok(transfer::interval_iou(&interval(a)?, &interval(b)?))
}

/// Average precision of scored `(start, end, score)` detections against
/// `(start, end)` ground truth for one class.
#[pyfunction]
#[pyo3(signature = (detections, ground_truth, iou_threshold=0.5))]
fn average_precision(
    detections: Vec<(f64, f64, f64)>,
    ground_truth: Vec<(f64, f64)>,
    iou_threshold: f64,
) -> PyResult<f64> {
    let dets = detections
        .into_iter()
        .map(|(s, e, score)| Interval::new(s, e, 0, score))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let gts = ground_truth.into_iter().map(interval).collect::<PyResult<Vec<_>>>()?;
    transfer::average_precision(&dets, &gts, iou_threshold).map_err(to_py)
}

/// Mean F-measure of a kept-frame mask against per-frame annotations.
#[pyfunction]
fn fmeasure(keep: Vec<bool>, budget_fraction: f64, annotations: Vec<Vec<f64>>) -> PyResult<f64> {
    let selection = transfer::SummarySelection { keep, budget_fraction };
    transfer::fmeasure(&selection, &annotations).map_err(to_py)
}

fn sound_clip(values: Vec<f64>) -> PyResult<SoundFeatureClip> {
    SoundFeatureClip::new(values).map_err(to_py)
}

#[pyfunction]
fn loudness(clip: Vec<f64>) -> PyResult<f64> {
    Ok(transfer::loudness(&sound_clip(clip)?))
}

#[pyfunction]
fn centroid(clip: Vec<f64>) -> PyResult<f64> {
    transfer::centroid(&sound_clip(clip)?).map_err(to_py)
}

/// `(mse, pearson_r)` of paired predictions and targets.
#[pyfunction]
fn regression_metrics(pred: Vec<f64>, gt: Vec<f64>) -> PyResult<(f64, f64)> {
    let m = transfer::regression_metrics(&pred, &gt).map_err(to_py)?;
    Ok((m.mse, m.pearson_r))
}

#[pyfunction]
fn load_feature_matrix(path: &str) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&svs_tessellate::load_feature_matrix(path).map_err(to_py)?))
}

#[pyfunction]
#[pyo3(signature = (path, data, dtype="f64"))]
fn save_feature_matrix(path: &str, data: Vec<Vec<f64>>, dtype: &str) -> PyResult<()> {
    let dtype = match dtype {
        "f64" => svs_tessellate::Dtype::F64,
        "f32" => svs_tessellate::Dtype::F32,
        other => return Err(PyValueError::new_err(format!("unknown dtype `{other}`"))),
    };
    svs_tessellate::save_feature_matrix(path, &matrix(data, "matrix")?, dtype).map_err(to_py)
}

/// Runs the `svs` command line in-process and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    svs_tessellate::cli::run(std::iter::once("svs".to_owned()).chain(args))
}

/// Tool and file-format versions as a JSON string.
#[pyfunction]
fn version() -> String {
    svs_tessellate::cli::version_info().to_string()
}

#[pymodule]
fn svs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SvsError", m.py().get_type::<SvsError>())?;
    m.add("NumericFailure", m.py().get_type::<NumericFailure>())?;
    m.add("FormatError", m.py().get_type::<FormatError>())?;
    m.add_class::<PyEmbedding>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyPredictor>()?;
    m.add_function(wrap_pyfunction!(tessellate, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(interval_iou, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(fmeasure, m)?)?;
    m.add_function(wrap_pyfunction!(loudness, m)?)?;
    m.add_function(wrap_pyfunction!(centroid, m)?)?;
    m.add_function(wrap_pyfunction!(regression_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(load_feature_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(save_feature_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
