//! Supervised tessellation: an LSTM predicts each clip's semantics from the
//! previously assigned semantics and the clip's appearance, and the
//! prediction is snapped to the nearest surviving candidate.

mod lstm;
mod train;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

pub use lstm::{lstm_step, loss_and_gradient, sequence_loss, LstmLayer, LstmState, PredictorModel, TrainingSequence};
pub use train::{corpus_sequences, train_on_sequences, train_predictor, BatchPolicy, TrainedPredictor, TrainingConfig};

use crate::corpus::{QuerySequence, ReferenceCorpus};
use crate::embedding::NamedMatrices;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::tessellate::{
    knn_candidates, path_energy, squared_distance, CandidateParams, CandidateSet, Mode, TessellationPath,
};

pub const PREDICTOR_FORMAT_VERSION: u32 = 1;

/// Anything that can drive supervised tessellation one clip at a time.
pub trait SemanticsPredictor {
    type State;

    fn initial_state(&self) -> Self::State;

    fn svs_dim(&self) -> usize;

    /// Predicts `Vˢᵢ` given the previously assigned semantics and `Uᴬᵢ`.
    fn predict(&self, prev_semantics: &[f64], appearance: &[f64], state: &Self::State) -> Result<(Vec<f64>, Self::State)>;
}

impl SemanticsPredictor for PredictorModel {
    type State = LstmState;

    fn initial_state(&self) -> LstmState {
        self.zero_state()
    }

    fn svs_dim(&self) -> usize {
        PredictorModel::svs_dim(self)
    }

    fn predict(&self, prev: &[f64], appearance: &[f64], state: &LstmState) -> Result<(Vec<f64>, LstmState)> {
        self.step(prev, appearance, state)
    }
}

/// Sequential snapping over precomputed candidate sets.
pub fn tessellate_supervised_on<P: SemanticsPredictor>(
    query: &QuerySequence,
    candidates: &[CandidateSet],
    corpus: &ReferenceCorpus,
    predictor: &P,
) -> Result<TessellationPath> {
    let d = corpus.svs_dim();
    if predictor.svs_dim() != d {
        return Err(Error::invalid(format!(
            "predictor dimension {} does not match corpus dimension {d}",
            predictor.svs_dim()
        )));
    }
    if candidates.len() != query.len() {
        return Err(Error::invalid("one candidate set per query clip is required"));
    }
    let mut prev = vec![0.0; d];
    let mut state = predictor.initial_state();
    let mut assignments = Vec::with_capacity(query.len());
    let mut data_energies = Vec::with_capacity(query.len());
    for (i, set) in candidates.iter().enumerate() {
        let (pred, next) = predictor.predict(&prev, query.svs_appearance.row(i), &state)?;
        state = next;
        let mut best: Option<(f64, usize, f64)> = None;
        for c in &set.entries {
            let dist = squared_distance(&pred, corpus.semantics(c.ref_id));
            let better = match best {
                None => true,
                Some((bd, bid, _)) => dist < bd || (dist == bd && c.ref_id < bid),
            };
            if better {
                best = Some((dist, c.ref_id, c.data_energy));
            }
        }
        let (_, j, e) = best.ok_or_else(|| Error::invalid(format!("clip {i} has no candidates")))?;
        assignments.push(j);
        data_energies.push(e);
        prev.copy_from_slice(corpus.semantics(j));
    }
    let semantics = &corpus.svs_semantics;
    let energy = path_energy(&assignments, &data_energies, |a, b| {
        squared_distance(semantics.row(a), semantics.row(b))
    });
    Ok(TessellationPath {
        mode: Mode::Supervised,
        assignments,
        data_energies,
        path_energy: energy,
    })
}

/// Predict-then-snap tessellation. Clip `i` is fed the semantics assigned
/// at `i − 1` (zero for the first clip), and the candidate nearest to the
/// prediction is assigned; ties go to the lowest `ref_id`.
pub fn tessellate_supervised<P: SemanticsPredictor>(
    query: &QuerySequence,
    corpus: &ReferenceCorpus,
    predictor: &P,
    params: CandidateParams,
) -> Result<TessellationPath> {
    if query.is_empty() {
        return Err(Error::invalid("query has no clips"));
    }
    let candidates = knn_candidates(query, corpus, params)?;
    tessellate_supervised_on(query, &candidates, corpus, predictor)
}

fn dvec(v: &DVector<f64>) -> FeatureMatrix {
    FeatureMatrix::new(1, v.len(), v.iter().copied().collect()).expect("1xn")
}

fn dmat(m: &DMatrix<f64>) -> FeatureMatrix {
    FeatureMatrix::from_dmatrix(m)
}

impl PredictorModel {
    pub fn to_container(&self, loss_history: &[f64]) -> NamedMatrices {
        let mut out = NamedMatrices::new(json!({
            "kind": "predictor",
            "format_version": PREDICTOR_FORMAT_VERSION,
            "svs_dim": self.svs_dim(),
            "hidden": self.hidden_sizes(),
            "gate_order": "input,forget,candidate,output",
            "loss_history": loss_history,
        }));
        for (l, layer) in self.layers.iter().enumerate() {
            out.push(format!("layer{l}.w_input"), dmat(&layer.w_input));
            out.push(format!("layer{l}.w_hidden"), dmat(&layer.w_hidden));
            out.push(format!("layer{l}.bias"), dvec(&layer.bias));
        }
        out.push("output.weight", dmat(&self.output_weight));
        out.push("output.bias", dvec(&self.output_bias));
        out
    }

    /// Returns the model and the stored loss history.
    pub fn from_container(src: &NamedMatrices) -> Result<(Self, Vec<f64>)> {
        let meta = &src.metadata;
        if meta.get("kind").and_then(Value::as_str) != Some("predictor") {
            return Err(Error::invalid("container does not hold a predictor model"));
        }
        if meta.get("format_version").and_then(Value::as_u64) != Some(PREDICTOR_FORMAT_VERSION as u64) {
            return Err(Error::invalid("unsupported predictor format_version"));
        }
        let to_vec = |m: &FeatureMatrix| DVector::from_column_slice(m.as_slice());
        let layers = (0..2)
            .map(|l| {
                Ok(LstmLayer {
                    w_input: src.get(&format!("layer{l}.w_input"))?.to_dmatrix(),
                    w_hidden: src.get(&format!("layer{l}.w_hidden"))?.to_dmatrix(),
                    bias: to_vec(src.get(&format!("layer{l}.bias"))?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = PredictorModel {
            layers,
            output_weight: src.get("output.weight")?.to_dmatrix(),
            output_bias: to_vec(src.get("output.bias")?),
        };
        model.validate()?;
        let history = meta
            .get("loss_history")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default();
        Ok((model, history))
    }

    pub fn save(&self, path: impl AsRef<Path>, loss_history: &[f64]) -> Result<()> {
        self.to_container(loss_history).save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Vec<f64>)> {
        Self::from_container(&NamedMatrices::load(path)?)
    }
}
