use serde::{Deserialize, Serialize};

use super::lstm::{loss_and_gradient, PredictorModel, TrainingSequence};
use crate::corpus::ReferenceCorpus;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchPolicy {
    /// One update per video sequence, videos shuffled each epoch.
    PerVideo,
    /// One update per epoch from the gradient averaged over all steps.
    FullCorpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: BatchPolicy,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            hidden: 1000,
            learning_rate: 1e-3,
            epochs: 100,
            batch: BatchPolicy::PerVideo,
            clip_norm: 5.0,
            seed: 7,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden size must be positive"));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(Error::invalid("clip_norm must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPredictor {
    pub model: PredictorModel,
    /// Mean training loss of each epoch, step-weighted across videos.
    pub loss_history: Vec<f64>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &PredictorModel, lr: f64) -> Self {
        let shapes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, model: &mut PredictorModel, grad: &PredictorModel) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t);
        let bc2 = 1.0 - Self::BETA2.powi(self.t);
        for (k, (p, g)) in model.parameters_mut().into_iter().zip(grad.parameters()).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + Self::EPS);
            }
        }
    }
}

fn clip_gradient(grad: &mut PredictorModel, max_norm: f64) {
    if max_norm == 0.0 {
        return;
    }
    let norm = grad
        .parameters()
        .iter()
        .flat_map(|t| t.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for t in grad.parameters_mut() {
            t.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

fn accumulate(into: &mut PredictorModel, g: &PredictorModel, weight: f64) {
    for (a, b) in into.parameters_mut().into_iter().zip(g.parameters()) {
        a.iter_mut().zip(b).for_each(|(x, y)| *x += weight * y);
    }
}

/// Per-video teacher-forced sequences from a reference corpus.
pub fn corpus_sequences(corpus: &ReferenceCorpus) -> Result<Vec<TrainingSequence>> {
    let appearance = corpus
        .svs_appearance
        .as_ref()
        .ok_or_else(|| Error::invalid("corpus carries no SVS appearance rows"))?;
    Ok(corpus
        .video_boundaries
        .iter()
        .map(|r| TrainingSequence {
            appearance: r.clone().map(|j| appearance.row(j).to_vec()).collect(),
            semantics: r.clone().map(|j| corpus.semantics(j).to_vec()).collect(),
        })
        .collect())
}

/// Trains the predictor by BPTT over each reference video, minimizing the
/// squared error between predicted and ground-truth next semantics.
pub fn train_predictor(corpus: &ReferenceCorpus, config: &TrainingConfig) -> Result<TrainedPredictor> {
    config.validate()?;
    if corpus.transition_count() == 0 {
        return Err(Error::invalid(
            "corpus has no consecutive clip pairs to train on",
        ));
    }
    let sequences = corpus_sequences(corpus)?;
    train_on_sequences(&sequences, corpus.svs_dim(), config)
}

pub fn train_on_sequences(
    sequences: &[TrainingSequence],
    svs_dim: usize,
    config: &TrainingConfig,
) -> Result<TrainedPredictor> {
    config.validate()?;
    let total_steps: usize = sequences.iter().map(TrainingSequence::len).sum();
    if total_steps == 0 {
        return Err(Error::invalid("no training steps"));
    }
    let mut model = PredictorModel::new(svs_dim, config.hidden, config.seed)?;
    let mut adam = Adam::new(&model, config.learning_rate);
    let mut rng = SeededRng::new(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        match config.batch {
            BatchPolicy::PerVideo => {
                rng.shuffle(&mut order);
                for &v in &order {
                    let seq = &sequences[v];
                    if seq.is_empty() {
                        continue;
                    }
                    let (loss, mut grad) = loss_and_gradient(&model, seq)?;
                    epoch_loss += loss * seq.len() as f64;
                    clip_gradient(&mut grad, config.clip_norm);
                    adam.step(&mut model, &grad);
                }
            }
            BatchPolicy::FullCorpus => {
                let mut total = PredictorModel::zeros(svs_dim, config.hidden);
                for seq in sequences.iter().filter(|s| !s.is_empty()) {
                    let (loss, grad) = loss_and_gradient(&model, seq)?;
                    let w = seq.len() as f64 / total_steps as f64;
                    epoch_loss += loss * seq.len() as f64;
                    accumulate(&mut total, &grad, w);
                }
                clip_gradient(&mut total, config.clip_norm);
                adam.step(&mut model, &total);
            }
        }
        let mean = epoch_loss / total_steps as f64;
        if !mean.is_finite() {
            return Err(Error::numeric(format!("training diverged at epoch {epoch}")));
        }
        loss_history.push(mean);
    }
    Ok(TrainedPredictor { model, loss_history })
}
