//! Synthetic corpora with known ground-truth states, and a brute-force
//! lattice solver used as an oracle for the Viterbi decoder.
//!
//! Both generators work directly in the joint space: the appearance of a
//! clip is its semantics plus isotropic Gaussian noise. Reference videos and
//! query videos come from the same process with independent noise draws.

use serde::{Deserialize, Serialize};

use crate::corpus::{ActionLabel, ClipRecord, QuerySequence, ReferenceCorpus, Task};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::SeededRng;
use crate::tessellate::{path_energy, squared_distance, CandidateSet, LatticePath, Mode, TessellationPath};

/// Largest lattice `brute_force_path` will enumerate.
pub const MAX_BRUTE_FORCE_PATHS: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Markov,
    Dynamics,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markov" => Ok(SynthKind::Markov),
            "dynamics" => Ok(SynthKind::Dynamics),
            _ => Err(Error::invalid(format!("unknown synth kind `{s}`"))),
        }
    }
}

fn default_scale() -> f64 {
    1.0
}

fn default_gain() -> f64 {
    1.5
}

fn default_frames() -> usize {
    8
}

fn default_classes() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    /// Markov: number of prototypes. Dynamics: number of distinct start points.
    pub n_states: usize,
    pub svs_dim: usize,
    /// Row-stochastic `n_states x n_states`; required by the Markov generator.
    #[serde(default)]
    pub transition_matrix: Option<Vec<Vec<f64>>>,
    pub noise_sigma: f64,
    /// Number of reference videos.
    pub videos: usize,
    pub clips_per_video: usize,
    /// Number of query videos; defaults to `videos`.
    #[serde(default)]
    pub query_videos: Option<usize>,
    /// Query video length; defaults to `clips_per_video`.
    #[serde(default)]
    pub query_clips_per_video: Option<usize>,
    /// Standard deviation of prototype coordinates.
    #[serde(default = "default_scale")]
    pub prototype_scale: f64,
    /// Spectral scale of the recurrence matrix, `W = gain · G / √d`.
    #[serde(default = "default_gain")]
    pub dynamics_gain: f64,
    #[serde(default = "default_frames")]
    pub frames_per_clip: usize,
    /// Action classes; label id `0` of each state cycle is background.
    #[serde(default = "default_classes")]
    pub n_classes: usize,
}

impl SynthSpec {
    /// Markov spec with a "sticky" chain: stay with probability `stay`,
    /// otherwise move uniformly to another state.
    pub fn sticky(seed: u64, n_states: usize, svs_dim: usize, stay: f64) -> Self {
        let off = if n_states > 1 { (1.0 - stay) / (n_states - 1) as f64 } else { 0.0 };
        let matrix = (0..n_states)
            .map(|i| (0..n_states).map(|j| if i == j { if n_states > 1 { stay } else { 1.0 } } else { off }).collect())
            .collect();
        Self {
            seed,
            n_states,
            svs_dim,
            transition_matrix: Some(matrix),
            noise_sigma: 0.5,
            videos: 10,
            clips_per_video: 10,
            query_videos: None,
            query_clips_per_video: None,
            prototype_scale: 1.0,
            dynamics_gain: 1.5,
            frames_per_clip: 8,
            n_classes: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.svs_dim == 0 {
            return Err(Error::invalid("n_states and svs_dim must be positive"));
        }
        if self.videos == 0 || self.clips_per_video == 0 {
            return Err(Error::invalid("videos and clips_per_video must be positive"));
        }
        if self.query_videos == Some(0) || self.query_clips_per_video == Some(0) {
            return Err(Error::invalid("query_videos and query_clips_per_video must be positive"));
        }
        if self.frames_per_clip == 0 {
            return Err(Error::invalid("frames_per_clip must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be a finite non-negative number"));
        }
        if !(self.prototype_scale >= 0.0 && self.prototype_scale.is_finite()) {
            return Err(Error::invalid("prototype_scale must be finite and non-negative"));
        }
        if !self.dynamics_gain.is_finite() {
            return Err(Error::invalid("dynamics_gain must be finite"));
        }
        if let Some(t) = &self.transition_matrix {
            if t.len() != self.n_states || t.iter().any(|row| row.len() != self.n_states) {
                return Err(Error::invalid(format!(
                    "transition matrix must be {0} x {0}",
                    self.n_states
                )));
            }
            for (i, row) in t.iter().enumerate() {
                if row.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                    return Err(Error::invalid(format!("transition row {i} has a negative or non-finite entry")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::invalid(format!("transition row {i} sums to {sum}, not 1")));
                }
            }
        }
        Ok(())
    }

    fn query_count(&self) -> usize {
        self.query_videos.unwrap_or(self.videos)
    }

    fn query_len(&self) -> usize {
        self.query_clips_per_video.unwrap_or(self.clips_per_video)
    }
}

/// A generated corpus with ground truth for every reference and query clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub kind: SynthKind,
    /// Reference clips in `(video_id, clip_index)` order; `appearance` and
    /// `semantics_vector` are already joint-space coordinates.
    pub reference: Vec<ClipRecord>,
    /// Hidden state of each reference clip.
    pub reference_states: Vec<usize>,
    /// Query clips with their true payloads.
    pub queries: Vec<Vec<ClipRecord>>,
    pub query_states: Vec<Vec<usize>>,
    /// Noise-free semantics of every query clip.
    pub query_semantics: Vec<Vec<Vec<f64>>>,
}

impl SynthCorpus {
    /// Reference corpus whose semantics are the clean state vectors and whose
    /// appearance rows are the noisy observations.
    pub fn corpus(&self, task: Task) -> Result<ReferenceCorpus> {
        let sem: Vec<Vec<f64>> = self
            .reference
            .iter()
            .map(|c| c.semantics_vector.clone().expect("generated clips carry semantics"))
            .collect();
        let app: Vec<Vec<f64>> = self.reference.iter().map(|c| c.appearance.clone()).collect();
        ReferenceCorpus::from_parts(
            task,
            self.reference.clone(),
            FeatureMatrix::from_rows(&sem)?,
            Some(FeatureMatrix::from_rows(&app)?),
        )
    }

    pub fn query_sequences(&self) -> Result<Vec<QuerySequence>> {
        self.queries
            .iter()
            .map(|clips| {
                let rows: Vec<Vec<f64>> = clips.iter().map(|c| c.appearance.clone()).collect();
                Ok(QuerySequence::new(clips[0].video_id.clone(), FeatureMatrix::from_rows(&rows)?))
            })
            .collect()
    }

    /// Fraction of query clips assigned to a reference clip with the same
    /// hidden state. `paths[q]` holds the assignments of query `q`.
    pub fn state_accuracy(&self, paths: &[Vec<usize>]) -> Result<f64> {
        if paths.len() != self.query_states.len() {
            return Err(Error::invalid("one path per query video is required"));
        }
        let mut hits = 0usize;
        let mut total = 0usize;
        for (path, truth) in paths.iter().zip(&self.query_states) {
            if path.len() != truth.len() {
                return Err(Error::invalid("path length differs from query length"));
            }
            for (&j, &s) in path.iter().zip(truth) {
                let r = *self
                    .reference_states
                    .get(j)
                    .ok_or_else(|| Error::invalid(format!("ref_id {j} outside corpus")))?;
                hits += usize::from(r == s);
                total += 1;
            }
        }
        Ok(hits as f64 / total as f64)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn gaussian_vector(rng: &mut SeededRng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.normal()).collect()
}

struct Payload<'a> {
    spec: &'a SynthSpec,
}

impl Payload<'_> {
    /// `group` decides the action label; importance follows the first
    /// semantic coordinate.
    fn clip(&self, video: &str, index: usize, semantics: &[f64], appearance: Vec<f64>, group: usize) -> ClipRecord {
        let spec = self.spec;
        let mut c = ClipRecord::new(video, index, appearance);
        c.importance = Some(vec![sigmoid(semantics[0]); spec.frames_per_clip]);
        let cycle = group % (spec.n_classes + 1);
        c.label = Some(if cycle == 0 {
            ActionLabel::BACKGROUND
        } else {
            ActionLabel::Class((cycle - 1) as u32)
        });
        c.semantics_vector = Some(semantics.to_vec());
        c.frame_count = Some(spec.frames_per_clip);
        c.clip_stride_frames = Some(spec.frames_per_clip as f64);
        c
    }
}

fn video_id(prefix: &str, v: usize) -> String {
    format!("{prefix}-{v:05}")
}

type Sequence = (Vec<ClipRecord>, Vec<usize>, Vec<Vec<f64>>);

fn assemble(kind: SynthKind, spec: &SynthSpec, mut make: impl FnMut(&str, usize) -> Sequence) -> SynthCorpus {
    let mut reference = Vec::new();
    let mut reference_states = Vec::new();
    for v in 0..spec.videos {
        let (clips, states, _) = make(&video_id("ref", v), spec.clips_per_video);
        reference.extend(clips);
        reference_states.extend(states);
    }
    let mut queries = Vec::new();
    let mut query_states = Vec::new();
    let mut query_semantics = Vec::new();
    for v in 0..spec.query_count() {
        let (clips, states, sem) = make(&video_id("query", v), spec.query_len());
        queries.push(clips);
        query_states.push(states);
        query_semantics.push(sem);
    }
    SynthCorpus {
        kind,
        reference,
        reference_states,
        queries,
        query_states,
        query_semantics,
    }
}

/// Videos are Markov chains over `n_states` prototypes. A clip's semantics
/// is its state's prototype; its appearance adds `N(0, σ²)` noise.
pub fn gen_markov_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let transitions = spec
        .transition_matrix
        .as_ref()
        .ok_or_else(|| Error::invalid("the markov generator needs a transition_matrix"))?;
    let mut rng = SeededRng::new(spec.seed);
    let d = spec.svs_dim;
    let prototypes: Vec<Vec<f64>> = (0..spec.n_states)
        .map(|_| gaussian_vector(&mut rng, d, spec.prototype_scale))
        .collect();
    let initial = vec![1.0; spec.n_states];
    let payload = Payload { spec };
    Ok(assemble(SynthKind::Markov, spec, |video, len| {
        let mut clips = Vec::with_capacity(len);
        let mut states = Vec::with_capacity(len);
        let mut sem = Vec::with_capacity(len);
        let mut state = rng.categorical(&initial);
        for i in 0..len {
            if i > 0 {
                state = rng.categorical(&transitions[state]);
            }
            let p = &prototypes[state];
            let appearance: Vec<f64> = p.iter().map(|x| x + spec.noise_sigma * rng.normal()).collect();
            clips.push(payload.clip(video, i, p, appearance, state));
            states.push(state);
            sem.push(p.clone());
        }
        (clips, states, sem)
    }))
}

/// Videos follow `sᵢ = tanh(W sᵢ₋₁)` from one of `n_states` random start
/// points. The hidden state of clip `i` of a video started at point `k` is
/// `k · T + i`, with `T` the longer of the reference and query lengths, so
/// equal states mean equal semantics.
pub fn gen_dynamics_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = SeededRng::new(spec.seed);
    let d = spec.svs_dim;
    let starts: Vec<Vec<f64>> = (0..spec.n_states)
        .map(|_| gaussian_vector(&mut rng, d, spec.prototype_scale))
        .collect();
    let w_scale = spec.dynamics_gain / (d as f64).sqrt();
    let w: Vec<Vec<f64>> = (0..d).map(|_| gaussian_vector(&mut rng, d, w_scale)).collect();
    let horizon = spec.clips_per_video.max(spec.query_len());
    let trajectories: Vec<Vec<Vec<f64>>> = starts
        .iter()
        .map(|s0| {
            let mut out = vec![s0.clone()];
            for _ in 1..horizon {
                let prev = out.last().unwrap();
                out.push(
                    w.iter()
                        .map(|row| row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>().tanh())
                        .collect(),
                );
            }
            out
        })
        .collect();
    let uniform = vec![1.0; spec.n_states];
    let payload = Payload { spec };
    Ok(assemble(SynthKind::Dynamics, spec, |video, len| {
        let k = rng.categorical(&uniform);
        let mut clips = Vec::with_capacity(len);
        let mut states = Vec::with_capacity(len);
        for (i, s) in trajectories[k][..len].iter().enumerate() {
            let appearance: Vec<f64> = s.iter().map(|x| x + spec.noise_sigma * rng.normal()).collect();
            clips.push(payload.clip(video, i, s, appearance, k));
            states.push(k * horizon + i);
        }
        (clips, states, trajectories[k][..len].to_vec())
    }))
}

pub fn generate(kind: SynthKind, spec: &SynthSpec) -> Result<SynthCorpus> {
    match kind {
        SynthKind::Markov => gen_markov_corpus(spec),
        SynthKind::Dynamics => gen_dynamics_corpus(spec),
    }
}

/// Enumerates every path through the lattice. Among minimum-energy paths the
/// lexicographically smallest `ref_id` sequence wins, as in the Viterbi
/// decoder.
pub fn brute_force_path_with<F>(candidates: &[CandidateSet], transition: F) -> Result<LatticePath>
where
    F: Fn(usize, usize) -> f64,
{
    if let Some(i) = candidates.iter().position(CandidateSet::is_empty) {
        return Err(Error::invalid(format!("clip {i} has no candidates")));
    }
    let total = candidates
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    if total > MAX_BRUTE_FORCE_PATHS {
        return Err(Error::ResourceLimit(format!(
            "lattice has {total} paths; brute force is limited to {MAX_BRUTE_FORCE_PATHS}"
        )));
    }
    let m = candidates.len();
    let mut idx = vec![0usize; m];
    let mut best: Option<LatticePath> = None;
    loop {
        let assignments: Vec<usize> = idx.iter().zip(candidates).map(|(&k, s)| s.entries[k].ref_id).collect();
        let data: Vec<f64> = idx.iter().zip(candidates).map(|(&k, s)| s.entries[k].data_energy).collect();
        let energy = path_energy(&assignments, &data, &transition);
        let better = match &best {
            None => true,
            Some(b) => energy < b.energy || (energy == b.energy && assignments < b.assignments),
        };
        if better {
            best = Some(LatticePath {
                assignments,
                data_energies: data,
                energy,
            });
        }
        // odometer increment, last clip fastest
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(best.expect("at least one path"));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < candidates[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Brute-force counterpart of Viterbi tessellation with semantic smoothness
/// transitions `‖Vˢₐ − Vˢ_b‖²`.
pub fn brute_force_path(candidates: &[CandidateSet], semantics: &FeatureMatrix) -> Result<TessellationPath> {
    if let Some(bad) = candidates
        .iter()
        .flat_map(|s| &s.entries)
        .find(|c| c.ref_id >= semantics.rows())
    {
        return Err(Error::invalid(format!("candidate ref_id {} outside corpus", bad.ref_id)));
    }
    let p = brute_force_path_with(candidates, |a, b| squared_distance(semantics.row(a), semantics.row(b)))?;
    Ok(TessellationPath {
        mode: Mode::Viterbi,
        assignments: p.assignments,
        data_energies: p.data_energies,
        path_energy: p.energy,
    })
}
