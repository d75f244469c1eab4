//! JSON documents read and written by the subcommands.

use serde::{Deserialize, Serialize};

use crate::corpus::{ActionLabel, ClipRecord, ReferenceCorpus, Task};
use crate::tessellate::{Mode, TessellationPath};
use crate::transfer::{MapTable, RegressionMetrics};

pub const OUTPUT_FORMAT_VERSION: u32 = 1;

/// Result of `tessellate`: one entry per query video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TessellationOutput {
    pub format_version: u32,
    pub mode: Mode,
    pub task: Task,
    pub corpus_size: usize,
    pub videos: Vec<VideoOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoOutput {
    pub video_id: String,
    pub path_energy: f64,
    pub clips: Vec<ClipOutput>,
}

/// A query clip, its matched reference clip and the transferred payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipOutput {
    pub clip_index: usize,
    pub ref_id: usize,
    pub ref_video_id: String,
    pub ref_clip_index: usize,
    pub data_energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<ActionLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound: Option<Vec<f64>>,
    /// Frame count of the query clip, when the query manifest gives one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<usize>,
}

impl VideoOutput {
    pub fn new(video_id: &str, path: &TessellationPath, corpus: &ReferenceCorpus, query: &[ClipRecord]) -> Self {
        let clips = path
            .assignments
            .iter()
            .zip(&path.data_energies)
            .zip(query)
            .map(|((&j, &e), q)| {
                let r = &corpus.clips[j];
                let (importance, label, sound) = match corpus.task {
                    Task::Summary => (r.importance.clone(), None, None),
                    Task::Detect => (None, r.label, None),
                    Task::Sound => (None, None, r.sound.as_ref().map(|s| s.as_slice().to_vec())),
                    Task::Text => (None, None, None),
                };
                ClipOutput {
                    clip_index: q.clip_index,
                    ref_id: j,
                    ref_video_id: r.video_id.clone(),
                    ref_clip_index: r.clip_index,
                    data_energy: e,
                    importance,
                    label,
                    sound,
                    frame_count: q.frame_count,
                }
            })
            .collect();
        Self {
            video_id: video_id.to_owned(),
            path_energy: path.path_energy,
            clips,
        }
    }
}

/// Summarization ground truth: per-frame user annotations per video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryGroundTruth {
    pub videos: Vec<SummaryVideo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryVideo {
    pub video_id: String,
    /// Frames per query clip; falls back to the prediction's frame counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_frame_counts: Option<Vec<usize>>,
    /// One score or 0/1 mask per frame for each annotator.
    pub annotations: Vec<Vec<f64>>,
}

/// Detection ground truth. Interval bounds are in the same unit as
/// `clip_stride`, the length of one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectGroundTruth {
    #[serde(default = "one")]
    pub clip_stride: f64,
    pub intervals: Vec<GroundTruthInterval>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthInterval {
    pub video_id: String,
    pub start: f64,
    pub end: f64,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoundGroundTruth {
    pub clips: Vec<SoundClipTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoundClipTruth {
    pub video_id: String,
    pub clip_index: usize,
    pub sound: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryVideoScore {
    pub video_id: String,
    pub fmeasure: f64,
    pub kept_frames: usize,
    pub total_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub budget: f64,
    pub videos: Vec<SummaryVideoScore>,
    pub mean_fmeasure: f64,
}

/// One column of the detection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdColumn {
    pub iou: f64,
    pub mean_ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub columns: Vec<ThresholdColumn>,
    pub per_class: MapTable,
    pub detections: usize,
    pub ground_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundReport {
    pub clips: usize,
    pub loudness: RegressionMetrics,
    pub centroid: RegressionMetrics,
    /// Clips left out of the centroid score because a center row was silent.
    pub centroid_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Report {
    Summary(SummaryReport),
    Detect(DetectReport),
    Sound(SoundReport),
}

/// Hidden states of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthGroundTruth {
    pub kind: crate::synth::SynthKind,
    pub reference_states: Vec<usize>,
    pub queries: Vec<SynthQueryStates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthQueryStates {
    pub video_id: String,
    pub states: Vec<usize>,
}
