//! Clip/video data model, manifest ingestion and the embedded reference corpus.

mod manifest;
mod store;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use manifest::{load_manifest, manifest_feature_files, ManifestLine, DATA_DIR_ENV, MANIFEST_VERSION};
pub use store::{BuiltCorpus, CORPUS_FORMAT_VERSION};

use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::transfer::SoundFeatureClip;

/// Which semantics a corpus transfers; decides how `Vˢ` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Caption-embedding semantics, projected by the joint map.
    Text,
    /// Per-frame importance scores.
    Summary,
    /// Action-class labels.
    Detect,
    /// 15 x 126 sound feature clips.
    Sound,
}

impl Task {
    /// Low-information labels share the appearance space.
    pub fn semantics_same_as_appearance(self) -> bool {
        !matches!(self, Task::Text)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Text => "text",
            Task::Summary => "summary",
            Task::Detect => "detect",
            Task::Sound => "sound",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Task::Text),
            "summary" => Ok(Task::Summary),
            "detect" => Ok(Task::Detect),
            "sound" => Ok(Task::Sound),
            _ => Err(Error::invalid(format!("unknown task `{s}`"))),
        }
    }
}

/// Action-class label; background clips carry no action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionLabel {
    Class(u32),
    Background(BackgroundTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundTag {
    Background,
}

impl ActionLabel {
    pub const BACKGROUND: ActionLabel = ActionLabel::Background(BackgroundTag::Background);

    pub fn class(self) -> Option<u32> {
        match self {
            ActionLabel::Class(c) => Some(c),
            ActionLabel::Background(_) => None,
        }
    }
}

/// One reference or query clip with its pooled appearance and payloads.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub video_id: String,
    pub clip_index: usize,
    /// Pooled clip representation `A`.
    pub appearance: Vec<f64>,
    /// Semantic embedding `S` (caption embedding for the text task).
    pub semantics_vector: Option<Vec<f64>>,
    pub importance: Option<Vec<f64>>,
    pub label: Option<ActionLabel>,
    pub sound: Option<SoundFeatureClip>,
    pub frame_count: Option<usize>,
    pub clip_stride_frames: Option<f64>,
}

impl ClipRecord {
    pub fn new(video_id: impl Into<String>, clip_index: usize, appearance: Vec<f64>) -> Self {
        Self {
            video_id: video_id.into(),
            clip_index,
            appearance,
            semantics_vector: None,
            importance: None,
            label: None,
            sound: None,
            frame_count: None,
            clip_stride_frames: None,
        }
    }

    fn describe(&self) -> String {
        format!("video `{}` clip {}", self.video_id, self.clip_index)
    }
}

/// Sorts records by `(video_id, clip_index)` and checks each video's clip
/// indices run consecutively from 0. Returns the per-video row ranges.
pub fn order_records(records: &mut [ClipRecord]) -> Result<Vec<Range<usize>>> {
    records.sort_by(|a, b| {
        a.video_id
            .cmp(&b.video_id)
            .then(a.clip_index.cmp(&b.clip_index))
    });
    let mut bounds = Vec::new();
    let mut start = 0;
    for i in 0..records.len() {
        let r = &records[i];
        if i > start && records[i - 1].video_id == r.video_id {
            let prev = records[i - 1].clip_index;
            if prev == r.clip_index {
                return Err(Error::Ingestion(format!("duplicate record {}", r.describe())));
            }
            if r.clip_index != prev + 1 {
                return Err(Error::Ingestion(format!(
                    "gap in clip_index before {}: previous index is {prev}",
                    r.describe()
                )));
            }
        } else {
            if i > start {
                bounds.push(start..i);
                start = i;
            }
            if r.clip_index != 0 {
                return Err(Error::Ingestion(format!(
                    "gap in clip_index: {} is the first clip of its video",
                    r.describe()
                )));
            }
        }
    }
    if !records.is_empty() {
        bounds.push(start..records.len());
    }
    Ok(bounds)
}

/// Reference clips embedded in the joint space, grouped by source video.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCorpus {
    pub task: Task,
    pub clips: Vec<ClipRecord>,
    /// `N x svs_dim`, the points `Vˢⱼ`.
    pub svs_semantics: FeatureMatrix,
    /// `N x svs_dim`, the points `Vᴬⱼ`.
    pub svs_appearance: Option<FeatureMatrix>,
    pub video_boundaries: Vec<Range<usize>>,
}

impl ReferenceCorpus {
    /// Assembles a corpus from pre-embedded rows. Records are reordered by
    /// `(video_id, clip_index)` and the matrices permuted to match.
    pub fn from_parts(
        task: Task,
        clips: Vec<ClipRecord>,
        svs_semantics: FeatureMatrix,
        svs_appearance: Option<FeatureMatrix>,
    ) -> Result<Self> {
        let n = clips.len();
        if svs_semantics.rows() != n {
            return Err(Error::invalid(format!(
                "{n} clips but {} semantics rows",
                svs_semantics.rows()
            )));
        }
        if let Some(a) = &svs_appearance {
            if a.rows() != n || a.cols() != svs_semantics.cols() {
                return Err(Error::invalid("appearance rows do not match semantics rows"));
            }
        }
        let mut tagged: Vec<(usize, ClipRecord)> = clips.into_iter().enumerate().collect();
        tagged.sort_by(|(_, a), (_, b)| {
            a.video_id
                .cmp(&b.video_id)
                .then(a.clip_index.cmp(&b.clip_index))
        });
        let order: Vec<usize> = tagged.iter().map(|(i, _)| *i).collect();
        let mut clips: Vec<ClipRecord> = tagged.into_iter().map(|(_, c)| c).collect();
        let video_boundaries = order_records(&mut clips)?;
        Ok(Self {
            task,
            clips,
            svs_semantics: svs_semantics.select_rows(&order),
            svs_appearance: svs_appearance.map(|a| a.select_rows(&order)),
            video_boundaries,
        })
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn svs_dim(&self) -> usize {
        self.svs_semantics.cols()
    }

    pub fn semantics(&self, j: usize) -> &[f64] {
        self.svs_semantics.row(j)
    }

    /// Consecutive-clip pairs `(j, j+1)` inside one video.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.video_boundaries
            .iter()
            .flat_map(|r| (r.start..r.end.saturating_sub(1)).map(|j| (j, j + 1)))
    }

    pub fn transition_count(&self) -> usize {
        self.video_boundaries
            .iter()
            .map(|r| r.len().saturating_sub(1))
            .sum()
    }

    pub fn video_of(&self, j: usize) -> usize {
        self.video_boundaries
            .partition_point(|r| r.end <= j)
    }
}

/// Embeds reference records into the joint space for `task`.
///
/// Text semantics are projected by the semantics map; every other task takes
/// the projected appearance as its semantics.
pub fn build_corpus(
    records: Vec<ClipRecord>,
    embedding: &EmbeddingModel,
    task: Task,
) -> Result<ReferenceCorpus> {
    let mut records = records;
    order_records(&mut records)?;
    for r in &records {
        let missing = match task {
            Task::Text => r.semantics_vector.is_none(),
            Task::Summary => r.importance.is_none(),
            Task::Detect => r.label.is_none(),
            Task::Sound => r.sound.is_none(),
        };
        if missing {
            return Err(Error::invalid(format!(
                "{} lacks the payload required by the {task} task",
                r.describe()
            )));
        }
    }
    let appearance_rows = records
        .iter()
        .map(|r| embedding.project_appearance(&r.appearance))
        .collect::<Result<Vec<_>>>()?;
    let svs_appearance = to_matrix(appearance_rows, embedding.svs_dim())?;
    let svs_semantics = if task.semantics_same_as_appearance() {
        svs_appearance.clone()
    } else {
        let rows = records
            .iter()
            .map(|r| embedding.project_semantics(r.semantics_vector.as_deref().unwrap()))
            .collect::<Result<Vec<_>>>()?;
        to_matrix(rows, embedding.svs_dim())?
    };
    ReferenceCorpus::from_parts(task, records, svs_semantics, Some(svs_appearance))
}

fn to_matrix(rows: Vec<Vec<f64>>, cols: usize) -> Result<FeatureMatrix> {
    if rows.is_empty() {
        Ok(FeatureMatrix::zeros(0, cols))
    } else {
        FeatureMatrix::from_rows(&rows)
    }
}

/// One query video's clips in the joint space, in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySequence {
    pub video_id: String,
    /// `M x svs_dim`, the points `Uᴬᵢ`.
    pub svs_appearance: FeatureMatrix,
}

impl QuerySequence {
    pub fn new(video_id: impl Into<String>, svs_appearance: FeatureMatrix) -> Self {
        Self {
            video_id: video_id.into(),
            svs_appearance,
        }
    }

    pub fn len(&self) -> usize {
        self.svs_appearance.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.svs_appearance.rows() == 0
    }
}

/// Groups query records by video and projects them with `embedding`.
/// Returns the sequences together with the records of each video.
pub fn queries_from_records(
    records: Vec<ClipRecord>,
    embedding: &EmbeddingModel,
) -> Result<Vec<(QuerySequence, Vec<ClipRecord>)>> {
    let mut records = records;
    let bounds = order_records(&mut records)?;
    let mut out = Vec::with_capacity(bounds.len());
    let mut iter = records.into_iter();
    for range in bounds {
        let clips: Vec<ClipRecord> = iter.by_ref().take(range.len()).collect();
        let rows = clips
            .iter()
            .map(|c| embedding.project_appearance(&c.appearance))
            .collect::<Result<Vec<_>>>()?;
        let seq = QuerySequence::new(clips[0].video_id.clone(), to_matrix(rows, embedding.svs_dim())?);
        out.push((seq, clips));
    }
    Ok(out)
}
