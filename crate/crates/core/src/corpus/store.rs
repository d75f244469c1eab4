//! Persistence of an embedded reference corpus together with the embedding
//! that produced it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ActionLabel, ClipRecord, ReferenceCorpus, Task};
use crate::embedding::{EmbeddingModel, NamedMatrices};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::transfer::SoundFeatureClip;

pub const CORPUS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltCorpus {
    pub corpus: ReferenceCorpus,
    pub embedding: EmbeddingModel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipMeta {
    video_id: String,
    clip_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    importance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<ActionLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clip_stride_frames: Option<f64>,
    has_semantics_vector: bool,
    has_sound: bool,
}

fn stack(rows: Vec<&[f64]>, cols: usize) -> FeatureMatrix {
    if rows.is_empty() {
        FeatureMatrix::zeros(0, cols)
    } else {
        FeatureMatrix::from_rows(&rows).expect("equal row lengths")
    }
}

impl BuiltCorpus {
    pub fn to_container(&self) -> Result<NamedMatrices> {
        let c = &self.corpus;
        let clips: Vec<ClipMeta> = c
            .clips
            .iter()
            .map(|r| ClipMeta {
                video_id: r.video_id.clone(),
                clip_index: r.clip_index,
                importance: r.importance.clone(),
                label: r.label,
                frame_count: r.frame_count,
                clip_stride_frames: r.clip_stride_frames,
                has_semantics_vector: r.semantics_vector.is_some(),
                has_sound: r.sound.is_some(),
            })
            .collect();
        let app_dim = c.clips.first().map_or(0, |r| r.appearance.len());
        let sem_dim = c
            .clips
            .iter()
            .find_map(|r| r.semantics_vector.as_ref().map(Vec::len))
            .unwrap_or(0);
        if c.clips.iter().any(|r| r.appearance.len() != app_dim)
            || c.clips
                .iter()
                .filter_map(|r| r.semantics_vector.as_ref())
                .any(|s| s.len() != sem_dim)
        {
            return Err(Error::invalid("clips have inconsistent feature dimensions"));
        }
        let meta = json!({
            "kind": "corpus",
            "format_version": CORPUS_FORMAT_VERSION,
            "task": c.task,
            "has_svs_appearance": c.svs_appearance.is_some(),
            "embedding": self.embedding.metadata(),
            "clips": clips,
        });
        let mut out = NamedMatrices::new(meta);
        out.push("svs_semantics", c.svs_semantics.clone());
        if let Some(a) = &c.svs_appearance {
            out.push("svs_appearance", a.clone());
        }
        out.push(
            "appearance",
            stack(c.clips.iter().map(|r| r.appearance.as_slice()).collect(), app_dim),
        );
        out.push(
            "semantics_vector",
            stack(
                c.clips.iter().filter_map(|r| r.semantics_vector.as_deref()).collect(),
                sem_dim,
            ),
        );
        out.push(
            "sound",
            stack(
                c.clips.iter().filter_map(|r| r.sound.as_ref().map(|s| s.as_slice())).collect(),
                SoundFeatureClip::LEN,
            ),
        );
        self.embedding.write_entries(&mut out, "embedding.");
        Ok(out)
    }

    pub fn from_container(src: &NamedMatrices) -> Result<Self> {
        let meta = &src.metadata;
        let bad = |what: &str| Error::invalid(format!("corpus container: {what}"));
        if meta.get("kind").and_then(Value::as_str) != Some("corpus") {
            return Err(bad("not a corpus container"));
        }
        if meta.get("format_version").and_then(Value::as_u64) != Some(CORPUS_FORMAT_VERSION as u64) {
            return Err(bad("unsupported format_version"));
        }
        let task: Task = serde_json::from_value(meta.get("task").cloned().unwrap_or(Value::Null))
            .map_err(|_| bad("bad task"))?;
        let clip_meta: Vec<ClipMeta> =
            serde_json::from_value(meta.get("clips").cloned().unwrap_or(Value::Null))
                .map_err(|e| bad(&format!("bad clips: {e}")))?;
        let embedding = EmbeddingModel::read_entries(
            src,
            "embedding.",
            meta.get("embedding").ok_or_else(|| bad("missing embedding"))?,
        )?;
        let appearance = src.get("appearance")?;
        let semantics = src.get("semantics_vector")?;
        let sound = src.get("sound")?;
        if appearance.rows() != clip_meta.len() {
            return Err(bad("appearance rows do not match clip list"));
        }
        let (mut si, mut ai) = (0, 0);
        let mut clips = Vec::with_capacity(clip_meta.len());
        for (j, m) in clip_meta.into_iter().enumerate() {
            let mut r = ClipRecord::new(m.video_id, m.clip_index, appearance.row(j).to_vec());
            r.importance = m.importance;
            r.label = m.label;
            r.frame_count = m.frame_count;
            r.clip_stride_frames = m.clip_stride_frames;
            if m.has_semantics_vector {
                if si >= semantics.rows() {
                    return Err(bad("too few semantics rows"));
                }
                r.semantics_vector = Some(semantics.row(si).to_vec());
                si += 1;
            }
            if m.has_sound {
                if ai >= sound.rows() {
                    return Err(bad("too few sound rows"));
                }
                r.sound = Some(SoundFeatureClip::new(sound.row(ai).to_vec())?);
                ai += 1;
            }
            clips.push(r);
        }
        let svs_appearance = if meta.get("has_svs_appearance").and_then(Value::as_bool) == Some(true) {
            Some(src.get("svs_appearance")?.clone())
        } else {
            None
        };
        let corpus =
            ReferenceCorpus::from_parts(task, clips, src.get("svs_semantics")?.clone(), svs_appearance)?;
        Ok(Self { corpus, embedding })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container()?.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&NamedMatrices::load(path)?)
    }
}
