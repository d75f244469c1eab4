//! JSON-lines clip manifests.
//!
//! Each non-blank line is one object:
//!
//! ```json
//! {"video_id": "v0", "clip_index": 0, "appearance_file": "app.fmat", "appearance_row": 0,
//!  "semantics_file": "sem.fmat", "semantics_row": 0, "label": 3, "frame_count": 16}
//! ```
//!
//! Optional payload fields: `semantics_file`/`semantics_row`, `importance`
//! (per-frame scores), `label` (class id or `"background"`),
//! `sound_file`/`sound_row` (1,890-value rows), `frame_count` and
//! `clip_stride_frames`. Relative paths resolve against the data root.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{order_records, ActionLabel, ClipRecord};
use crate::error::{Error, Result};
use crate::matrix::{load_feature_matrix, FeatureMatrix};
use crate::transfer::SoundFeatureClip;

pub const MANIFEST_VERSION: u32 = 1;
/// Environment variable naming the root for relative manifest paths.
pub const DATA_DIR_ENV: &str = "TESSELLATE_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestLine {
    pub video_id: String,
    pub clip_index: usize,
    pub appearance_file: String,
    pub appearance_row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantics_row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<ActionLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_row: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_stride_frames: Option<f64>,
}

impl ManifestLine {
    pub fn new(video_id: impl Into<String>, clip_index: usize, file: impl Into<String>, row: usize) -> Self {
        Self {
            video_id: video_id.into(),
            clip_index,
            appearance_file: file.into(),
            appearance_row: row,
            semantics_file: None,
            semantics_row: None,
            importance: None,
            label: None,
            sound_file: None,
            sound_row: None,
            frame_count: None,
            clip_stride_frames: None,
        }
    }
}

struct Resolver {
    root: PathBuf,
    cache: HashMap<PathBuf, FeatureMatrix>,
}

impl Resolver {
    fn row(&mut self, file: &str, row: usize, who: &str) -> Result<Vec<f64>> {
        let path = self.root.join(file);
        if !self.cache.contains_key(&path) {
            if !path.is_file() {
                return Err(Error::Ingestion(format!(
                    "{who}: feature file {} does not exist",
                    path.display()
                )));
            }
            let m = load_feature_matrix(&path)?;
            self.cache.insert(path.clone(), m);
        }
        let m = &self.cache[&path];
        if row >= m.rows() {
            return Err(Error::Ingestion(format!(
                "{who}: row {row} out of range for {} ({} rows)",
                path.display(),
                m.rows()
            )));
        }
        Ok(m.row(row).to_vec())
    }
}

/// Loads a manifest, resolving feature rows, and returns records ordered by
/// `(video_id, clip_index)`.
///
/// Relative paths resolve against `data_root` when given, otherwise against
/// the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>, data_root: Option<&Path>) -> Result<Vec<ClipRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = match data_root {
        Some(r) => r.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut resolver = Resolver {
        root,
        cache: HashMap::new(),
    };
    let mut records = Vec::new();
    let mut offset = 0usize;
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestLine = serde_json::from_str(line).map_err(|e| Error::Format {
            path: path.display().to_string(),
            offset: (start + e.column().saturating_sub(1)) as u64,
            message: format!("line {}: {e}", lineno + 1),
        })?;
        records.push(resolve(entry, &mut resolver, lineno + 1)?);
    }
    order_records(&mut records)?;
    Ok(records)
}

/// Resolved feature files referenced by a manifest, sorted and deduplicated.
pub fn manifest_feature_files(path: impl AsRef<Path>, data_root: Option<&Path>) -> Result<Vec<PathBuf>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root = match data_root {
        Some(r) => r.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut files = std::collections::BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestLine = serde_json::from_str(line).map_err(|err| Error::Format {
            path: path.display().to_string(),
            offset: 0,
            message: format!("line {}: {err}", lineno + 1),
        })?;
        files.insert(root.join(&e.appearance_file));
        files.extend(e.semantics_file.iter().chain(&e.sound_file).map(|f| root.join(f)));
    }
    Ok(files.into_iter().collect())
}

fn resolve(e: ManifestLine, res: &mut Resolver, lineno: usize) -> Result<ClipRecord> {
    let who = format!("line {lineno} (video `{}` clip {})", e.video_id, e.clip_index);
    let appearance = res.row(&e.appearance_file, e.appearance_row, &who)?;
    let semantics_vector = match (&e.semantics_file, e.semantics_row) {
        (Some(f), Some(r)) => Some(res.row(f, r, &who)?),
        (None, None) => None,
        _ => {
            return Err(Error::Ingestion(format!(
                "{who}: semantics_file and semantics_row must appear together"
            )))
        }
    };
    let sound = match (&e.sound_file, e.sound_row) {
        (Some(f), Some(r)) => Some(
            SoundFeatureClip::new(res.row(f, r, &who)?)
                .map_err(|err| Error::Ingestion(format!("{who}: {err}")))?,
        ),
        (None, None) => None,
        _ => {
            return Err(Error::Ingestion(format!(
                "{who}: sound_file and sound_row must appear together"
            )))
        }
    };
    if let Some(imp) = &e.importance {
        if imp.is_empty() || imp.iter().any(|v| !v.is_finite()) {
            return Err(Error::Ingestion(format!(
                "{who}: importance must be a non-empty list of finite values"
            )));
        }
    }
    if let Some(s) = e.clip_stride_frames {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Ingestion(format!("{who}: clip_stride_frames must be positive")));
        }
    }
    Ok(ClipRecord {
        video_id: e.video_id,
        clip_index: e.clip_index,
        appearance,
        semantics_vector,
        importance: e.importance,
        label: e.label,
        sound,
        frame_count: e.frame_count,
        clip_stride_frames: e.clip_stride_frames,
    })
}
