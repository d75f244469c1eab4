use serde::{Deserialize, Serialize};

use crate::corpus::{ActionLabel, ReferenceCorpus};
use crate::error::{Error, Result};
use crate::tessellate::TessellationPath;

pub const DEFAULT_IOU_THRESHOLDS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

/// A labelled temporal interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub label: u32,
    #[serde(default)]
    pub score: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64, label: u32, score: f64) -> Result<Self> {
        if !(start < end) || !start.is_finite() || !end.is_finite() {
            return Err(Error::invalid(format!("interval [{start}, {end}) is empty or not finite")));
        }
        Ok(Self {
            start,
            end,
            label,
            score,
        })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Intersection length over union length.
pub fn interval_iou(a: &Interval, b: &Interval) -> f64 {
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.length() + b.length() - inter)
}

/// Merges runs of identical transferred labels into intervals in units of
/// `clip_stride` per clip.
///
/// A run's score is the mean of `exp(−data_energy)` over its clips. Runs
/// shorter than `min_len` and background runs produce nothing.
pub fn labels_to_intervals(
    path: &TessellationPath,
    corpus: &ReferenceCorpus,
    clip_stride: f64,
    min_len: f64,
) -> Result<Vec<Interval>> {
    let labels = path
        .assignments
        .iter()
        .map(|&j| {
            let clip = corpus
                .clips
                .get(j)
                .ok_or_else(|| Error::invalid(format!("ref_id {j} outside corpus")))?;
            clip.label.ok_or_else(|| {
                Error::invalid(format!(
                    "reference video `{}` clip {} has no action label",
                    clip.video_id, clip.clip_index
                ))
            })
        })
        .collect::<Result<Vec<ActionLabel>>>()?;
    intervals_from_labels(&labels, &path.data_energies, clip_stride, min_len)
}

/// Run merging behind [`labels_to_intervals`], on per-clip labels and data
/// energies.
pub fn intervals_from_labels(
    labels: &[ActionLabel],
    data_energies: &[f64],
    clip_stride: f64,
    min_len: f64,
) -> Result<Vec<Interval>> {
    if !(clip_stride > 0.0) {
        return Err(Error::invalid("clip stride must be positive"));
    }
    if labels.len() != data_energies.len() {
        return Err(Error::invalid("one data energy per label is required"));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let mut end = start + 1;
        while end < labels.len() && labels[end] == labels[start] {
            end += 1;
        }
        if let Some(class) = labels[start].class() {
            let (s, e) = (start as f64 * clip_stride, end as f64 * clip_stride);
            if e - s >= min_len {
                let score = data_energies[start..end]
                    .iter()
                    .map(|d| (-d).exp())
                    .sum::<f64>()
                    / (end - start) as f64;
                out.push(Interval::new(s, e, class, score)?);
            }
        }
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApInterpolation {
    /// Area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean of the envelope at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

/// AP for detections and ground truth that share a group key (video id);
/// detections only match ground truth of the same group.
pub fn average_precision_grouped<G: PartialEq>(
    detections: &[(G, Interval)],
    ground_truth: &[(G, Interval)],
    iou_threshold: f64,
    interpolation: ApInterpolation,
) -> Result<f64> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::invalid(format!("IoU threshold {iou_threshold} outside (0, 1)")));
    }
    if ground_truth.is_empty() || detections.is_empty() {
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].1.score.total_cmp(&detections[a].1.score).then(a.cmp(&b)));

    let mut matched = vec![false; ground_truth.len()];
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(order.len());
    for (rank, &d) in order.iter().enumerate() {
        let (group, det) = &detections[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, (gg, gt)) in ground_truth.iter().enumerate() {
            if matched[g] || gg != group {
                continue;
            }
            let iou = interval_iou(det, gt);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            if iou >= iou_threshold {
                matched[g] = true;
                tp += 1;
            }
        }
        let recall = tp as f64 / ground_truth.len() as f64;
        let precision = tp as f64 / (rank + 1) as f64;
        points.push((recall, precision));
    }
    for k in (0..points.len().saturating_sub(1)).rev() {
        points[k].1 = points[k].1.max(points[k + 1].1);
    }
    Ok(match interpolation {
        ApInterpolation::AllPoint => {
            let mut prev_recall = 0.0;
            let mut ap = 0.0;
            for &(r, p) in &points {
                ap += (r - prev_recall) * p;
                prev_recall = r;
            }
            ap
        }
        ApInterpolation::ElevenPoint => {
            (0..=10)
                .map(|t| {
                    let level = t as f64 / 10.0;
                    points
                        .iter()
                        .find(|(r, _)| *r >= level - 1e-12)
                        .map_or(0.0, |(_, p)| *p)
                })
                .sum::<f64>()
                / 11.0
        }
    })
}

/// All-point AP for a single video's detections of one class.
pub fn average_precision(detections: &[Interval], ground_truth: &[Interval], iou_threshold: f64) -> Result<f64> {
    let d: Vec<((), Interval)> = detections.iter().map(|i| ((), *i)).collect();
    let g: Vec<((), Interval)> = ground_truth.iter().map(|i| ((), *i)).collect();
    average_precision_grouped(&d, &g, iou_threshold, ApInterpolation::AllPoint)
}

/// Detections and ground truth of one class across videos.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassResults {
    pub class: u32,
    pub detections: Vec<(String, Interval)>,
    pub ground_truth: Vec<(String, Interval)>,
}

/// Per-class AP at each IoU threshold and the class mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapTable {
    pub thresholds: Vec<f64>,
    pub classes: Vec<u32>,
    /// `ap[c][t]` for class index `c` and threshold index `t`.
    pub ap: Vec<Vec<f64>>,
    pub mean_ap: Vec<f64>,
}

pub fn mean_ap(
    per_class: &[ClassResults],
    thresholds: &[f64],
    interpolation: ApInterpolation,
) -> Result<MapTable> {
    if per_class.is_empty() {
        return Err(Error::invalid("mean AP needs at least one class"));
    }
    let ap = per_class
        .iter()
        .map(|c| {
            thresholds
                .iter()
                .map(|&t| average_precision_grouped(&c.detections, &c.ground_truth, t, interpolation))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_ap = (0..thresholds.len())
        .map(|t| ap.iter().map(|row| row[t]).sum::<f64>() / ap.len() as f64)
        .collect();
    Ok(MapTable {
        thresholds: thresholds.to_vec(),
        classes: per_class.iter().map(|c| c.class).collect(),
        ap,
        mean_ap,
    })
}
