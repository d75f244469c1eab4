use serde::{Deserialize, Serialize};

use crate::corpus::ReferenceCorpus;
use crate::error::{Error, Result};
use crate::tessellate::TessellationPath;

/// Fraction of a video's frames a summary may keep.
pub const DEFAULT_BUDGET: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySelection {
    pub keep: Vec<bool>,
    pub budget_fraction: f64,
}

impl SummarySelection {
    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }
}

/// Linear resampling of `src` onto `n` evenly spaced positions spanning the
/// same extent.
fn resample_linear(src: &[f64], n: usize) -> Vec<f64> {
    match (src.len(), n) {
        (_, 0) => vec![],
        (1, _) => vec![src[0]; n],
        (m, 1) => vec![src[(m - 1) / 2]],
        (m, _) => (0..n)
            .map(|t| {
                let x = t as f64 * (m - 1) as f64 / (n - 1) as f64;
                let lo = (x.floor() as usize).min(m - 2);
                let frac = x - lo as f64;
                src[lo] * (1.0 - frac) + src[lo + 1] * frac
            })
            .collect(),
    }
}

/// Per-frame importance inherited from each clip's matched reference clip,
/// concatenated over the query's clips.
pub fn transferred_importance(
    path: &TessellationPath,
    corpus: &ReferenceCorpus,
    query_frame_counts: &[usize],
) -> Result<Vec<f64>> {
    if path.assignments.len() != query_frame_counts.len() {
        return Err(Error::invalid(format!(
            "{} assignments but {} frame counts",
            path.assignments.len(),
            query_frame_counts.len()
        )));
    }
    let clips = path
        .assignments
        .iter()
        .map(|&j| {
            let clip = corpus
                .clips
                .get(j)
                .ok_or_else(|| Error::invalid(format!("ref_id {j} outside corpus")))?;
            clip.importance.as_deref().ok_or_else(|| {
                Error::invalid(format!(
                    "reference video `{}` clip {} has no importance scores",
                    clip.video_id, clip.clip_index
                ))
            })
        })
        .collect::<Result<Vec<&[f64]>>>()?;
    importance_from_clips(&clips, query_frame_counts)
}

/// Resamples each clip's inherited scores onto that query clip's frame count
/// and concatenates them.
pub fn importance_from_clips(clip_scores: &[&[f64]], frame_counts: &[usize]) -> Result<Vec<f64>> {
    if clip_scores.len() != frame_counts.len() {
        return Err(Error::invalid(format!(
            "{} clips but {} frame counts",
            clip_scores.len(),
            frame_counts.len()
        )));
    }
    let mut scores = Vec::with_capacity(frame_counts.iter().sum());
    for (i, (imp, &n)) in clip_scores.iter().zip(frame_counts).enumerate() {
        if imp.is_empty() {
            return Err(Error::invalid(format!("clip {i} has no importance scores")));
        }
        scores.extend(resample_linear(imp, n));
    }
    Ok(scores)
}

/// Keeps the `⌊budget · F⌋` highest-scoring frames, earlier frames first on ties.
pub fn select_budget(scores: &[f64], budget_fraction: f64) -> Vec<bool> {
    let k = ((budget_fraction * scores.len() as f64) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut keep = vec![false; scores.len()];
    for &i in order.iter().take(k) {
        keep[i] = true;
    }
    keep
}

pub fn transfer_importance(
    path: &TessellationPath,
    corpus: &ReferenceCorpus,
    query_frame_counts: &[usize],
) -> Result<SummarySelection> {
    transfer_importance_with(path, corpus, query_frame_counts, DEFAULT_BUDGET)
}

pub fn transfer_importance_with(
    path: &TessellationPath,
    corpus: &ReferenceCorpus,
    query_frame_counts: &[usize],
    budget_fraction: f64,
) -> Result<SummarySelection> {
    if !(0.0..=1.0).contains(&budget_fraction) {
        return Err(Error::invalid(format!("budget fraction {budget_fraction} outside [0, 1]")));
    }
    let scores = transferred_importance(path, corpus, query_frame_counts)?;
    Ok(SummarySelection {
        keep: select_budget(&scores, budget_fraction),
        budget_fraction,
    })
}

/// Harmonic mean of precision and recall for binary masks; 0 when both vanish.
pub fn fmeasure_masks(pred: &[bool], gt: &[bool]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "prediction has {} frames, annotation {}",
            pred.len(),
            gt.len()
        )));
    }
    let overlap = pred.iter().zip(gt).filter(|(p, g)| **p && **g).count() as f64;
    let np = pred.iter().filter(|p| **p).count() as f64;
    let ng = gt.iter().filter(|g| **g).count() as f64;
    let precision = if np > 0.0 { overlap / np } else { 0.0 };
    let recall = if ng > 0.0 { overlap / ng } else { 0.0 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// F-measure averaged over user annotations. Binary annotations (all values
/// 0 or 1) are used as masks; graded ones are first cut to the prediction's
/// budget with [`select_budget`].
pub fn fmeasure(pred: &SummarySelection, annotations: &[Vec<f64>]) -> Result<f64> {
    if annotations.is_empty() {
        return Err(Error::invalid("no annotations to score against"));
    }
    let mut total = 0.0;
    for ann in annotations {
        let binary = ann.iter().all(|v| *v == 0.0 || *v == 1.0);
        let mask: Vec<bool> = if binary {
            ann.iter().map(|v| *v == 1.0).collect()
        } else {
            select_budget(ann, pred.budget_fraction)
        };
        total += fmeasure_masks(&pred.keep, &mask)?;
    }
    Ok(total / annotations.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ClipRecord, Task};
    use crate::matrix::FeatureMatrix;
    use crate::rng::SeededRng;
    use crate::tessellate::Mode;

    fn corpus_with(importance: &[Vec<f64>]) -> ReferenceCorpus {
        let clips = importance
            .iter()
            .enumerate()
            .map(|(i, imp)| {
                let mut r = ClipRecord::new("ref", i, vec![i as f64]);
                r.importance = Some(imp.clone());
                r
            })
            .collect();
        let sem = FeatureMatrix::new(importance.len(), 1, (0..importance.len()).map(|i| i as f64).collect()).unwrap();
        ReferenceCorpus::from_parts(Task::Summary, clips, sem, None).unwrap()
    }

    fn path(assignments: Vec<usize>) -> TessellationPath {
        let n = assignments.len();
        TessellationPath {
            mode: Mode::Local,
            assignments,
            data_energies: vec![0.0; n],
            path_energy: 0.0,
        }
    }

    #[test]
    fn equal_importance_takes_leading_frames() {
        let corpus = corpus_with(&[vec![0.5; 4]]);
        let sel = transfer_importance(&path(vec![0, 0, 0, 0, 0]), &corpus, &[4; 5]).unwrap();
        // 20 frames -> 3 kept
        let kept: Vec<usize> = (0..20).filter(|&i| sel.keep[i]).collect();
        assert_eq!(kept, vec![0, 1, 2]);
    }

    #[test]
    fn dominant_clip_goes_first() {
        let corpus = corpus_with(&[vec![0.1; 10], vec![0.9; 10]]);
        let sel = transfer_importance(&path(vec![0, 1, 0, 0]), &corpus, &[5; 4]).unwrap();
        assert_eq!(sel.kept(), 3);
        assert!(sel.keep[5..8].iter().all(|k| *k));
    }

    #[test]
    fn linear_resampling() {
        assert_eq!(resample_linear(&[0.0, 1.0], 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(resample_linear(&[0.0, 2.0, 4.0, 6.0], 2), vec![0.0, 6.0]);
        assert_eq!(resample_linear(&[3.0], 3), vec![3.0; 3]);
    }

    #[test]
    fn selection_matches_full_sort() {
        let mut rng = SeededRng::new(8);
        for _ in 0..20 {
            let f = 1 + rng.below(200);
            let scores: Vec<f64> = (0..f).map(|_| (rng.below(10) as f64) / 10.0).collect();
            let keep = select_budget(&scores, 0.15);
            // oracle: stable sort by descending score then take a prefix
            let mut idx: Vec<usize> = (0..f).collect();
            idx.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap());
            let k = (0.15 * f as f64 + 1e-9).floor() as usize;
            let mut want = vec![false; f];
            idx[..k].iter().for_each(|&i| want[i] = true);
            assert_eq!(keep, want);
        }
    }

    #[test]
    fn missing_importance_is_error() {
        let mut corpus = corpus_with(&[vec![1.0]]);
        corpus.clips[0].importance = None;
        assert!(transfer_importance(&path(vec![0]), &corpus, &[3]).is_err());
    }

    #[test]
    fn fmeasure_cases() {
        let sel = |v: &[u8]| SummarySelection {
            keep: v.iter().map(|x| *x == 1).collect(),
            budget_fraction: 0.5,
        };
        let ann = |v: &[u8]| v.iter().map(|x| *x as f64).collect::<Vec<f64>>();
        assert_eq!(fmeasure(&sel(&[1, 1, 0, 0]), &[ann(&[1, 1, 0, 0])]).unwrap(), 1.0);
        assert_eq!(fmeasure(&sel(&[1, 1, 0, 0]), &[ann(&[0, 0, 1, 1])]).unwrap(), 0.0);
        // precision 1/2, recall 1/2
        assert_eq!(fmeasure(&sel(&[1, 1, 0, 0]), &[ann(&[0, 1, 1, 0])]).unwrap(), 0.5);
        // averaged over two users
        assert_eq!(
            fmeasure(&sel(&[1, 1, 0, 0]), &[ann(&[1, 1, 0, 0]), ann(&[0, 0, 1, 1])]).unwrap(),
            0.5
        );
        // graded scores are cut to the same budget
        let graded = vec![0.9, 0.8, 0.1, 0.2];
        assert_eq!(fmeasure(&sel(&[1, 1, 0, 0]), &[graded]).unwrap(), 1.0);
        assert!(fmeasure(&sel(&[1, 0]), &[ann(&[1, 0, 0])]).is_err());
    }
}
