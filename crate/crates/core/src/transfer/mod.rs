//! Task adapters turning a tessellation into task outputs, plus the scoring
//! used to evaluate them.

mod detection;
mod regression;
mod sound;
mod summary;

pub use detection::{
    average_precision, average_precision_grouped, interval_iou, intervals_from_labels,
    labels_to_intervals, mean_ap,
    ApInterpolation, ClassResults, Interval, MapTable, DEFAULT_IOU_THRESHOLDS,
};
pub use regression::{regression_metrics, RegressionMetrics};
pub use sound::{centroid, centroid_with, loudness, CentroidWindow, SoundFeatureClip};
pub use summary::{
    fmeasure, fmeasure_masks, importance_from_clips, select_budget, transfer_importance, transfer_importance_with,
    transferred_importance, SummarySelection, DEFAULT_BUDGET,
};
