//! Detection evaluation under the COCO protocol: greedy score-ordered
//! matching, 101-point interpolated average precision over IoU thresholds
//! `0.50:0.05:0.95`, size buckets split at `32^2` and `96^2`, and average
//! recall under per-image detection caps of 1, 10 and 100.
//!
//! Statistics with nothing to average over (no category has ground truth in
//! the requested size bucket) are reported as [`UNDEFINED`].

pub mod bbox;
pub mod eval;
pub mod matching;
pub mod reference;

pub use bbox::{iou, BBox, DetectionRecord, RecordError, RecordKind};
pub use eval::{evaluate, summarize, AreaRange, EvalParams, Evaluation, MetricsReport, UNDEFINED};
pub use matching::{average_precision, match_detections, precision_recall, Matching, PrCurve};
