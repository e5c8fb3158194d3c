use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbox::{iou, DetectionRecord};
use crate::matching::{average_precision, greedy_match, precision_recall, rank_by_score};

/// Value reported for a statistic with nothing to average over.
pub const UNDEFINED: f64 = -1.0;

/// Upper area bound of the small bucket, `32^2`.
pub const SMALL_MAX_AREA: f64 = 32.0 * 32.0;
/// Upper area bound of the medium bucket, `96^2`.
pub const MEDIUM_MAX_AREA: f64 = 96.0 * 96.0;

/// Object-size bucket. Bounds are inclusive on both ends, so a box of area
/// exactly `32^2` belongs to both small and medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaRange {
    All,
    Small,
    Medium,
    Large,
}

impl AreaRange {
    pub const ALL: [AreaRange; 4] = [AreaRange::All, AreaRange::Small, AreaRange::Medium, AreaRange::Large];

    pub fn bounds(self) -> (f64, f64) {
        match self {
            AreaRange::All => (0.0, f64::INFINITY),
            AreaRange::Small => (0.0, SMALL_MAX_AREA),
            AreaRange::Medium => (SMALL_MAX_AREA, MEDIUM_MAX_AREA),
            AreaRange::Large => (MEDIUM_MAX_AREA, f64::INFINITY),
        }
    }

    pub fn contains(self, area: f64) -> bool {
        let (lo, hi) = self.bounds();
        area >= lo && area <= hi
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// IoU thresholds `0.50, 0.55, ..., 0.95`.
pub fn coco_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    pub iou_thresholds: Vec<f64>,
    /// Per-image detection caps, ascending. The last one is used for every
    /// AP statistic and the per-size recalls.
    pub max_dets: [usize; 3],
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            iou_thresholds: coco_iou_thresholds(),
            max_dets: [1, 10, 100],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "AP")]
    pub ap: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AP75")]
    pub ap75: f64,
    #[serde(rename = "AP_s")]
    pub ap_s: f64,
    #[serde(rename = "AP_m")]
    pub ap_m: f64,
    #[serde(rename = "AP_l")]
    pub ap_l: f64,
    #[serde(rename = "AR_1")]
    pub ar_1: f64,
    #[serde(rename = "AR_10")]
    pub ar_10: f64,
    #[serde(rename = "AR_100")]
    pub ar_100: f64,
    #[serde(rename = "AR_s")]
    pub ar_s: f64,
    #[serde(rename = "AR_m")]
    pub ar_m: f64,
    #[serde(rename = "AR_l")]
    pub ar_l: f64,
}

impl MetricsReport {
    pub fn fields(&self) -> [(&'static str, f64); 12] {
        [
            ("AP", self.ap),
            ("AP50", self.ap50),
            ("AP75", self.ap75),
            ("AP_s", self.ap_s),
            ("AP_m", self.ap_m),
            ("AP_l", self.ap_l),
            ("AR_1", self.ar_1),
            ("AR_10", self.ar_10),
            ("AR_100", self.ar_100),
            ("AR_s", self.ar_s),
            ("AR_m", self.ar_m),
            ("AR_l", self.ar_l),
        ]
    }
}

/// AP and final recall of one category at one area range and detection cap,
/// per IoU threshold. `None` when the category has no ground truth in range.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub ap: Vec<f64>,
    pub recall: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryEval {
    pub category_id: i64,
    /// Indexed `[area][max_det]`.
    pub cells: [[Option<CellResult>; 3]; 4],
}

/// Accumulated results for every category that has ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub params: EvalParams,
    pub categories: Vec<CategoryEval>,
}

/// A ranked detection of one image after matching against that image's
/// ground truth in one area range.
struct ScoredDet {
    score: f64,
    input_index: usize,
    rank: usize,
    matched: Vec<bool>,
    ignored: Vec<bool>,
}

fn evaluate_group(
    dets: &[(usize, &DetectionRecord)],
    gts: &[&DetectionRecord],
    area: AreaRange,
    params: &EvalParams,
    out: &mut Vec<ScoredDet>,
) {
    let gt_ignore: Vec<bool> = gts.iter().map(|g| !area.contains(g.area())).collect();
    let scores: Vec<f64> = dets.iter().map(|(_, d)| d.rank_score()).collect();
    let mut order = rank_by_score(&scores);
    order.truncate(params.max_dets[2]);
    let per_thr: Vec<Vec<Option<usize>>> = params
        .iou_thresholds
        .iter()
        .map(|&thr| {
            greedy_match(
                order.len(),
                &gt_ignore,
                |d, g| iou(&dets[order[d]].1.bbox, &gts[g].bbox),
                thr,
            )
        })
        .collect();
    for (rank, &i) in order.iter().enumerate() {
        let (input_index, det) = dets[i];
        let outside = !area.contains(det.area());
        let matched = per_thr.iter().map(|m| m[rank].is_some()).collect();
        let ignored = per_thr
            .iter()
            .map(|m| match m[rank] {
                Some(g) => gt_ignore[g],
                None => outside,
            })
            .collect();
        out.push(ScoredDet {
            score: det.rank_score(),
            input_index,
            rank,
            matched,
            ignored,
        });
    }
}

type Grouped<'a> = BTreeMap<&'a str, (Vec<(usize, &'a DetectionRecord)>, Vec<&'a DetectionRecord>)>;

fn evaluate_category(category_id: i64, images: &Grouped<'_>, params: &EvalParams) -> CategoryEval {
    let mut cells: [[Option<CellResult>; 3]; 4] = Default::default();
    for area in AreaRange::ALL {
        let mut dets = Vec::new();
        let mut n_gt = 0;
        for (img_dets, img_gts) in images.values() {
            n_gt += img_gts.iter().filter(|g| area.contains(g.area())).count();
            evaluate_group(img_dets, img_gts, area, params, &mut dets);
        }
        if n_gt == 0 {
            continue;
        }
        for (m, &cap) in params.max_dets.iter().enumerate() {
            let mut kept: Vec<&ScoredDet> = dets.iter().filter(|d| d.rank < cap).collect();
            kept.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.input_index.cmp(&b.input_index)));
            let mut ap = Vec::with_capacity(params.iou_thresholds.len());
            let mut recall = Vec::with_capacity(params.iou_thresholds.len());
            for t in 0..params.iou_thresholds.len() {
                let flags: Vec<bool> = kept.iter().filter(|d| !d.ignored[t]).map(|d| d.matched[t]).collect();
                let curve = precision_recall(&flags, n_gt);
                ap.push(average_precision(&curve));
                recall.push(curve.final_recall());
            }
            cells[area.index()][m] = Some(CellResult { ap, recall });
        }
    }
    CategoryEval { category_id, cells }
}

/// Matches and accumulates every category present in the ground truth.
/// Predictions for categories without ground truth are not scored.
pub fn evaluate(preds: &[DetectionRecord], gts: &[DetectionRecord], params: &EvalParams) -> Evaluation {
    let mut by_cat: BTreeMap<i64, Grouped<'_>> = BTreeMap::new();
    for g in gts {
        by_cat
            .entry(g.category_id)
            .or_default()
            .entry(g.image_id.as_str())
            .or_default()
            .1
            .push(g);
    }
    for (i, p) in preds.iter().enumerate() {
        if let Some(images) = by_cat.get_mut(&p.category_id) {
            images.entry(p.image_id.as_str()).or_default().0.push((i, p));
        }
    }
    let categories = by_cat
        .par_iter()
        .map(|(&cat, images)| evaluate_category(cat, images, params))
        .collect();
    Evaluation {
        params: params.clone(),
        categories,
    }
}

/// Which per-threshold series a statistic averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Precision,
    Recall,
}

impl Evaluation {
    fn threshold_index(&self, thr: f64) -> Option<usize> {
        self.params.iou_thresholds.iter().position(|&t| t == thr)
    }

    /// Mean over categories of the mean over the selected thresholds, or
    /// [`UNDEFINED`] when no category has ground truth in range.
    pub fn stat(&self, stat: Statistic, iou_thr: Option<f64>, area: AreaRange, max_det_index: usize) -> f64 {
        let thresholds: Vec<usize> = match iou_thr {
            None => (0..self.params.iou_thresholds.len()).collect(),
            Some(thr) => match self.threshold_index(thr) {
                Some(t) => vec![t],
                None => return UNDEFINED,
            },
        };
        if thresholds.is_empty() {
            return UNDEFINED;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for cat in &self.categories {
            let Some(cell) = &cat.cells[area.index()][max_det_index] else {
                continue;
            };
            let series = match stat {
                Statistic::Precision => &cell.ap,
                Statistic::Recall => &cell.recall,
            };
            let per_cat: f64 = thresholds.iter().map(|&t| series[t]).sum::<f64>() / thresholds.len() as f64;
            sum += per_cat;
            count += 1;
        }
        if count == 0 {
            UNDEFINED
        } else {
            sum / count as f64
        }
    }

    /// Headline AP of each category, or `None` when it has no ground truth.
    pub fn per_category_ap(&self) -> Vec<(i64, f64)> {
        self.categories
            .iter()
            .filter_map(|c| {
                let cell = c.cells[AreaRange::All.index()][2].as_ref()?;
                Some((c.category_id, cell.ap.iter().sum::<f64>() / cell.ap.len().max(1) as f64))
            })
            .collect()
    }

    pub fn report(&self) -> MetricsReport {
        use AreaRange::*;
        use Statistic::*;
        MetricsReport {
            ap: self.stat(Precision, None, All, 2),
            ap50: self.stat(Precision, Some(0.5), All, 2),
            ap75: self.stat(Precision, Some(0.75), All, 2),
            ap_s: self.stat(Precision, None, Small, 2),
            ap_m: self.stat(Precision, None, Medium, 2),
            ap_l: self.stat(Precision, None, Large, 2),
            ar_1: self.stat(Recall, None, All, 0),
            ar_10: self.stat(Recall, None, All, 1),
            ar_100: self.stat(Recall, None, All, 2),
            ar_s: self.stat(Recall, None, Small, 2),
            ar_m: self.stat(Recall, None, Medium, 2),
            ar_l: self.stat(Recall, None, Large, 2),
        }
    }
}

/// Full report under the default protocol.
pub fn summarize(preds: &[DetectionRecord], gts: &[DetectionRecord]) -> MetricsReport {
    evaluate(preds, gts, &EvalParams::default()).report()
}
