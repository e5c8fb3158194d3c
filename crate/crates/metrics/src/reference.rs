//! Straightforward re-derivation of every report field, used as a test
//! oracle. Each statistic is recomputed from scratch: detections are capped
//! before matching, candidate ground truth is scanned exhaustively per
//! detection, and interpolated precision is the maximum precision over all
//! ranks that reach the recall point.

use crate::bbox::{iou, DetectionRecord};
use crate::eval::{AreaRange, EvalParams, MetricsReport, UNDEFINED};
use crate::matching::{recall_point, RECALL_POINTS};

#[derive(Clone, Copy, PartialEq)]
enum Outcome {
    Hit,
    Miss,
    Skip,
}

struct Ranked {
    score: f64,
    index: usize,
    outcome: Outcome,
}

fn sorted_desc(mut v: Vec<(f64, usize)>) -> Vec<(f64, usize)> {
    v.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite scores")
            .then_with(|| a.1.cmp(&b.1))
    });
    v
}

fn image_outcomes(
    preds: &[DetectionRecord],
    gts: &[DetectionRecord],
    image: &str,
    cat: i64,
    area: AreaRange,
    cap: usize,
    thr: f64,
) -> Vec<Ranked> {
    let gt_idx: Vec<usize> = (0..gts.len())
        .filter(|&g| gts[g].image_id == image && gts[g].category_id == cat)
        .collect();
    let dets: Vec<(f64, usize)> = (0..preds.len())
        .filter(|&p| preds[p].image_id == image && preds[p].category_id == cat)
        .map(|p| (preds[p].rank_score(), p))
        .collect();
    let dets: Vec<(f64, usize)> = sorted_desc(dets).into_iter().take(cap).collect();
    let mut used = vec![false; gt_idx.len()];
    let mut out = Vec::new();
    for (score, p) in dets {
        // Candidates ordered by (in range, IoU, lower index); the first wins.
        let mut candidates: Vec<(bool, f64, usize)> = Vec::new();
        for (slot, &g) in gt_idx.iter().enumerate() {
            let v = iou(&preds[p].bbox, &gts[g].bbox);
            if !used[slot] && v >= thr {
                candidates.push((area.contains(gts[g].area()), v, slot));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(b.1.partial_cmp(&a.1).unwrap())
                .then(a.2.cmp(&b.2))
        });
        let outcome = match candidates.first() {
            Some(&(in_range, _, slot)) => {
                used[slot] = true;
                if in_range {
                    Outcome::Hit
                } else {
                    Outcome::Skip
                }
            }
            None if area.contains(preds[p].area()) => Outcome::Miss,
            None => Outcome::Skip,
        };
        out.push(Ranked {
            score,
            index: p,
            outcome,
        });
    }
    out
}

/// AP and final recall of one category at one threshold, or `None` when it
/// has no ground truth in range.
fn category_at(
    preds: &[DetectionRecord],
    gts: &[DetectionRecord],
    cat: i64,
    area: AreaRange,
    cap: usize,
    thr: f64,
) -> Option<(f64, f64)> {
    let n_gt = gts
        .iter()
        .filter(|g| g.category_id == cat && area.contains(g.area()))
        .count();
    if n_gt == 0 {
        return None;
    }
    let mut images: Vec<&str> = gts
        .iter()
        .chain(preds)
        .map(|r| r.image_id.as_str())
        .collect();
    images.sort_unstable();
    images.dedup();
    let mut all: Vec<Ranked> = images
        .into_iter()
        .flat_map(|img| image_outcomes(preds, gts, img, cat, area, cap, thr))
        .filter(|r| r.outcome != Outcome::Skip)
        .collect();
    let order = sorted_desc(all.iter().map(|r| (r.score, r.index)).collect());
    all.sort_by_key(|r| order.iter().position(|&(_, i)| i == r.index).unwrap());

    let mut points = Vec::new();
    let mut hits = 0usize;
    for (k, r) in all.iter().enumerate() {
        if r.outcome == Outcome::Hit {
            hits += 1;
        }
        points.push((hits as f64 / n_gt as f64, hits as f64 / (k + 1) as f64));
    }
    let mut sum = 0.0;
    for i in 0..RECALL_POINTS {
        let r = recall_point(i);
        let best = points
            .iter()
            .filter(|&&(rec, _)| rec >= r)
            .map(|&(_, prec)| prec)
            .fold(0.0, f64::max);
        sum += best;
    }
    Some((sum / RECALL_POINTS as f64, hits as f64 / n_gt as f64))
}

fn statistic(
    preds: &[DetectionRecord],
    gts: &[DetectionRecord],
    params: &EvalParams,
    recall: bool,
    thr: Option<f64>,
    area: AreaRange,
    cap: usize,
) -> f64 {
    let thresholds: Vec<f64> = match thr {
        Some(t) if params.iou_thresholds.contains(&t) => vec![t],
        Some(_) => return UNDEFINED,
        None => params.iou_thresholds.clone(),
    };
    let mut cats: Vec<i64> = gts.iter().map(|g| g.category_id).collect();
    cats.sort_unstable();
    cats.dedup();
    let mut sum = 0.0;
    let mut count = 0usize;
    for cat in cats {
        let mut acc = 0.0;
        let mut defined = true;
        for &t in &thresholds {
            match category_at(preds, gts, cat, area, cap, t) {
                Some((ap, rc)) => acc += if recall { rc } else { ap },
                None => defined = false,
            }
        }
        if defined && !thresholds.is_empty() {
            sum += acc / thresholds.len() as f64;
            count += 1;
        }
    }
    if count == 0 {
        UNDEFINED
    } else {
        sum / count as f64
    }
}

/// Every report field, recomputed independently of the fast evaluator.
pub fn brute_force_report(preds: &[DetectionRecord], gts: &[DetectionRecord], params: &EvalParams) -> MetricsReport {
    use AreaRange::*;
    let [d1, d10, d100] = params.max_dets;
    let s = |recall, thr, area, cap| statistic(preds, gts, params, recall, thr, area, cap);
    MetricsReport {
        ap: s(false, None, All, d100),
        ap50: s(false, Some(0.5), All, d100),
        ap75: s(false, Some(0.75), All, d100),
        ap_s: s(false, None, Small, d100),
        ap_m: s(false, None, Medium, d100),
        ap_l: s(false, None, Large, d100),
        ar_1: s(true, None, All, d1),
        ar_10: s(true, None, All, d10),
        ar_100: s(true, None, All, d100),
        ar_s: s(true, None, Small, d100),
        ar_m: s(true, None, Medium, d100),
        ar_l: s(true, None, Large, d100),
    }
}
