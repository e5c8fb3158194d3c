use crate::bbox::{iou, DetectionRecord};

/// Number of evenly spaced recall points used for interpolation.
pub const RECALL_POINTS: usize = 101;

/// The `i`-th recall point, `i / 100`.
pub fn recall_point(i: usize) -> f64 {
    i as f64 / (RECALL_POINTS - 1) as f64
}

/// Indices sorted by descending score; equal scores keep input order.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy assignment of already-ranked detections to ground truth.
///
/// Each detection takes the still-unmatched ground truth with the highest
/// IoU at or above `thr`, preferring non-ignored boxes over ignored ones and
/// the lowest index among equal IoUs. Returns the matched ground-truth index
/// per detection.
pub fn greedy_match(
    n_dets: usize,
    gt_ignore: &[bool],
    iou_of: impl Fn(usize, usize) -> f64,
    thr: f64,
) -> Vec<Option<usize>> {
    let mut taken = vec![false; gt_ignore.len()];
    let mut out = Vec::with_capacity(n_dets);
    for d in 0..n_dets {
        let mut best: Option<(usize, f64)> = None;
        for (g, &ignored) in gt_ignore.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = iou_of(d, g);
            if v < thr {
                continue;
            }
            let better = match best {
                None => true,
                Some((bg, bv)) => {
                    let best_ignored = gt_ignore[bg];
                    (best_ignored && !ignored) || (best_ignored == ignored && v > bv)
                }
            };
            if better {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
        }
        out.push(best.map(|(g, _)| g));
    }
    out
}

/// Outcome of matching one image/category group.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Prediction indices in ranking order.
    pub order: Vec<usize>,
    /// Matched ground-truth index for each ranked prediction.
    pub matched: Vec<Option<usize>>,
    /// Number of ground-truth boxes in the group.
    pub n_gt: usize,
}

impl Matching {
    /// True-positive flag per ranked prediction.
    pub fn tp_flags(&self) -> Vec<bool> {
        self.matched.iter().map(Option::is_some).collect()
    }

    pub fn true_positives(&self) -> usize {
        self.matched.iter().filter(|m| m.is_some()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.matched.len() - self.true_positives()
    }

    pub fn false_negatives(&self) -> usize {
        self.n_gt - self.true_positives()
    }

    /// Matching prediction index for every ground truth, in input order.
    pub fn gt_matches(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_gt];
        for (&p, m) in self.order.iter().zip(&self.matched) {
            if let Some(g) = m {
                out[*g] = Some(p);
            }
        }
        out
    }
}

/// Matches predictions of one image and category against its ground truth.
pub fn match_detections(preds: &[DetectionRecord], gts: &[DetectionRecord], thr: f64) -> Matching {
    let scores: Vec<f64> = preds.iter().map(DetectionRecord::rank_score).collect();
    let order = rank_by_score(&scores);
    let matched = greedy_match(
        order.len(),
        &vec![false; gts.len()],
        |d, g| iou(&preds[order[d]].bbox, &gts[g].bbox),
        thr,
    );
    Matching {
        order,
        matched,
        n_gt: gts.len(),
    }
}

/// Cumulative precision and recall over a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PrCurve {
    pub fn len(&self) -> usize {
        self.precision.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precision.is_empty()
    }

    /// Recall reached by the whole list.
    pub fn final_recall(&self) -> f64 {
        self.recall.last().copied().unwrap_or(0.0)
    }
}

/// `P(k) = TP(k) / k` and `R(k) = TP(k) / n_gt` for every rank `k`. With no
/// ground truth, recall is zero throughout.
pub fn precision_recall(tp: &[bool], n_gt: usize) -> PrCurve {
    let mut hits = 0usize;
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    for (k, &t) in tp.iter().enumerate() {
        hits += t as usize;
        precision.push(hits as f64 / (k + 1) as f64);
        recall.push(if n_gt == 0 { 0.0 } else { hits as f64 / n_gt as f64 });
    }
    PrCurve { precision, recall }
}

/// Precision at each recall point after the monotone envelope, zero where
/// the recall point is never reached.
pub fn interpolated_precision(curve: &PrCurve) -> [f64; RECALL_POINTS] {
    let mut envelope = curve.precision.clone();
    for i in (1..envelope.len()).rev() {
        envelope[i - 1] = envelope[i - 1].max(envelope[i]);
    }
    let mut out = [0.0; RECALL_POINTS];
    for (i, slot) in out.iter_mut().enumerate() {
        let r = recall_point(i);
        let idx = curve.recall.partition_point(|&x| x < r);
        if idx < envelope.len() {
            *slot = envelope[idx];
        }
    }
    out
}

/// Mean interpolated precision over the recall points.
pub fn average_precision(curve: &PrCurve) -> f64 {
    interpolated_precision(curve).iter().sum::<f64>() / RECALL_POINTS as f64
}
