//! Oracle suites: each compares a fast path with a slow, literal one.

use serde::Serialize;
use sffnet_core::deie::{deie_branches, DeieParams};
use sffnet_core::io::{decode_archive, decode_tensor, encode_archive, encode_tensor};
use sffnet_core::ops::{conv2d, ConvSpec, PadMode, Padding};
use sffnet_core::reference::conv2d_nested;
use sffnet_core::rng::SplitMix64;
use sffnet_core::spectral::{dft2_naive, fft2, idft2, Plane};
use sffnet_core::{Dims, Tensor, WeightsArchive};
use sffnet_metrics::reference::brute_force_report;
use sffnet_metrics::{summarize, BBox, DetectionRecord, EvalParams, MetricsReport, UNDEFINED};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<20} {}  cases={:<4} max_dev={:.3e} tol={:.0e}  {}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.cases,
            self.max_deviation,
            self.tolerance,
            self.detail
        )
    }
}

/// Plane sizes covering radix-2/3/5 and prime (chirp-z) lengths.
pub const FFT_SIZES: [(usize, usize); 20] = [
    (2, 2), (3, 5), (7, 7), (11, 13), (16, 16), (17, 19), (23, 8), (31, 29), (32, 32), (37, 12),
    (1, 41), (43, 1), (20, 25), (47, 6), (9, 27), (53, 4), (64, 5), (13, 61), (30, 30), (59, 3),
];

#[derive(Debug, Clone, Copy, Default)]
pub struct FftDeviation {
    pub forward: f64,
    pub round_trip: f64,
    pub parseval_rel: f64,
}

pub fn fft_deviation(seed: u64) -> FftDeviation {
    let mut dev = FftDeviation::default();
    for (i, &(h, w)) in FFT_SIZES.iter().enumerate() {
        let t = Tensor::random(Dims::new(1, 1, h, w), seed.wrapping_add(i as u64), -1.0, 1.0);
        let x = Plane::from_tensor(&t, 0, 0);
        let fast = fft2(&x);
        dev.forward = dev.forward.max(fast.max_abs_diff(&dft2_naive(&x)));
        let back = idft2(&fast).map(|p| p.max_abs_diff(&x)).unwrap_or(f64::INFINITY);
        dev.round_trip = dev.round_trip.max(back);
        let lhs: f64 = fast.data.iter().map(|z| z.norm_sqr()).sum();
        let rhs = (h * w) as f64 * x.data.iter().map(|v| v * v).sum::<f64>();
        dev.parseval_rel = dev.parseval_rel.max((lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE));
    }
    dev
}

fn fft_suite(seed: u64) -> SuiteResult {
    let d = fft_deviation(seed);
    SuiteResult {
        name: "fft-vs-naive",
        passed: d.forward < 1e-4 && d.round_trip < 1e-4 && d.parseval_rel < 1e-3,
        cases: FFT_SIZES.len(),
        max_deviation: d.forward,
        tolerance: 1e-4,
        detail: format!("round_trip={:.3e} parseval_rel={:.3e}", d.round_trip, d.parseval_rel),
    }
}

fn conv_suite(seed: u64) -> SuiteResult {
    let mut rng = SplitMix64::new(seed);
    let mut max_dev = 0.0f64;
    let cases = 24;
    for _ in 0..cases {
        let groups = 1 + rng.below(2) as usize;
        let per_group = 1 + rng.below(3) as usize;
        let (h, w) = (5 + rng.below(6) as usize, 5 + rng.below(6) as usize);
        let k = [1, 3, 5][rng.below(3) as usize];
        let stride = 1 + rng.below(2) as usize;
        let pad = rng.below(3) as usize;
        let mode = if rng.below(2) == 0 { PadMode::Zeros } else { PadMode::Reflect };
        let x = Tensor::random(Dims::new(1, groups * per_group, h, w), rng.next_u64(), -1.0, 1.0);
        let weights = Tensor::random(Dims::new(2 * groups, per_group, k, k), rng.next_u64(), -1.0, 1.0);
        let spec = ConvSpec::new(weights)
            .with_groups(groups)
            .with_stride(stride, stride)
            .with_padding(Padding::symmetric(pad).with_mode(mode));
        let dev = match conv2d(&x, &spec) {
            Ok(fast) => fast.max_abs_diff(&conv2d_nested(&x, &spec)) as f64,
            Err(_) => f64::INFINITY,
        };
        max_dev = max_dev.max(dev);
    }
    SuiteResult {
        name: "conv-nested-loop",
        passed: max_dev < 1e-5,
        cases,
        max_deviation: max_dev,
        tolerance: 1e-5,
        detail: String::new(),
    }
}

fn deie_suite(seed: u64) -> SuiteResult {
    let cases = 8;
    let mut max_dev = 0.0f64;
    for i in 0..cases {
        let x = Tensor::random(Dims::new(1, 2, 8, 8), seed.wrapping_add(i), -1.0, 1.0);
        let dev = deie_branches(&x, &DeieParams::passthrough())
            .map(|b| b.sharpened.max_abs_diff(&x) as f64)
            .unwrap_or(f64::INFINITY);
        max_dev = max_dev.max(dev);
    }
    SuiteResult {
        name: "deie-identity",
        passed: max_dev < 1e-4,
        cases: cases as usize,
        max_deviation: max_dev,
        tolerance: 1e-4,
        detail: "alpha=0 beta=0 gamma=1".into(),
    }
}

fn io_suite(seed: u64) -> SuiteResult {
    let mut rng = SplitMix64::new(seed);
    let mut archive = WeightsArchive::new();
    let mut bad = 0usize;
    let cases = 16;
    for i in 0..cases {
        let d = Dims::new(1 + rng.below(2) as usize, 1 + rng.below(4) as usize, 1 + rng.below(6) as usize, 1 + rng.below(6) as usize);
        let t = Tensor::random(d, rng.next_u64(), -1e3, 1e3);
        let mut buf = Vec::new();
        encode_tensor(&t, &mut buf);
        let same = decode_tensor(&buf).is_ok_and(|b| {
            b.dims() == d && b.data().iter().zip(t.data()).all(|(x, y)| x.to_bits() == y.to_bits())
        });
        bad += !same as usize;
        archive.insert(format!("entry{i}.weight"), t);
    }
    if decode_archive(&encode_archive(&archive)).ok().as_ref() != Some(&archive) {
        bad += 1;
    }
    SuiteResult {
        name: "io-round-trip",
        passed: bad == 0,
        cases: cases + 1,
        max_deviation: bad as f64,
        tolerance: 0.0,
        detail: "bitwise".into(),
    }
}

/// A random scene of up to three images with at most six ground-truth and
/// six predicted boxes each, three categories, and scores on a 1/16 grid.
pub fn random_scene(rng: &mut SplitMix64) -> (Vec<DetectionRecord>, Vec<DetectionRecord>) {
    const SIDES: [f64; 8] = [6.0, 16.0, 30.0, 32.0, 48.0, 96.0, 100.0, 140.0];
    let images = 1 + rng.below(3);
    let mut gts = Vec::new();
    let mut preds = Vec::new();
    for img in 0..images {
        let id = format!("img{img}");
        let mut mine = Vec::new();
        for _ in 0..rng.below(7) {
            let b = BBox::new(
                rng.below(16) as f64 * 10.0,
                rng.below(16) as f64 * 10.0,
                SIDES[rng.below(8) as usize],
                SIDES[rng.below(8) as usize],
            );
            let g = DetectionRecord::ground_truth(id.clone(), rng.below(3) as i64, b);
            mine.push(g.clone());
            gts.push(g);
        }
        for _ in 0..rng.below(7) {
            let score = rng.below(17) as f64 / 16.0;
            let jitter = |rng: &mut SplitMix64| rng.below(25) as f64 - 12.0;
            let p = if !mine.is_empty() && rng.below(10) < 7 {
                let g = &mine[rng.below(mine.len() as u64) as usize];
                let b = BBox::new(g.bbox.x + jitter(rng), g.bbox.y + jitter(rng), g.bbox.w, g.bbox.h);
                DetectionRecord::prediction(id.clone(), g.category_id, b, score)
            } else {
                let b = BBox::new(rng.below(16) as f64 * 10.0, rng.below(16) as f64 * 10.0, 32.0, 20.0);
                DetectionRecord::prediction(id.clone(), rng.below(3) as i64, b, score)
            };
            preds.push(p);
        }
    }
    (gts, preds)
}

/// Violated report orderings, if any.
pub fn report_invariant_violations(r: &MetricsReport) -> Vec<String> {
    let mut out = Vec::new();
    for (name, v) in r.fields() {
        if v != UNDEFINED && !(0.0..=1.0).contains(&v) {
            out.push(format!("{name}={v} outside [0, 1]"));
        }
    }
    if r.ap != UNDEFINED {
        if r.ap > r.ap50 {
            out.push(format!("AP {} > AP50 {}", r.ap, r.ap50));
        }
        if r.ap75 > r.ap50 {
            out.push(format!("AP75 {} > AP50 {}", r.ap75, r.ap50));
        }
        if !(r.ar_1 <= r.ar_10 && r.ar_10 <= r.ar_100) {
            out.push(format!("AR_1 {} / AR_10 {} / AR_100 {} not ordered", r.ar_1, r.ar_10, r.ar_100));
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct MetricsOracleOutcome {
    pub scenes: usize,
    pub mismatches: usize,
    pub max_deviation: f64,
    pub invariant_violations: Vec<String>,
}

/// Fast evaluator against the brute-force one on `scenes` random scenes.
pub fn metrics_oracle(seed: u64, scenes: usize) -> MetricsOracleOutcome {
    let mut rng = SplitMix64::new(seed);
    let mut out = MetricsOracleOutcome {
        scenes,
        ..Default::default()
    };
    for i in 0..scenes {
        let (gts, preds) = random_scene(&mut rng);
        let fast = summarize(&preds, &gts);
        let slow = brute_force_report(&preds, &gts, &EvalParams::default());
        if fast != slow {
            out.mismatches += 1;
        }
        for ((_, a), (_, b)) in fast.fields().into_iter().zip(slow.fields()) {
            out.max_deviation = out.max_deviation.max((a - b).abs());
        }
        out.invariant_violations
            .extend(report_invariant_violations(&fast).into_iter().map(|v| format!("scene {i}: {v}")));
    }
    out
}

/// Hand-checked reports: perfect detections and a 1/7-IoU pair.
pub fn metrics_hand_cases() -> Vec<(String, bool)> {
    let g = |img: &str, b: [f64; 4]| DetectionRecord::ground_truth(img, 1, b.into());
    let p = |img: &str, b: [f64; 4], s| DetectionRecord::prediction(img, 1, b.into(), s);
    let gts = vec![g("a", [0.0, 0.0, 10.0, 10.0]), g("b", [5.0, 5.0, 50.0, 40.0]), g("c", [0.0, 0.0, 120.0, 100.0])];
    let perfect: Vec<_> = gts.iter().map(|r| p(&r.image_id, r.bbox.into(), 0.9)).collect();
    let r = summarize(&perfect, &gts);
    let mut out = vec![(
        "perfect detections give AP = AR = 1".to_string(),
        r.fields().iter().all(|&(_, v)| v == 1.0),
    )];
    let r = summarize(&[p("a", [1.0, 1.0, 2.0, 2.0], 0.9)], &[g("a", [0.0, 0.0, 2.0, 2.0])]);
    out.push(("IoU 1/7 pair gives AP50 = 0".to_string(), r.ap50 == 0.0 && r.ap == 0.0));
    out
}

fn metrics_suite(seed: u64) -> SuiteResult {
    let o = metrics_oracle(seed, 200);
    let hand = metrics_hand_cases();
    let hand_ok = hand.iter().all(|(_, ok)| *ok);
    SuiteResult {
        name: "metrics-brute-force",
        passed: o.mismatches == 0 && o.invariant_violations.is_empty() && hand_ok,
        cases: o.scenes + hand.len(),
        max_deviation: o.max_deviation,
        tolerance: 0.0,
        detail: format!(
            "mismatches={} invariant_violations={} hand_cases={}",
            o.mismatches,
            o.invariant_violations.len(),
            if hand_ok { "ok" } else { "failed" }
        ),
    }
}

pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    vec![
        fft_suite(seed),
        conv_suite(seed),
        deie_suite(seed),
        io_suite(seed),
        metrics_suite(seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for s in run_all(42) {
            assert!(s.passed, "{s}");
        }
    }

    #[test]
    fn scenes_are_bounded() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..50 {
            let (gts, preds) = random_scene(&mut rng);
            for img in ["img0", "img1", "img2"] {
                assert!(gts.iter().filter(|g| g.image_id == img).count() <= 6);
                assert!(preds.iter().filter(|p| p.image_id == img).count() <= 6);
            }
        }
    }
}
