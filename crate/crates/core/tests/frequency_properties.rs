use num_complex::Complex64;
use proptest::prelude::*;
use sffnet_core::deie::{
    deie_branches, deie_forward, edge_strength, enhance_magnitude, extract_high_freq, frequency_branch,
    frequency_sharpen, high_pass_filter, DeieParams,
};
use sffnet_core::spectral::{dft2_naive, fft2, idft2, Fft2Plan, Plane, Spectrum};
use sffnet_core::{Dims, Tensor};

fn plane(h: usize, w: usize, seed: u64) -> Plane {
    let t = Tensor::random(Dims::new(1, 1, h, w), seed, -1.0, 1.0);
    Plane::from_tensor(&t, 0, 0)
}

fn energy(s: &Spectrum) -> f64 {
    s.data.iter().map(|z| z.norm_sqr()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fast_transform_matches_literal_sum(h in 1usize..=24, w in 1usize..=24, seed in any::<u64>()) {
        let x = plane(h, w, seed);
        let fast = fft2(&x);
        let slow = dft2_naive(&x);
        prop_assert!(fast.max_abs_diff(&slow) < 1e-4, "{}x{}: {}", h, w, fast.max_abs_diff(&slow));
        let back = idft2(&fast).unwrap();
        prop_assert!(back.max_abs_diff(&x) < 1e-4);
    }

    #[test]
    fn parseval(h in 1usize..=20, w in 1usize..=20, seed in any::<u64>()) {
        let x = plane(h, w, seed);
        let lhs = energy(&fft2(&x));
        let rhs = (h * w) as f64 * x.data.iter().map(|v| v * v).sum::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-3 * rhs.max(1e-12));
    }

    #[test]
    fn linearity(h in 1usize..=16, w in 1usize..=16, a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>()) {
        let x = plane(h, w, seed);
        let y = plane(h, w, seed ^ 0xABCD);
        let combo = Plane::new(h, w, x.data.iter().zip(&y.data).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let fx = fft2(&x);
        let fy = fft2(&y);
        let lhs = fft2(&combo);
        let rhs = Spectrum {
            height: h,
            width: w,
            data: fx.data.iter().zip(&fy.data).map(|(p, q)| p * a + q * b).collect(),
        };
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-4);
    }

    #[test]
    fn surviving_phases_are_preserved(seed in any::<u64>(), alpha in 0.0f64..4.0) {
        let x = plane(8, 8, seed);
        let spec = fft2(&x);
        let strength = Plane::new(8, 8, plane(8, 8, seed ^ 7).data.iter().map(|v| v.abs()).collect()).unwrap();
        let filtered = high_pass_filter(&spec, alpha, false);
        let enhanced = enhance_magnitude(&filtered, &strength, 1.5).unwrap();
        let sharpened = frequency_sharpen(&enhanced, 1.2).unwrap();
        for i in 0..64 {
            let (u, v) = (i / 8, i % 8);
            if filtered.magnitude(u, v) == 0.0 {
                prop_assert_eq!(sharpened.get(u, v), Complex64::new(0.0, 0.0));
                continue;
            }
            let original = spec.phase(u, v);
            for stage in [&filtered, &enhanced, &sharpened] {
                let d = (stage.phase(u, v) - original).abs();
                prop_assert!(d < 1e-5, "bin ({}, {}) moved by {}", u, v, d);
            }
        }
    }

    #[test]
    fn raising_alpha_never_adds_bins(seed in any::<u64>(), a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let spec = fft2(&plane(9, 7, seed));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(high_pass_filter(&spec, hi, false).nonzero_bins() <= high_pass_filter(&spec, lo, false).nonzero_bins());
        prop_assert!(high_pass_filter(&spec, hi / 6.0, true).nonzero_bins() <= high_pass_filter(&spec, lo / 6.0, true).nonzero_bins());
    }

    #[test]
    fn passthrough_branch_is_identity(seed in any::<u64>()) {
        let x = Tensor::random(Dims::new(1, 2, 8, 8), seed, -1.0, 1.0);
        let p = DeieParams::passthrough();
        let b = deie_branches(&x, &p).unwrap();
        prop_assert!(b.sharpened.max_abs_diff(&x) < 1e-4);
        let plan = Fft2Plan::new(8, 8);
        let s = Plane::from_tensor(&edge_strength(&extract_high_freq(&x, 3).unwrap(), 3).unwrap(), 0, 0);
        let trace = frequency_branch(&plan, &Plane::from_tensor(&x, 0, 0), &s, &p).unwrap();
        prop_assert!(trace.output.max_abs_diff(&Plane::from_tensor(&x, 0, 0)) < 1e-4);
    }

    #[test]
    fn constant_planes_have_no_edges(v in -50.0f32..50.0, h in 1usize..=12, w in 1usize..=12) {
        let x = Tensor::full(Dims::new(2, 2, h, w), v);
        let high = extract_high_freq(&x, 3).unwrap();
        prop_assert!(high.data().iter().all(|&y| y == 0.0));
        let s = edge_strength(&high, 3).unwrap();
        prop_assert!(s.data().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn deie_triples_channels_and_repeats(c in 1usize..=3, h in 2usize..=12, w in 2usize..=12, seed in any::<u64>()) {
        let x = Tensor::random(Dims::new(1, c, h, w), seed, -1.0, 1.0);
        let p = DeieParams::default();
        let a = deie_forward(&x, &p).unwrap();
        prop_assert_eq!(a.dims(), Dims::new(1, 3 * c, h, w));
        prop_assert_eq!(&a, &deie_forward(&x, &p).unwrap());
    }
}

#[test]
fn twenty_planes_including_primes() {
    let sizes = [
        (2, 2), (3, 5), (7, 7), (11, 13), (16, 16), (17, 19), (23, 8), (31, 29), (32, 32), (37, 12),
        (1, 41), (43, 1), (20, 25), (47, 6), (9, 27), (53, 4), (64, 5), (13, 61), (30, 30), (59, 3),
    ];
    for (i, &(h, w)) in sizes.iter().enumerate() {
        let x = plane(h, w, i as u64);
        let fast = fft2(&x);
        assert!(fast.max_abs_diff(&dft2_naive(&x)) < 1e-4, "{h}x{w}");
        assert!(idft2(&fast).unwrap().max_abs_diff(&x) < 1e-4, "{h}x{w}");
    }
}

#[test]
fn transform_is_bitwise_repeatable() {
    let x = plane(37, 24, 9);
    assert_eq!(fft2(&x), fft2(&x));
}
