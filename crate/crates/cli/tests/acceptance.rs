//! Acceptance criteria, one line each. Runs as a plain binary so the lines
//! are always visible; exits nonzero if any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use sffnet_cli::selftest::{fft_deviation, metrics_hand_cases, metrics_oracle, random_scene};
use sffnet_core::deie::{
    deie_branches, deie_forward, edge_strength, enhance_magnitude, extract_high_freq, frequency_sharpen,
    high_pass_filter, DeieParams,
};
use sffnet_core::graph::{default_sffnet_neck, execute, param_specs, validate, NeckWidths, Schedule};
use sffnet_core::io::save_tensor;
use sffnet_core::ldconv::{ldconv_forward, LdconvConfig};
use sffnet_core::mddc::{mddc_forward, MddcConfig};
use sffnet_core::ops::{conv2d, ConvSpec, Padding};
use sffnet_core::rng::SplitMix64;
use sffnet_core::spectral::{fft2, Plane};
use sffnet_core::wpm::{dense_param_count, depthwise_param_count, wpm_forward, WpmConfig};
use sffnet_core::{Dims, Tensor, WeightsArchive};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn spectral_oracle() -> Outcome {
    let start = Instant::now();
    let d = fft_deviation(42);
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        d.forward < 1e-4 && d.round_trip < 1e-4 && d.parseval_rel < 1e-3 && secs < 5.0,
        format!(
            "fft vs naive {:.2e}, round trip {:.2e}, Parseval rel {:.2e}, {secs:.2}s",
            d.forward, d.round_trip, d.parseval_rel
        ),
    )
}

fn deie_identity() -> Outcome {
    let mut max = 0.0f32;
    for seed in 0..20 {
        let x = Tensor::random(Dims::new(1, 1, 8, 8), seed, -1.0, 1.0);
        let b = deie_branches(&x, &DeieParams::passthrough()).unwrap();
        max = max.max(b.sharpened.max_abs_diff(&x));
    }
    Outcome::new(max < 1e-4, format!("max |X_fs - X_up| = {max:.2e} over 20 planes"))
}

fn phase_preservation() -> Outcome {
    let mut max = 0.0f64;
    let mut survivors = 0usize;
    for seed in 0..20u64 {
        let x = Plane::from_tensor(&Tensor::random(Dims::new(1, 1, 9, 8), seed, -1.0, 1.0), 0, 0);
        let s = Plane::from_tensor(&Tensor::random(Dims::new(1, 1, 9, 8), seed + 99, 0.0, 1.0), 0, 0);
        let spec = fft2(&x);
        let filtered = high_pass_filter(&spec, 0.5, false);
        let enhanced = enhance_magnitude(&filtered, &s, 1.5).unwrap();
        let sharpened = frequency_sharpen(&enhanced, 1.2).unwrap();
        for i in 0..spec.data.len() {
            if filtered.data[i].norm() == 0.0 {
                continue;
            }
            survivors += 1;
            for stage in [&filtered, &enhanced, &sharpened] {
                let d = (stage.data[i] * spec.data[i].conj()).arg().abs();
                max = max.max(d);
            }
        }
    }
    Outcome::new(
        max < 1e-5 && survivors > 0,
        format!("max phase shift {max:.2e} rad over {survivors} surviving bins"),
    )
}

fn constant_input() -> Outcome {
    let mut ok = true;
    for v in [0.0f32, 0.25, -3.5, 117.0] {
        for (h, w) in [(1, 1), (2, 5), (8, 8), (13, 7)] {
            let x = Tensor::full(Dims::new(1, 2, h, w), v);
            let p = DeieParams::default();
            let high = extract_high_freq(&x, p.k).unwrap();
            let s = edge_strength(&high, p.r).unwrap();
            ok &= high.data().iter().all(|&z| z == 0.0);
            ok &= s.data().iter().all(|&z| z == 0.0);
        }
    }
    Outcome::new(ok, "X_high and S exactly zero for 4 constants x 4 plane sizes")
}

fn shape_laws() -> Outcome {
    let mut rng = SplitMix64::new(5);
    let mut failures = Vec::new();
    for i in 0..30 {
        let c = [4usize, 8, 64][i % 3];
        let side = [64usize, 80][(i / 3) % 2];
        let mut scales: Vec<usize> = [3usize, 6, 9, 12].into_iter().filter(|_| rng.below(2) == 0).collect();
        if scales.is_empty() {
            scales.push(3);
        }
        let k = [1usize, 3, 7, 15, 31][rng.below(5) as usize];
        let x = Tensor::random(Dims::new(1, c, side, side), rng.next_u64(), -1.0, 1.0);
        let mcfg = MddcConfig {
            scales: scales.clone(),
            ..MddcConfig::default()
        };
        let mw = WeightsArchive::seeded(&mcfg.param_specs(c), i as u64);
        let wcfg = WpmConfig {
            kernel: k,
            ..WpmConfig::default()
        };
        let ww = WeightsArchive::seeded(&wcfg.param_specs(c), i as u64);
        let m = mddc_forward(&x, &mcfg, &mw).unwrap().dims();
        let w = wpm_forward(&x, &wcfg, &ww).unwrap().dims();
        let small = Tensor::random(Dims::new(1, c.min(8), 16, 16), i as u64, -1.0, 1.0);
        let dd = deie_forward(&small, &DeieParams::default()).unwrap().dims();
        if m != x.dims() || w != x.dims() || dd != small.dims().with_channels(3 * small.dims().c) {
            failures.push(format!("C={c} {side}x{side} scales={scales:?} K={k}"));
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!("30 configs, {} shape violations {failures:?}", failures.len()),
    )
}

/// The stated figure for K=31, C=64 is 16400, but `16 * (1 + 31 + 31 + 31^2)`
/// evaluates to 16384. The literal number is reported and not met.
fn wpm_linearity() -> (Outcome, bool) {
    let count = depthwise_param_count(64, 31);
    let closed_form = [3usize, 7, 15, 31, 63].into_iter().all(|k| {
        let strip = depthwise_param_count(64, k);
        let dense = dense_param_count(64, k);
        let counted: usize = WpmConfig {
            kernel: k,
            ..WpmConfig::default()
        }
        .param_specs(64)
        .iter()
        .filter(|s| s.name.contains(".dw") && s.name.ends_with(".weight"))
        .map(|s| s.dims.len())
        .sum();
        strip == 16 * (1 + 2 * k + k * k) && counted == strip && strip * 4 * k * k == dense * (k + 1) * (k + 1)
    });
    let literal = count == 16400;
    (
        Outcome::new(
            literal && closed_form,
            format!(
                "K=31 C=64 depthwise params {count} vs stated 16400 (16*(1+31+31+961) = {}); \
                 strip/dense closed form for K in {{3,7,15,31,63}}: {}",
                16 * (1 + 31 + 31 + 961),
                if closed_form { "holds" } else { "violated" }
            ),
        ),
        closed_form,
    )
}

fn ldconv_reduction() -> Outcome {
    let (c, c_out) = (3, 4);
    let cfg = LdconvConfig {
        points: 9,
        out_channels: c_out,
        ..LdconvConfig::default()
    };
    let kernel = Tensor::random(Dims::new(c_out, c, 3, 3), 1, -1.0, 1.0);
    let bias = Tensor::random(Dims::new(c_out, 1, 1, 1), 2, -0.5, 0.5);
    let mut w = WeightsArchive::new();
    w.insert("ldconv.offset.weight", Tensor::zeros(Dims::new(18, c, 3, 3)));
    w.insert("ldconv.offset.bias", Tensor::zeros(Dims::new(18, 1, 1, 1)));
    w.insert("ldconv.proj.weight", kernel.clone().reshape(Dims::new(c_out, 9 * c, 1, 1)).unwrap());
    w.insert("ldconv.proj.bias", bias.clone());
    let x = Tensor::random(Dims::new(1, c, 12, 12), 3, -1.0, 1.0);
    let got = ldconv_forward(&x, &cfg, &w).unwrap();
    let want = conv2d(
        &x,
        &ConvSpec::new(kernel)
            .with_bias(bias.into_data())
            .with_padding(Padding::symmetric(1)),
    )
    .unwrap();
    let dev = got.max_abs_diff(&want);
    let counts: Vec<i64> = (1..=20)
        .map(|p| {
            LdconvConfig {
                points: p,
                out_channels: 64,
                ..LdconvConfig::default()
            }
            .param_count(32) as i64
        })
        .collect();
    let affine = counts.windows(3).all(|w| w[2] - 2 * w[1] + w[0] == 0);
    Outcome::new(
        dev < 1e-5 && affine,
        format!(
            "zero-offset vs conv2d {dev:.2e}; second differences over P=1..20 {}",
            if affine { "all zero" } else { "nonzero" }
        ),
    )
}

fn graph_executor() -> Outcome {
    let image = [640, 640];
    let full = default_sffnet_neck(NeckWidths::new(64, 128, 256, 512), image, 1);
    let report = validate(&full).unwrap();
    let spatial = |id: &str| report.dims(id).map(|d| (d.h, d.w));
    let shapes_ok = spatial("P3") == Some((80, 80)) && spatial("P4") == Some((40, 40)) && spatial("P5") == Some((20, 20));

    let weights = WeightsArchive::seeded(&param_specs(&full, &report), 42);
    let inputs = full
        .inputs()
        .enumerate()
        .map(|(i, n)| (n.id.clone(), Tensor::random(report.dims(&n.id).unwrap(), i as u64, -1.0, 1.0)))
        .collect();
    let serial = execute(&full, &inputs, &weights, Schedule::Serial).unwrap();
    let parallel = execute(&full, &inputs, &weights, Schedule::Parallel).unwrap();
    let bitwise = serial.len() == parallel.len()
        && serial.iter().zip(&parallel).all(|((a, x), (b, y))| {
            a == b && x.dims() == y.dims() && x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits())
        });
    let run_shapes: Vec<String> = serial.iter().map(|(id, t)| format!("{id} {}", t.dims())).collect();
    Outcome::new(
        shapes_ok && bitwise,
        format!(
            "P3/P4/P5 at {:?}/{:?}/{:?}; executed widths 64/128/256/512: [{}], serial == parallel bitwise: {bitwise}",
            spatial("P3").unwrap_or_default(),
            spatial("P4").unwrap_or_default(),
            spatial("P5").unwrap_or_default(),
            run_shapes.join(", ")
        ),
    )
}

fn metrics() -> Outcome {
    let o = metrics_oracle(42, 200);
    let hand = metrics_hand_cases();
    let hand_ok = hand.iter().all(|(_, ok)| *ok);
    Outcome::new(
        o.mismatches == 0 && o.invariant_violations.is_empty() && hand_ok,
        format!(
            "{} scenes, {} mismatches vs brute force, {} invariant violations, hand cases {}",
            o.scenes,
            o.mismatches,
            o.invariant_violations.len(),
            if hand_ok { "pass" } else { "fail" }
        ),
    )
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let img = Tensor::from_fn(Dims::new(1, 1, 24, 20), |_, _, y, x| {
            if (6..18).contains(&y) && (5..15).contains(&x) {
                0.8
            } else {
                0.1 + 0.01 * ((x * 7 + y * 3) % 10) as f32
            }
        })
        .unwrap();
        sffnet_cli::pnm::write(&root.join("in.pgm"), &img, 0, false).unwrap();
        save_tensor(root.join("feat.sfft"), &Tensor::random(Dims::new(1, 8, 16, 16), 9, -1.0, 1.0)).unwrap();
        save_tensor(root.join("c2.sfft"), &Tensor::random(Dims::new(1, 8, 16, 16), 10, -1.0, 1.0)).unwrap();
        std::fs::write(root.join("run.toml"), "schema_version = 1\nseed = 7\n[mddc]\nscales = [3, 6]\n").unwrap();
        let (gts, preds) = random_scene(&mut SplitMix64::new(11));
        let lines = |recs: &[sffnet_metrics::DetectionRecord]| {
            recs.iter()
                .map(|r| serde_json::to_string(r).unwrap() + "\n")
                .collect::<String>()
        };
        std::fs::write(root.join("gt.jsonl"), lines(&gts)).unwrap();
        std::fs::write(root.join("dt.jsonl"), lines(&preds)).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }
}

/// Runs the binary and returns stdout plus the bytes of every listed output.
fn run_cli(args: &[String], outputs: &[PathBuf]) -> Result<Vec<Vec<u8>>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sffnet"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let mut bytes = vec![out.stdout];
    for p in outputs {
        bytes.push(std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    Ok(bytes)
}

/// Row labels and parameter columns of a bench report, without timings.
fn bench_structure(json: &[u8]) -> Vec<String> {
    let v: serde_json::Value = serde_json::from_slice(json).unwrap_or_default();
    v["rows"]
        .as_array()
        .map(|rows| {
            rows.iter()
                .map(|r| format!("{} {} {}", r["name"], r["params"], r["dense_params"]))
                .collect()
        })
        .unwrap_or_default()
}

fn determinism() -> Outcome {
    let fx = Fixture::new();
    let p = |n: &str| fx.path(n);
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let graph = p("neck.toml");
    let cases: Vec<(&str, Vec<String>, Vec<PathBuf>)> = vec![
        ("graph init", s(&["graph", "init", "--output", &graph, "--widths", "8,8,8,8", "--image", "64x64"]), vec![graph.clone().into()]),
        ("graph validate", s(&["graph", "validate", "--config", &graph]), vec![]),
        ("weights init", s(&["weights", "init", "--graph", &graph, "--output", &p("neck.sffw")]), vec![p("neck.sffw").into()]),
        (
            "graph run",
            s(&[
                "graph", "run", "--config", &graph, "--weights", &p("neck.sffw"), "--input",
                &format!("C2={}", p("c2.sfft")), "--random-inputs", "--outdir", &p("out"),
            ]),
            ["P3", "P4", "P5"].iter().map(|o| fx.root.join("out").join(format!("{o}.sfft"))).collect(),
        ),
        ("enhance image", s(&["enhance", "--input", &p("in.pgm"), "--output", &p("enh.pgm"), "--rescale"]), vec![p("enh.pgm").into()]),
        ("enhance tensor", s(&["enhance", "--input", &p("in.pgm"), "--output", &p("enh.sfft")]), vec![p("enh.sfft").into()]),
        (
            "spectrum",
            s(&["spectrum", "--input", &p("in.pgm"), "--output", &p("spec.pgm"), "--stage", "enhanced", "--center"]),
            vec![p("spec.pgm").into()],
        ),
        (
            "mddc",
            s(&["mddc", "--input", &p("feat.sfft"), "--output", &p("mddc.sfft"), "--config", &p("run.toml")]),
            vec![p("mddc.sfft").into()],
        ),
        (
            "eval",
            s(&["eval", "--gt", &p("gt.jsonl"), "--dt", &p("dt.jsonl"), "--report", &p("metrics.json")]),
            vec![p("metrics.json").into()],
        ),
        ("selftest", s(&["selftest", "--report", &p("selftest.json")]), vec![p("selftest.json").into()]),
    ];
    let mut failures = Vec::new();
    for (name, args, outputs) in &cases {
        match (run_cli(args, outputs), run_cli(args, outputs)) {
            (Ok(a), Ok(b)) if a == b => {}
            (Ok(_), Ok(_)) => failures.push(format!("{name}: outputs differ")),
            (Err(e), _) | (_, Err(e)) => failures.push(format!("{name}: {e}")),
        }
    }
    let bench_args = s(&["bench", "--runs", "1", "--channels", "4", "--size", "16", "--report", &p("bench.json")]);
    let bench_out = [PathBuf::from(p("bench.json"))];
    match (run_cli(&bench_args, &bench_out), run_cli(&bench_args, &bench_out)) {
        (Ok(a), Ok(b)) if bench_structure(&a[1]) == bench_structure(&b[1]) && bench_structure(&a[1]).len() == 7 => {}
        (Ok(_), Ok(_)) => failures.push("bench: row structure differs".into()),
        (Err(e), _) | (_, Err(e)) => failures.push(format!("bench: {e}")),
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{} subcommand runs compared byte-for-byte, bench compared by row structure; {}",
            cases.len(),
            if failures.is_empty() { "all identical".to_string() } else { failures.join("; ") }
        ),
    )
}

fn main() {
    let start = Instant::now();
    let (wpm, wpm_closed_form) = wpm_linearity();
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "spectral oracle", spectral_oracle()),
        (2, "DEIE identity degeneration", deie_identity()),
        (3, "phase preservation", phase_preservation()),
        (4, "constant-input law", constant_input()),
        (5, "MDDC/WPM shape laws", shape_laws()),
        (6, "WPM parameter linearity", wpm),
        (7, "LDConv reduction", ldconv_reduction()),
        (8, "graph executor", graph_executor()),
        (9, "metrics oracle", metrics()),
        (10, "determinism", determinism()),
    ];
    for (n, name, o) in &results {
        println!("criterion {n:>2} {} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!("acceptance finished in {elapsed:.1}s");

    // Criterion 6 states a count the closed form cannot produce. Its FAIL line
    // is expected; only its closed-form half gates this run.
    let unexpected: Vec<usize> = results
        .iter()
        .filter(|(n, _, o)| !o.passed && *n != 6)
        .map(|(n, _, _)| *n)
        .collect();
    if !unexpected.is_empty() || !wpm_closed_form {
        eprintln!("failing criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
