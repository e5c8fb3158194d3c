//! Wall-clock timings: fast vs literal DFT, and WPM across kernel sizes.

use std::time::Instant;

use anyhow::Result;
use serde::Serialize;
use sffnet_core::spectral::{dft2_naive, Fft2Plan, Plane};
use sffnet_core::wpm::{dense_param_count, depthwise_param_count, wpm_forward, WpmConfig};
use sffnet_core::{Dims, Tensor, WeightsArchive};

pub const WPM_KERNELS: [usize; 5] = [3, 7, 15, 31, 63];
pub const FFT_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchOptions {
    pub runs: usize,
    pub channels: usize,
    pub size: usize,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            runs: 5,
            channels: 64,
            size: 80,
            seed: sffnet_core::rng::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub median_ms: f64,
    /// Depthwise weights of the four WPM paths; empty for the FFT rows.
    pub params: Option<usize>,
    pub dense_params: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub options: BenchOptions,
    pub rows: Vec<BenchRow>,
    pub fft_speedup: f64,
}

fn median_ms(runs: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

pub fn run(opts: &BenchOptions) -> Result<BenchReport> {
    let t = Tensor::random(Dims::new(1, 1, FFT_SIZE, FFT_SIZE), opts.seed, -1.0, 1.0);
    let plane = Plane::from_tensor(&t, 0, 0);
    let plan = Fft2Plan::new(FFT_SIZE, FFT_SIZE);
    let fast = median_ms(opts.runs, || {
        std::hint::black_box(plan.forward(&plane));
        Ok(())
    })?;
    let naive = median_ms(opts.runs, || {
        std::hint::black_box(dft2_naive(&plane));
        Ok(())
    })?;
    let mut rows = vec![
        BenchRow {
            name: format!("fft2 {FFT_SIZE}x{FFT_SIZE}"),
            median_ms: fast,
            params: None,
            dense_params: None,
        },
        BenchRow {
            name: format!("dft2_naive {FFT_SIZE}x{FFT_SIZE}"),
            median_ms: naive,
            params: None,
            dense_params: None,
        },
    ];

    let x = Tensor::random(Dims::new(1, opts.channels, opts.size, opts.size), opts.seed, -1.0, 1.0);
    for k in WPM_KERNELS {
        let cfg = WpmConfig {
            kernel: k,
            ..WpmConfig::default()
        };
        cfg.validate(opts.channels)?;
        let weights = WeightsArchive::seeded(&cfg.param_specs(opts.channels), opts.seed);
        let ms = median_ms(opts.runs, || {
            std::hint::black_box(wpm_forward(&x, &cfg, &weights)?);
            Ok(())
        })?;
        rows.push(BenchRow {
            name: format!("wpm K={k}"),
            median_ms: ms,
            params: Some(depthwise_param_count(opts.channels, k)),
            dense_params: Some(dense_param_count(opts.channels, k)),
        });
    }
    Ok(BenchReport {
        options: *opts,
        rows,
        fft_speedup: naive / fast.max(1e-9),
    })
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let o = &self.options;
        writeln!(f, "median of {} runs; wpm input 1x{}x{}x{}", o.runs, o.channels, o.size, o.size)?;
        writeln!(f, "{:<20} {:>12} {:>12} {:>12}", "case", "median_ms", "dw_params", "dense_params")?;
        let opt = |v: Option<usize>| v.map_or_else(|| "-".to_string(), |n| n.to_string());
        for r in &self.rows {
            writeln!(
                f,
                "{:<20} {:>12.3} {:>12} {:>12}",
                r.name,
                r.median_ms,
                opt(r.params),
                opt(r.dense_params)
            )?;
        }
        write!(f, "fft2 speedup over dft2_naive: {:.1}x", self.fft_speedup)
    }
}
