//! Argument definitions and the subcommand implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sffnet_core::deie::{deie_branches, edge_strength, extract_high_freq, frequency_branch};
use sffnet_core::graph::{default_sffnet_neck, execute, param_specs, validate, GraphConfig, NeckWidths, Schedule};
use sffnet_core::io::{load_archive, load_tensor, save_archive, save_tensor};
use sffnet_core::mddc::mddc_forward;
use sffnet_core::spectral::{Fft2Plan, Plane};
use sffnet_core::weights::param_count;
use sffnet_core::{Dims, Tensor, WeightsArchive};
use sffnet_metrics::{evaluate, EvalParams, MetricsReport, RecordKind};

use crate::bench::{self, BenchOptions};
use crate::config::RunConfig;
use crate::{jsonl, pnm, selftest};

#[derive(Debug, Parser)]
#[command(name = "sffnet", version, about = "Frequency-domain feature operators, pyramid graphs and detection metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the edge-enhancement block on an image or tensor.
    Enhance(EnhanceArgs),
    /// Write the log-magnitude spectrum of one channel at one filter stage.
    Spectrum(SpectrumArgs),
    /// Run the multi-scale coupling module on an image or tensor.
    Mddc(MddcArgs),
    /// Pyramid graph tools.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Weights archive tools.
    #[command(subcommand)]
    Weights(WeightsCommand),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Run every oracle suite; exits nonzero on any failure.
    Selftest(SelftestArgs),
    /// Time the FFT and the wide-area module.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Branch {
    Identity,
    High,
    Freq,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// PGM/PPM image or `.sfft` tensor.
    #[arg(long)]
    pub input: PathBuf,
    /// `.pgm`/`.ppm` writes one branch; anything else writes a tensor file.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Branch to write. Image outputs default to `freq`; tensor outputs
    /// default to the fused result.
    #[arg(long, value_enum)]
    pub branch: Option<Branch>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Min-max rescale image outputs to [0, 1] instead of clamping.
    #[arg(long)]
    pub rescale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Input,
    Filtered,
    Enhanced,
    Sharpened,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    #[arg(long, value_enum, default_value_t = Stage::Sharpened)]
    pub stage: Stage,
    /// Move the zero-frequency bin to the centre.
    #[arg(long)]
    pub center: bool,
}

#[derive(Debug, Args)]
pub struct MddcArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Weights archive; seeded initialisation when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Serial,
    Parallel,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Serial => Schedule::Serial,
            ScheduleArg::Parallel => Schedule::Parallel,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Infer and print every node's shape.
    Validate {
        /// Graph TOML.
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute a graph and write each output node as `{id}.sfft`.
    Run(GraphRunArgs),
    /// Write the default neck as a graph TOML.
    Init {
        #[arg(long)]
        output: PathBuf,
        /// Channel widths of C2,C3,C4,C5.
        #[arg(long, default_value = "64,128,256,512")]
        widths: String,
        /// Image size as HxW.
        #[arg(long, default_value = "640x640")]
        image: String,
        #[arg(long, default_value_t = 1)]
        batch: usize,
    },
}

#[derive(Debug, Args)]
pub struct GraphRunArgs {
    /// Graph TOML.
    #[arg(long)]
    pub config: PathBuf,
    /// Weights archive; seeded initialisation when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Input bindings as NAME=path.
    #[arg(long = "input", value_name = "NAME=PATH")]
    pub inputs: Vec<String>,
    /// Fill unbound inputs with seeded uniform noise in [-1, 1].
    #[arg(long)]
    pub random_inputs: bool,
    #[arg(long, default_value_t = sffnet_core::rng::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub outdir: PathBuf,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Parallel)]
    pub schedule: ScheduleArg,
}

#[derive(Debug, Subcommand)]
pub enum WeightsCommand {
    /// Write seeded weights for a graph or a standalone MDDC block.
    Init {
        #[arg(long)]
        output: PathBuf,
        /// Graph TOML whose parameters to initialise.
        #[arg(long, conflicts_with = "mddc_channels", required_unless_present = "mddc_channels")]
        graph: Option<PathBuf>,
        /// Channel count of a standalone MDDC block configured by `--config`.
        #[arg(long)]
        mddc_channels: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the run config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the entries of an archive.
    List {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth JSON lines.
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection JSON lines.
    #[arg(long)]
    pub dt: PathBuf,
    /// `start:step:end` or a comma list.
    #[arg(long, default_value = "0.5:0.05:0.95")]
    pub iou_thrs: String,
    /// Write the metrics as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = sffnet_core::rng::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 64)]
    pub channels: usize,
    #[arg(long, default_value_t = 80)]
    pub size: usize,
    #[arg(long, default_value_t = sffnet_core::rng::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Runs one command. `Ok(false)` means it completed but found failures.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Enhance(a) => enhance(&a).map(|_| true),
        Command::Spectrum(a) => spectrum(&a).map(|_| true),
        Command::Mddc(a) => mddc(&a).map(|_| true),
        Command::Graph(GraphCommand::Validate { config }) => graph_validate(&config).map(|_| true),
        Command::Graph(GraphCommand::Run(a)) => graph_run(&a).map(|_| true),
        Command::Graph(GraphCommand::Init {
            output,
            widths,
            image,
            batch,
        }) => graph_init(&output, &widths, &image, batch).map(|_| true),
        Command::Weights(WeightsCommand::Init {
            output,
            graph,
            mddc_channels,
            config,
            seed,
        }) => weights_init(&output, graph.as_deref(), mddc_channels, config.as_deref(), seed).map(|_| true),
        Command::Weights(WeightsCommand::List { input }) => weights_list(&input).map(|_| true),
        Command::Eval(a) => eval(&a).map(|_| true),
        Command::Selftest(a) => run_selftest(&a),
        Command::Bench(a) => run_bench(&a).map(|_| true),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

/// Reads a PGM/PPM image or a tensor file, by extension.
pub fn read_tensor(path: &Path) -> Result<Tensor> {
    match extension(path).as_deref() {
        Some("pgm" | "ppm") => pnm::read(path),
        _ => load_tensor(path).with_context(|| format!("reading tensor {}", path.display())),
    }
}

/// Writes channel 0 as PGM, channels 0..3 as PPM, or the whole tensor.
pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    match extension(path).as_deref() {
        Some("pgm") => pnm::write(path, t, 0, false),
        Some("ppm") => pnm::write(path, t, 0, true),
        _ => save_tensor(path, t).with_context(|| format!("writing tensor {}", path.display())),
    }
}

/// Writes to stdout. A reader that closes early (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn is_image(path: &Path) -> bool {
    matches!(extension(path).as_deref(), Some("pgm" | "ppm"))
}

/// Maps each `(n, c)` plane affinely onto `[0, 1]`; constant planes become 0.
pub fn rescale_planes(t: &Tensor) -> Result<Tensor> {
    let d = t.dims();
    let mut data = Vec::with_capacity(d.len());
    for p in t.planes() {
        let lo = p.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = p.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let span = hi - lo;
        data.extend(p.iter().map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 }));
    }
    Ok(Tensor::new(d, data)?)
}

fn enhance(a: &EnhanceArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(a.config.as_deref())?;
    if let Some(v) = a.alpha {
        cfg.deie.alpha = v;
    }
    if let Some(v) = a.beta {
        cfg.deie.beta = v;
    }
    if let Some(v) = a.gamma {
        cfg.deie.gamma = v;
    }
    cfg.deie.validate()?;
    let x = read_tensor(&a.input)?;
    let branches = deie_branches(&x, &cfg.deie)?;
    let branch = if is_image(&a.output) {
        Some(a.branch.unwrap_or(Branch::Freq))
    } else {
        a.branch
    };
    let out = match branch {
        None => branches.fuse(&cfg.deie)?,
        Some(Branch::Identity) => branches.identity,
        Some(Branch::High) => branches.high,
        Some(Branch::Freq) => branches.sharpened,
    };
    let out = if a.rescale { rescale_planes(&out)? } else { out };
    write_tensor(&a.output, &out)?;
    emit(&format!("enhance: {} -> {} {}\n", x.dims(), out.dims(), a.output.display()))
}

/// `log1p(|F|)` of one plane at the chosen stage, scaled so the maximum is 1.
pub fn log_spectrum(x: &Tensor, channel: usize, stage: Stage, cfg: &RunConfig, center: bool) -> Result<Tensor> {
    let d = x.dims();
    ensure!(channel < d.c, "channel {channel} out of range for {d}");
    let p = &cfg.deie;
    p.validate()?;
    let strength = edge_strength(&extract_high_freq(x, p.k)?, p.r)?;
    let plan = Fft2Plan::new(d.h, d.w);
    let trace = frequency_branch(
        &plan,
        &Plane::from_tensor(x, 0, channel),
        &Plane::from_tensor(&strength, 0, channel),
        p,
    )?;
    let spec = match stage {
        Stage::Input => &trace.input,
        Stage::Filtered => &trace.filtered,
        Stage::Enhanced => &trace.enhanced,
        Stage::Sharpened => &trace.sharpened,
    };
    let mag = spec.magnitudes();
    let logs: Vec<f64> = mag.data.iter().map(|m| m.ln_1p()).collect();
    let max = logs.iter().copied().fold(0.0f64, f64::max);
    let (h, w) = (d.h, d.w);
    let mut out = vec![0.0f32; h * w];
    for u in 0..h {
        for v in 0..w {
            let (ru, rv) = if center { ((u + h / 2) % h, (v + w / 2) % w) } else { (u, v) };
            let val = logs[u * w + v];
            out[ru * w + rv] = if max > 0.0 { (val / max) as f32 } else { 0.0 };
        }
    }
    Ok(Tensor::new(Dims::new(1, 1, h, w), out)?)
}

fn spectrum(a: &SpectrumArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let x = read_tensor(&a.input)?;
    let out = log_spectrum(&x, a.channel, a.stage, &cfg, a.center)?;
    write_tensor(&a.output, &out)?;
    emit(&format!("spectrum: channel {} {:?} -> {}\n", a.channel, a.stage, a.output.display()))
}

fn mddc(a: &MddcArgs) -> Result<()> {
    let cfg = RunConfig::load_or_default(a.config.as_deref())?;
    let x = read_tensor(&a.input)?;
    let c = x.dims().c;
    cfg.mddc.validate(c)?;
    let weights = match &a.weights {
        Some(p) => load_archive(p).with_context(|| format!("reading weights {}", p.display()))?,
        None => WeightsArchive::seeded(&cfg.mddc.param_specs(c), cfg.seed),
    };
    let out = mddc_forward(&x, &cfg.mddc, &weights)?;
    write_tensor(&a.output, &out)?;
    emit(&format!("mddc: {} -> {} {}\n", x.dims(), out.dims(), a.output.display()))
}

fn graph_validate(path: &Path) -> Result<()> {
    let cfg = load_graph(path)?;
    let report = validate(&cfg)?;
    let specs = param_specs(&cfg, &report);
    emit(&format!(
        "{report}{} nodes, {} parameter tensors, {} parameters\n",
        cfg.nodes.len(),
        specs.len(),
        param_count(&specs)
    ))
}

fn load_graph(path: &Path) -> Result<GraphConfig> {
    GraphConfig::load(path).with_context(|| format!("loading graph {}", path.display()))
}

fn parse_binding(s: &str) -> Result<(String, PathBuf)> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("input binding `{s}` is not NAME=PATH"))?;
    ensure!(!name.is_empty(), "input binding `{s}` has an empty name");
    Ok((name.to_string(), PathBuf::from(path)))
}

fn graph_run(a: &GraphRunArgs) -> Result<()> {
    let cfg = load_graph(&a.config)?;
    let report = validate(&cfg)?;
    let specs = param_specs(&cfg, &report);
    let weights = match &a.weights {
        Some(p) => load_archive(p).with_context(|| format!("reading weights {}", p.display()))?,
        None => WeightsArchive::seeded(&specs, a.seed),
    };
    let mut inputs = BTreeMap::new();
    for b in &a.inputs {
        let (name, path) = parse_binding(b)?;
        if inputs.insert(name.clone(), read_tensor(&path)?).is_some() {
            bail!("input `{name}` bound twice");
        }
    }
    if a.random_inputs {
        for (i, node) in cfg.inputs().enumerate() {
            if !inputs.contains_key(&node.id) {
                let d = report.dims(&node.id).expect("validated input");
                inputs.insert(node.id.clone(), Tensor::random(d, a.seed.wrapping_add(i as u64), -1.0, 1.0));
            }
        }
    }
    let outputs = execute(&cfg, &inputs, &weights, a.schedule.into())?;
    std::fs::create_dir_all(&a.outdir).with_context(|| format!("creating {}", a.outdir.display()))?;
    let mut text = String::new();
    for (id, t) in &outputs {
        let path = a.outdir.join(format!("{id}.sfft"));
        save_tensor(&path, t).with_context(|| format!("writing {}", path.display()))?;
        writeln!(text, "{id}: {} -> {}", t.dims(), path.display())?;
    }
    emit(&text)
}

fn parse_list<const N: usize>(s: &str, sep: char, what: &str) -> Result<[usize; N]> {
    let v: Vec<usize> = s
        .split(sep)
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad {what} `{s}`"))?;
    v.try_into().map_err(|_| anyhow!("{what} `{s}` needs {N} values"))
}

fn graph_init(output: &Path, widths: &str, image: &str, batch: usize) -> Result<()> {
    let [c2, c3, c4, c5] = parse_list::<4>(widths, ',', "widths")?;
    let [h, w] = parse_list::<2>(image, 'x', "image size")?;
    let cfg = default_sffnet_neck(NeckWidths::new(c2, c3, c4, c5), [h, w], batch);
    validate(&cfg)?;
    std::fs::write(output, cfg.to_toml()?).with_context(|| format!("writing {}", output.display()))?;
    emit(&format!("graph: {} nodes -> {}\n", cfg.nodes.len(), output.display()))
}

fn weights_init(
    output: &Path,
    graph: Option<&Path>,
    mddc_channels: Option<usize>,
    config: Option<&Path>,
    seed: Option<u64>,
) -> Result<()> {
    let cfg = RunConfig::load_or_default(config)?;
    let seed = seed.unwrap_or(cfg.seed);
    let specs = match (graph, mddc_channels) {
        (Some(g), _) => {
            let g = load_graph(g)?;
            param_specs(&g, &validate(&g)?)
        }
        (None, Some(c)) => {
            cfg.mddc.validate(c)?;
            cfg.mddc.param_specs(c)
        }
        (None, None) => bail!("need --graph or --mddc-channels"),
    };
    let archive = WeightsArchive::seeded(&specs, seed);
    save_archive(output, &archive).with_context(|| format!("writing {}", output.display()))?;
    emit(&format!(
        "weights: {} tensors, {} parameters -> {}\n",
        archive.len(),
        param_count(&specs),
        output.display()
    ))
}

fn weights_list(input: &Path) -> Result<()> {
    let archive = load_archive(input).with_context(|| format!("reading weights {}", input.display()))?;
    let mut text = String::new();
    for (name, t) in archive.iter() {
        writeln!(text, "{name} {}", t.dims())?;
    }
    emit(&text)
}

#[derive(Debug, Serialize)]
struct CategoryAp {
    category_id: i64,
    ap: f64,
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    metrics: MetricsReport,
    iou_thresholds: Vec<f64>,
    per_category: Vec<CategoryAp>,
}

fn eval(a: &EvalArgs) -> Result<()> {
    let gts = jsonl::read(&a.gt, RecordKind::GroundTruth)?;
    let dts = jsonl::read(&a.dt, RecordKind::Prediction)?;
    let params = EvalParams {
        iou_thresholds: jsonl::parse_thresholds(&a.iou_thrs)?,
        ..EvalParams::default()
    };
    let evaluation = evaluate(&dts, &gts, &params);
    let metrics = evaluation.report();
    let mut text = String::new();
    for (name, v) in metrics.fields() {
        writeln!(text, "{name:<7} {v:.6}")?;
    }
    let per_category: Vec<CategoryAp> = evaluation
        .per_category_ap()
        .into_iter()
        .map(|(category_id, ap)| CategoryAp { category_id, ap })
        .collect();
    for c in &per_category {
        writeln!(text, "category {:<5} AP {:.6}", c.category_id, c.ap)?;
    }
    if let Some(path) = &a.report {
        let out = EvalOutput {
            metrics,
            iou_thresholds: params.iou_thresholds,
            per_category,
        };
        write_json(path, &out)?;
    }
    emit(&text)
}

fn run_selftest(a: &SelftestArgs) -> Result<bool> {
    let results = selftest::run_all(a.seed);
    if let Some(path) = &a.report {
        write_json(path, &results)?;
    }
    let mut text = String::new();
    for r in &results {
        writeln!(text, "{r}")?;
    }
    let passed = results.iter().all(|r| r.passed);
    writeln!(text, "selftest: {}", if passed { "PASS" } else { "FAIL" })?;
    emit(&text)?;
    Ok(passed)
}

fn run_bench(a: &BenchArgs) -> Result<()> {
    let opts = BenchOptions {
        runs: a.runs,
        channels: a.channels,
        size: a.size,
        seed: a.seed,
    };
    let report = bench::run(&opts)?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    emit(&format!("{report}\n"))
}
