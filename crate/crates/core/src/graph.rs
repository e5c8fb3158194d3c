//! Declarative feature graphs: static shape inference and execution.
//!
//! A [`GraphConfig`] is a list of nodes in dependency order. Every node names
//! its inputs by id; those ids must be declared earlier. `input` nodes are
//! bound to caller tensors, `output` nodes name the results. Parameters for a
//! node live in the weights archive under the node id as prefix
//! (`t4.weight`, `p3.cbs.weight`, ...).
//!
//! Configs are TOML:
//!
//! ```toml
//! schema_version = 1
//! batch = 1
//! image = [640, 640]
//!
//! [[nodes]]
//! id = "C3"
//! op = { kind = "input", channels = 128, stride = 8 }
//!
//! [[nodes]]
//! id = "P3"
//! inputs = ["C3"]
//! op = { kind = "output" }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deie::{deie_forward, DeieParams};
use crate::error::{Error, Result, ResultExt};
use crate::layers::conv_bn_silu;
use crate::ldconv::{ldconv_forward, LdconvConfig};
use crate::mddc::{mddc_forward, MddcConfig};
use crate::ops::{bilinear_upsample, concat_channels, Padding};
use crate::tensor::{Dims, Tensor};
use crate::weights::{ParamSpec, WeightsArchive};
use crate::wpm::{wpm_forward, WpmConfig};

pub const SCHEMA_VERSION: u32 = 1;

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    /// Graph entry at `stride` relative to the configured image size.
    Input { channels: usize, stride: usize },
    Output,
    /// Same-padded convolution, optionally followed by BN + SiLU.
    Conv {
        out_channels: usize,
        #[serde(default = "one")]
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default = "one")]
        groups: usize,
        #[serde(default = "yes")]
        bn_act: bool,
    },
    /// Stride-2 3x3 convolution + BN + SiLU.
    Downsample { out_channels: usize },
    /// Bilinear upsampling by an integer factor.
    Upsample {
        #[serde(default = "two")]
        factor: usize,
    },
    Concat,
    Mddc(MddcConfig),
    Wpm(WpmConfig),
    Ldconv(LdconvConfig),
    Deie(DeieParams),
}

impl Op {
    pub fn kind(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Output => "output",
            Op::Conv { .. } => "conv",
            Op::Downsample { .. } => "downsample",
            Op::Upsample { .. } => "upsample",
            Op::Concat => "concat",
            Op::Mddc(_) => "mddc",
            Op::Wpm(_) => "wpm",
            Op::Ldconv(_) => "ldconv",
            Op::Deie(_) => "deie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    pub op: Op,
}

impl Node {
    pub fn new(id: impl Into<String>, op: Op, inputs: &[&str]) -> Self {
        Self {
            id: id.into(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            op,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub schema_version: u32,
    #[serde(default = "one")]
    pub batch: usize,
    /// `[height, width]` of the image the pyramid strides refer to.
    pub image: [usize; 2],
    pub nodes: Vec<Node>,
}

impl GraphConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n.op, Op::Input { .. }))
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| matches!(n.op, Op::Output))
    }

    pub fn count_kind(&self, kind: &str) -> usize {
        self.nodes.iter().filter(|n| n.op.kind() == kind).count()
    }
}

/// Inferred output dims of every node, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeReport {
    pub rows: Vec<(String, &'static str, Dims)>,
}

impl ShapeReport {
    pub fn dims(&self, id: &str) -> Option<Dims> {
        self.rows.iter().find(|r| r.0 == id).map(|r| r.2)
    }
}

impl fmt::Display for ShapeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(4).max(4);
        writeln!(f, "{:<width$}  {:<10}  {:>5} {:>6} {:>6} {:>6}", "node", "op", "n", "c", "h", "w")?;
        for (id, kind, d) in &self.rows {
            writeln!(f, "{id:<width$}  {kind:<10}  {:>5} {:>6} {:>6} {:>6}", d.n, d.c, d.h, d.w)?;
        }
        Ok(())
    }
}

fn graph_err(msg: String) -> Error {
    Error::Graph(msg)
}

/// Finds a cycle reachable through forward references, for diagnostics.
fn find_cycle(cfg: &GraphConfig, index: &HashMap<&str, usize>) -> Option<Vec<String>> {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(
        i: usize,
        cfg: &GraphConfig,
        index: &HashMap<&str, usize>,
        state: &mut [u8],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<String>> {
        state[i] = 1;
        stack.push(i);
        for inp in &cfg.nodes[i].inputs {
            let Some(&j) = index.get(inp.as_str()) else { continue };
            if state[j] == 1 {
                let start = stack.iter().position(|&s| s == j).unwrap();
                let mut cycle: Vec<String> =
                    stack[start..].iter().map(|&s| cfg.nodes[s].id.clone()).collect();
                cycle.push(cfg.nodes[j].id.clone());
                return Some(cycle);
            }
            if state[j] == 0 {
                if let Some(c) = visit(j, cfg, index, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[i] = 2;
        None
    }
    let mut state = vec![0u8; cfg.nodes.len()];
    for i in 0..cfg.nodes.len() {
        if state[i] == 0 {
            if let Some(c) = visit(i, cfg, index, &mut state, &mut Vec::new()) {
                return Some(c);
            }
        }
    }
    None
}

fn expect_arity(node: &Node) -> Result<()> {
    let n = node.inputs.len();
    let ok = match node.op {
        Op::Input { .. } => n == 0,
        Op::Concat => n >= 2,
        _ => n == 1,
    };
    if ok {
        return Ok(());
    }
    let want = match node.op {
        Op::Input { .. } => "no inputs",
        Op::Concat => "at least two inputs",
        _ => "exactly one input",
    };
    Err(graph_err(format!(
        "node `{}` ({}) takes {want}, got {n}",
        node.id,
        node.op.kind()
    )))
}

fn infer_node(cfg: &GraphConfig, node: &Node, ins: &[(&str, Dims)]) -> Result<Dims> {
    let id = &node.id;
    let bad = |axis: &str, detail: String| graph_err(format!("node `{id}`: {axis}: {detail}"));
    match &node.op {
        Op::Input { channels, stride } => {
            let [ih, iw] = cfg.image;
            if *channels == 0 || *stride == 0 {
                return Err(bad("dims", "channels and stride must be >= 1".into()));
            }
            if ih % stride != 0 || iw % stride != 0 {
                return Err(bad(
                    "spatial",
                    format!("image {ih}x{iw} not divisible by stride {stride}"),
                ));
            }
            Ok(Dims::new(cfg.batch, *channels, ih / stride, iw / stride))
        }
        Op::Output => Ok(ins[0].1),
        Op::Conv {
            out_channels,
            kernel,
            stride,
            groups,
            ..
        } => {
            let d = ins[0].1;
            if *kernel == 0 || *stride == 0 || *groups == 0 || *out_channels == 0 {
                return Err(bad("params", "kernel, stride, groups, out_channels must be >= 1".into()));
            }
            if !d.c.is_multiple_of(*groups) || out_channels % groups != 0 {
                return Err(bad(
                    "channels",
                    format!("{} -> {out_channels} not divisible by groups {groups}", d.c),
                ));
            }
            let p = Padding::same(*kernel, *kernel);
            Ok(Dims::new(
                d.n,
                *out_channels,
                (d.h + p.top + p.bottom - kernel) / stride + 1,
                (d.w + p.left + p.right - kernel) / stride + 1,
            ))
        }
        Op::Downsample { out_channels } => {
            let d = ins[0].1;
            if *out_channels == 0 {
                return Err(bad("channels", "out_channels must be >= 1".into()));
            }
            Ok(Dims::new(d.n, *out_channels, (d.h - 1) / 2 + 1, (d.w - 1) / 2 + 1))
        }
        Op::Upsample { factor } => {
            if *factor == 0 {
                return Err(bad("factor", "must be >= 1".into()));
            }
            let d = ins[0].1;
            Ok(d.with_spatial(d.h * factor, d.w * factor))
        }
        Op::Concat => {
            let (first_id, first) = ins[0];
            for &(other_id, d) in &ins[1..] {
                if d.n != first.n {
                    return Err(bad(
                        "batch",
                        format!("`{first_id}` has {} but `{other_id}` has {}", first.n, d.n),
                    ));
                }
                if (d.h, d.w) != (first.h, first.w) {
                    return Err(bad(
                        "spatial",
                        format!(
                            "`{first_id}` is {}x{} but `{other_id}` is {}x{}",
                            first.h, first.w, d.h, d.w
                        ),
                    ));
                }
            }
            Ok(first.with_channels(ins.iter().map(|(_, d)| d.c).sum()))
        }
        Op::Mddc(m) => {
            let d = ins[0].1;
            m.validate(d.c).map_err(|e| bad("mddc", e.to_string()))?;
            if let Some(&s) = m.scales.iter().find(|&&s| s > d.h.min(d.w)) {
                return Err(bad("spatial", format!("scale {s} exceeds {}x{}", d.h, d.w)));
            }
            Ok(d)
        }
        Op::Wpm(w) => {
            let d = ins[0].1;
            w.validate(d.c).map_err(|e| bad("wpm", e.to_string()))?;
            Ok(d)
        }
        Op::Ldconv(l) => {
            l.validate().map_err(|e| bad("ldconv", e.to_string()))?;
            Ok(l.output_dims(ins[0].1))
        }
        Op::Deie(p) => {
            p.validate().map_err(|e| bad("deie", e.to_string()))?;
            Ok(crate::deie::output_dims(ins[0].1, p))
        }
    }
}

/// Static checks and shape inference over the whole graph.
pub fn validate(cfg: &GraphConfig) -> Result<ShapeReport> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    if cfg.nodes.is_empty() {
        return Err(graph_err("graph has no nodes".into()));
    }
    if cfg.batch == 0 || cfg.image.contains(&0) {
        return Err(graph_err("batch and image size must be >= 1".into()));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, node) in cfg.nodes.iter().enumerate() {
        if index.insert(node.id.as_str(), i).is_some() {
            return Err(graph_err(format!("duplicate node id `{}`", node.id)));
        }
    }
    if cfg.inputs().next().is_none() {
        return Err(graph_err("graph has no input nodes".into()));
    }
    if cfg.outputs().next().is_none() {
        return Err(graph_err("graph has no output nodes".into()));
    }
    for (i, node) in cfg.nodes.iter().enumerate() {
        for inp in &node.inputs {
            match index.get(inp.as_str()) {
                None => {
                    return Err(graph_err(format!(
                        "node `{}`: unknown input `{inp}`",
                        node.id
                    )))
                }
                Some(&j) if j >= i => {
                    if let Some(cycle) = find_cycle(cfg, &index) {
                        return Err(graph_err(format!("cycle: {}", cycle.join(" -> "))));
                    }
                    return Err(graph_err(format!(
                        "node `{}`: input `{inp}` is declared later",
                        node.id
                    )));
                }
                Some(_) => {}
            }
        }
    }

    let mut rows: Vec<(String, &'static str, Dims)> = Vec::with_capacity(cfg.nodes.len());
    for node in &cfg.nodes {
        expect_arity(node)?;
        let ins: Vec<(&str, Dims)> = node
            .inputs
            .iter()
            .map(|inp| (inp.as_str(), rows[index[inp.as_str()]].2))
            .collect();
        let d = infer_node(cfg, node, &ins)?;
        rows.push((node.id.clone(), node.op.kind(), d));
    }
    Ok(ShapeReport { rows })
}

/// Parameters every node of a validated graph reads.
pub fn param_specs(cfg: &GraphConfig, report: &ShapeReport) -> Vec<ParamSpec> {
    let index: HashMap<&str, usize> = cfg
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let mut specs = Vec::new();
    for node in &cfg.nodes {
        let c_in = node
            .inputs
            .first()
            .map(|i| report.rows[index[i.as_str()]].2.c)
            .unwrap_or(0);
        let id = node.id.as_str();
        match &node.op {
            Op::Conv {
                out_channels,
                kernel,
                groups,
                ..
            } => specs.extend(ParamSpec::conv(id, *out_channels, c_in / groups, *kernel, *kernel)),
            Op::Downsample { out_channels } => {
                specs.extend(ParamSpec::conv(id, *out_channels, c_in, 3, 3))
            }
            Op::Mddc(m) => specs.extend(m.clone().with_prefix(id).param_specs(c_in)),
            Op::Wpm(w) => specs.extend(
                WpmConfig {
                    prefix: id.into(),
                    ..w.clone()
                }
                .param_specs(c_in),
            ),
            Op::Ldconv(l) => specs.extend(
                LdconvConfig {
                    prefix: id.into(),
                    ..l.clone()
                }
                .param_specs(c_in),
            ),
            _ => {}
        }
    }
    specs
}

fn run_node(node: &Node, ins: &[&Tensor], weights: &WeightsArchive) -> Result<Tensor> {
    let id = node.id.as_str();
    let x = ins[0];
    match &node.op {
        Op::Input { .. } | Op::Output => Ok(x.clone()),
        Op::Conv {
            out_channels,
            kernel,
            stride,
            groups,
            bn_act,
        } => conv_bn_silu(
            x,
            weights,
            id,
            Dims::new(*out_channels, x.dims().c / groups, *kernel, *kernel),
            *stride,
            Padding::same(*kernel, *kernel),
            *groups,
            *bn_act,
        ),
        Op::Downsample { out_channels } => conv_bn_silu(
            x,
            weights,
            id,
            Dims::new(*out_channels, x.dims().c, 3, 3),
            2,
            Padding::symmetric(1),
            1,
            true,
        ),
        Op::Upsample { factor } => {
            let d = x.dims();
            bilinear_upsample(x, (d.h * factor, d.w * factor))
        }
        Op::Concat => concat_channels(ins),
        Op::Mddc(m) => mddc_forward(x, &m.clone().with_prefix(id), weights),
        Op::Wpm(w) => wpm_forward(
            x,
            &WpmConfig {
                prefix: id.into(),
                ..w.clone()
            },
            weights,
        ),
        Op::Ldconv(l) => ldconv_forward(
            x,
            &LdconvConfig {
                prefix: id.into(),
                ..l.clone()
            },
            weights,
        ),
        Op::Deie(p) => deie_forward(x, p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// One node at a time in declaration order.
    #[default]
    Serial,
    /// Nodes grouped into dependency levels; each level runs concurrently.
    Parallel,
}

/// Evaluates the graph. Returns the output nodes' tensors in declaration
/// order, keyed by node id.
pub fn execute(
    cfg: &GraphConfig,
    inputs: &BTreeMap<String, Tensor>,
    weights: &WeightsArchive,
    schedule: Schedule,
) -> Result<IndexMap<String, Tensor>> {
    let report = validate(cfg)?;
    for name in inputs.keys() {
        if !cfg.inputs().any(|n| &n.id == name) {
            return Err(graph_err(format!("tensor bound to `{name}`, which is not an input node")));
        }
    }
    let index: HashMap<&str, usize> = cfg
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();

    let mut values: Vec<Option<Tensor>> = vec![None; cfg.nodes.len()];
    for (i, node) in cfg.nodes.iter().enumerate() {
        if let Op::Input { .. } = node.op {
            let t = inputs
                .get(&node.id)
                .ok_or_else(|| graph_err(format!("input `{}` is not bound", node.id)))?;
            let want = report.rows[i].2;
            if t.dims() != want {
                return Err(graph_err(format!(
                    "input `{}` is {}, graph expects {want}",
                    node.id,
                    t.dims()
                )));
            }
            values[i] = Some(t.clone());
        }
    }

    let eval = |i: usize, values: &[Option<Tensor>]| -> Result<Tensor> {
        let node = &cfg.nodes[i];
        let ins: Vec<&Tensor> = node
            .inputs
            .iter()
            .map(|n| values[index[n.as_str()]].as_ref().expect("dependency evaluated"))
            .collect();
        let out = run_node(node, &ins, weights)
            .context_with(|| format!("node `{}` ({})", node.id, node.op.kind()))?;
        let want = report.rows[i].2;
        if out.dims() != want {
            return Err(graph_err(format!(
                "internal: node `{}` produced {}, inferred {want}",
                node.id,
                out.dims()
            )));
        }
        Ok(out)
    };

    let pending: Vec<usize> = (0..cfg.nodes.len()).filter(|&i| values[i].is_none()).collect();
    match schedule {
        Schedule::Serial => {
            for i in pending {
                values[i] = Some(eval(i, &values)?);
            }
        }
        Schedule::Parallel => {
            let mut level = vec![0usize; cfg.nodes.len()];
            for &i in &pending {
                level[i] = cfg.nodes[i]
                    .inputs
                    .iter()
                    .map(|n| level[index[n.as_str()]] + 1)
                    .max()
                    .unwrap_or(0);
            }
            let depth = pending.iter().map(|&i| level[i]).max().unwrap_or(0);
            for l in 1..=depth {
                let batch: Vec<usize> = pending.iter().copied().filter(|&i| level[i] == l).collect();
                let results: Vec<Result<Tensor>> =
                    batch.par_iter().map(|&i| eval(i, &values)).collect();
                for (i, r) in batch.into_iter().zip(results) {
                    values[i] = Some(r?);
                }
            }
        }
    }

    Ok(cfg
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n.op, Op::Output))
        .map(|(i, n)| (n.id.clone(), values[i].take().expect("output evaluated")))
        .collect())
}

/// Channel widths of the C2..C5 backbone levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeckWidths {
    pub c2: usize,
    pub c3: usize,
    pub c4: usize,
    pub c5: usize,
}

impl NeckWidths {
    pub fn new(c2: usize, c3: usize, c4: usize, c5: usize) -> Self {
        Self { c2, c3, c4, c5 }
    }
}

/// The default neck: concat-only top-down and bottom-up fusion, LDConv on C2
/// joining at stride 8, WPM at P3.
///
/// ```text
/// T4 = conv1x1(concat(C4, up(C5)))
/// T3 = conv1x1(concat(C3, up(T4), down(ldconv(C2))))
/// P3 = wpm(T3)
/// P4 = conv1x1(concat(T4, down(P3)))
/// P5 = conv1x1(concat(C5, down(P4)))
/// ```
pub fn default_sffnet_neck(widths: NeckWidths, image: [usize; 2], batch: usize) -> GraphConfig {
    let fuse = |out: usize| Op::Conv {
        out_channels: out,
        kernel: 1,
        stride: 1,
        groups: 1,
        bn_act: true,
    };
    let input = |channels, stride| Op::Input { channels, stride };
    let NeckWidths { c2, c3, c4, c5 } = widths;
    let nodes = vec![
        Node::new("C2", input(c2, 4), &[]),
        Node::new("C3", input(c3, 8), &[]),
        Node::new("C4", input(c4, 16), &[]),
        Node::new("C5", input(c5, 32), &[]),
        Node::new("c5_up", Op::Upsample { factor: 2 }, &["C5"]),
        Node::new("t4_cat", Op::Concat, &["C4", "c5_up"]),
        Node::new("t4", fuse(c4), &["t4_cat"]),
        Node::new("t4_up", Op::Upsample { factor: 2 }, &["t4"]),
        Node::new(
            "c2_ld",
            Op::Ldconv(LdconvConfig {
                points: 9,
                out_channels: c2,
                stride: 1,
                prefix: String::new(),
            }),
            &["C2"],
        ),
        Node::new("c2_down", Op::Downsample { out_channels: c2 }, &["c2_ld"]),
        Node::new("t3_cat", Op::Concat, &["C3", "t4_up", "c2_down"]),
        Node::new("t3", fuse(c3), &["t3_cat"]),
        Node::new(
            "p3",
            Op::Wpm(WpmConfig {
                prefix: String::new(),
                ..WpmConfig::default()
            }),
            &["t3"],
        ),
        Node::new("p3_down", Op::Downsample { out_channels: c3 }, &["p3"]),
        Node::new("p4_cat", Op::Concat, &["t4", "p3_down"]),
        Node::new("p4", fuse(c4), &["p4_cat"]),
        Node::new("p4_down", Op::Downsample { out_channels: c4 }, &["p4"]),
        Node::new("p5_cat", Op::Concat, &["C5", "p4_down"]),
        Node::new("p5", fuse(c5), &["p5_cat"]),
        Node::new("P3", Op::Output, &["p3"]),
        Node::new("P4", Op::Output, &["p4"]),
        Node::new("P5", Op::Output, &["p5"]),
    ];
    GraphConfig {
        schema_version: SCHEMA_VERSION,
        batch,
        image,
        nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_graph() -> GraphConfig {
        GraphConfig {
            schema_version: 1,
            batch: 1,
            image: [8, 8],
            nodes: vec![
                Node::new("x", Op::Input { channels: 2, stride: 1 }, &[]),
                Node::new("y", Op::Output, &["x"]),
            ],
        }
    }

    #[test]
    fn default_neck_shapes() {
        let cfg = default_sffnet_neck(NeckWidths::new(64, 128, 256, 512), [640, 640], 1);
        let r = validate(&cfg).unwrap();
        assert_eq!(r.dims("P3").unwrap(), Dims::new(1, 128, 80, 80));
        assert_eq!(r.dims("P4").unwrap(), Dims::new(1, 256, 40, 40));
        assert_eq!(r.dims("P5").unwrap(), Dims::new(1, 512, 20, 20));
        assert_eq!(cfg.count_kind("wpm"), 1);
        assert_eq!(cfg.count_kind("ldconv"), 1);
        let ld = cfg.nodes.iter().find(|n| n.op.kind() == "ldconv").unwrap();
        assert_eq!(ld.inputs, ["C2"]);
        let wpm = cfg.nodes.iter().find(|n| n.op.kind() == "wpm").unwrap();
        assert!(cfg.nodes.iter().any(|n| n.id == "P3" && n.inputs == [wpm.id.clone()]));
    }

    #[test]
    fn rejects_bad_graphs() {
        let mut empty = identity_graph();
        empty.nodes.clear();
        assert!(validate(&empty).is_err());

        let mut g = identity_graph();
        g.nodes.insert(1, Node::new("small", Op::Input { channels: 2, stride: 2 }, &[]));
        g.nodes.insert(2, Node::new("cat", Op::Concat, &["x", "small"]));
        g.nodes[3].inputs = vec!["cat".into()];
        let msg = validate(&g).unwrap_err().to_string();
        assert!(msg.contains("`x`") && msg.contains("`small`") && msg.contains("spatial"), "{msg}");

        let mut g = identity_graph();
        g.nodes[1].inputs = vec!["nope".into()];
        assert!(validate(&g).unwrap_err().to_string().contains("unknown input `nope`"));

        let mut g = identity_graph();
        g.nodes.insert(1, Node::new("a", Op::Upsample { factor: 1 }, &["b"]));
        g.nodes.insert(2, Node::new("b", Op::Upsample { factor: 1 }, &["a"]));
        assert!(validate(&g).unwrap_err().to_string().contains("cycle"));

        let mut g = identity_graph();
        g.nodes.push(Node::new("x", Op::Output, &["x"]));
        assert!(validate(&g).unwrap_err().to_string().contains("duplicate"));

        let mut g = identity_graph();
        g.schema_version = 2;
        assert!(validate(&g).is_err());
    }

    #[test]
    fn identity_and_delta_graphs() {
        let g = identity_graph();
        let x = Tensor::random(Dims::new(1, 2, 8, 8), 1, -1.0, 1.0);
        let inputs = BTreeMap::from([("x".to_string(), x.clone())]);
        let out = execute(&g, &inputs, &WeightsArchive::new(), Schedule::Serial).unwrap();
        assert_eq!(out["y"], x);

        let mut g = identity_graph();
        g.nodes.insert(
            1,
            Node::new(
                "c",
                Op::Conv {
                    out_channels: 2,
                    kernel: 3,
                    stride: 1,
                    groups: 1,
                    bn_act: false,
                },
                &["x"],
            ),
        );
        g.nodes[2].inputs = vec!["c".into()];
        let mut k = vec![0.0; 2 * 2 * 9];
        k[4] = 1.0;
        k[(2 + 1) * 9 + 4] = 1.0;
        let mut w = WeightsArchive::new();
        w.insert("c.weight", Tensor::new(Dims::new(2, 2, 3, 3), k).unwrap());
        let out = execute(&g, &inputs, &w, Schedule::Parallel).unwrap();
        assert_eq!(out["y"], x);
    }

    #[test]
    fn execute_reports_binding_errors() {
        let g = identity_graph();
        let none = BTreeMap::new();
        assert!(execute(&g, &none, &WeightsArchive::new(), Schedule::Serial).is_err());
        let wrong = BTreeMap::from([("x".to_string(), Tensor::zeros(Dims::new(1, 3, 8, 8)))]);
        assert!(execute(&g, &wrong, &WeightsArchive::new(), Schedule::Serial).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = default_sffnet_neck(NeckWidths::new(16, 32, 64, 128), [64, 64], 2);
        let text = cfg.to_toml().unwrap();
        assert_eq!(GraphConfig::from_toml(&text).unwrap(), cfg);
        let bad = text.replacen("schema_version = 1", "schema_version = 1\nextra = 3", 1);
        assert!(GraphConfig::from_toml(&bad).is_err());
    }
}
