use std::collections::BTreeMap;

use sffnet_core::deie::DeieParams;
use sffnet_core::graph::{
    default_sffnet_neck, execute, param_specs, validate, GraphConfig, NeckWidths, Node, Op, Schedule,
};
use sffnet_core::ldconv::LdconvConfig;
use sffnet_core::mddc::MddcConfig;
use sffnet_core::rng::SplitMix64;
use sffnet_core::wpm::WpmConfig;
use sffnet_core::{Dims, Tensor, WeightsArchive};

struct Builder {
    rng: SplitMix64,
    nodes: Vec<Node>,
    dims: Vec<Dims>,
}

impl Builder {
    fn pick(&mut self, n: usize) -> usize {
        self.rng.below(n as u64) as usize
    }

    fn push(&mut self, op: Op, inputs: &[usize], d: Dims) {
        let id = format!("n{}", self.nodes.len());
        let names: Vec<String> = inputs.iter().map(|&i| self.nodes[i].id.clone()).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        self.nodes.push(Node::new(id, op, &refs));
        self.dims.push(d);
    }

    /// Appends one random node whose inputs are already present.
    fn grow(&mut self) {
        let src = self.pick(self.nodes.len());
        let d = self.dims[src];
        let choice = self.pick(9);
        match choice {
            0 => {
                let kernel = [1, 3, 5][self.pick(3)];
                let stride = 1 + self.pick(2);
                let groups = if d.c.is_multiple_of(2) && self.pick(2) == 0 { 2 } else { 1 };
                let out = groups * (1 + self.pick(4));
                let (h, w) = ((d.h - 1) / stride + 1, (d.w - 1) / stride + 1);
                let bn_act = self.pick(2) == 0;
                self.push(
                    Op::Conv { out_channels: out, kernel, stride, groups, bn_act },
                    &[src],
                    Dims::new(d.n, out, h, w),
                );
            }
            1 => {
                let out = 4 * (1 + self.pick(2));
                self.push(Op::Downsample { out_channels: out }, &[src], Dims::new(d.n, out, (d.h - 1) / 2 + 1, (d.w - 1) / 2 + 1));
            }
            2 if d.h <= 16 => {
                self.push(Op::Upsample { factor: 2 }, &[src], d.with_spatial(d.h * 2, d.w * 2));
            }
            3 => {
                let peers: Vec<usize> = (0..self.nodes.len())
                    .filter(|&i| (self.dims[i].h, self.dims[i].w) == (d.h, d.w))
                    .collect();
                let other = peers[self.pick(peers.len())];
                let c = d.c + self.dims[other].c;
                self.push(Op::Concat, &[src, other], d.with_channels(c));
            }
            4 if d.c.is_multiple_of(4) && d.h.min(d.w) >= 3 => {
                let scales: Vec<usize> = [3, 6].into_iter().filter(|&s| s <= d.h.min(d.w)).collect();
                let cfg = MddcConfig { scales, ..MddcConfig::default() };
                self.push(Op::Mddc(cfg), &[src], d);
            }
            5 if d.c.is_multiple_of(4) => {
                let kernel = [1, 3, 7][self.pick(3)];
                self.push(Op::Wpm(WpmConfig { kernel, ..WpmConfig::default() }), &[src], d);
            }
            6 => {
                let cfg = LdconvConfig {
                    points: 1 + self.pick(9),
                    out_channels: 4,
                    stride: 1 + self.pick(2),
                    ..LdconvConfig::default()
                };
                let out = cfg.output_dims(d);
                self.push(Op::Ldconv(cfg), &[src], out);
            }
            7 if d.c <= 8 => {
                self.push(Op::Deie(DeieParams::default()), &[src], d.with_channels(3 * d.c));
            }
            _ => {
                let out = 4;
                self.push(
                    Op::Conv { out_channels: out, kernel: 1, stride: 1, groups: 1, bn_act: true },
                    &[src],
                    d.with_channels(out),
                );
            }
        }
    }
}

fn random_graph(seed: u64) -> (GraphConfig, Vec<Dims>) {
    let mut b = Builder {
        rng: SplitMix64::new(seed),
        nodes: Vec::new(),
        dims: Vec::new(),
    };
    let image = [16, 16];
    let inputs = 1 + b.pick(2);
    for i in 0..inputs {
        let stride = [1, 2, 4][b.pick(3)];
        let c = 4 * (1 + b.pick(2));
        b.nodes.push(Node::new(format!("in{i}"), Op::Input { channels: c, stride }, &[]));
        b.dims.push(Dims::new(1, c, image[0] / stride, image[1] / stride));
    }
    let steps = 3 + b.pick(6);
    for _ in 0..steps {
        b.grow();
    }
    let produced = b.nodes.len();
    for i in inputs..produced {
        let id = b.nodes[i].id.clone();
        b.nodes.push(Node::new(format!("out_{id}"), Op::Output, &[id.as_str()]));
        let d = b.dims[i];
        b.dims.push(d);
    }
    let cfg = GraphConfig {
        schema_version: 1,
        batch: 1,
        image,
        nodes: b.nodes,
    };
    (cfg, b.dims)
}

fn bind_inputs(cfg: &GraphConfig, report: &sffnet_core::graph::ShapeReport, seed: u64) -> BTreeMap<String, Tensor> {
    cfg.inputs()
        .enumerate()
        .map(|(i, n)| {
            let d = report.dims(&n.id).unwrap();
            (n.id.clone(), Tensor::random(d, seed + i as u64, -1.0, 1.0))
        })
        .collect()
}

#[test]
fn inferred_shapes_match_runtime_on_fifty_graphs() {
    for seed in 0..50u64 {
        let (cfg, expected) = random_graph(seed);
        let report = validate(&cfg).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        for (row, want) in report.rows.iter().zip(&expected) {
            assert_eq!(row.2, *want, "seed {seed}: node {}", row.0);
        }
        let weights = WeightsArchive::seeded(&param_specs(&cfg, &report), seed);
        let inputs = bind_inputs(&cfg, &report, seed);
        let serial = execute(&cfg, &inputs, &weights, Schedule::Serial).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert_eq!(serial.len(), cfg.outputs().count());
        for (id, t) in &serial {
            assert_eq!(Some(t.dims()), report.dims(id), "seed {seed}: output {id}");
        }
        let parallel = execute(&cfg, &inputs, &weights, Schedule::Parallel).unwrap();
        assert_eq!(serial, parallel, "seed {seed}");
    }
}

#[test]
fn concat_channels_add_up() {
    for seed in 0..50u64 {
        let (cfg, _) = random_graph(seed);
        let report = validate(&cfg).unwrap();
        for node in cfg.nodes.iter().filter(|n| matches!(n.op, Op::Concat)) {
            let sum: usize = node.inputs.iter().map(|i| report.dims(i).unwrap().c).sum();
            assert_eq!(report.dims(&node.id).unwrap().c, sum);
        }
    }
}

#[test]
fn default_neck_runs_and_repeats() {
    let widths = NeckWidths::new(8, 16, 32, 64);
    let cfg = default_sffnet_neck(widths, [128, 128], 1);
    let report = validate(&cfg).unwrap();
    let weights = WeightsArchive::seeded(&param_specs(&cfg, &report), 42);
    let inputs = bind_inputs(&cfg, &report, 7);
    let a = execute(&cfg, &inputs, &weights, Schedule::Parallel).unwrap();
    let b = execute(&cfg, &inputs, &weights, Schedule::Serial).unwrap();
    assert_eq!(a, b);
    assert_eq!(a["P3"].dims(), Dims::new(1, 16, 16, 16));
    assert_eq!(a["P4"].dims(), Dims::new(1, 32, 8, 8));
    assert_eq!(a["P5"].dims(), Dims::new(1, 64, 4, 4));
    assert_eq!(a.keys().collect::<Vec<_>>(), ["P3", "P4", "P5"]);
}

#[test]
fn missing_weight_is_named_with_node() {
    let cfg = default_sffnet_neck(NeckWidths::new(8, 16, 32, 64), [64, 64], 1);
    let report = validate(&cfg).unwrap();
    let mut weights = WeightsArchive::new();
    for spec in param_specs(&cfg, &report) {
        if spec.name != "t3.weight" {
            weights.insert(spec.name.clone(), Tensor::zeros(spec.dims));
        }
    }
    let inputs = bind_inputs(&cfg, &report, 1);
    let err = execute(&cfg, &inputs, &weights, Schedule::Serial).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("t3"), "{msg}");
    assert!(matches!(err.root(), sffnet_core::Error::MissingWeight(n) if n == "t3.weight"));
}
