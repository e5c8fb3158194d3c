//! Named parameter storage and seeded initialisation.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::ops::{BnParams, ConvSpec, Padding};
use crate::rng::SplitMix64;
use crate::tensor::{Dims, Tensor};

/// Ordered `name -> tensor` map. Insertion order is the on-disk order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightsArchive {
    entries: IndexMap<String, Tensor>,
}

impl WeightsArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Inserts or replaces `name`, keeping its original position on replace.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.entries.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::MissingWeight(name.to_owned()))
    }

    pub fn get_opt(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Weight tensor `name` checked against `dims`.
    pub fn expect(&self, name: &str, dims: Dims) -> Result<&Tensor> {
        let t = self.get(name)?;
        if t.dims() != dims {
            return Err(Error::shape(
                "weights",
                "dims",
                format!("`{name}` is {}, expected {dims}", t.dims()),
            ));
        }
        Ok(t)
    }

    /// Optional bias vector `name` of length `len`.
    pub fn bias(&self, name: &str, len: usize) -> Result<Option<Vec<f32>>> {
        match self.get_opt(name) {
            None => Ok(None),
            Some(t) if t.dims() == Dims::new(len, 1, 1, 1) => Ok(Some(t.data().to_vec())),
            Some(t) => Err(Error::shape(
                "weights",
                "dims",
                format!("bias `{name}` is {}, expected {len}x1x1x1", t.dims()),
            )),
        }
    }

    /// Batch-norm statistics stored under `{prefix}.mean|var|scale|shift`;
    /// identity statistics when none are present.
    pub fn batchnorm(&self, prefix: &str, channels: usize) -> Result<BnParams> {
        let names = ["mean", "var", "scale", "shift"].map(|s| format!("{prefix}.{s}"));
        let present = names.iter().filter(|n| self.contains(n)).count();
        if present == 0 {
            return Ok(BnParams::identity(channels));
        }
        let mut vecs = Vec::with_capacity(4);
        for n in &names {
            let t = self.expect(n, Dims::new(channels, 1, 1, 1))?;
            vecs.push(t.data().to_vec());
        }
        let shift = vecs.pop().unwrap();
        let scale = vecs.pop().unwrap();
        let var = vecs.pop().unwrap();
        let mean = vecs.pop().unwrap();
        Ok(BnParams {
            mean,
            var,
            scale,
            shift,
            eps: BnParams::DEFAULT_EPS,
        })
    }

    /// Convolution `{prefix}.weight` (+ optional `{prefix}.bias`).
    pub fn conv(
        &self,
        prefix: &str,
        weight_dims: Dims,
        stride: usize,
        padding: Padding,
        groups: usize,
    ) -> Result<ConvSpec> {
        let w = self.expect(&format!("{prefix}.weight"), weight_dims)?.clone();
        let mut spec = ConvSpec::new(w)
            .with_stride(stride, stride)
            .with_padding(padding)
            .with_groups(groups);
        if let Some(b) = self.bias(&format!("{prefix}.bias"), weight_dims.n)? {
            spec = spec.with_bias(b);
        }
        Ok(spec)
    }

    /// Adds every parameter in `specs` that is not already present, drawn
    /// from SplitMix64 in declaration order.
    pub fn fill_missing(&mut self, specs: &[ParamSpec], seed: u64) {
        let mut rng = SplitMix64::new(seed);
        for spec in specs {
            // Draw even for present entries so the stream does not depend on
            // which entries the caller supplied.
            let t = spec.sample(&mut rng);
            if !self.contains(&spec.name) {
                self.insert(spec.name.clone(), t);
            }
        }
    }

    pub fn seeded(specs: &[ParamSpec], seed: u64) -> Self {
        let mut a = Self::new();
        a.fill_missing(specs, seed);
        a
    }
}

/// A parameter some operator will look up, with its initialisation fan-in.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub dims: Dims,
    pub fan_in: usize,
}

impl ParamSpec {
    /// Conv weight `(c_out, c_in/groups, kh, kw)` and its bias.
    pub fn conv(prefix: &str, c_out: usize, c_in_per_group: usize, kh: usize, kw: usize) -> [Self; 2] {
        let fan_in = c_in_per_group * kh * kw;
        [
            Self {
                name: format!("{prefix}.weight"),
                dims: Dims::new(c_out, c_in_per_group, kh, kw),
                fan_in,
            },
            Self {
                name: format!("{prefix}.bias"),
                dims: Dims::new(c_out, 1, 1, 1),
                fan_in,
            },
        ]
    }

    /// Uniform in `±1/sqrt(fan_in)`.
    fn sample(&self, rng: &mut SplitMix64) -> Tensor {
        let bound = 1.0 / (self.fan_in.max(1) as f64).sqrt();
        let data = (0..self.dims.len())
            .map(|_| rng.uniform(-bound, bound) as f32)
            .collect();
        Tensor::new(self.dims, data).expect("finite init")
    }
}

pub fn param_count(specs: &[ParamSpec]) -> usize {
    specs.iter().map(|s| s.dims.len()).sum()
}
