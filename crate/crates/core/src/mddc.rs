//! Multi-scale dynamic dual-domain coupling.
//!
//! For every pooled size `s`:
//! `AAP_s -> conv1x1 (C -> C/4) + BN + SiLU -> depthwise 3x3 + BN + SiLU
//! -> bilinear upsample to (h, w) -> DEIE`. A bypass branch runs one depthwise
//! 3x3 on the full-resolution input. All branch outputs are concatenated in
//! scale order followed by the bypass and fused back to `C` channels by a
//! 1x1 convolution.
//!
//! Parameter names, for prefix `p`:
//!
//! | entry               | dims                    |
//! |---------------------|-------------------------|
//! | `p.s{s}.reduce`     | `(C/4, C, 1, 1)`        |
//! | `p.s{s}.dw`         | `(C/4, 1, 3, 3)`        |
//! | `p.bypass`          | `(C, 1, 3, 3)`          |
//! | `p.fuse`            | `(C, branches, 1, 1)`   |
//!
//! Each has `.weight`, an optional `.bias`, and optional `.bn.{mean,var,scale,shift}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deie::{deie_forward, DeieParams};
use crate::error::{Error, Result, ResultExt};
use crate::layers::conv_bn_silu;
use crate::ops::{adaptive_avg_pool, bilinear_upsample, concat_channels, Padding};
use crate::tensor::{Dims, Tensor};
use crate::weights::{ParamSpec, WeightsArchive};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MddcConfig {
    pub scales: Vec<usize>,
    pub reduce_ratio: usize,
    pub deie: DeieParams,
    /// Batch-norm + SiLU after the bypass depthwise conv.
    pub bypass_bn_act: bool,
    /// Name prefix for every parameter.
    pub prefix: String,
}

impl Default for MddcConfig {
    fn default() -> Self {
        Self {
            scales: vec![3, 6, 9, 12],
            reduce_ratio: 4,
            deie: DeieParams::default(),
            bypass_bn_act: true,
            prefix: "mddc".into(),
        }
    }
}

impl MddcConfig {
    pub fn with_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.prefix = prefix.into();
        self
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        const OP: &str = "mddc";
        if self.scales.is_empty() {
            return Err(Error::invalid(OP, "no scales configured"));
        }
        if self.scales.contains(&0) {
            return Err(Error::invalid(OP, "scales must be >= 1"));
        }
        if self.reduce_ratio == 0 || !channels.is_multiple_of(self.reduce_ratio) {
            return Err(Error::shape(
                OP,
                "channels",
                format!("{channels} not divisible by reduce ratio {}", self.reduce_ratio),
            ));
        }
        self.deie.validate()
    }

    pub fn reduced(&self, channels: usize) -> usize {
        channels / self.reduce_ratio
    }

    /// Channels entering the fuse conv.
    pub fn concat_channels(&self, channels: usize) -> usize {
        self.scales.len() * self.deie.output_channels(self.reduced(channels)) + channels
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    /// Every weight and bias this module reads for `channels` input channels.
    pub fn param_specs(&self, channels: usize) -> Vec<ParamSpec> {
        let q = self.reduced(channels);
        let mut specs = Vec::new();
        for &s in &self.scales {
            specs.extend(ParamSpec::conv(&self.name(&format!("s{s}.reduce")), q, channels, 1, 1));
            specs.extend(ParamSpec::conv(&self.name(&format!("s{s}.dw")), q, 1, 3, 3));
        }
        specs.extend(ParamSpec::conv(&self.name("bypass"), channels, 1, 3, 3));
        specs.extend(ParamSpec::conv(
            &self.name("fuse"),
            channels,
            self.concat_channels(channels),
            1,
            1,
        ));
        specs
    }
}

/// One pooled-scale branch: `(n, C, h, w) -> (n, 3C/4, h, w)`.
pub fn multiscale_branch(
    x: &Tensor,
    s: usize,
    cfg: &MddcConfig,
    weights: &WeightsArchive,
) -> Result<Tensor> {
    let d = x.dims();
    cfg.validate(d.c)?;
    let q = cfg.reduced(d.c);
    let pooled = adaptive_avg_pool(x, (s, s))?;
    let reduced = conv_bn_silu(
        &pooled,
        weights,
        &cfg.name(&format!("s{s}.reduce")),
        Dims::new(q, d.c, 1, 1),
        1,
        Padding::NONE,
        1,
        true,
    )?;
    let local = conv_bn_silu(
        &reduced,
        weights,
        &cfg.name(&format!("s{s}.dw")),
        Dims::new(q, 1, 3, 3),
        1,
        Padding::same(3, 3),
        q,
        true,
    )?;
    let up = bilinear_upsample(&local, (d.h, d.w))?;
    deie_forward(&up, &cfg.deie)
}

/// Depthwise 3x3 on the full-resolution input, spatial dims preserved.
pub fn bypass_branch(x: &Tensor, cfg: &MddcConfig, weights: &WeightsArchive) -> Result<Tensor> {
    let c = x.dims().c;
    conv_bn_silu(
        x,
        weights,
        &cfg.name("bypass"),
        Dims::new(c, 1, 3, 3),
        1,
        Padding::same(3, 3),
        c,
        cfg.bypass_bn_act,
    )
}

/// The full module; output dims equal input dims.
pub fn mddc_forward(x: &Tensor, cfg: &MddcConfig, weights: &WeightsArchive) -> Result<Tensor> {
    let d = x.dims();
    cfg.validate(d.c)?;
    let mut branches: Vec<Tensor> = cfg
        .scales
        .par_iter()
        .map(|&s| {
            multiscale_branch(x, s, cfg, weights).context_with(|| format!("mddc scale {s}"))
        })
        .collect::<Result<_>>()?;
    branches.push(bypass_branch(x, cfg, weights).context_with(|| "mddc bypass".into())?);
    let refs: Vec<&Tensor> = branches.iter().collect();
    let cat = concat_channels(&refs)?;
    let fuse = weights.conv(
        &cfg.name("fuse"),
        Dims::new(d.c, cat.dims().c, 1, 1),
        1,
        Padding::NONE,
        1,
    )?;
    crate::ops::conv2d(&cat, &fuse)
}
