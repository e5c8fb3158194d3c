//! Wide-area perception module.
//!
//! `CBS(x)` is split into a quarter `x1` and the remaining three quarters
//! `x2`. `x1` goes through a 1x1 conv and five aligned paths (identity and
//! depthwise 1x1, 1xK, Kx1, KxK, all zero same-padded), which are
//! concatenated, fused back to `C/4` channels by a 1x1 conv and placed in
//! front of the untouched `x2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::conv_bn_silu;
use crate::ops::{concat_channels, conv2d, split_channels, ConvSpec, Padding};
use crate::tensor::{Dims, Tensor};
use crate::weights::{ParamSpec, WeightsArchive};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WpmConfig {
    /// Extent `K` of the strip and square depthwise kernels.
    pub kernel: usize,
    /// Batch-norm + SiLU after the post-branch 1x1 fuse.
    pub fuse_bn_act: bool,
    /// Extra 1x1 conv over the remerged `C` channels. Off by default, which
    /// keeps the `x2` quarter a bit-exact passthrough.
    pub merge: bool,
    pub prefix: String,
}

impl Default for WpmConfig {
    fn default() -> Self {
        Self {
            kernel: 31,
            fuse_bn_act: false,
            merge: false,
            prefix: "wpm".into(),
        }
    }
}

/// The parallel paths applied to the processed quarter, in concat order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpmPath {
    Identity,
    Point,
    Horizontal,
    Vertical,
    Square,
}

impl WpmPath {
    pub const ALL: [WpmPath; 5] = [
        WpmPath::Identity,
        WpmPath::Point,
        WpmPath::Horizontal,
        WpmPath::Vertical,
        WpmPath::Square,
    ];

    pub fn label(self, k: usize) -> String {
        match self {
            WpmPath::Identity => "identity".into(),
            WpmPath::Point => "dw1x1".into(),
            WpmPath::Horizontal => format!("dw1x{k}"),
            WpmPath::Vertical => format!("dw{k}x1"),
            WpmPath::Square => format!("dw{k}x{k}"),
        }
    }

    fn weight_name(self) -> Option<&'static str> {
        match self {
            WpmPath::Identity => None,
            WpmPath::Point => Some("dw1"),
            WpmPath::Horizontal => Some("dwh"),
            WpmPath::Vertical => Some("dwv"),
            WpmPath::Square => Some("dwk"),
        }
    }

    fn kernel(self, k: usize) -> (usize, usize) {
        match self {
            WpmPath::Identity | WpmPath::Point => (1, 1),
            WpmPath::Horizontal => (1, k),
            WpmPath::Vertical => (k, 1),
            WpmPath::Square => (k, k),
        }
    }
}

impl WpmConfig {
    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(Error::invalid("wpm", format!("kernel {} must be odd", self.kernel)));
        }
        if !channels.is_multiple_of(4) {
            return Err(Error::shape(
                "wpm",
                "channels",
                format!("{channels} not divisible by 4"),
            ));
        }
        Ok(())
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn param_specs(&self, channels: usize) -> Vec<ParamSpec> {
        let q = channels / 4;
        let mut specs = Vec::new();
        specs.extend(ParamSpec::conv(&self.name("cbs"), channels, channels, 1, 1));
        specs.extend(ParamSpec::conv(&self.name("pre"), q, q, 1, 1));
        for path in WpmPath::ALL {
            if let Some(n) = path.weight_name() {
                let (kh, kw) = path.kernel(self.kernel);
                specs.extend(ParamSpec::conv(&self.name(n), q, 1, kh, kw));
            }
        }
        specs.extend(ParamSpec::conv(&self.name("fuse"), q, 5 * q, 1, 1));
        if self.merge {
            specs.extend(ParamSpec::conv(&self.name("merge"), channels, channels, 1, 1));
        }
        specs
    }
}

/// Weights of the four depthwise paths: `C/4 * (1 + K + K + K^2)`.
pub fn depthwise_param_count(channels: usize, k: usize) -> usize {
    channels / 4 * (1 + 2 * k + k * k)
}

/// The same four paths if each were a dense `KxK` depthwise kernel.
pub fn dense_param_count(channels: usize, k: usize) -> usize {
    channels / 4 * 4 * k * k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripOrientation {
    /// `1 x K`
    Horizontal,
    /// `K x 1`
    Vertical,
}

/// Depthwise zero same-padded convolution along one axis. `weights` must be
/// `(C, 1, 1, K)` for horizontal or `(C, 1, K, 1)` for vertical strips.
pub fn strip_conv(
    x: &Tensor,
    orientation: StripOrientation,
    weights: &Tensor,
    bias: Option<Vec<f32>>,
) -> Result<Tensor> {
    let c = x.dims().c;
    let wd = weights.dims();
    let ok = wd.n == c
        && wd.c == 1
        && match orientation {
            StripOrientation::Horizontal => wd.h == 1,
            StripOrientation::Vertical => wd.w == 1,
        };
    if !ok {
        let want = match orientation {
            StripOrientation::Horizontal => format!("{c}x1x1xK"),
            StripOrientation::Vertical => format!("{c}x1xKx1"),
        };
        return Err(Error::shape(
            "strip_conv",
            "weights",
            format!("got {wd}, expected {want}"),
        ));
    }
    let mut spec = ConvSpec::new(weights.clone())
        .with_groups(c)
        .with_padding(Padding::same(wd.h, wd.w));
    if let Some(b) = bias {
        spec = spec.with_bias(b);
    }
    conv2d(x, &spec)
}

/// One parallel path on the processed quarter `x1`.
pub fn run_path(
    path: WpmPath,
    x1: &Tensor,
    cfg: &WpmConfig,
    weights: &WeightsArchive,
) -> Result<Tensor> {
    let Some(name) = path.weight_name() else {
        return Ok(x1.clone());
    };
    let q = x1.dims().c;
    let (kh, kw) = path.kernel(cfg.kernel);
    let prefix = cfg.name(name);
    let w = weights.expect(&format!("{prefix}.weight"), Dims::new(q, 1, kh, kw))?;
    let bias = weights.bias(&format!("{prefix}.bias"), q)?;
    match path {
        WpmPath::Horizontal => strip_conv(x1, StripOrientation::Horizontal, w, bias),
        WpmPath::Vertical => strip_conv(x1, StripOrientation::Vertical, w, bias),
        _ => {
            let mut spec = ConvSpec::new(w.clone())
                .with_groups(q)
                .with_padding(Padding::same(kh, kw));
            if let Some(b) = bias {
                spec = spec.with_bias(b);
            }
            conv2d(x1, &spec)
        }
    }
}

/// Post-CBS split `(x1, x2)` of sizes `C/4` and `3C/4`.
pub fn cbs_split(x: &Tensor, cfg: &WpmConfig, weights: &WeightsArchive) -> Result<(Tensor, Tensor)> {
    let c = x.dims().c;
    cfg.validate(c)?;
    let y = conv_bn_silu(
        x,
        weights,
        &cfg.name("cbs"),
        Dims::new(c, c, 1, 1),
        1,
        Padding::NONE,
        1,
        true,
    )?;
    let mut parts = split_channels(&y, &[c / 4, 3 * c / 4])?.into_iter();
    Ok((parts.next().unwrap(), parts.next().unwrap()))
}

pub fn wpm_forward(x: &Tensor, cfg: &WpmConfig, weights: &WeightsArchive) -> Result<Tensor> {
    let c = x.dims().c;
    let q = c / 4;
    let (x1, x2) = cbs_split(x, cfg, weights)?;
    let pre = weights.conv(&cfg.name("pre"), Dims::new(q, q, 1, 1), 1, Padding::NONE, 1)?;
    let x1 = conv2d(&x1, &pre)?;
    let paths = WpmPath::ALL
        .iter()
        .map(|&p| run_path(p, &x1, cfg, weights))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Tensor> = paths.iter().collect();
    let cat = concat_channels(&refs)?;
    let fused = conv_bn_silu(
        &cat,
        weights,
        &cfg.name("fuse"),
        Dims::new(q, 5 * q, 1, 1),
        1,
        Padding::NONE,
        1,
        cfg.fuse_bn_act,
    )?;
    let merged = concat_channels(&[&fused, &x2])?;
    if !cfg.merge {
        return Ok(merged);
    }
    let merge = weights.conv(&cfg.name("merge"), Dims::new(c, c, 1, 1), 1, Padding::NONE, 1)?;
    conv2d(&merged, &merge)
}
