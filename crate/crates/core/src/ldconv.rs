//! Linear deformable convolution.
//!
//! This is a concrete variant rather than a reproduction of any particular
//! reference code: a square-fill initial grid of `P` points, per-position
//! offsets predicted by a 3x3 convolution, bilinear sampling with zero
//! padding, and a 1x1 projection over the `P * C` sampled values. Parameter
//! count is affine in `P`.
//!
//! Offset channel `2p` is the row displacement of point `p`, `2p + 1` the
//! column displacement. Sampled values are stacked channel-major: index
//! `c * P + p`, so a `(c_out, C, 3, 3)` kernel reshaped to `(c_out, 9C, 1, 1)`
//! is the matching projection for `P = 9`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{conv2d, Padding};
use crate::tensor::{Dims, Tensor};
use crate::weights::{ParamSpec, WeightsArchive};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdconvConfig {
    pub points: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub prefix: String,
}

impl Default for LdconvConfig {
    fn default() -> Self {
        Self {
            points: 9,
            out_channels: 64,
            stride: 1,
            prefix: "ldconv".into(),
        }
    }
}

impl LdconvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::invalid("ldconv", "points must be >= 1"));
        }
        if self.out_channels == 0 || self.stride == 0 {
            return Err(Error::invalid("ldconv", "out_channels and stride must be >= 1"));
        }
        Ok(())
    }

    fn name(&self, part: &str) -> String {
        format!("{}.{part}", self.prefix)
    }

    pub fn param_specs(&self, c_in: usize) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        specs.extend(ParamSpec::conv(&self.name("offset"), 2 * self.points, c_in, 3, 3));
        specs.extend(ParamSpec::conv(
            &self.name("proj"),
            self.out_channels,
            self.points * c_in,
            1,
            1,
        ));
        specs
    }

    /// `3*3*C*2P + 2P + P*C*c_out + c_out`.
    pub fn param_count(&self, c_in: usize) -> usize {
        crate::weights::param_count(&self.param_specs(c_in))
    }

    pub fn output_dims(&self, d: Dims) -> Dims {
        Dims::new(
            d.n,
            self.out_channels,
            (d.h - 1) / self.stride + 1,
            (d.w - 1) / self.stride + 1,
        )
    }
}

/// Initial sampling offsets `(dy, dx)`: a `ceil(sqrt(P))`-wide square filled
/// row-major and centred on the kernel origin.
pub fn base_grid(points: usize) -> Vec<(f32, f32)> {
    let side = (points as f64).sqrt().ceil() as usize;
    let centre = (side as f32 - 1.0) / 2.0;
    (0..points)
        .map(|i| ((i / side) as f32 - centre, (i % side) as f32 - centre))
        .collect()
}

/// Bilinear interpolation with zero padding outside `[0, h-1] x [0, w-1]`.
pub fn bilinear_sample(plane: &[f32], h: usize, w: usize, y: f32, x: f32) -> f32 {
    let (y, x) = (y as f64, x as f64);
    let y0 = y.floor();
    let x0 = x.floor();
    let ty = y - y0;
    let tx = x - x0;
    let at = |yy: f64, xx: f64| -> f64 {
        if yy < 0.0 || xx < 0.0 || yy >= h as f64 || xx >= w as f64 {
            0.0
        } else {
            plane[yy as usize * w + xx as usize] as f64
        }
    };
    let v = at(y0, x0) * (1.0 - ty) * (1.0 - tx)
        + at(y0, x0 + 1.0) * (1.0 - ty) * tx
        + at(y0 + 1.0, x0) * ty * (1.0 - tx)
        + at(y0 + 1.0, x0 + 1.0) * ty * tx;
    v as f32
}

/// Samples `x` at `base_grid + offsets` for every output position, giving a
/// `(n, C * P, h_out, w_out)` stack.
pub fn deformable_sample(x: &Tensor, offsets: &Tensor, points: usize, stride: usize) -> Result<Tensor> {
    let d = x.dims();
    let od = offsets.dims();
    if od.c != 2 * points || od.n != d.n {
        return Err(Error::shape(
            "ldconv",
            "offset channels",
            format!("offsets are {od}, need {}x{}xHxW", d.n, 2 * points),
        ));
    }
    let grid = base_grid(points);
    let sd = Dims::new(d.n, d.c * points, od.h, od.w);
    let mut out = vec![0.0f32; sd.len()];
    out.par_chunks_mut(sd.plane_len())
        .enumerate()
        .for_each(|(idx, dst)| {
            let n = idx / sd.c;
            let c = (idx % sd.c) / points;
            let p = idx % points;
            let src = x.plane(n, c);
            let dy = offsets.plane(n, 2 * p);
            let dx = offsets.plane(n, 2 * p + 1);
            let (gy, gx) = grid[p];
            for oy in 0..od.h {
                for ox in 0..od.w {
                    let i = oy * od.w + ox;
                    let y = (oy * stride) as f32 + gy + dy[i];
                    let xx = (ox * stride) as f32 + gx + dx[i];
                    dst[i] = bilinear_sample(src, d.h, d.w, y, xx);
                }
            }
        });
    Tensor::new(sd, out)
}

pub fn ldconv_forward(x: &Tensor, cfg: &LdconvConfig, weights: &WeightsArchive) -> Result<Tensor> {
    cfg.validate()?;
    let c = x.dims().c;
    let p = cfg.points;
    let offset = weights.conv(
        &cfg.name("offset"),
        Dims::new(2 * p, c, 3, 3),
        cfg.stride,
        Padding::symmetric(1),
        1,
    )?;
    let offsets = conv2d(x, &offset)?;
    let stacked = deformable_sample(x, &offsets, p, cfg.stride)?;
    let proj = weights.conv(
        &cfg.name("proj"),
        Dims::new(cfg.out_channels, p * c, 1, 1),
        1,
        Padding::NONE,
        1,
    )?;
    conv2d(&stacked, &proj)
}
