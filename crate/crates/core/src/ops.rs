//! Convolution, pooling, resampling and activation primitives over [`Tensor`].
//!
//! All operators are pure. Work is split across `(batch, channel)` planes with
//! rayon; every plane is computed by the same sequential loop, so results do
//! not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Dims, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PadMode {
    #[default]
    Zeros,
    Reflect,
}

/// Explicit per-side padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
    pub mode: PadMode,
}

impl Padding {
    pub const NONE: Padding = Padding {
        top: 0,
        bottom: 0,
        left: 0,
        right: 0,
        mode: PadMode::Zeros,
    };

    /// Zero padding that keeps spatial dims for odd kernels at stride 1.
    pub fn same(kh: usize, kw: usize) -> Self {
        Padding {
            top: (kh - 1) / 2,
            bottom: kh / 2,
            left: (kw - 1) / 2,
            right: kw / 2,
            mode: PadMode::Zeros,
        }
    }

    pub fn symmetric(p: usize) -> Self {
        Padding {
            top: p,
            bottom: p,
            left: p,
            right: p,
            mode: PadMode::Zeros,
        }
    }

    pub fn with_mode(self, mode: PadMode) -> Self {
        Padding { mode, ..self }
    }
}

/// A convolution layer: weights `(c_out, c_in / groups, kh, kw)` plus geometry.
#[derive(Debug, Clone)]
pub struct ConvSpec {
    pub weights: Tensor,
    pub bias: Option<Vec<f32>>,
    pub stride: (usize, usize),
    pub padding: Padding,
    pub groups: usize,
}

impl ConvSpec {
    pub fn new(weights: Tensor) -> Self {
        Self {
            weights,
            bias: None,
            stride: (1, 1),
            padding: Padding::NONE,
            groups: 1,
        }
    }

    pub fn with_bias(mut self, bias: Vec<f32>) -> Self {
        self.bias = Some(bias);
        self
    }

    pub fn with_stride(mut self, sh: usize, sw: usize) -> Self {
        self.stride = (sh, sw);
        self
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn c_out(&self) -> usize {
        self.weights.dims().n
    }

    pub fn c_in(&self) -> usize {
        self.weights.dims().c * self.groups
    }

    pub fn kernel(&self) -> (usize, usize) {
        let d = self.weights.dims();
        (d.h, d.w)
    }

    /// Output dims for an input of `dims`, validating every constraint.
    pub fn output_dims(&self, dims: Dims) -> Result<Dims> {
        const OP: &str = "conv2d";
        let g = self.groups;
        if g == 0 {
            return Err(Error::invalid(OP, "groups must be >= 1"));
        }
        if self.stride.0 == 0 || self.stride.1 == 0 {
            return Err(Error::invalid(OP, "stride must be >= 1"));
        }
        let c_out = self.c_out();
        if !c_out.is_multiple_of(g) {
            return Err(Error::shape(
                OP,
                "output channels",
                format!("{c_out} not divisible by groups {g}"),
            ));
        }
        if !dims.c.is_multiple_of(g) {
            return Err(Error::shape(
                OP,
                "input channels",
                format!("{} not divisible by groups {g}", dims.c),
            ));
        }
        if dims.c != self.c_in() {
            return Err(Error::shape(
                OP,
                "input channels",
                format!(
                    "input has {} channels, weights expect {} ({} per group x {g})",
                    dims.c,
                    self.c_in(),
                    self.weights.dims().c
                ),
            ));
        }
        if let Some(b) = &self.bias {
            if b.len() != c_out {
                return Err(Error::shape(
                    OP,
                    "bias",
                    format!("bias has {} entries, expected {c_out}", b.len()),
                ));
            }
            crate::tensor::check_finite(OP, b)?;
        }
        let p = self.padding;
        if p.mode == PadMode::Reflect
            && (p.top >= dims.h || p.bottom >= dims.h || p.left >= dims.w || p.right >= dims.w)
        {
            return Err(Error::invalid(
                OP,
                format!("reflect padding {p:?} must be smaller than the {}x{} plane", dims.h, dims.w),
            ));
        }
        let (kh, kw) = self.kernel();
        let ph = dims.h + p.top + p.bottom;
        let pw = dims.w + p.left + p.right;
        if ph < kh {
            return Err(Error::shape(OP, "height", format!("padded height {ph} < kernel {kh}")));
        }
        if pw < kw {
            return Err(Error::shape(OP, "width", format!("padded width {pw} < kernel {kw}")));
        }
        Ok(Dims::new(
            dims.n,
            c_out,
            (ph - kh) / self.stride.0 + 1,
            (pw - kw) / self.stride.1 + 1,
        ))
    }

    pub fn param_count(&self) -> usize {
        self.weights.dims().len() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

/// Reflection without edge repetition (`-1 -> 1`), periodic so any offset
/// maps inside `0..n`. A single-cell axis reflects onto itself.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

fn pad_plane(plane: &[f32], h: usize, w: usize, p: Padding) -> (Vec<f32>, usize, usize) {
    let ph = h + p.top + p.bottom;
    let pw = w + p.left + p.right;
    if p.top == 0 && p.bottom == 0 && p.left == 0 && p.right == 0 {
        return (plane.to_vec(), ph, pw);
    }
    let mut out = vec![0.0f32; ph * pw];
    match p.mode {
        PadMode::Zeros => {
            for y in 0..h {
                let dst = (y + p.top) * pw + p.left;
                out[dst..dst + w].copy_from_slice(&plane[y * w..(y + 1) * w]);
            }
        }
        PadMode::Reflect => {
            for py in 0..ph {
                let sy = reflect_index(py as isize - p.top as isize, h);
                for px in 0..pw {
                    let sx = reflect_index(px as isize - p.left as isize, w);
                    out[py * pw + px] = plane[sy * w + sx];
                }
            }
        }
    }
    (out, ph, pw)
}

/// 2-D convolution (cross-correlation) with groups, stride and padding.
///
/// Output channel `o` belongs to group `o / (c_out / groups)` and reads only
/// that group's block of input channels.
pub fn conv2d(x: &Tensor, spec: &ConvSpec) -> Result<Tensor> {
    let d = x.dims();
    let od = spec.output_dims(d)?;
    let (kh, kw) = spec.kernel();
    let (sh, sw) = spec.stride;
    let g = spec.groups;
    let cin_g = d.c / g;
    let cout_g = od.c / g;

    let padded: Vec<(Vec<f32>, usize, usize)> = x
        .planes()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|plane| pad_plane(plane, d.h, d.w, spec.padding))
        .collect();
    let pw = padded[0].2;

    let wdata = spec.weights.data();
    let mut out = vec![0.0f32; od.len()];
    out.par_chunks_mut(od.plane_len())
        .enumerate()
        .for_each(|(idx, dst)| {
            let n = idx / od.c;
            let o = idx % od.c;
            let group = o / cout_g;
            for ci in 0..cin_g {
                let ic = group * cin_g + ci;
                let src = &padded[n * d.c + ic].0;
                let wbase = (o * cin_g + ci) * kh * kw;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = wdata[wbase + ky * kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for oy in 0..od.h {
                            let row = (oy * sh + ky) * pw + kx;
                            let drow = &mut dst[oy * od.w..(oy + 1) * od.w];
                            if sw == 1 {
                                for (o, s) in drow.iter_mut().zip(&src[row..row + od.w]) {
                                    *o += wv * s;
                                }
                            } else {
                                for (ox, o) in drow.iter_mut().enumerate() {
                                    *o += wv * src[row + ox * sw];
                                }
                            }
                        }
                    }
                }
            }
            if let Some(b) = &spec.bias {
                let bv = b[o];
                for v in dst.iter_mut() {
                    *v += bv;
                }
            }
        });
    Tensor::from_op("conv2d", od, out)
}

/// Bounds of adaptive pooling cell `i` of `s` over an axis of length `n`:
/// `[floor(i*n/s), ceil((i+1)*n/s))`.
pub fn adaptive_bounds(i: usize, n: usize, s: usize) -> (usize, usize) {
    let start = i * n / s;
    let end = ((i + 1) * n).div_ceil(s);
    (start, end)
}

/// Adaptive average pooling to an `(sh, sw)` grid.
pub fn adaptive_avg_pool(x: &Tensor, out_hw: (usize, usize)) -> Result<Tensor> {
    const OP: &str = "adaptive_avg_pool";
    let d = x.dims();
    let (sh, sw) = out_hw;
    if sh == 0 || sw == 0 {
        return Err(Error::invalid(OP, "output size must be >= 1"));
    }
    if sh > d.h {
        return Err(Error::shape(OP, "height", format!("output {sh} exceeds input {}", d.h)));
    }
    if sw > d.w {
        return Err(Error::shape(OP, "width", format!("output {sw} exceeds input {}", d.w)));
    }
    let od = d.with_spatial(sh, sw);
    let mut out = vec![0.0f32; od.len()];
    out.par_chunks_mut(od.plane_len())
        .zip(x.planes().collect::<Vec<_>>())
        .for_each(|(dst, src)| {
            for i in 0..sh {
                let (y0, y1) = adaptive_bounds(i, d.h, sh);
                for j in 0..sw {
                    let (x0, x1) = adaptive_bounds(j, d.w, sw);
                    let mut sum = 0.0f64;
                    for y in y0..y1 {
                        sum += src[y * d.w + x0..y * d.w + x1]
                            .iter()
                            .map(|&v| v as f64)
                            .sum::<f64>();
                    }
                    dst[i * sw + j] = (sum / ((y1 - y0) * (x1 - x0)) as f64) as f32;
                }
            }
        });
    Tensor::from_op(OP, od, out)
}

/// Mean over the reflect-padded `k x k` neighbourhood of every cell.
///
/// Sums run in f64 so a constant plane comes back bit-identical.
pub fn avg_pool_local(x: &Tensor, k: usize) -> Result<Tensor> {
    const OP: &str = "avg_pool_local";
    if k.is_multiple_of(2) || k == 0 {
        return Err(Error::invalid(OP, format!("kernel {k} must be odd")));
    }
    let d = x.dims();
    let r = (k / 2) as isize;
    let rows: Vec<Vec<usize>> = (0..d.h as isize)
        .map(|y| (-r..=r).map(|m| reflect_index(y + m, d.h)).collect())
        .collect();
    let cols: Vec<Vec<usize>> = (0..d.w as isize)
        .map(|x| (-r..=r).map(|m| reflect_index(x + m, d.w)).collect())
        .collect();
    let area = (k * k) as f64;
    let mut out = vec![0.0f32; d.len()];
    out.par_chunks_mut(d.plane_len())
        .zip(x.planes().collect::<Vec<_>>())
        .for_each(|(dst, src)| {
            for y in 0..d.h {
                for xx in 0..d.w {
                    let mut sum = 0.0f64;
                    for &sy in &rows[y] {
                        for &sx in &cols[xx] {
                            sum += src[sy * d.w + sx] as f64;
                        }
                    }
                    dst[y * d.w + xx] = (sum / area) as f32;
                }
            }
        });
    Tensor::from_op(OP, d, out)
}

/// Source taps for half-pixel-centre resampling from `n_in` to `n_out` cells.
fn half_pixel_taps(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n_in - 1);
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// Bilinear upsampling with half-pixel centres (no corner alignment).
pub fn bilinear_upsample(x: &Tensor, out_hw: (usize, usize)) -> Result<Tensor> {
    const OP: &str = "bilinear_upsample";
    let d = x.dims();
    let (oh, ow) = out_hw;
    if oh < d.h {
        return Err(Error::shape(OP, "height", format!("cannot downscale {} -> {oh}", d.h)));
    }
    if ow < d.w {
        return Err(Error::shape(OP, "width", format!("cannot downscale {} -> {ow}", d.w)));
    }
    let ys = half_pixel_taps(d.h, oh);
    let xs = half_pixel_taps(d.w, ow);
    let od = d.with_spatial(oh, ow);
    let mut out = vec![0.0f32; od.len()];
    out.par_chunks_mut(od.plane_len())
        .zip(x.planes().collect::<Vec<_>>())
        .for_each(|(dst, src)| {
            let at = |y: usize, x: usize| src[y * d.w + x] as f64;
            for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
                for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
                    // a + (b - a) * t keeps constants exact.
                    let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * tx;
                    let bot = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * tx;
                    dst[oy * ow + ox] = (top + (bot - top) * ty) as f32;
                }
            }
        });
    Tensor::from_op(OP, od, out)
}

pub fn silu(x: &Tensor) -> Result<Tensor> {
    x.map("silu", |v| {
        let v = v as f64;
        (v / (1.0 + (-v).exp())) as f32
    })
}

/// Inference-mode batch-norm statistics, one entry per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BnParams {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub scale: Vec<f32>,
    pub shift: Vec<f32>,
    pub eps: f32,
}

impl BnParams {
    pub const DEFAULT_EPS: f32 = 1e-5;

    /// mean 0, var 1, scale 1, shift 0.
    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            scale: vec![1.0; channels],
            shift: vec![0.0; channels],
            eps: Self::DEFAULT_EPS,
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    fn validate(&self, c: usize) -> Result<()> {
        const OP: &str = "batchnorm";
        for (name, v) in [
            ("mean", &self.mean),
            ("var", &self.var),
            ("scale", &self.scale),
            ("shift", &self.shift),
        ] {
            if v.len() != c {
                return Err(Error::shape(
                    OP,
                    "channels",
                    format!("{name} has {} entries for {c} channels", v.len()),
                ));
            }
            crate::tensor::check_finite(OP, v)?;
        }
        if self.var.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid(OP, "variance must be >= 0"));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::invalid(OP, "epsilon must be > 0"));
        }
        Ok(())
    }
}

/// `(x - mean) / sqrt(var + eps) * scale + shift` per channel.
pub fn batchnorm_infer(x: &Tensor, p: &BnParams) -> Result<Tensor> {
    let d = x.dims();
    p.validate(d.c)?;
    let coeffs: Vec<(f64, f64)> = (0..d.c)
        .map(|c| {
            let inv = p.scale[c] as f64 / (p.var[c] as f64 + p.eps as f64).sqrt();
            (inv, p.shift[c] as f64 - p.mean[c] as f64 * inv)
        })
        .collect();
    let mut out = x.data().to_vec();
    out.par_chunks_mut(d.plane_len())
        .enumerate()
        .for_each(|(idx, plane)| {
            let (a, b) = coeffs[idx % d.c];
            for v in plane {
                *v = (*v as f64 * a + b) as f32;
            }
        });
    Tensor::from_op("batchnorm", d, out)
}

/// Concatenates along channels in the given order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    const OP: &str = "concat_channels";
    let first = parts
        .first()
        .ok_or_else(|| Error::invalid(OP, "nothing to concatenate"))?
        .dims();
    for (i, t) in parts.iter().enumerate().skip(1) {
        let d = t.dims();
        if d.n != first.n {
            return Err(Error::shape(OP, "batch", format!("part {i} has {} vs {}", d.n, first.n)));
        }
        if d.h != first.h || d.w != first.w {
            return Err(Error::shape(
                OP,
                "spatial",
                format!("part {i} is {}x{} vs {}x{}", d.h, d.w, first.h, first.w),
            ));
        }
    }
    let total_c: usize = parts.iter().map(|t| t.dims().c).sum();
    let od = first.with_channels(total_c);
    let mut out = Vec::with_capacity(od.len());
    for n in 0..first.n {
        for t in parts {
            let d = t.dims();
            let per = d.c * d.plane_len();
            out.extend_from_slice(&t.data()[n * per..(n + 1) * per]);
        }
    }
    Ok(Tensor::from_op(OP, od, out).expect("concat of finite tensors"))
}

/// Splits along channels into consecutive blocks of `sizes`.
pub fn split_channels(x: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    const OP: &str = "split_channels";
    let d = x.dims();
    let total: usize = sizes.iter().sum();
    if total != d.c {
        return Err(Error::shape(
            OP,
            "channels",
            format!("sizes {sizes:?} sum to {total}, tensor has {}", d.c),
        ));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid(OP, "zero-sized split"));
    }
    let p = d.plane_len();
    let mut offset = 0;
    let mut parts = Vec::with_capacity(sizes.len());
    for &s in sizes {
        let pd = d.with_channels(s);
        let mut data = Vec::with_capacity(pd.len());
        for n in 0..d.n {
            let start = (n * d.c + offset) * p;
            data.extend_from_slice(&x.data()[start..start + s * p]);
        }
        parts.push(Tensor::from_op(OP, pd, data)?);
        offset += s;
    }
    Ok(parts)
}

pub fn scale_channels(x: &Tensor, gate: f32) -> Result<Tensor> {
    if !gate.is_finite() {
        return Err(Error::invalid("scale_channels", "gate must be finite"));
    }
    x.map("scale_channels", |v| v * gate)
}

/// Elementwise sum of equally shaped tensors.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.dims() != b.dims() {
        return Err(Error::shape(
            "add",
            "dims",
            format!("{} vs {}", a.dims(), b.dims()),
        ));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::from_op("add", a.dims(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::conv2d_nested;

    fn plane(h: usize, w: usize, vals: &[f32]) -> Tensor {
        Tensor::new(Dims::new(1, 1, h, w), vals.to_vec()).unwrap()
    }

    #[test]
    fn unit_kernel_scales() {
        let x = Tensor::full(Dims::new(1, 1, 3, 3), 1.0);
        let spec = ConvSpec::new(plane(1, 1, &[2.0]));
        let y = conv2d(&x, &spec).unwrap();
        assert_eq!(y.dims(), Dims::new(1, 1, 3, 3));
        assert!(y.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn box_kernel_valid_conv() {
        let x = plane(3, 3, &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let spec = ConvSpec::new(Tensor::full(Dims::new(1, 1, 3, 3), 1.0 / 9.0));
        let y = conv2d(&x, &spec).unwrap();
        assert_eq!(y.dims(), Dims::new(1, 1, 1, 1));
        // 45/9 by direct summation
        assert!((y.data()[0] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn grouped_delta_is_identity() {
        let x = Tensor::random(Dims::new(1, 2, 5, 5), 3, -1.0, 1.0);
        let mut w = vec![0.0; 2 * 9];
        w[4] = 1.0;
        w[9 + 4] = 1.0;
        let spec = ConvSpec::new(Tensor::new(Dims::new(2, 1, 3, 3), w).unwrap())
            .with_groups(2)
            .with_padding(Padding::symmetric(1));
        assert_eq!(conv2d(&x, &spec).unwrap(), x);
    }

    #[test]
    fn groups_read_only_their_block() {
        // Output channel 0 (group 0) must not see input channel 1.
        let mut x = Tensor::random(Dims::new(1, 2, 4, 4), 5, -1.0, 1.0);
        let spec = ConvSpec::new(Tensor::random(Dims::new(2, 1, 3, 3), 6, -1.0, 1.0))
            .with_groups(2)
            .with_padding(Padding::symmetric(1));
        let a = conv2d(&x, &spec).unwrap();
        let mut data = x.clone().into_data();
        for v in &mut data[16..] {
            *v += 3.0;
        }
        x = Tensor::new(x.dims(), data).unwrap();
        let b = conv2d(&x, &spec).unwrap();
        assert_eq!(a.plane(0, 0), b.plane(0, 0));
        assert_ne!(a.plane(0, 1), b.plane(0, 1));
    }

    #[test]
    fn conv_matches_nested_loop_oracle() {
        for (seed, stride, pad, mode) in [
            (1u64, 1, 1, PadMode::Zeros),
            (2, 2, 1, PadMode::Zeros),
            (3, 1, 2, PadMode::Reflect),
            (4, 2, 0, PadMode::Zeros),
        ] {
            let x = Tensor::random(Dims::new(1, 3, 8, 8), seed, -1.0, 1.0);
            let spec = ConvSpec::new(Tensor::random(Dims::new(4, 3, 3, 3), seed + 100, -1.0, 1.0))
                .with_bias(vec![0.1, -0.2, 0.3, 0.0])
                .with_stride(stride, stride)
                .with_padding(Padding::symmetric(pad).with_mode(mode));
            let fast = conv2d(&x, &spec).unwrap();
            let slow = conv2d_nested(&x, &spec);
            assert_eq!(fast.dims(), slow.dims());
            assert!(fast.max_abs_diff(&slow) < 1e-5, "seed {seed}");
        }
    }

    #[test]
    fn conv_output_size_formula() {
        let x = Tensor::zeros(Dims::new(2, 4, 11, 9));
        for (k, s, p) in [(3, 1, 0), (3, 2, 1), (5, 3, 2), (1, 1, 0)] {
            let spec = ConvSpec::new(Tensor::zeros(Dims::new(6, 4, k, k)))
                .with_stride(s, s)
                .with_padding(Padding::symmetric(p));
            let d = conv2d(&x, &spec).unwrap().dims();
            assert_eq!(d, Dims::new(2, 6, (11 + 2 * p - k) / s + 1, (9 + 2 * p - k) / s + 1));
        }
    }

    #[test]
    fn conv_rejects_bad_channels() {
        let x = Tensor::zeros(Dims::new(1, 3, 4, 4));
        let spec = ConvSpec::new(Tensor::zeros(Dims::new(2, 2, 3, 3)));
        let err = conv2d(&x, &spec).unwrap_err();
        assert!(err.to_string().contains("input channels"), "{err}");
        let spec = ConvSpec::new(Tensor::zeros(Dims::new(3, 1, 1, 1))).with_groups(2);
        assert!(conv2d(&Tensor::zeros(Dims::new(1, 2, 4, 4)), &spec).is_err());
    }

    #[test]
    fn adaptive_pool_region_means() {
        let x = plane(4, 4, &(1..=16).map(|v| v as f32).collect::<Vec<_>>());
        let y = adaptive_avg_pool(&x, (2, 2)).unwrap();
        assert_eq!(y.data(), &[3.5, 5.5, 11.5, 13.5]);
    }

    #[test]
    fn adaptive_pool_shapes_and_errors() {
        let x = Tensor::random(Dims::new(1, 2, 64, 64), 1, 0.0, 1.0);
        for s in [3, 6, 9, 12] {
            assert_eq!(adaptive_avg_pool(&x, (s, s)).unwrap().dims(), Dims::new(1, 2, s, s));
        }
        assert!(adaptive_avg_pool(&x, (65, 3)).is_err());
        let c = Tensor::full(Dims::new(1, 1, 10, 7), 5.0);
        assert!(adaptive_avg_pool(&c, (3, 3)).unwrap().data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn local_mean_reflect() {
        let mut d = vec![0.0; 9];
        d[4] = 1.0;
        let y = avg_pool_local(&plane(3, 3, &d), 3).unwrap();
        assert_eq!(y.data()[4], (1.0f64 / 9.0) as f32);
        // Edge cell (0,1): row -1 reflects to row 1, so the centre is counted twice.
        assert_eq!(y.data()[1], (2.0f64 / 9.0) as f32);
        // Corner (0,0): both axes reflect, centre counted four times.
        assert_eq!(y.data()[0], (4.0f64 / 9.0) as f32);

        let single = avg_pool_local(&plane(1, 1, &[2.5]), 3).unwrap();
        assert_eq!(single.data(), &[2.5]);
        assert!(avg_pool_local(&single, 4).is_err());
    }

    #[test]
    fn reflect_index_rules() {
        assert_eq!(reflect_index(-1, 5), 1);
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(-2, 2), 0);
        assert_eq!(reflect_index(7, 1), 0);
    }

    #[test]
    fn bilinear_half_pixel() {
        let y = bilinear_upsample(&plane(1, 2, &[0.0, 1.0]), (1, 4)).unwrap();
        assert!(y.data().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(y.data(), &[0.0, 0.25, 0.75, 1.0]);

        let y = bilinear_upsample(&plane(2, 2, &[0., 0., 2., 2.]), (4, 4)).unwrap();
        // Row sources at -0.25 (clamped), 0.25, 0.75, 1.25 (clamped to row 1).
        for x in 0..4 {
            let col: Vec<f32> = (0..4).map(|r| y.get(0, 0, r, x)).collect();
            assert_eq!(col, vec![0.0, 0.5, 1.5, 2.0]);
        }
        assert!(bilinear_upsample(&y, (3, 4)).is_err());
    }

    #[test]
    fn activations_and_bn() {
        let x = plane(1, 3, &[0.0, 1.0, -1.0]);
        let y = silu(&x).unwrap();
        assert_eq!(y.data()[0], 0.0);
        assert!((y.data()[1] - 0.731_058_6).abs() < 1e-6);

        let bn = BnParams::identity(1);
        let y = batchnorm_infer(&x, &bn).unwrap();
        let factor = 1.0 / (1.0f32 + 1e-5).sqrt();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b * factor).abs() < 1e-7);
        }
        let mut bad = BnParams::identity(1);
        bad.var[0] = -1.0;
        assert!(batchnorm_infer(&x, &bad).is_err());
        assert!(batchnorm_infer(&x, &BnParams::identity(2)).is_err());
    }

    #[test]
    fn split_and_concat() {
        let x = Tensor::random(Dims::new(2, 64, 3, 3), 9, -1.0, 1.0);
        let parts = split_channels(&x, &[16, 48]).unwrap();
        assert_eq!(parts[0].dims().c, 16);
        assert_eq!(parts[1].dims().c, 48);
        assert_eq!(concat_channels(&[&parts[0], &parts[1]]).unwrap(), x);
        assert!(split_channels(&x, &[16, 47]).is_err());
        let other = Tensor::zeros(Dims::new(2, 1, 4, 3));
        assert!(concat_channels(&[&x, &other]).is_err());
    }
}
