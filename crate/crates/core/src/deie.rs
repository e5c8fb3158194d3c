//! Dual-domain edge information extraction.
//!
//! Per channel plane of `x_up`:
//!
//! 1. spatial branch: `x_high = x_up - mean3x3(x_up)` (reflect padded);
//! 2. edge strength: `S = |x_high - meanRxR(x_high)|`;
//! 3. frequency branch: `fft2(x_up)`, zero every bin whose magnitude is below
//!    `alpha`, scale surviving magnitudes by `1 + beta * S`, scale again by
//!    `gamma`, inverse transform. Phases are never touched: every step
//!    multiplies a bin by a non-negative real.
//!
//! The three planes `(x_up, x_high, x_fs)` are gated by one scalar each and
//! concatenated along channels.
//!
//! # Spectral/spatial coupling
//!
//! The edge-strength factor multiplies frequency bin `(u, v)` by the spatial
//! value at the same grid position, i.e. an elementwise product of
//! equally-shaped arrays. A positional gain map is generally not symmetric
//! under `(u, v) -> (-u, -v)`, so applying it verbatim would make the
//! spectrum non-Hermitian and the inverse transform complex. Inside
//! [`deie_forward`] the map is therefore averaged with its point reflection
//! first ([`hermitian_gain_map`]). For a real input this yields exactly the
//! real part of the inverse transform of the verbatim product, and it keeps
//! the imaginary-residue check of [`Fft2Plan::inverse`] meaningful.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::ops::{avg_pool_local, concat_channels, scale_channels, split_channels};
use crate::spectral::{Fft2Plan, Plane, Spectrum};
use crate::tensor::{Dims, Tensor};

/// How the three gated branches are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchFusion {
    /// Channel concatenation, tripling the channel count.
    #[default]
    Concat,
    /// Elementwise `g1*x_up + g2*x_high + g3*x_fs`, keeping the channel count.
    WeightedSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeieParams {
    /// Magnitude threshold.
    pub alpha: f64,
    /// Edge intensity factor.
    pub beta: f64,
    /// Sharpening factor.
    pub gamma: f64,
    /// Local-mean kernel for the high-frequency residual.
    pub k: usize,
    /// Neighbourhood for the edge-strength contrast.
    pub r: usize,
    /// Compare `magnitude / max_magnitude` against `alpha` instead of the raw magnitude.
    pub normalize_magnitude: bool,
    /// Scalar multipliers for `(x_up, x_high, x_fs)`.
    pub gates: [f32; 3],
    pub fusion: BranchFusion,
}

impl Default for DeieParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1.5,
            gamma: 1.2,
            k: 3,
            r: 3,
            normalize_magnitude: false,
            gates: [1.0; 3],
            fusion: BranchFusion::Concat,
        }
    }
}

impl DeieParams {
    pub fn validate(&self) -> Result<()> {
        const OP: &str = "deie params";
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(OP, format!("alpha {} must be >= 0", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(OP, format!("beta {} must be >= 0", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(OP, format!("gamma {} must be > 0", self.gamma)));
        }
        if self.k.is_multiple_of(2) || self.r.is_multiple_of(2) {
            return Err(Error::invalid(OP, format!("k={} and r={} must be odd", self.k, self.r)));
        }
        if self.gates.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid(OP, "gates must be finite"));
        }
        Ok(())
    }

    /// Output channel count for `c` input channels.
    pub fn output_channels(&self, c: usize) -> usize {
        match self.fusion {
            BranchFusion::Concat => 3 * c,
            BranchFusion::WeightedSum => c,
        }
    }

    /// The identity configuration of the frequency branch.
    pub fn passthrough() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            gamma: 1.0,
            ..Self::default()
        }
    }
}

/// `x_up - avg_pool_local(x_up, k)`.
pub fn extract_high_freq(x_up: &Tensor, k: usize) -> Result<Tensor> {
    let low = avg_pool_local(x_up, k)?;
    let data = x_up
        .data()
        .iter()
        .zip(low.data())
        .map(|(a, b)| a - b)
        .collect();
    Tensor::new(x_up.dims(), data)
}

/// Local contrast `|x_high - avg_pool_local(x_high, r)|`.
pub fn edge_strength(x_high: &Tensor, r: usize) -> Result<Tensor> {
    let mean = avg_pool_local(x_high, r)?;
    let data = x_high
        .data()
        .iter()
        .zip(mean.data())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Tensor::new(x_high.dims(), data)
}

/// Zeroes bins whose magnitude (or magnitude relative to the largest bin when
/// `normalize` is set) falls below `alpha`. Surviving bins are copied
/// verbatim, so their phase is untouched.
pub fn high_pass_filter(spec: &Spectrum, alpha: f64, normalize: bool) -> Spectrum {
    let cutoff = if normalize {
        let max = spec.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return Spectrum::zeros(spec.height, spec.width);
        }
        alpha * max
    } else {
        alpha
    };
    let mut out = spec.clone();
    for z in &mut out.data {
        if z.norm() < cutoff {
            *z = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    out
}

/// Multiplies bin `(u, v)` by `1 + beta * strength(u, v)`.
///
/// `strength` must have the spectrum's grid shape. `beta = 0` returns the
/// input bit-for-bit.
pub fn enhance_magnitude(spec: &Spectrum, strength: &Plane, beta: f64) -> Result<Spectrum> {
    const OP: &str = "enhance_magnitude";
    if (strength.height, strength.width) != (spec.height, spec.width) {
        return Err(Error::shape(
            OP,
            "grid",
            format!(
                "strength map {}x{} vs spectrum {}x{}",
                strength.height, strength.width, spec.height, spec.width
            ),
        ));
    }
    let mut out = spec.clone();
    for (i, (z, &s)) in out.data.iter_mut().zip(&strength.data).enumerate() {
        let gain = 1.0 + beta * s;
        if gain < 0.0 {
            return Err(Error::invalid(OP, format!("negative gain {gain} at bin {i}")));
        }
        *z *= gain;
    }
    Ok(out)
}

/// Scales every magnitude by `gamma`.
pub fn frequency_sharpen(spec: &Spectrum, gamma: f64) -> Result<Spectrum> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("frequency_sharpen", format!("gamma {gamma} must be > 0")));
    }
    let mut out = spec.clone();
    for z in &mut out.data {
        *z *= gamma;
    }
    Ok(out)
}

/// `(S(u,v) + S(-u mod H, -v mod W)) / 2`.
pub fn hermitian_gain_map(strength: &Plane) -> Plane {
    let (h, w) = (strength.height, strength.width);
    let mut out = Plane::zeros(h, w);
    for u in 0..h {
        for v in 0..w {
            let mirror = strength.get((h - u) % h, (w - v) % w);
            out.data[u * w + v] = (strength.get(u, v) + mirror) / 2.0;
        }
    }
    out
}

/// Every intermediate of the frequency branch for one plane.
#[derive(Debug, Clone)]
pub struct FrequencyTrace {
    pub input: Spectrum,
    pub filtered: Spectrum,
    pub enhanced: Spectrum,
    pub sharpened: Spectrum,
    pub output: Plane,
}

/// Frequency branch on one plane with edge-strength plane `strength`.
pub fn frequency_branch(
    plan: &Fft2Plan,
    plane: &Plane,
    strength: &Plane,
    p: &DeieParams,
) -> Result<FrequencyTrace> {
    let input = plan.forward(plane);
    let filtered = high_pass_filter(&input, p.alpha, p.normalize_magnitude);
    let enhanced = enhance_magnitude(&filtered, &hermitian_gain_map(strength), p.beta)?;
    let sharpened = frequency_sharpen(&enhanced, p.gamma)?;
    let output = plan.inverse(&sharpened)?;
    Ok(FrequencyTrace {
        input,
        filtered,
        enhanced,
        sharpened,
        output,
    })
}

/// The three ungated branch tensors, each shaped like the input.
#[derive(Debug, Clone)]
pub struct DeieBranches {
    pub identity: Tensor,
    pub high: Tensor,
    pub sharpened: Tensor,
}

pub fn deie_branches(x_up: &Tensor, p: &DeieParams) -> Result<DeieBranches> {
    p.validate()?;
    let d = x_up.dims();
    let high = extract_high_freq(x_up, p.k)?;
    let strength = edge_strength(&high, p.r)?;
    let plan = Fft2Plan::new(d.h, d.w);
    let planes: Vec<Vec<f32>> = (0..d.n * d.c)
        .into_par_iter()
        .map(|idx| {
            let (n, c) = (idx / d.c, idx % d.c);
            let plane = Plane::from_tensor(x_up, n, c);
            let s = Plane::from_tensor(&strength, n, c);
            frequency_branch(&plan, &plane, &s, p)
                .map(|t| t.output.to_f32())
                .context_with(|| format!("deie frequency branch (batch {n}, channel {c})"))
        })
        .collect::<Result<_>>()?;
    let sharpened = Tensor::new(d, planes.concat())?;
    Ok(DeieBranches {
        identity: x_up.clone(),
        high,
        sharpened,
    })
}

impl DeieBranches {
    pub fn fuse(&self, p: &DeieParams) -> Result<Tensor> {
        let [g1, g2, g3] = p.gates;
        let a = scale_channels(&self.identity, g1)?;
        let b = scale_channels(&self.high, g2)?;
        let c = scale_channels(&self.sharpened, g3)?;
        match p.fusion {
            BranchFusion::Concat => concat_channels(&[&a, &b, &c]),
            BranchFusion::WeightedSum => {
                let data = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .zip(c.data())
                    .map(|((x, y), z)| x + y + z)
                    .collect();
                Tensor::new(a.dims(), data)
            }
        }
    }
}

/// Full DEIE forward pass: `(n, c, h, w) -> (n, 3c, h, w)` under concat fusion.
pub fn deie_forward(x_up: &Tensor, p: &DeieParams) -> Result<Tensor> {
    deie_branches(x_up, p)?.fuse(p)
}

/// Splits a concat-fused DEIE output back into its three branches.
pub fn split_branches(fused: &Tensor) -> Result<[Tensor; 3]> {
    let c = fused.dims().c;
    if !c.is_multiple_of(3) {
        return Err(Error::shape("deie", "channels", format!("{c} is not a multiple of 3")));
    }
    let mut parts = split_channels(fused, &[c / 3; 3])?.into_iter();
    Ok([
        parts.next().unwrap(),
        parts.next().unwrap(),
        parts.next().unwrap(),
    ])
}

/// Output dims of [`deie_forward`].
pub fn output_dims(d: Dims, p: &DeieParams) -> Dims {
    d.with_channels(p.output_channels(d.c))
}
