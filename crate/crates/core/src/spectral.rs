//! Two-dimensional DFT over single channel planes.
//!
//! Conventions:
//! - forward transform is unnormalised, `F(u,v) = Σ_i Σ_j x(i,j) e^{-2πi(ui/H + vj/W)}`
//!   with `i`/`u` running over rows and `j`/`v` over columns;
//! - the inverse carries the `1/(H·W)` factor;
//! - bins are stored row-major in natural order (`u` rows, `v` columns). There
//!   is no fftshift anywhere: the magnitude threshold used by DEIE does not
//!   care where a bin sits.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft1d;
use crate::tensor::Tensor;

/// Relative bound on the imaginary part left after an inverse transform.
pub const IMAG_RESIDUE_TOL: f64 = 1e-4;

/// A real-valued `height x width` grid in f64: a spatial plane, or a
/// magnitude/phase map of a [`Spectrum`].
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("plane", "zero-sized plane"));
        }
        if data.len() != height * width {
            return Err(Error::shape(
                "plane",
                "length",
                format!("{height}x{width} needs {} values, got {}", height * width, data.len()),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "plane", index });
        }
        Ok(Self { height, width, data })
    }

    pub fn from_f32(height: usize, width: usize, data: &[f32]) -> Result<Self> {
        Self::new(height, width, data.iter().map(|&v| v as f64).collect())
    }

    /// Channel `c` of batch item `n`.
    pub fn from_tensor(t: &Tensor, n: usize, c: usize) -> Self {
        let d = t.dims();
        Self {
            height: d.h,
            width: d.w,
            data: t.plane(n, c).iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }

    pub fn max_abs_diff(&self, other: &Plane) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Complex frequency grid of one plane; `u` indexes rows, `v` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.data[u * self.width + v]
    }

    pub fn magnitude(&self, u: usize, v: usize) -> f64 {
        self.get(u, v).norm()
    }

    /// `atan2(im, re)`, with the phase of an exactly-zero bin defined as 0.
    pub fn phase(&self, u: usize, v: usize) -> f64 {
        phase_of(self.get(u, v))
    }

    pub fn magnitudes(&self) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|z| z.norm()).collect(),
        }
    }

    pub fn phases(&self) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&z| phase_of(z)).collect(),
        }
    }

    pub fn nonzero_bins(&self) -> usize {
        self.data
            .iter()
            .filter(|z| z.re != 0.0 || z.im != 0.0)
            .count()
    }

    pub fn max_abs_diff(&self, other: &Spectrum) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn phase_of(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        0.0
    } else {
        z.im.atan2(z.re)
    }
}

/// `(re, im) = (mag·cos φ, mag·sin φ)`.
pub fn reconstruct(magnitude: &Plane, phase: &Plane) -> Result<Spectrum> {
    const OP: &str = "reconstruct";
    if magnitude.height != phase.height || magnitude.width != phase.width {
        return Err(Error::shape(
            OP,
            "grid",
            format!(
                "magnitude {}x{} vs phase {}x{}",
                magnitude.height, magnitude.width, phase.height, phase.width
            ),
        ));
    }
    if let Some(i) = magnitude.data.iter().position(|&m| m < 0.0) {
        return Err(Error::invalid(OP, format!("negative magnitude at bin {i}")));
    }
    Ok(Spectrum {
        height: magnitude.height,
        width: magnitude.width,
        data: magnitude
            .data
            .iter()
            .zip(&phase.data)
            .map(|(&m, &p)| Complex64::from_polar(m, p))
            .collect(),
    })
}

/// Literal quadruple sum; the oracle for [`fft2`].
pub fn dft2_naive(plane: &Plane) -> Spectrum {
    let (h, w) = (plane.height, plane.width);
    let mut out = Spectrum::zeros(h, w);
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..h {
                for j in 0..w {
                    // Reduce the integer products first so the angle stays small.
                    let turns = ((u * i) % h) as f64 / h as f64 + ((v * j) % w) as f64 / w as f64;
                    acc += plane.data[i * w + j] * Complex64::from_polar(1.0, -2.0 * PI * turns);
                }
            }
            out.data[u * w + v] = acc;
        }
    }
    out
}

/// Literal inverse sum with the `1/(H·W)` factor; returns the complex result.
pub fn idft2_naive(spec: &Spectrum) -> Vec<Complex64> {
    let (h, w) = (spec.height, spec.width);
    let scale = 1.0 / (h * w) as f64;
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for u in 0..h {
                for v in 0..w {
                    let turns = ((u * i) % h) as f64 / h as f64 + ((v * j) % w) as f64 / w as f64;
                    acc += spec.data[u * w + v] * Complex64::from_polar(1.0, 2.0 * PI * turns);
                }
            }
            out.push(acc * scale);
        }
    }
    out
}

/// Row and column plans for one plane size, reusable across channels.
#[derive(Debug, Clone)]
pub struct Fft2Plan {
    height: usize,
    width: usize,
    rows: Fft1d,
    cols: Fft1d,
}

impl Fft2Plan {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            rows: Fft1d::new(width),
            cols: Fft1d::new(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn forward(&self, plane: &Plane) -> Spectrum {
        assert_eq!(
            (plane.height, plane.width),
            (self.height, self.width),
            "plane does not match plan"
        );
        let mut data: Vec<Complex64> = plane.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        Spectrum {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Inverse transform; fails if the result is not real to within
    /// [`IMAG_RESIDUE_TOL`] relative to the largest real part.
    pub fn inverse(&self, spec: &Spectrum) -> Result<Plane> {
        let mut data = self.inverse_complex(spec);
        let max_re = data.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let max_im = data.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if max_im > IMAG_RESIDUE_TOL * max_re {
            return Err(Error::ImaginaryResidue {
                residue: max_im,
                max_real: max_re,
            });
        }
        Plane::new(
            self.height,
            self.width,
            data.drain(..).map(|z| z.re).collect(),
        )
    }

    /// Inverse transform keeping the imaginary part.
    pub fn inverse_complex(&self, spec: &Spectrum) -> Vec<Complex64> {
        assert_eq!(
            (spec.height, spec.width),
            (self.height, self.width),
            "spectrum does not match plan"
        );
        let mut data = spec.data.clone();
        self.transform(&mut data, true);
        let scale = 1.0 / (self.height * self.width) as f64;
        for z in &mut data {
            *z *= scale;
        }
        data
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        let mut scratch = Vec::new();
        let run = |plan: &Fft1d, buf: &mut [Complex64], scratch: &mut Vec<Complex64>| {
            if inverse {
                plan.inverse(buf, scratch)
            } else {
                plan.forward(buf, scratch)
            }
        };
        for row in data.chunks_exact_mut(w) {
            run(&self.rows, row, &mut scratch);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); h];
        for j in 0..w {
            for i in 0..h {
                column[i] = data[i * w + j];
            }
            run(&self.cols, &mut column, &mut scratch);
            for i in 0..h {
                data[i * w + j] = column[i];
            }
        }
    }
}

/// Fast forward 2-D DFT of any size.
pub fn fft2(plane: &Plane) -> Spectrum {
    Fft2Plan::new(plane.height, plane.width).forward(plane)
}

/// Inverse 2-D DFT with the imaginary-residue check.
pub fn idft2(spec: &Spectrum) -> Result<Plane> {
    Fft2Plan::new(spec.height, spec.width).inverse(spec)
}
