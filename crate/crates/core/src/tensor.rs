use std::fmt;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// `(batch, channels, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Dims {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub const fn as_array(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn with_channels(self, c: usize) -> Self {
        Self { c, ..self }
    }

    pub fn with_spatial(self, h: usize, w: usize) -> Self {
        Self { h, w, ..self }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Dense rank-4 `f32` feature map in NCHW row-major order.
///
/// Every value is finite; constructors reject NaN/Inf so downstream
/// operators never have to re-check their inputs.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    dims: Dims,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("dims", &self.dims)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor {
    pub fn new(dims: Dims, data: Vec<f32>) -> Result<Self> {
        if dims.n == 0 || dims.c == 0 || dims.h == 0 || dims.w == 0 {
            return Err(Error::invalid("tensor", format!("zero-sized dims {dims}")));
        }
        if data.len() != dims.len() {
            return Err(Error::shape(
                "tensor",
                "length",
                format!("dims {dims} need {} values, got {}", dims.len(), data.len()),
            ));
        }
        check_finite("tensor", &data)?;
        Ok(Self { dims, data })
    }

    /// Caller guarantees `data.len() == dims.len()`; finiteness is checked.
    pub(crate) fn from_op(op: &'static str, dims: Dims, data: Vec<f32>) -> Result<Self> {
        debug_assert_eq!(data.len(), dims.len());
        check_finite(op, &data)?;
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::full(dims, 0.0)
    }

    pub fn full(dims: Dims, value: f32) -> Self {
        assert!(value.is_finite(), "Tensor::full with non-finite value");
        assert!(!dims.is_empty(), "Tensor::full with zero-sized dims {dims}");
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len());
        for n in 0..dims.n {
            for c in 0..dims.c {
                for y in 0..dims.h {
                    for x in 0..dims.w {
                        data.push(f(n, c, y, x));
                    }
                }
            }
        }
        Self::new(dims, data)
    }

    /// Uniform values in `[lo, hi)` drawn from a seeded SplitMix64 stream.
    pub fn random(dims: Dims, seed: u64, lo: f32, hi: f32) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut data = vec![0.0; dims.len()];
        rng.fill_uniform(&mut data, lo, hi);
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(n, c, y, x)]
    }

    fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let d = self.dims;
        ((n * d.c + c) * d.h + y) * d.w + x
    }

    /// One `h * w` channel plane.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let p = self.dims.plane_len();
        let start = (n * self.dims.c + c) * p;
        &self.data[start..start + p]
    }

    /// Iterator over all `(n, c)` planes in storage order.
    pub fn planes(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dims.plane_len())
    }

    /// Same data, new shape of equal volume.
    pub fn reshape(self, dims: Dims) -> Result<Self> {
        if dims.len() != self.dims.len() {
            return Err(Error::shape(
                "reshape",
                "length",
                format!("{} -> {dims}", self.dims),
            ));
        }
        Ok(Self {
            dims,
            data: self.data,
        })
    }

    /// Applies `f` elementwise; the result must stay finite.
    pub fn map(&self, op: &'static str, f: impl Fn(f32) -> f32) -> Result<Self> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::from_op(op, self.dims, data)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.dims, other.dims, "max_abs_diff on different dims");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

pub(crate) fn check_finite(op: &'static str, data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { op, index }),
        None => Ok(()),
    }
}
