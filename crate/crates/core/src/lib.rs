//! Forward-pass operators for dual-domain edge enhancement (DEIE), the
//! multi-scale coupling module (MDDC), the wide-area perception module (WPM),
//! linear deformable convolution (LDConv) and a declarative feature-pyramid
//! graph executor.
//!
//! Everything operates on rank-4 NCHW [`Tensor`]s of `f32` and is a pure
//! function of its inputs.

pub mod deie;
pub mod error;
pub mod fft;
pub mod graph;
pub mod io;
pub mod layers;
pub mod ldconv;
pub mod mddc;
pub mod ops;
pub mod reference;
pub mod rng;
pub mod spectral;
pub mod tensor;
pub mod weights;
pub mod wpm;

pub use error::{Error, Result};
pub use tensor::{Dims, Tensor};
pub use weights::{ParamSpec, WeightsArchive};
