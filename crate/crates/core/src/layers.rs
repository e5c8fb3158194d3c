//! Small layer compositions shared by the modules.

use crate::error::Result;
use crate::ops::{batchnorm_infer, conv2d, silu, Padding};
use crate::tensor::{Dims, Tensor};
use crate::weights::WeightsArchive;

#[allow(clippy::too_many_arguments)]
/// Convolution `{prefix}` followed, when `bn_act` is set, by batch-norm
/// `{prefix}.bn` and SiLU.
pub fn conv_bn_silu(
    x: &Tensor,
    weights: &WeightsArchive,
    prefix: &str,
    weight_dims: Dims,
    stride: usize,
    padding: Padding,
    groups: usize,
    bn_act: bool,
) -> Result<Tensor> {
    let spec = weights.conv(prefix, weight_dims, stride, padding, groups)?;
    let y = conv2d(x, &spec)?;
    if !bn_act {
        return Ok(y);
    }
    let bn = weights.batchnorm(&format!("{prefix}.bn"), weight_dims.n)?;
    silu(&batchnorm_infer(&y, &bn)?)
}
