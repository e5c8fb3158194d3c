//! Direct-definition reference implementations used as oracles by the test
//! suites and by `selftest`. Slow on purpose: one scalar loop per term.

use crate::ops::{reflect_index, ConvSpec, PadMode};
use crate::tensor::{Dims, Tensor};

/// Convolution by the textbook sum, evaluated independently per output cell.
///
/// Panics on inconsistent shapes; callers validate with
/// [`ConvSpec::output_dims`] first.
pub fn conv2d_nested(x: &Tensor, spec: &ConvSpec) -> Tensor {
    let d = x.dims();
    let od = spec.output_dims(d).expect("reference conv on invalid spec");
    let (kh, kw) = spec.kernel();
    let g = spec.groups;
    let cin_g = d.c / g;
    let cout_g = od.c / g;
    let p = spec.padding;
    let w = &spec.weights;

    let sample = |n: usize, c: usize, y: isize, xx: isize| -> f64 {
        match p.mode {
            PadMode::Zeros => {
                if y < 0 || xx < 0 || y >= d.h as isize || xx >= d.w as isize {
                    0.0
                } else {
                    x.get(n, c, y as usize, xx as usize) as f64
                }
            }
            PadMode::Reflect => {
                x.get(n, c, reflect_index(y, d.h), reflect_index(xx, d.w)) as f64
            }
        }
    };

    let mut out = Vec::with_capacity(od.len());
    for n in 0..od.n {
        for o in 0..od.c {
            let group = o / cout_g;
            for oy in 0..od.h {
                for ox in 0..od.w {
                    let mut acc = spec.bias.as_ref().map_or(0.0, |b| b[o] as f64);
                    for ci in 0..cin_g {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * spec.stride.0 + ky) as isize - p.top as isize;
                                let ix = (ox * spec.stride.1 + kx) as isize - p.left as isize;
                                acc += w.get(o, ci, ky, kx) as f64
                                    * sample(n, group * cin_g + ci, iy, ix);
                            }
                        }
                    }
                    out.push(acc as f32);
                }
            }
        }
    }
    Tensor::new(Dims::new(od.n, od.c, od.h, od.w), out).expect("finite reference output")
}
