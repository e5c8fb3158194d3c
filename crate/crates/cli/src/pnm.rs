//! Binary PGM (`P5`) and PPM (`P6`) images with 8-bit samples.
//!
//! Pixels map to `[0, 1]` floats on read. On write, values are clamped to
//! `[0, 1]` and quantised as `round(v * 255)`.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use sffnet_core::{Dims, Tensor};

/// `clamp(v, 0, 1)` then `round(v * 255)`.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    ensure!(bytes.len() >= 2, "image is empty");
    let magic = [bytes[0], bytes[1]];
    ensure!(
        &magic == b"P5" || &magic == b"P6",
        "unsupported image magic {:?} (expected P5 or P6)",
        String::from_utf8_lossy(&magic)
    );
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => bail!("truncated image header"),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        ensure!(pos > start, "malformed image header at byte {start}");
        *field = std::str::from_utf8(&bytes[start..pos])?.parse()?;
    }
    ensure!(
        bytes.get(pos).is_some_and(u8::is_ascii_whitespace),
        "malformed image header after maxval"
    );
    let [width, height, maxval] = fields;
    ensure!(width > 0 && height > 0, "image has zero size");
    ensure!((1..=255).contains(&maxval), "maxval {maxval} unsupported (8-bit images only)");
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        data_start: pos + 1,
    })
}

/// Decodes a PGM or PPM into a `(1, C, H, W)` tensor with `C` = 1 or 3.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let h = parse_header(bytes)?;
    let channels = if &h.magic == b"P5" { 1 } else { 3 };
    let plane = h.width * h.height;
    let payload = &bytes[h.data_start..];
    ensure!(
        payload.len() >= plane * channels,
        "truncated image payload: {} of {} bytes",
        payload.len(),
        plane * channels
    );
    let dims = Dims::new(1, channels, h.height, h.width);
    let scale = h.maxval as f32;
    let mut data = vec![0.0f32; dims.len()];
    for (i, &b) in payload[..plane * channels].iter().enumerate() {
        let (pixel, c) = (i / channels, i % channels);
        data[c * plane + pixel] = b as f32 / scale;
    }
    Ok(Tensor::new(dims, data)?)
}

/// Encodes channel `c` of batch item 0 as PGM, or channels `c..c+3` as PPM
/// when `color` is set.
pub fn encode(t: &Tensor, c: usize, color: bool) -> Result<Vec<u8>> {
    let d = t.dims();
    let channels = if color { 3 } else { 1 };
    ensure!(
        c + channels <= d.c,
        "tensor {d} has no channels {c}..{}",
        c + channels
    );
    let magic = if color { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", d.w, d.h).into_bytes();
    let planes: Vec<&[f32]> = (c..c + channels).map(|k| t.plane(0, k)).collect();
    for i in 0..d.h * d.w {
        for p in &planes {
            out.push(quantize(p[i]));
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode(&bytes).with_context(|| format!("decoding {}", path.display()))
}

pub fn write(path: &Path, t: &Tensor, c: usize, color: bool) -> Result<()> {
    let bytes = encode(t, c, color)?;
    let mut f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(&bytes)?;
    Ok(())
}
