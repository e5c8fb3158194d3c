//! Binary codecs for tensor files (`SFFT`) and weights archives (`SFFW`).
//!
//! All integers and floats are little-endian regardless of host.
//!
//! ```text
//! tensor  := "SFFT" version:u16 rank:u16 dims:u32[rank] payload:f32[prod(dims)]
//! archive := "SFFW" version:u16 count:u32 entry[count]
//! entry   := name_len:u32 name:utf8[name_len] tensor
//! ```

use std::path::Path;

use thiserror::Error;

use crate::tensor::{Dims, Tensor};
use crate::weights::WeightsArchive;

pub const TENSOR_MAGIC: &[u8; 4] = b"SFFT";
pub const ARCHIVE_MAGIC: &[u8; 4] = b"SFFW";
pub const FORMAT_VERSION: u16 = 1;
const RANK: u16 = 4;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported format version {0} (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u16),
    #[error("unsupported rank {0} (only rank-4 tensors are stored)")]
    BadRank(u16),
    #[error("truncated file while reading {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("entry {index}: name is not valid UTF-8")]
    NonUtf8Name { index: usize },
    #[error("duplicate entry name `{0}`")]
    DuplicateName(String),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).ok_or(FormatError::Truncated(what))?;
        let s = self.buf.get(self.pos..end).ok_or(FormatError::Truncated(what))?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<(), FormatError> {
        let found = self.take(4, "magic")?;
        if found != expected {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    fn version(&mut self) -> Result<(), FormatError> {
        match self.u16("version")? {
            FORMAT_VERSION => Ok(()),
            v => Err(FormatError::UnsupportedVersion(v)),
        }
    }
}

pub fn encode_tensor(t: &Tensor, out: &mut Vec<u8>) {
    let d = t.dims();
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&RANK.to_le_bytes());
    for v in d.as_array() {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.reserve(4 * d.len());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_tensor(cur: &mut Cursor<'_>) -> Result<Tensor, FormatError> {
    cur.magic(TENSOR_MAGIC)?;
    cur.version()?;
    let rank = cur.u16("rank")?;
    if rank != RANK {
        return Err(FormatError::BadRank(rank));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = cur.u32("dims")? as usize;
    }
    let dims = Dims::new(dims[0], dims[1], dims[2], dims[3]);
    let bytes = dims
        .n
        .checked_mul(dims.c)
        .and_then(|v| v.checked_mul(dims.h))
        .and_then(|v| v.checked_mul(dims.w))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| FormatError::InvalidTensor(format!("dims {dims} overflow")))?;
    let payload = cur.take(bytes, "payload")?;
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Tensor::new(dims, data).map_err(|e| FormatError::InvalidTensor(e.to_string()))
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor, FormatError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let t = read_tensor(&mut cur)?;
    match bytes.len() - cur.pos {
        0 => Ok(t),
        extra => Err(FormatError::TrailingBytes(extra)),
    }
}

pub fn encode_archive(archive: &WeightsArchive) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(archive.len() as u32).to_le_bytes());
    for (name, t) in archive.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        encode_tensor(t, &mut out);
    }
    out
}

pub fn decode_archive(bytes: &[u8]) -> Result<WeightsArchive, FormatError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    cur.magic(ARCHIVE_MAGIC)?;
    cur.version()?;
    let count = cur.u32("entry count")? as usize;
    let mut archive = WeightsArchive::new();
    for index in 0..count {
        let len = cur.u32("name length")? as usize;
        let raw = cur.take(len, "name")?;
        let name = std::str::from_utf8(raw).map_err(|_| FormatError::NonUtf8Name { index })?;
        let t = read_tensor(&mut cur)?;
        if archive.contains(name) {
            return Err(FormatError::DuplicateName(name.to_owned()));
        }
        archive.insert(name, t);
    }
    match bytes.len() - cur.pos {
        0 => Ok(archive),
        extra => Err(FormatError::TrailingBytes(extra)),
    }
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor) -> crate::Result<()> {
    let mut buf = Vec::new();
    encode_tensor(t, &mut buf);
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> crate::Result<Tensor> {
    Ok(decode_tensor(&std::fs::read(path)?)?)
}

pub fn save_archive(path: impl AsRef<Path>, archive: &WeightsArchive) -> crate::Result<()> {
    std::fs::write(path, encode_archive(archive))?;
    Ok(())
}

pub fn load_archive(path: impl AsRef<Path>) -> crate::Result<WeightsArchive> {
    Ok(decode_archive(&std::fs::read(path)?)?)
}
