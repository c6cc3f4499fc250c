//! Little-endian binary container shared by checkpoints, embedding indexes,
//! and corpus image files: a fixed magic, a format version, a kind tag, then
//! kind-specific payload. Round-trips are bit-exact.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::ndmath::Tensor;

pub(crate) const MAGIC: [u8; 4] = *b"CLSP";
pub(crate) const FORMAT_VERSION: u32 = 1;

pub(crate) const KIND_CHECKPOINT: u32 = 1;
pub(crate) const KIND_INDEX: u32 = 2;
pub(crate) const KIND_IMAGES: u32 = 3;

pub(crate) fn kind_name(kind: u32) -> &'static str {
    match kind {
        KIND_CHECKPOINT => "checkpoint",
        KIND_INDEX => "embedding index",
        KIND_IMAGES => "image payload",
        _ => "unknown",
    }
}

pub(crate) fn write_header(w: &mut impl Write, kind: u32) -> Result<()> {
    w.write_all(&MAGIC)?;
    write_u32(w, FORMAT_VERSION)?;
    write_u32(w, kind)?;
    Ok(())
}

/// Validates magic, version, and kind; returns the file's version.
pub(crate) fn read_header(r: &mut impl Read, expect_kind: u32) -> Result<u32> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "file format version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let kind = read_u32(r)?;
    if kind != expect_kind {
        return Err(Error::Format(format!(
            "file holds a {} (kind {kind}), expected a {} (kind {expect_kind})",
            kind_name(kind),
            kind_name(expect_kind)
        )));
    }
    Ok(version)
}

pub(crate) fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub(crate) fn write_f64s(w: &mut impl Write, vs: &[f64]) -> Result<()> {
    for &v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    let mut buf = [0u8; 8];
    for slot in out.iter_mut() {
        r.read_exact(&mut buf)?;
        *slot = f64::from_le_bytes(buf);
    }
    Ok(out)
}

pub(crate) fn write_string(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn read_string(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("string length {len} is implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("invalid utf-8: {e}")))
}

pub(crate) fn write_tensor_block(w: &mut impl Write, name: &str, t: &Tensor) -> Result<()> {
    write_string(w, name)?;
    write_u32(w, t.shape().len() as u32)?;
    for &e in t.shape() {
        write_u64(w, e as u64)?;
    }
    write_f64s(w, t.values())?;
    Ok(())
}

pub(crate) fn read_tensor_block(r: &mut impl Read) -> Result<(String, Tensor)> {
    let name = read_string(r)?;
    let rank = read_u32(r)? as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::Format(format!("tensor {name:?} has rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    let mut len = 1usize;
    for _ in 0..rank {
        let e = read_u64(r)? as usize;
        if e == 0 || e > 1 << 24 {
            return Err(Error::Format(format!("tensor {name:?} extent {e}")));
        }
        len = len
            .checked_mul(e)
            .ok_or_else(|| Error::Format(format!("tensor {name:?} overflows")))?;
        shape.push(e);
    }
    let values = read_f64s(r, len)?;
    Ok((name, Tensor::new(&shape, values)?))
}
