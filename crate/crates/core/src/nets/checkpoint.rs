//! Parameter checkpoint files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "WDNP" | u32 version = 1 | u32 tensor count
//! per tensor: u32 rank | u32 dim * rank | f64 * product(dims)
//! ```
//!
//! Tensors are written with rank 2. Rank 0 and 1 are accepted on read and
//! become `1 x 1` and `1 x n`.

use std::path::Path;

use crate::autodiff::Tensor;
use crate::codec::ByteReader;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"WDNP";
pub const VERSION: u32 = 1;

pub fn encode_tensors<'a>(tensors: impl IntoIterator<Item = &'a Tensor>) -> Vec<u8> {
    let tensors: Vec<&Tensor> = tensors.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut r = ByteReader::new("checkpoint", bytes);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(r.error(format!("unsupported version {version}, expected {VERSION}")));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let rank = r.u32()?;
        let (rows, cols) = match rank {
            0 => (1, 1),
            1 => (1, r.u32()? as usize),
            2 => (r.u32()? as usize, r.u32()? as usize),
            _ => return Err(r.error(format!("unsupported tensor rank {rank}"))),
        };
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| r.error("tensor size overflows"))?;
        if n > bytes.len() / 8 {
            return Err(r.error(format!("tensor of {n} values exceeds file size")));
        }
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        out.push(Tensor::new(rows, cols, data).expect("size checked"));
    }
    r.finish()?;
    Ok(out)
}

pub fn save_tensors<'a>(path: &Path, tensors: impl IntoIterator<Item = &'a Tensor>) -> Result<()> {
    std::fs::write(path, encode_tensors(tensors)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_tensors(path: &Path) -> Result<Vec<Tensor>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_tensors(&bytes)
}
