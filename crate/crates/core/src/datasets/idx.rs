use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IDX_UBYTE: u8 = 0x08;

/// Parses an unsigned-byte IDX buffer into `[N×D]` with values in `[0, 1]`.
/// The first dimension is the sample count; the rest are flattened.
pub fn parse_idx(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 {
        return Err(Error::IdxTruncated { expected: 4, found: bytes.len() });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::IdxBadMagic(bytes[0], bytes[1]));
    }
    if bytes[2] != IDX_UBYTE {
        return Err(Error::IdxUnsupportedDtype(bytes[2]));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 {
        return Err(Error::InvalidArgument("IDX file declares zero dimensions".into()));
    }
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::IdxTruncated { expected: header, found: bytes.len() });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let n = dims[0];
    let d: usize = dims[1..].iter().product();
    let expected = header + n * d;
    if bytes.len() < expected {
        return Err(Error::IdxTruncated { expected, found: bytes.len() });
    }
    let data = bytes[header..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Tensor::matrix(n, d, data)
}

pub fn load_idx(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(&bytes)
}

/// Encodes an unsigned-byte IDX buffer.
pub fn encode_idx(dims: &[u32], payload: &[u8]) -> Result<Vec<u8>> {
    let count: usize = dims.iter().map(|&d| d as usize).product();
    if dims.is_empty() || dims.len() > 255 || count != payload.len() {
        return Err(Error::InvalidArgument(format!(
            "IDX dims {dims:?} do not match a payload of {} bytes",
            payload.len()
        )));
    }
    let mut out = vec![0, 0, IDX_UBYTE, dims.len() as u8];
    for d in dims {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out.extend_from_slice(payload);
    Ok(out)
}

pub fn save_idx(path: &Path, dims: &[u32], payload: &[u8]) -> Result<()> {
    fs::write(path, encode_idx(dims, payload)?).map_err(|e| Error::io(path, e))
}
