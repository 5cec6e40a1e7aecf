//! IDX image files (`0x00000803`, unsigned bytes, big-endian header).

use std::fs;
use std::path::Path;

use super::{resample_box, Signal};
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const HEADER_LEN: usize = 16;

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(offset as u64, "truncated IDX header"))
}

/// Parses an IDX image file. Pixels map to `[-1, 1]` via `2 * (u / 255) - 1`.
pub fn parse_idx(bytes: &[u8]) -> Result<Vec<Signal>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            0,
            format!("bad IDX magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        ));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(8, format!("empty image extent {rows}x{cols}")));
    }
    let per = rows * cols;
    let need = HEADER_LEN + count * per;
    if bytes.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated IDX payload: {count} images of {rows}x{cols} need {need} bytes"),
        ));
    }
    bytes[HEADER_LEN..need]
        .chunks(per)
        .map(|px| {
            let values = px.iter().map(|&u| 2.0 * (u as f64 / 255.0) - 1.0).collect();
            Signal::new(vec![rows, cols], 1, values)
        })
        .collect()
}

/// Loads IDX images, optionally box-averaged to `resize = (rows, cols)`.
pub fn load_idx(path: &Path, resize: Option<(usize, usize)>) -> Result<Vec<Signal>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let images = parse_idx(&bytes)?;
    match resize {
        Some((r, c)) => images.iter().map(|s| resample_box(s, r, c)).collect(),
        None => Ok(images),
    }
}

/// Writes `images` (each `rows × cols` bytes) as an IDX image file.
pub fn write_idx(path: &Path, rows: usize, cols: usize, images: &[Vec<u8>]) -> Result<()> {
    let mut out = Vec::with_capacity(HEADER_LEN + images.len() * rows * cols);
    for word in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for img in images {
        if img.len() != rows * cols {
            return Err(Error::dim("write_idx", &[rows, cols], &[img.len()]));
        }
        out.extend_from_slice(img);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
