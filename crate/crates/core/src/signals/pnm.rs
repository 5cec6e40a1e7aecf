//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::fs;
use std::path::Path;

use super::Signal;
use crate::error::{Error, Result};

fn to_byte(v: f64) -> u8 {
    ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8
}

fn from_byte(u: u8) -> f64 {
    2.0 * (u as f64 / 255.0) - 1.0
}

/// Writes a 2-D signal as P5 (`d = 1`) or P6 (`d = 3`).
pub fn write_pnm(sig: &Signal, path: &Path) -> Result<()> {
    let magic = match (sig.pos_dim(), sig.value_dim()) {
        (2, 1) => "P5",
        (2, 3) => "P6",
        (p, d) => {
            return Err(Error::Input(format!(
                "PGM/PPM needs a 2-D signal with 1 or 3 channels, got p={p} d={d}"
            )))
        }
    };
    let (rows, cols) = (sig.grid_shape()[0], sig.grid_shape()[1]);
    let mut out = format!("{magic}\n{cols} {rows}\n255\n").into_bytes();
    out.extend(sig.values().iter().map(|&v| to_byte(v)));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(sig: &Signal, path: &Path) -> Result<()> {
    if sig.value_dim() != 1 {
        return Err(Error::Input("PGM needs a single-channel signal".into()));
    }
    write_pnm(sig, path)
}

pub fn write_ppm(sig: &Signal, path: &Path) -> Result<()> {
    if sig.value_dim() != 3 {
        return Err(Error::Input("PPM needs a three-channel signal".into()));
    }
    write_pnm(sig, path)
}

/// Reads a binary P5/P6 file with maxval 255 back into `[-1, 1]` values.
pub fn read_pnm(path: &Path) -> Result<Signal> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(pos as u64, "truncated PNM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // single whitespace byte separates header and raster
    pos += 1;
    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::format(0, format!("unsupported PNM magic {other:?}"))),
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(0, format!("bad PNM header field {s:?}")))
    };
    let (cols, rows, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(Error::format(0, format!("unsupported maxval {maxval}")));
    }
    let need = rows * cols * channels;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::format(bytes.len() as u64, "truncated PNM raster"))?;
    Signal::new(
        vec![rows, cols],
        channels,
        raster.iter().map(|&u| from_byte(u)).collect(),
    )
}
