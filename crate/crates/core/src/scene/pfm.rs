//! Portable Float Map reader/writer.
//!
//! `PF` is three-channel, `Pf` single-channel. The scale line's sign encodes
//! byte order (negative = little-endian) and scanlines run bottom to top.
//! Writing always emits little-endian with scale `-1`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::Raster;

pub fn read(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::Pfm {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn write(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(raster)).map_err(|e| Error::io(path, e))
}

pub fn encode(raster: &Raster) -> Vec<u8> {
    let (w, h, c) = (raster.width(), raster.height(), raster.channels());
    let tag = if c == 3 { "PF" } else { "Pf" };
    let mut out = Vec::with_capacity(32 + raster.data().len() * 4);
    write!(out, "{tag}\n{w} {h}\n-1.0\n").unwrap();
    let data = raster.data();
    for row in (0..h).rev() {
        for v in &data[row * w * c..(row + 1) * w * c] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Raster, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        let t = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
        Ok(t)
    };
    let channels = match token()?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(format!("bad magic {other:?}")),
    };
    let w: usize = token()?.parse().map_err(|_| "bad width".to_string())?;
    let h: usize = token()?.parse().map_err(|_| "bad height".to_string())?;
    let scale: f32 = token()?.parse().map_err(|_| "bad scale".to_string())?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("scale must be a non-zero finite number".into());
    }
    // exactly one whitespace byte separates the header from the payload
    pos += 1;
    let little = scale < 0.0;
    let n = w * h * channels;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < n * 4 {
        return Err(format!("expected {} payload bytes, found {}", n * 4, payload.len()));
    }
    let mut data = vec![0f32; n];
    let row_len = w * channels;
    for (file_row, chunk) in payload[..n * 4].chunks_exact(row_len * 4).enumerate() {
        let row = h - 1 - file_row;
        for (i, b) in chunk.chunks_exact(4).enumerate() {
            let arr = [b[0], b[1], b[2], b[3]];
            data[row * row_len + i] = if little {
                f32::from_le_bytes(arr)
            } else {
                f32::from_be_bytes(arr)
            };
        }
    }
    Raster::new(w, h, channels, data).map_err(|e| e.to_string())
}
