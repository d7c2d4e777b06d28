//! Binary PGM (P5) image files, the frame storage format.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{FrameSample, Timestamp};

pub fn write_pgm(path: &Path, frame: &FrameSample) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(file, "P5\n{} {}\n255\n", frame.width, frame.height)?;
    file.write_all(&frame.pixels)?;
    file.flush()?;
    Ok(())
}

/// Reads a binary 8-bit P5 file. The timestamp is not part of the image
/// format; the caller supplies it from the records table.
pub fn read_pgm(path: &Path, t: Timestamp) -> Result<FrameSample> {
    let mut raw = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut raw)?;
    parse_pgm(&raw, t).map_err(|msg| Error::format(path, 1, msg))
}

fn next_token(raw: &[u8], pos: &mut usize) -> std::result::Result<String, String> {
    while *pos < raw.len() && raw[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < raw.len() && !raw[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err("truncated header".to_string());
    }
    Ok(String::from_utf8_lossy(&raw[start..*pos]).into_owned())
}

fn parse_pgm(raw: &[u8], t: Timestamp) -> std::result::Result<FrameSample, String> {
    let mut pos = 0usize;
    if next_token(raw, &mut pos)? != "P5" {
        return Err("not a binary P5 file".to_string());
    }
    let width: u32 = next_token(raw, &mut pos)?
        .parse()
        .map_err(|_| "bad width".to_string())?;
    let height: u32 = next_token(raw, &mut pos)?
        .parse()
        .map_err(|_| "bad height".to_string())?;
    let maxval: u32 = next_token(raw, &mut pos)?
        .parse()
        .map_err(|_| "bad maxval".to_string())?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= raw.len() || !raw[pos].is_ascii_whitespace() {
        return Err("missing raster separator".to_string());
    }
    pos += 1;
    let expected = (width as usize) * (height as usize);
    let body = &raw[pos..];
    if body.len() != expected {
        return Err(format!(
            "raster holds {} bytes, expected {expected}",
            body.len()
        ));
    }
    FrameSample::new(t, width, height, body.to_vec()).map_err(|e| e.to_string())
}
