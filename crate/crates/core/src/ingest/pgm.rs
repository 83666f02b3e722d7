//! 8-bit binary portable graymap (P5) label maps; pixel value = class id.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::LabelMap;
use crate::vocab::ClassVocabulary;

pub fn read_label_map(path: impl AsRef<Path>, vocabulary: &ClassVocabulary) -> Result<LabelMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_label_map(&bytes, vocabulary).map_err(|e| e.in_file(path))
}

pub fn write_label_map(grid: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(grid)).map_err(|e| Error::io(path, e))
}

/// `P5\n<width> <height>\n255\n` followed by raw row-major bytes.
pub fn encode_pgm(grid: &LabelMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend_from_slice(grid.as_slice());
    out
}

pub fn decode_label_map(bytes: &[u8], vocabulary: &ClassVocabulary) -> Result<LabelMap> {
    let grid = decode_pgm(bytes)?;
    let max = vocabulary.len();
    if let Some(i) = grid.as_slice().iter().position(|&p| p as usize > max) {
        let w = grid.width() as usize;
        return Err(Error::data(format!(
            "pixel value {} at row {}, col {} is not a class id (vocabulary has {max})",
            grid.as_slice()[i],
            i / w,
            i % w
        )));
    }
    Ok(grid)
}

/// Parse a P5 image without vocabulary checks.
pub fn decode_pgm(bytes: &[u8]) -> Result<LabelMap> {
    let mut pos = 0usize;
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::format("not a binary graymap (missing P5 tag)"));
    }
    pos += 2;
    let width = header_int(bytes, &mut pos, "width")?;
    let height = header_int(bytes, &mut pos, "height")?;
    let maxval = header_int(bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(format!(
            "maxval {maxval} unsupported, label maps are 8-bit"
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format("missing whitespace after graymap header")),
    }
    if width == 0 || height == 0 {
        return Err(Error::format(format!(
            "invalid graymap size {width}x{height}"
        )));
    }
    let n = width as usize * height as usize;
    let payload = &bytes[pos..];
    if payload.len() != n {
        return Err(Error::format(format!(
            "graymap payload is {} bytes, expected {n}",
            payload.len()
        )));
    }
    if let Some(&p) = payload.iter().find(|&&p| p as u32 > maxval) {
        return Err(Error::data(format!(
            "pixel value {p} exceeds maxval {maxval}"
        )));
    }
    LabelMap::from_vec(height, width, payload.to_vec())
}

fn header_int(bytes: &[u8], pos: &mut usize, field: &str) -> Result<u32> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(format!("graymap header: missing {field}")));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(format!("graymap header: bad {field}")))
}
