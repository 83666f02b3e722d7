//! Middlebury `.flo` files.
//!
//! Little-endian: the float tag 202021.25 (bytes `PIEH`), signed 32-bit
//! width and height, then `height * width` interleaved `(u, v)` float32
//! pairs in row-major order. Nothing may follow the payload.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::flow::FlowField;

pub const FLO_TAG: f32 = 202021.25;
const FLO_MAGIC: [u8; 4] = *b"PIEH";

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes).map_err(|e| e.in_file(path))
}

pub fn write_flo(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_flo(flow)).map_err(|e| Error::io(path, e))
}

pub fn read_flo_from(mut reader: impl Read) -> Result<FlowField> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::format(format!("reading flow stream: {e}")))?;
    decode_flo(&bytes)
}

pub fn write_flo_to(flow: &FlowField, mut writer: impl Write) -> std::io::Result<()> {
    writer.write_all(&encode_flo(flow))
}

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let n = flow.u().len();
    let mut out = Vec::with_capacity(12 + 8 * n);
    out.extend_from_slice(&FLO_TAG.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 {
        return Err(Error::format(format!(
            "flow file truncated: {} byte header, need 12",
            bytes.len()
        )));
    }
    if bytes[0..4] != FLO_MAGIC {
        return Err(Error::format(format!(
            "bad flow tag {:?}, expected \"PIEH\"",
            &bytes[0..4]
        )));
    }
    let word = |i: usize| i32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let width = word(4);
    let height = word(8);
    if width <= 0 || height <= 0 {
        return Err(Error::format(format!(
            "invalid flow dimensions {width}x{height}"
        )));
    }
    let n = width as u64 * height as u64;
    let expected = 12 + 8 * n;
    if (bytes.len() as u64) < expected {
        return Err(Error::format(format!(
            "flow payload truncated: {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    if (bytes.len() as u64) > expected {
        return Err(Error::format(format!(
            "{} trailing bytes after flow payload",
            bytes.len() as u64 - expected
        )));
    }
    let n = n as usize;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for pair in bytes[12..].chunks_exact(8) {
        u.push(f32::from_le_bytes(pair[0..4].try_into().unwrap()));
        v.push(f32::from_le_bytes(pair[4..8].try_into().unwrap()));
    }
    FlowField::new(height as u32, width as u32, u, v)
}
