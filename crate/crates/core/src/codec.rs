//! Binary `.fpt` template format.
//!
//! ```text
//! header  "FPT" 0x01 | algorithm u8 | count u8 | width/4 u8 | height/4 u8
//! record  x u16le | y u16le | angle u8 | kind u8        (repeated count times)
//! ```
//!
//! Angles are quantized to 256 steps per turn; image dimensions are stored in
//! units of four pixels, rounded up.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::fingerprint::{Algorithm, Minutia, MinutiaKind, Template, MAX_MINUTIAE};

pub const MAGIC: [u8; 3] = *b"FPT";
pub const VERSION: u8 = 0x01;
pub const HEADER_BYTES: usize = 8;
pub const RECORD_BYTES: usize = 6;
/// Largest image side representable in the header.
pub const MAX_DIMENSION: u32 = 255 * 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 3]),
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("buffer is {actual} bytes, header implies {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unknown algorithm byte {0}")]
    BadAlgorithm(u8),
    #[error("record {index}: unknown minutia kind {kind}")]
    BadKind { index: usize, kind: u8 },
    #[error("record {index}: ({x}, {y}) lies outside the {width}x{height} image")]
    OutOfBounds { index: usize, x: u32, y: u32, width: u32, height: u32 },
    #[error("{0} minutiae exceed the {MAX_MINUTIAE} a template can carry")]
    TooManyMinutiae(usize),
    #[error("image {width}x{height} exceeds the {MAX_DIMENSION}-pixel header limit")]
    DimensionTooLarge { width: u32, height: u32 },
    #[error("template size must be positive")]
    ZeroTemplate,
}

pub fn encoded_len(count: usize) -> usize {
    HEADER_BYTES + RECORD_BYTES * count
}

fn algorithm_byte(a: Algorithm) -> u8 {
    match a {
        Algorithm::HighAccuracy => 0,
        Algorithm::Lightweight => 1,
    }
}

/// `round(angle · 256 / 2π) mod 256`
pub fn quantize_angle(angle: f64) -> u8 {
    ((angle * 256.0 / TAU).round().rem_euclid(256.0)) as u8
}

pub fn dequantize_angle(q: u8) -> f64 {
    q as f64 * TAU / 256.0
}

pub fn encode(t: &Template) -> Result<Vec<u8>, CodecError> {
    if t.len() > MAX_MINUTIAE {
        return Err(CodecError::TooManyMinutiae(t.len()));
    }
    if t.width > MAX_DIMENSION || t.height > MAX_DIMENSION {
        return Err(CodecError::DimensionTooLarge { width: t.width, height: t.height });
    }
    let mut out = Vec::with_capacity(encoded_len(t.len()));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(algorithm_byte(t.algorithm));
    out.push(t.len() as u8);
    out.push(t.width.div_ceil(4) as u8);
    out.push(t.height.div_ceil(4) as u8);
    for (index, m) in t.minutiae().iter().enumerate() {
        if m.x >= t.width || m.y >= t.height {
            return Err(CodecError::OutOfBounds { index, x: m.x, y: m.y, width: t.width, height: t.height });
        }
        out.extend_from_slice(&(m.x as u16).to_le_bytes());
        out.extend_from_slice(&(m.y as u16).to_le_bytes());
        out.push(quantize_angle(m.angle));
        out.push(match m.kind {
            MinutiaKind::Ending => 0,
            MinutiaKind::Bifurcation => 1,
        });
    }
    Ok(out)
}

/// Inverse of [`encode`]. Dimensions come back rounded up to a multiple of
/// four and angles snapped to the 256-step grid.
pub fn decode(bytes: &[u8]) -> Result<Template, CodecError> {
    if bytes.len() < HEADER_BYTES {
        return Err(CodecError::LengthMismatch { expected: HEADER_BYTES, actual: bytes.len() });
    }
    let magic = [bytes[0], bytes[1], bytes[2]];
    if magic != MAGIC {
        return Err(CodecError::BadMagic(magic));
    }
    if bytes[3] != VERSION {
        return Err(CodecError::BadVersion(bytes[3]));
    }
    let algorithm = match bytes[4] {
        0 => Algorithm::HighAccuracy,
        1 => Algorithm::Lightweight,
        other => return Err(CodecError::BadAlgorithm(other)),
    };
    let count = bytes[5] as usize;
    let expected = encoded_len(count);
    if bytes.len() != expected {
        return Err(CodecError::LengthMismatch { expected, actual: bytes.len() });
    }
    let width = bytes[6] as u32 * 4;
    let height = bytes[7] as u32 * 4;
    let minutiae = bytes[HEADER_BYTES..]
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(index, r)| {
            let x = u16::from_le_bytes([r[0], r[1]]) as u32;
            let y = u16::from_le_bytes([r[2], r[3]]) as u32;
            if x >= width || y >= height {
                return Err(CodecError::OutOfBounds { index, x, y, width, height });
            }
            let kind = match r[5] {
                0 => MinutiaKind::Ending,
                1 => MinutiaKind::Bifurcation,
                kind => return Err(CodecError::BadKind { index, kind }),
            };
            Ok(Minutia { x, y, angle: dequantize_angle(r[4]), kind })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Template::new(width, height, algorithm, minutiae))
}

/// Raw image size over encoded template size.
pub fn compression_ratio(image_bytes: u64, template_bytes: u64) -> Result<f64, CodecError> {
    if template_bytes == 0 {
        return Err(CodecError::ZeroTemplate);
    }
    Ok(image_bytes as f64 / template_bytes as f64)
}
