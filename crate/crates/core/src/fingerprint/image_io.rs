use std::io::Cursor;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use super::{FingerprintError, GrayImage};

/// Decodes a PGM (any PNM flavour) into 8-bit luma.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, FingerprintError> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Pnm).map_err(|e| FingerprintError::Decode(e.to_string()))?;
    let luma = img.into_luma8();
    let (w, h) = luma.dimensions();
    GrayImage::new(w as usize, h as usize, luma.into_raw())
}

pub fn read_image(path: &Path) -> Result<GrayImage, FingerprintError> {
    decode_image(&std::fs::read(path)?)
}

/// Headerless 8-bit buffer of known geometry.
pub fn read_raw(path: &Path, width: usize, height: usize) -> Result<GrayImage, FingerprintError> {
    GrayImage::new(width, height, std::fs::read(path)?)
}

/// Binary (P5) PGM.
pub fn write_pgm(img: &GrayImage, path: &Path) -> Result<(), FingerprintError> {
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(img.pixels(), img.width() as u32, img.height() as u32, ExtendedColorType::L8)
        .map_err(|e| FingerprintError::Decode(e.to_string()))?;
    std::fs::write(path, buf)?;
    Ok(())
}
