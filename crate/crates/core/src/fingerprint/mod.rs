//! Minutiae template extraction.
//!
//! Two pipelines share the back half (thinning and crossing-number
//! detection):
//!
//! * high accuracy: normalization, block orientation and ridge-frequency
//!   estimation, oriented Gabor filtering, adaptive binarization, thinning,
//!   detection, then removal of border and clustered (spurious) minutiae;
//! * lightweight: global Otsu binarization, thinning, detection.

mod binarize;
mod enhance;
mod image_io;
mod minutiae;
mod synthetic;
mod thin;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binarize::{binarize, otsu_threshold, BinarizeMethod};
pub use enhance::{enhance, estimate_orientation, EnhanceParams, OrientationField};
pub use image_io::{decode_image, read_image, read_raw, write_pgm};
pub use minutiae::{crossing_number, detect_minutiae, filter_minutiae};
pub use synthetic::synthetic_print;
pub use thin::thin;

pub use crate::energy::TeVariant as Algorithm;

/// Smallest image side the extraction pipeline accepts.
pub const MIN_SIDE: usize = 16;
/// Upper bound on minutiae per template (one count byte on the wire).
pub const MAX_MINUTIAE: usize = 255;

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("image {width}x{height} is smaller than the {MIN_SIDE}x{MIN_SIDE} minimum")]
    TooSmall { width: usize, height: usize },
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("pixel ({x}, {y}) lies on the image border")]
    Border { x: usize, y: usize },
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 8-bit grayscale image, row-major. Ridges are dark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, FingerprintError> {
        if pixels.len() != width * height {
            return Err(FingerprintError::BufferSize { expected: width * height, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, pixels: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn rotate180(&self) -> Self {
        let mut pixels = self.pixels.clone();
        pixels.reverse();
        Self { pixels, ..*self }
    }

    fn check_pipeline_size(&self) -> Result<(), FingerprintError> {
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return Err(FingerprintError::TooSmall { width: self.width, height: self.height });
        }
        Ok(())
    }
}

/// Ridge (1) / background (0) mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self, FingerprintError> {
        if bits.len() != width * height {
            return Err(FingerprintError::BufferSize { expected: width * height, actual: bits.len() });
        }
        let bits = bits.into_iter().map(|b| u8::from(b != 0)).collect();
        Ok(Self { width, height, bits })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![0; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(u8::from(f(x, y)));
            }
        }
        Self { width, height, bits }
    }

    /// Parses rows of `#` (ridge) and `.` (background). Handy for masks in
    /// tests.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        Self::from_fn(width, height, |x, y| rows[y].as_bytes()[x] == b'#')
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    /// Out-of-range coordinates read as background.
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    /// Number of 8-connected foreground components.
    pub fn components(&self) -> usize {
        let mut label = vec![false; self.bits.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if self.bits[start] == 0 || label[start] {
                continue;
            }
            count += 1;
            label[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.width) as isize, (i / self.width) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if self.get_signed(nx, ny) {
                            let j = ny as usize * self.width + nx as usize;
                            if !label[j] {
                                label[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
        }
        count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinutiaKind {
    Ending,
    Bifurcation,
}

/// A ridge ending or bifurcation. `angle` is the local ridge direction in
/// radians, measured from +x towards +y (image rows grow downwards), in
/// `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minutia {
    pub x: u32,
    pub y: u32,
    pub angle: f64,
    pub kind: MinutiaKind,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = a.rem_euclid(tau);
    if w >= tau {
        0.0
    } else {
        w
    }
}

/// Extracted minutiae plus the source image geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub width: u32,
    pub height: u32,
    pub algorithm: Algorithm,
    minutiae: Vec<Minutia>,
}

impl Template {
    /// Builds a template, ordering minutiae by (y, x) and wrapping angles.
    pub fn new(width: u32, height: u32, algorithm: Algorithm, mut minutiae: Vec<Minutia>) -> Self {
        for m in &mut minutiae {
            m.angle = wrap_angle(m.angle);
        }
        minutiae.sort_by(|a, b| (a.y, a.x, a.kind).cmp(&(b.y, b.x, b.kind)).then(a.angle.total_cmp(&b.angle)));
        Self { width, height, algorithm, minutiae }
    }

    pub fn empty(width: u32, height: u32, algorithm: Algorithm) -> Self {
        Self::new(width, height, algorithm, Vec::new())
    }

    pub fn minutiae(&self) -> &[Minutia] {
        &self.minutiae
    }

    pub fn len(&self) -> usize {
        self.minutiae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.minutiae.is_empty()
    }
}

/// Tunables of the extraction pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    /// Minutiae closer than this to the image edge are dropped (high accuracy).
    pub border_margin: usize,
    /// Minutiae with a neighbour closer than this are dropped (high accuracy).
    pub min_distance: f64,
    /// Skeleton steps walked when estimating a minutia's direction.
    pub trace_length: usize,
    pub enhance: EnhanceParams,
    /// Side of the adaptive-mean window.
    pub adaptive_window: usize,
    /// Filter responses weaker than this fraction of the strongest one are
    /// never ridge, so the filter's ringing across gaps is not binarized.
    pub min_response: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            border_margin: 10,
            min_distance: 8.0,
            trace_length: 8,
            enhance: EnhanceParams::default(),
            adaptive_window: 15,
            min_response: 0.15,
        }
    }
}

/// Runs the pipeline up to the skeleton, without minutiae detection.
pub fn skeletonize(
    img: &GrayImage,
    algorithm: Algorithm,
    opts: &ExtractOptions,
) -> Result<BinaryImage, FingerprintError> {
    img.check_pipeline_size()?;
    let bin = match algorithm {
        Algorithm::HighAccuracy => {
            let enhanced = enhance(img, &opts.enhance);
            let adaptive = binarize(&enhanced, BinarizeMethod::AdaptiveMean { window: opts.adaptive_window });
            // enhance() maps a zero response to 128
            let ceiling = 128.0 - opts.min_response * 127.0;
            BinaryImage::from_fn(img.width(), img.height(), |x, y| {
                adaptive.get(x, y) && (enhanced.get(x, y) as f64) < ceiling
            })
        }
        Algorithm::Lightweight => binarize(img, BinarizeMethod::GlobalOtsu),
    };
    Ok(thin(&bin))
}

/// Raw crossing-number detections on the pipeline's skeleton: no filtering
/// and no count cap.
pub fn raw_minutiae(
    img: &GrayImage,
    algorithm: Algorithm,
    opts: &ExtractOptions,
) -> Result<Vec<Minutia>, FingerprintError> {
    let skel = skeletonize(img, algorithm, opts)?;
    Ok(detect_minutiae(&skel, opts.trace_length))
}

pub fn extract_template(img: &GrayImage, algorithm: Algorithm) -> Result<Template, FingerprintError> {
    extract_template_with(img, algorithm, &ExtractOptions::default())
}

pub fn extract_template_with(
    img: &GrayImage,
    algorithm: Algorithm,
    opts: &ExtractOptions,
) -> Result<Template, FingerprintError> {
    let mut found = raw_minutiae(img, algorithm, opts)?;
    if algorithm == Algorithm::HighAccuracy {
        found = filter_minutiae(&found, img.width(), img.height(), opts.border_margin, opts.min_distance);
    }
    if found.len() > MAX_MINUTIAE {
        found = keep_central(found, img.width(), img.height());
    }
    Ok(Template::new(img.width() as u32, img.height() as u32, algorithm, found))
}

/// Keeps the `MAX_MINUTIAE` detections nearest the image centre.
fn keep_central(mut found: Vec<Minutia>, width: usize, height: usize) -> Vec<Minutia> {
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let d2 = |m: &Minutia| (m.x as f64 - cx).powi(2) + (m.y as f64 - cy).powi(2);
    found.sort_by(|a, b| d2(a).total_cmp(&d2(b)).then((a.y, a.x).cmp(&(b.y, b.x))));
    found.truncate(MAX_MINUTIAE);
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_size_checked() {
        assert!(GrayImage::new(4, 4, vec![0; 15]).is_err());
        assert!(BinaryImage::new(4, 4, vec![0; 16]).is_ok());
    }

    #[test]
    fn small_images_rejected() {
        let img = GrayImage::filled(15, 40, 200);
        assert!(matches!(extract_template(&img, Algorithm::Lightweight), Err(FingerprintError::TooSmall { .. })));
    }

    #[test]
    fn blank_image_gives_empty_template() {
        let img = GrayImage::filled(64, 64, 255);
        for algo in [Algorithm::HighAccuracy, Algorithm::Lightweight] {
            let t = extract_template(&img, algo).unwrap();
            assert!(t.is_empty());
            assert_eq!((t.width, t.height), (64, 64));
        }
    }

    #[test]
    fn template_orders_minutiae() {
        let m = |x, y| Minutia { x, y, angle: -0.5, kind: MinutiaKind::Ending };
        let t = Template::new(100, 100, Algorithm::HighAccuracy, vec![m(5, 9), m(7, 2), m(1, 9)]);
        let order: Vec<_> = t.minutiae().iter().map(|m| (m.x, m.y)).collect();
        assert_eq!(order, vec![(7, 2), (1, 9), (5, 9)]);
        assert!(t.minutiae().iter().all(|m| (0.0..std::f64::consts::TAU).contains(&m.angle)));
    }

    #[test]
    fn central_cap() {
        let many: Vec<_> = (0..400u32)
            .map(|i| Minutia { x: i % 20 * 5, y: i / 20 * 5, angle: 0.0, kind: MinutiaKind::Ending })
            .collect();
        let kept = keep_central(many, 100, 100);
        assert_eq!(kept.len(), MAX_MINUTIAE);
        assert!(kept.iter().any(|m| m.x == 50 && m.y == 50));
        assert!(!kept.iter().any(|m| m.x == 0 && m.y == 0));
    }

    #[test]
    fn components_count() {
        let b = BinaryImage::from_ascii(&["#..#", "#..#", "....", ".##."]);
        assert_eq!(b.components(), 3);
    }
}
