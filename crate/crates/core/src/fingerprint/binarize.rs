use serde::{Deserialize, Serialize};

use super::{BinaryImage, GrayImage};

/// Local standard deviation (gray levels) under which a window counts as flat
/// and the global threshold decides instead.
const FLAT_STD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeMethod {
    GlobalOtsu,
    /// Pixel is ridge when darker than the mean of the surrounding
    /// `window × window` box.
    AdaptiveMean {
        window: usize,
    },
}

/// Otsu threshold; pixels `<= t` form the dark class. `None` when the image
/// has a single gray level.
pub fn otsu_threshold(img: &GrayImage) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let total: u64 = hist.iter().sum();
    if total == 0 || hist.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    let mut best = (f64::NEG_INFINITY, 0u8);
    for t in 0..255 {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total as f64 - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, t as u8);
        }
    }
    Some(best.1)
}

pub fn binarize(img: &GrayImage, method: BinarizeMethod) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let global = otsu_threshold(img);
    match method {
        BinarizeMethod::GlobalOtsu => match global {
            Some(t) => BinaryImage::from_fn(w, h, |x, y| img.get(x, y) <= t),
            None => BinaryImage::zeros(w, h),
        },
        BinarizeMethod::AdaptiveMean { window } => {
            let Some(t) = global else {
                return BinaryImage::zeros(w, h);
            };
            let integral = Integral::new(img);
            let r = window.max(1) / 2;
            BinaryImage::from_fn(w, h, |x, y| {
                let (x0, y0) = (x.saturating_sub(r), y.saturating_sub(r));
                let (x1, y1) = ((x + r + 1).min(w), (y + r + 1).min(h));
                let (mean, var) = integral.stats(x0, y0, x1, y1);
                let v = img.get(x, y) as f64;
                if var.sqrt() >= FLAT_STD {
                    v < mean
                } else {
                    img.get(x, y) <= t
                }
            })
        }
    }
}

/// Summed-area tables of intensity and squared intensity.
struct Integral {
    stride: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Integral {
    fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut sum = vec![0.0; stride * (h + 1)];
        let mut sq = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            let mut row_sq = 0.0;
            for x in 0..w {
                let v = img.get(x, y) as f64;
                row += v;
                row_sq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + row_sq;
            }
        }
        Self { stride, sum, sq }
    }

    fn rect(&self, table: &[f64], x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.stride;
        table[y1 * s + x1] - table[y0 * s + x1] - table[y1 * s + x0] + table[y0 * s + x0]
    }

    fn stats(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> (f64, f64) {
        let n = ((x1 - x0) * (y1 - y0)) as f64;
        let mean = self.rect(&self.sum, x0, y0, x1, y1) / n;
        let var = (self.rect(&self.sq, x0, y0, x1, y1) / n - mean * mean).max(0.0);
        (mean, var)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const METHODS: [BinarizeMethod; 2] = [BinarizeMethod::GlobalOtsu, BinarizeMethod::AdaptiveMean { window: 15 }];

    #[test]
    fn constant_image_has_no_ridges() {
        let img = GrayImage::filled(32, 32, 117);
        for m in METHODS {
            assert_eq!(binarize(&img, m).count_ones(), 0);
        }
        assert_eq!(otsu_threshold(&img), None);
    }

    #[test]
    fn half_black_half_white() {
        let img = GrayImage::from_fn(32, 32, |x, _| if x < 16 { 0 } else { 255 });
        for m in METHODS {
            let b = binarize(&img, m);
            for y in 0..32 {
                for x in 0..32 {
                    assert_eq!(b.get(x, y), x < 16, "{m:?} at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn sinusoid_duty_cycle() {
        // analytic pattern: period 8 px along x
        let img = GrayImage::from_fn(64, 64, |x, _| {
            (128.0 + 100.0 * (std::f64::consts::TAU * (x as f64 + 0.5) / 8.0).cos()).round() as u8
        });
        for m in METHODS {
            let duty = binarize(&img, m).count_ones() as f64 / (64.0 * 64.0);
            assert!((duty - 0.5).abs() <= 0.1, "{m:?}: duty {duty}");
        }
    }
}
