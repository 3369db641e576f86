//! Contextual enhancement: block orientation and ridge frequency, then an
//! even-symmetric Gabor filter tuned to each block.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceParams {
    /// Side of the square blocks sharing one orientation and frequency.
    pub block_size: usize,
    /// Gaussian envelope of the Gabor kernel, in pixels.
    pub sigma: f64,
    /// Radius (in blocks) of the orientation smoothing window.
    pub smoothing: usize,
    /// Blocks whose raw standard deviation is below this are background.
    pub min_block_std: f64,
    /// Accepted ridge wavelengths, in pixels.
    pub min_wavelength: f64,
    pub max_wavelength: f64,
    /// Wavelength used when no block yields a usable estimate.
    pub fallback_wavelength: f64,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        Self {
            block_size: 16,
            sigma: 4.0,
            smoothing: 1,
            min_block_std: 2.0,
            min_wavelength: 3.0,
            max_wavelength: 25.0,
            fallback_wavelength: 9.0,
        }
    }
}

/// Per-block ridge direction in `[0, π)` (radians from +x towards +y).
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    pub block_size: usize,
    pub cols: usize,
    pub rows: usize,
    angles: Vec<f64>,
    /// Blocks with enough texture to carry ridges.
    foreground: Vec<bool>,
}

impl OrientationField {
    pub fn angle(&self, bx: usize, by: usize) -> f64 {
        self.angles[by * self.cols + bx]
    }

    pub fn is_foreground(&self, bx: usize, by: usize) -> bool {
        self.foreground[by * self.cols + bx]
    }

    fn block_of(&self, x: usize, y: usize) -> usize {
        (y / self.block_size).min(self.rows - 1) * self.cols + (x / self.block_size).min(self.cols - 1)
    }
}

fn normalized(img: &GrayImage) -> Vec<f64> {
    let n = img.pixels().len() as f64;
    let mean = img.pixels().iter().map(|&p| p as f64).sum::<f64>() / n;
    let var = img.pixels().iter().map(|&p| (p as f64 - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(f64::EPSILON);
    img.pixels().iter().map(|&p| (p as f64 - mean) / sd).collect()
}

/// Mirror-reflects an index into `0..n`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// Least-squares orientation from Sobel gradients, smoothed as a doubled-angle
/// vector field.
pub fn estimate_orientation(img: &GrayImage, params: &EnhanceParams) -> OrientationField {
    let (w, h) = (img.width(), img.height());
    let bs = params.block_size.max(1);
    let (cols, rows) = (w.div_ceil(bs), h.div_ceil(bs));
    let px = |x: isize, y: isize| img.get(reflect(x, w), reflect(y, h)) as f64;

    let mut gxx = vec![0.0; cols * rows];
    let mut gyy = vec![0.0; cols * rows];
    let mut gxy = vec![0.0; cols * rows];
    let mut sum = vec![0.0; cols * rows];
    let mut sq = vec![0.0; cols * rows];
    let mut count = vec![0.0; cols * rows];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let gx = (px(xi + 1, yi - 1) + 2.0 * px(xi + 1, yi) + px(xi + 1, yi + 1))
                - (px(xi - 1, yi - 1) + 2.0 * px(xi - 1, yi) + px(xi - 1, yi + 1));
            let gy = (px(xi - 1, yi + 1) + 2.0 * px(xi, yi + 1) + px(xi + 1, yi + 1))
                - (px(xi - 1, yi - 1) + 2.0 * px(xi, yi - 1) + px(xi + 1, yi - 1));
            let b = (y / bs) * cols + x / bs;
            gxx[b] += gx * gx;
            gyy[b] += gy * gy;
            gxy[b] += gx * gy;
            let v = img.get(x, y) as f64;
            sum[b] += v;
            sq[b] += v * v;
            count[b] += 1.0;
        }
    }
    let foreground: Vec<bool> = (0..cols * rows)
        .map(|b| {
            let mean = sum[b] / count[b];
            let var = (sq[b] / count[b] - mean * mean).max(0.0);
            var.sqrt() >= params.min_block_std && gxx[b] + gyy[b] > 0.0
        })
        .collect();

    let r = params.smoothing as isize;
    let mut angles = vec![0.0; cols * rows];
    for by in 0..rows {
        for bx in 0..cols {
            let (mut c, mut s) = (0.0, 0.0);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (bx as isize + dx, by as isize + dy);
                    if nx < 0 || ny < 0 || nx >= cols as isize || ny >= rows as isize {
                        continue;
                    }
                    let b = ny as usize * cols + nx as usize;
                    if !foreground[b] {
                        continue;
                    }
                    c += gxx[b] - gyy[b];
                    s += 2.0 * gxy[b];
                }
            }
            // gradient direction is half the doubled angle; ridges run across it
            let grad = 0.5 * s.atan2(c);
            angles[by * cols + bx] = (grad + FRAC_PI_2).rem_euclid(PI);
        }
    }
    OrientationField { block_size: bs, cols, rows, angles, foreground }
}

/// Ridge wavelength of one block from the spacing of peaks in an intensity
/// profile taken across the ridges.
fn block_wavelength(
    norm: &[f64],
    w: usize,
    h: usize,
    field: &OrientationField,
    bx: usize,
    by: usize,
    params: &EnhanceParams,
) -> Option<f64> {
    let bs = field.block_size as f64;
    let (cx, cy) = ((bx as f64 + 0.5) * bs, (by as f64 + 0.5) * bs);
    let theta = field.angle(bx, by);
    let (ux, uy) = ((theta - FRAC_PI_2).cos(), (theta - FRAC_PI_2).sin());
    let (vx, vy) = (theta.cos(), theta.sin());
    let len = (2.0 * bs) as isize;
    let depth = bs as isize;
    let signature: Vec<f64> = (0..len)
        .map(|k| {
            let a = (k - len / 2) as f64;
            let mut acc = 0.0;
            for j in 0..depth {
                let b = (j - depth / 2) as f64;
                let x = (cx + a * ux + b * vx).round() as isize;
                let y = (cy + a * uy + b * vy).round() as isize;
                acc += norm[reflect(y, h) * w + reflect(x, w)];
            }
            acc / depth as f64
        })
        .collect();
    let peaks: Vec<usize> = (1..signature.len() - 1)
        .filter(|&i| signature[i] > signature[i - 1] && signature[i] >= signature[i + 1])
        .collect();
    if peaks.len() < 2 {
        return None;
    }
    let wavelength = (peaks[peaks.len() - 1] - peaks[0]) as f64 / (peaks.len() - 1) as f64;
    (params.min_wavelength..=params.max_wavelength).contains(&wavelength).then_some(wavelength)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Zero-mean even Gabor kernel; `theta` is the ridge direction.
fn gabor_kernel(theta: f64, wavelength: f64, sigma: f64, radius: isize) -> Vec<f64> {
    let phi = theta - FRAC_PI_2;
    let (c, s) = (phi.cos(), phi.sin());
    let mut k = Vec::with_capacity(((2 * radius + 1) * (2 * radius + 1)) as usize);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let (x, y) = (dx as f64, dy as f64);
            let across = x * c + y * s;
            let along = -x * s + y * c;
            let env = (-(across * across + along * along) / (2.0 * sigma * sigma)).exp();
            k.push(env * (TAU * across / wavelength).cos());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    k
}

/// Enhanced image with dark ridges on a light background. Background blocks
/// come out white; a constant image is returned unchanged.
pub fn enhance(img: &GrayImage, params: &EnhanceParams) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 || img.pixels().iter().all(|&p| p == img.pixels()[0]) {
        return img.clone();
    }
    let norm = normalized(img);
    let field = estimate_orientation(img, params);
    let blocks = field.cols * field.rows;

    let estimates: Vec<Option<f64>> = (0..blocks)
        .map(|b| {
            let (bx, by) = (b % field.cols, b / field.cols);
            if field.is_foreground(bx, by) {
                block_wavelength(&norm, w, h, &field, bx, by, params)
            } else {
                None
            }
        })
        .collect();
    let fallback = median(estimates.iter().flatten().copied().collect()).unwrap_or(params.fallback_wavelength);

    let radius = (3.0 * params.sigma).ceil() as isize;
    let kernels: Vec<Option<Vec<f64>>> = (0..blocks)
        .map(|b| {
            let (bx, by) = (b % field.cols, b / field.cols);
            field
                .is_foreground(bx, by)
                .then(|| gabor_kernel(field.angle(bx, by), estimates[b].unwrap_or(fallback), params.sigma, radius))
        })
        .collect();

    let mut out = vec![None; w * h];
    let mut peak: f64 = 0.0;
    for y in 0..h {
        for x in 0..w {
            let Some(k) = &kernels[field.block_of(x, y)] else {
                continue;
            };
            let mut acc = 0.0;
            let mut i = 0;
            for dy in -radius..=radius {
                let row = reflect(y as isize + dy, h) * w;
                for dx in -radius..=radius {
                    acc += k[i] * norm[row + reflect(x as isize + dx, w)];
                    i += 1;
                }
            }
            peak = peak.max(acc.abs());
            out[y * w + x] = Some(acc);
        }
    }
    let scale = if peak > 0.0 { 127.0 / peak } else { 0.0 };
    let pixels = out
        .into_iter()
        .map(|v| match v {
            Some(v) => (128.0 + v * scale).round().clamp(0.0, 255.0) as u8,
            None => 255,
        })
        .collect();
    GrayImage::new(w, h, pixels).expect("same geometry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stripes(theta: f64, wavelength: f64, size: usize) -> Vec<f64> {
        let (nx, ny) = (-theta.sin(), theta.cos());
        (0..size * size)
            .map(|i| {
                let (x, y) = ((i % size) as f64, (i / size) as f64);
                (TAU * (x * nx + y * ny) / wavelength).cos()
            })
            .collect()
    }

    fn to_gray(v: &[f64], size: usize, amp: f64) -> GrayImage {
        GrayImage::new(size, size, v.iter().map(|s| (128.0 + amp * s).round().clamp(0.0, 255.0) as u8).collect())
            .unwrap()
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn interior(v: &[u8], size: usize, margin: usize) -> Vec<f64> {
        (0..size * size)
            .filter(|i| {
                let (x, y) = (i % size, i / size);
                (margin..size - margin).contains(&x) && (margin..size - margin).contains(&y)
            })
            .map(|i| v[i] as f64)
            .collect()
    }

    fn interior_f(v: &[f64], size: usize, margin: usize) -> Vec<f64> {
        let bytes: Vec<u8> = v.iter().map(|s| (128.0 + 100.0 * s) as u8).collect();
        interior(&bytes, size, margin)
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(2, 5), 2);
        assert_eq!(reflect(-7, 1), 0);
    }

    #[test]
    fn oriented_sinusoid() {
        let theta = 30f64.to_radians();
        let size = 128;
        let clean = stripes(theta, 9.0, size);
        let img = to_gray(&clean, size, 100.0);
        let params = EnhanceParams::default();
        let field = estimate_orientation(&img, &params);
        for by in 1..field.rows - 1 {
            for bx in 1..field.cols - 1 {
                let a = field.angle(bx, by);
                let d = (a - theta).rem_euclid(PI);
                let d = d.min(PI - d);
                assert!(d.to_degrees() <= 5.0, "block ({bx},{by}): {}", a.to_degrees());
            }
        }
        let out = enhance(&img, &params);
        let rho = correlation(&interior(out.pixels(), size, 16), &interior(img.pixels(), size, 16));
        assert!(rho >= 0.9, "rho = {rho}");
    }

    #[test]
    fn improves_noisy_ridges() {
        let size = 128;
        let clean = stripes(0.7, 8.0, size);
        // uniform noise, 5 dB SNR
        let signal_power = 0.5;
        let noise_power = signal_power / 10f64.powf(0.5);
        let half_width = (3.0 * noise_power).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noisy: Vec<f64> = clean.iter().map(|s| s + rng.random_range(-half_width..half_width)).collect();
        let img = to_gray(&noisy, size, 60.0);
        let out = enhance(&img, &EnhanceParams::default());

        let reference = interior_f(&clean, size, 16);
        let snr = |rho: f64| rho * rho / (1.0 - rho * rho);
        let before = snr(correlation(&interior(img.pixels(), size, 16), &reference));
        let after = snr(correlation(&interior(out.pixels(), size, 16), &reference));
        assert!(after >= before, "before {before}, after {after}");
    }

    #[test]
    fn constant_and_tiny_images() {
        let flat = GrayImage::filled(40, 40, 90);
        assert_eq!(enhance(&flat, &EnhanceParams::default()), flat);
        let tiny = GrayImage::from_fn(3, 2, |x, y| (x * 40 + y * 7) as u8);
        let out = enhance(&tiny, &EnhanceParams::default());
        assert_eq!((out.width(), out.height()), (3, 2));
    }

    #[test]
    fn background_blocks_turn_white() {
        let size = 64;
        let img = GrayImage::from_fn(size, size, |x, y| {
            if x < 32 {
                200
            } else {
                (128.0 + 100.0 * (TAU * y as f64 / 8.0).cos()).round() as u8
            }
        });
        let out = enhance(&img, &EnhanceParams::default());
        assert!((0..size).all(|y| (0..16).all(|x| out.get(x, y) == 255)));
    }
}
