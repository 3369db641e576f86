//! Synthetic ridge patterns for tests and demos.
//!
//! Ridges follow the level sets of a phase field made of concentric rings
//! around a core plus a handful of unit phase singularities. Each singularity
//! adds or removes one ridge, which shows up as an ending/bifurcation pair.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GrayImage;

/// Ridges at intensity 40 over valleys at 215, seeded.
pub fn synthetic_print(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let cx = w * rng.random_range(0.35..0.65);
    let cy = h * rng.random_range(0.35..0.65);
    let period = rng.random_range(8.0..11.0);
    let squash = rng.random_range(0.6..1.0);
    let defects: Vec<(f64, f64, f64)> = (0..rng.random_range(14..20))
        .map(|_| {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (w * rng.random_range(0.1..0.9), h * rng.random_range(0.1..0.9), sign)
        })
        .collect();
    GrayImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let r = ((fx - cx).powi(2) + ((fy - cy) / squash).powi(2)).sqrt();
        let mut phase = TAU * r / period;
        for &(dx, dy, s) in &defects {
            phase += s * (fy - dy).atan2(fx - dx);
        }
        (127.5 - 87.5 * phase.cos()).round() as u8
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_distinct() {
        let a = synthetic_print(96, 96, 1);
        assert_eq!(a, synthetic_print(96, 96, 1));
        assert_ne!(a, synthetic_print(96, 96, 2));
        assert!(a.pixels().iter().any(|&p| p < 60) && a.pixels().iter().any(|&p| p > 200));
    }
}
