//! Fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod present_ref;

use hbcauth::fingerprint::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SIZE: usize = 128;

/// Horizontal ridges (dark, period 10) with a 20-pixel gap cut into the ridge
/// through the centre row.
pub fn ridge_break() -> GrayImage {
    GrayImage::from_fn(SIZE, SIZE, |x, y| {
        let phase = (y as f64 - 4.0) / 10.0;
        let on_ridge = (phase - phase.round()).abs() < 0.2;
        let ridge_index = phase.round() as i64;
        let gap = ridge_index == 6 && (54..74).contains(&x);
        if on_ridge && !gap {
            30
        } else {
            220
        }
    })
}

pub fn blur_and_noise(img: &GrayImage, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (img.width(), img.height());
    GrayImage::from_fn(w, h, |x, y| {
        let mut acc = 0.0;
        let mut n = 0.0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    acc += img.get(nx as usize, ny as usize) as f64;
                    n += 1.0;
                }
            }
        }
        (acc / n + rng.random_range(-90.0..90.0)).round().clamp(0.0, 255.0) as u8
    })
}
