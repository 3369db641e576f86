mod common;

use common::{blur_and_noise, ridge_break, SIZE};
use hbcauth::fingerprint::{extract_template, raw_minutiae, Algorithm, ExtractOptions, MinutiaKind};
use std::f64::consts::{PI, TAU};

#[test]
fn ridge_break_gives_two_endings() {
    let t = extract_template(&ridge_break(), Algorithm::HighAccuracy).unwrap();
    let m = t.minutiae();
    assert_eq!(m.len(), 2, "{m:?}");
    assert!(m.iter().all(|m| m.kind == MinutiaKind::Ending));
    let mut xs: Vec<u32> = m.iter().map(|m| m.x).collect();
    xs.sort();
    assert!(xs[0] < 58 && xs[1] > 69, "{xs:?}");
    for m in m {
        assert!((m.y as i64 - 64).abs() <= 2, "{m:?}");
        let expected = if m.x < 64 { 0.0 } else { PI };
        let d = (m.angle - expected).rem_euclid(TAU);
        assert!(d.min(TAU - d) < 0.3, "{m:?}");
    }
}

#[test]
fn lightweight_finds_more_on_degraded_input() {
    let degraded = blur_and_noise(&ridge_break(), 3);
    let high = extract_template(&degraded, Algorithm::HighAccuracy).unwrap();
    let light = extract_template(&degraded, Algorithm::Lightweight).unwrap();
    assert!(light.len() > high.len(), "light {} high {}", light.len(), high.len());
}

#[test]
fn rotation_by_half_turn() {
    let img = ridge_break();
    let a = extract_template(&img, Algorithm::HighAccuracy).unwrap();
    let b = extract_template(&img.rotate180(), Algorithm::HighAccuracy).unwrap();
    assert_eq!(a.len(), b.len());
    for m in a.minutiae() {
        let (rx, ry) = ((SIZE - 1) as f64 - m.x as f64, (SIZE - 1) as f64 - m.y as f64);
        let hit = b.minutiae().iter().any(|o| {
            let d = (o.angle - m.angle - PI).rem_euclid(TAU);
            (o.x as f64 - rx).hypot(o.y as f64 - ry) <= 3.0 && d.min(TAU - d) < 0.3
        });
        assert!(hit, "{m:?} has no rotated partner in {:?}", b.minutiae());
    }
}

#[test]
fn extraction_is_deterministic() {
    let img = blur_and_noise(&ridge_break(), 9);
    for algo in [Algorithm::HighAccuracy, Algorithm::Lightweight] {
        assert_eq!(extract_template(&img, algo).unwrap(), extract_template(&img, algo).unwrap());
    }
    let opts = ExtractOptions::default();
    assert_eq!(
        raw_minutiae(&img, Algorithm::Lightweight, &opts).unwrap(),
        raw_minutiae(&img, Algorithm::Lightweight, &opts).unwrap()
    );
}
