//! Two-subiteration (Zhang–Suen) thinning followed by removal of staircase
//! corners, iterated to a fixed point.

use super::BinaryImage;

/// Neighbours in Zhang–Suen order: N, NE, E, SE, S, SW, W, NW.
const RING: [(isize, isize); 8] = [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn ring(img: &BinaryImage, x: usize, y: usize) -> [bool; 8] {
    let (x, y) = (x as isize, y as isize);
    RING.map(|(dx, dy)| img.get_signed(x + dx, y + dy))
}

/// 0→1 transitions around the ring.
fn transitions(p: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count()
}

/// 8-connectivity number; a foreground pixel whose value is 1 can be removed
/// without changing the topology.
pub(super) fn connectivity8(p: &[bool; 8]) -> usize {
    let bg = |i: usize| !p[i % 8];
    // 4-neighbours sit at even ring positions
    [0usize, 2, 4, 6].iter().filter(|&&k| bg(k) && !(bg(k + 1) && bg(k + 2))).count()
}

fn zs_deletable(img: &BinaryImage, x: usize, y: usize, first: bool) -> bool {
    if !img.get(x, y) {
        return false;
    }
    let p = ring(img, x, y);
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) || transitions(&p) != 1 {
        return false;
    }
    let [n, _, e, _, s, _, w, _] = p;
    if first {
        !(n && e && s) && !(e && s && w)
    } else {
        !(n && e && w) && !(n && s && w)
    }
}

fn zhang_suen(img: &mut BinaryImage) -> bool {
    let mut changed_any = false;
    loop {
        let mut changed = false;
        for first in [true, false] {
            let mut candidates = Vec::new();
            for y in 0..img.height() {
                for x in 0..img.width() {
                    if zs_deletable(img, x, y, first) {
                        candidates.push((x, y));
                    }
                }
            }
            // Re-checking each candidate against the partially updated image
            // keeps two-pixel-thick structures from vanishing entirely.
            for (x, y) in candidates {
                if zs_deletable(img, x, y, first) {
                    img.set(x, y, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return changed_any;
        }
        changed_any = true;
    }
}

/// Removes corner pixels of 4-connected staircases so ridges become strictly
/// one pixel wide under 8-connectivity.
fn remove_staircases(img: &mut BinaryImage) -> bool {
    let mut changed = false;
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !img.get(x, y) {
                continue;
            }
            let p = ring(img, x, y);
            let [n, _, e, _, s, _, w, _] = p;
            let corner = (n && e) || (e && s) || (s && w) || (w && n);
            let b = p.iter().filter(|&&v| v).count();
            if corner && b >= 2 && connectivity8(&p) == 1 {
                img.set(x, y, false);
                changed = true;
            }
        }
    }
    changed
}

/// Reduces ridges to one-pixel-wide 8-connected skeletons. Idempotent, never
/// adds pixels.
pub fn thin(bin: &BinaryImage) -> BinaryImage {
    let mut img = bin.clone();
    loop {
        zhang_suen(&mut img);
        if !remove_staircases(&mut img) {
            return img;
        }
    }
}
