//! Crossing-number minutiae detection on a one-pixel-wide skeleton.

use super::{BinaryImage, FingerprintError, Minutia, MinutiaKind};

/// 8-neighbourhood in cyclic order starting east, counter-clockwise on
/// screen.
const CYCLE: [(isize, isize); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];

fn neighbours(skel: &BinaryImage, x: usize, y: usize) -> [bool; 8] {
    let (x, y) = (x as isize, y as isize);
    CYCLE.map(|(dx, dy)| skel.get_signed(x + dx, y + dy))
}

/// `½ Σ |Pᵢ − Pᵢ₊₁|` over the eight neighbours of an interior pixel.
pub fn crossing_number(skeleton: &BinaryImage, x: usize, y: usize) -> Result<u8, FingerprintError> {
    let (w, h) = (skeleton.width(), skeleton.height());
    if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
        return Err(FingerprintError::Border { x, y });
    }
    let p = neighbours(skeleton, x, y);
    let diff = (0..8).filter(|&i| p[i] != p[(i + 1) % 8]).count();
    Ok((diff / 2) as u8)
}

/// Scans every interior skeleton pixel; CN 1 marks an ending, CN 3 a
/// bifurcation.
pub fn detect_minutiae(skel: &BinaryImage, trace_length: usize) -> Vec<Minutia> {
    let mut out = Vec::new();
    for y in 1..skel.height().saturating_sub(1) {
        for x in 1..skel.width().saturating_sub(1) {
            if !skel.get(x, y) {
                continue;
            }
            let kind = match crossing_number(skel, x, y) {
                Ok(1) => MinutiaKind::Ending,
                Ok(3) => MinutiaKind::Bifurcation,
                _ => continue,
            };
            let angle = match kind {
                MinutiaKind::Ending => ending_angle(skel, x, y, trace_length),
                MinutiaKind::Bifurcation => bifurcation_angle(skel, x, y, trace_length),
            };
            out.push(Minutia { x: x as u32, y: y as u32, angle: super::wrap_angle(angle), kind });
        }
    }
    out
}

/// Walks up to `steps` pixels along the skeleton from `start`, never
/// revisiting anything in `visited`. Stops early at junctions.
fn trace(skel: &BinaryImage, start: (usize, usize), visited: &mut Vec<(usize, usize)>, steps: usize) -> (usize, usize) {
    let mut cur = start;
    visited.push(cur);
    for _ in 1..steps {
        let p = neighbours(skel, cur.0, cur.1);
        let next: Vec<(usize, usize)> = CYCLE
            .iter()
            .zip(p)
            .filter(|&(_, on)| on)
            .map(|(&(dx, dy), _)| ((cur.0 as isize + dx) as usize, (cur.1 as isize + dy) as usize))
            .filter(|q| !visited.contains(q))
            .collect();
        // prefer 4-neighbours so diagonal shortcuts do not skip pixels
        let step = next.iter().find(|q| q.0 == cur.0 || q.1 == cur.1).or(next.first()).copied();
        match step {
            Some(q) if next.len() <= 2 => {
                // a second candidate adjacent to the first is the same ridge
                visited.extend(next.iter().copied());
                cur = q;
            }
            _ => break,
        }
    }
    cur
}

/// Direction pointing out of the ridge through the ending.
fn ending_angle(skel: &BinaryImage, x: usize, y: usize, steps: usize) -> f64 {
    let p = neighbours(skel, x, y);
    let Some(i) = p.iter().position(|&on| on) else {
        return 0.0;
    };
    let start = ((x as isize + CYCLE[i].0) as usize, (y as isize + CYCLE[i].1) as usize);
    let mut visited = vec![(x, y)];
    let end = trace(skel, start, &mut visited, steps);
    (y as f64 - end.1 as f64).atan2(x as f64 - end.0 as f64)
}

/// Bisector of the two branches that leave the junction closest together.
fn bifurcation_angle(skel: &BinaryImage, x: usize, y: usize, steps: usize) -> f64 {
    let p = neighbours(skel, x, y);
    let coord = |i: usize| ((x as isize + CYCLE[i].0) as usize, (y as isize + CYCLE[i].1) as usize);
    // one start pixel per foreground run, preferring 4-neighbours
    let mut starts = Vec::new();
    let Some(first_gap) = (0..8).find(|&i| !p[i]) else {
        return 0.0;
    };
    let mut i = (first_gap + 1) % 8;
    let mut run: Vec<usize> = Vec::new();
    for _ in 0..8 {
        if p[i] {
            run.push(i);
        } else if !run.is_empty() {
            starts.push(*run.iter().find(|&&k| k % 2 == 0).unwrap_or(&run[0]));
            run.clear();
        }
        i = (i + 1) % 8;
    }
    if !run.is_empty() {
        starts.push(*run.iter().find(|&&k| k % 2 == 0).unwrap_or(&run[0]));
    }

    let ring: Vec<(usize, usize)> = (0..8).filter(|&k| p[k]).map(coord).collect();
    let dirs: Vec<(f64, f64)> = starts
        .iter()
        .map(|&k| {
            let mut visited = vec![(x, y)];
            visited.extend(ring.iter().copied().filter(|&q| q != coord(k)));
            let end = trace(skel, coord(k), &mut visited, steps);
            let (dx, dy) = (end.0 as f64 - x as f64, end.1 as f64 - y as f64);
            let n = dx.hypot(dy).max(f64::EPSILON);
            (dx / n, dy / n)
        })
        .collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for a in 0..dirs.len() {
        for b in a + 1..dirs.len() {
            let dot = dirs[a].0 * dirs[b].0 + dirs[a].1 * dirs[b].1;
            let sum = (dirs[a].0 + dirs[b].0, dirs[a].1 + dirs[b].1);
            if best.is_none_or(|(d, _, _)| dot > d) {
                best = Some((dot, sum.0, sum.1));
            }
        }
    }
    best.map_or(0.0, |(_, sx, sy)| sy.atan2(sx))
}

/// Drops minutiae that have a neighbour within `min_distance`, then those
/// within `margin` pixels of the image edge.
pub fn filter_minutiae(
    found: &[Minutia],
    width: usize,
    height: usize,
    margin: usize,
    min_distance: f64,
) -> Vec<Minutia> {
    let close = |a: &Minutia, b: &Minutia| {
        let (dx, dy) = (a.x as f64 - b.x as f64, a.y as f64 - b.y as f64);
        dx.hypot(dy) < min_distance
    };
    found
        .iter()
        .enumerate()
        .filter(|&(i, m)| !found.iter().enumerate().any(|(j, o)| i != j && close(m, o)))
        .map(|(_, m)| *m)
        .filter(|m| {
            let (x, y) = (m.x as usize, m.y as usize);
            x >= margin && y >= margin && x + margin < width && y + margin < height
        })
        .collect()
}
