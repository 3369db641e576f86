//! Alignment-based minutiae matching and a file-backed gallery.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError};
use crate::fingerprint::{Minutia, Template};

/// Squared distances are compared on a 1e-6 px² grid so that the search
/// gives identical answers in both directions despite rounding.
const DIST_GRID: f64 = 1e6;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("invalid match parameters: {0}")]
    Params(String),
    #[error("gallery {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("gallery index {path}: {source}")]
    Index { path: PathBuf, source: serde_json::Error },
    #[error("template {path}: {source}")]
    Codec { path: PathBuf, source: CodecError },
    #[error("label {0:?} must be non-empty ASCII letters, digits, '-', '_' or '.'")]
    Label(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    /// Pixels.
    pub position_tolerance: f64,
    /// Radians.
    pub angle_tolerance: f64,
    pub threshold: f64,
    /// Rotations searched are `k · rotation_step` for `|k · step| ≤ rotation_range`.
    pub rotation_range: f64,
    pub rotation_step: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            position_tolerance: 12.0,
            angle_tolerance: PI / 8.0,
            threshold: 0.4,
            rotation_range: PI / 6.0,
            rotation_step: PI / 60.0,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<(), MatchError> {
        let bad = |m: &str| Err(MatchError::Params(m.to_string()));
        if !(self.position_tolerance > 0.0 && self.position_tolerance.is_finite()) {
            return bad("position tolerance must be positive");
        }
        if !(self.angle_tolerance > 0.0 && self.angle_tolerance.is_finite()) {
            return bad("angle tolerance must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if !(self.rotation_range >= 0.0 && self.rotation_range <= PI) {
            return bad("rotation range must lie in [0, π]");
        }
        if !(self.rotation_step > 0.0 && self.rotation_step.is_finite()) {
            return bad("rotation step must be positive");
        }
        Ok(())
    }

    fn rotation_steps(&self) -> i64 {
        (self.rotation_range / self.rotation_step + 1e-9).floor() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

/// Maps probe coordinates into the gallery frame: `g ≈ R(dtheta)·p + (dx, dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Transform {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl Transform {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.dtheta.sin_cos();
        (c * x - s * y + self.dx, s * x + c * y + self.dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub score: f64,
    /// (probe index, gallery index), sorted by probe index.
    pub pairs: Vec<(usize, usize)>,
    pub transform: Transform,
    pub decision: Decision,
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Direction-independent tie-break key for a minutia.
fn identity_key(m: &Minutia) -> (u32, u32, u8, u64) {
    (m.x, m.y, m.kind as u8, m.angle.to_bits())
}

/// Uniform grid over gallery positions with cells one tolerance wide.
struct Grid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(ms: &[Minutia], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (j, m) in ms.iter().enumerate() {
            cells.entry(((m.x as f64 / cell).floor() as i64, (m.y as f64 / cell).floor() as i64)).or_default().push(j);
        }
        Self { cell, cells }
    }

    fn near(&self, x: f64, y: f64) -> impl Iterator<Item = usize> + '_ {
        let (cx, cy) = ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64);
        (-1..=1)
            .flat_map(move |dy| (-1..=1).map(move |dx| (cx + dx, cy + dy)))
            .filter_map(|c| self.cells.get(&c))
            .flatten()
            .copied()
    }
}

struct Candidate {
    pairs: Vec<(usize, usize)>,
    transform: Transform,
}

/// Greedy one-to-one pairing under a fixed transform: candidate pairs are
/// taken in order of increasing distance.
fn pair_under(
    probe: &[Minutia],
    gallery: &[Minutia],
    grid: &Grid,
    t: &Transform,
    params: &MatchParams,
) -> Vec<(usize, usize)> {
    let tol2 = (params.position_tolerance.powi(2) * DIST_GRID).round() as i64;
    let mut edges = Vec::new();
    for (i, p) in probe.iter().enumerate() {
        let (x, y) = t.apply(p.x as f64, p.y as f64);
        let angle = p.angle + t.dtheta;
        for j in grid.near(x, y) {
            let g = &gallery[j];
            if g.kind != p.kind || angle_diff(angle, g.angle) > params.angle_tolerance {
                continue;
            }
            let d2 = ((x - g.x as f64).powi(2) + (y - g.y as f64).powi(2)) * DIST_GRID;
            let d2 = d2.round() as i64;
            if d2 <= tol2 {
                let (a, b) = (identity_key(p), identity_key(g));
                edges.push((d2, a.min(b), a.max(b), i, j));
            }
        }
    }
    edges.sort_unstable();
    let mut used_p = vec![false; probe.len()];
    let mut used_g = vec![false; gallery.len()];
    let mut pairs = Vec::new();
    for (_, _, _, i, j) in edges {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Better = more pairs, then smaller |dθ|, then smaller |dx|+|dy|, then the
/// lexicographically smaller pairing.
fn better(a: &Candidate, b: &Candidate) -> bool {
    let cmp = b
        .pairs
        .len()
        .cmp(&a.pairs.len())
        .then(a.transform.dtheta.abs().total_cmp(&b.transform.dtheta.abs()))
        .then((a.transform.dx.abs() + a.transform.dy.abs()).total_cmp(&(b.transform.dx.abs() + b.transform.dy.abs())))
        .then(a.pairs.cmp(&b.pairs));
    cmp == Ordering::Less
}

pub fn match_templates(probe: &Template, gallery: &Template, params: &MatchParams) -> Result<MatchResult, MatchError> {
    params.validate()?;
    let (ps, gs) = (probe.minutiae(), gallery.minutiae());
    let reject =
        MatchResult { score: 0.0, pairs: Vec::new(), transform: Transform::default(), decision: Decision::Reject };
    if ps.is_empty() || gs.is_empty() {
        return Ok(reject);
    }
    let grid = Grid::new(gs, params.position_tolerance);
    let k = params.rotation_steps();
    let mut best: Option<Candidate> = None;
    for step in -k..=k {
        let dtheta = step as f64 * params.rotation_step;
        let (s, c) = dtheta.sin_cos();
        for p in ps {
            let (rx, ry) = (c * p.x as f64 - s * p.y as f64, s * p.x as f64 + c * p.y as f64);
            for g in gs.iter().filter(|g| g.kind == p.kind) {
                let transform = Transform { dx: g.x as f64 - rx, dy: g.y as f64 - ry, dtheta };
                let pairs = pair_under(ps, gs, &grid, &transform, params);
                let cand = Candidate { pairs, transform };
                if best.as_ref().is_none_or(|b| better(&cand, b)) {
                    best = Some(cand);
                }
            }
        }
    }
    let Some(best) = best.filter(|b| !b.pairs.is_empty()) else {
        return Ok(reject);
    };
    let score = 2.0 * best.pairs.len() as f64 / (ps.len() + gs.len()) as f64;
    let decision = if score >= params.threshold { Decision::Accept } else { Decision::Reject };
    Ok(MatchResult { score, pairs: best.pairs, transform: best.transform, decision })
}

pub const INDEX_FILE: &str = "index.json";

/// Enrolled templates: a directory of `.fpt` files plus `index.json`
/// mapping labels to file names.
#[derive(Debug, Clone)]
pub struct Gallery {
    dir: PathBuf,
    index: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    pub label: String,
    #[serde(flatten)]
    pub result: MatchResult,
}

impl Gallery {
    /// Opens a gallery; a missing directory or index is an empty gallery.
    pub fn open(dir: &Path) -> Result<Self, MatchError> {
        let path = dir.join(INDEX_FILE);
        let index = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|source| MatchError::Index { path, source })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(source) => return Err(MatchError::Io { path, source }),
        };
        Ok(Self { dir: dir.to_path_buf(), index })
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn load(&self, label: &str) -> Result<Option<Template>, MatchError> {
        let Some(file) = self.index.get(label) else {
            return Ok(None);
        };
        let path = self.dir.join(file);
        let bytes = std::fs::read(&path).map_err(|source| MatchError::Io { path: path.clone(), source })?;
        codec::decode(&bytes).map(Some).map_err(|source| MatchError::Codec { path, source })
    }

    /// Writes `<label>.fpt` and records it in the index, replacing any
    /// previous enrolment under the same label.
    pub fn enroll(&mut self, label: &str, template: &Template) -> Result<(), MatchError> {
        let valid = !label.is_empty()
            && label != "."
            && label != ".."
            && label.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if !valid {
            return Err(MatchError::Label(label.to_string()));
        }
        let bytes = codec::encode(template).map_err(|source| MatchError::Codec { path: self.dir.clone(), source })?;
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| MatchError::Io { path, source }
        };
        std::fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let file = format!("{label}.fpt");
        let path = self.dir.join(&file);
        std::fs::write(&path, bytes).map_err(io(&path))?;
        self.index.insert(label.to_string(), file);
        let index_path = self.dir.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(&self.index).expect("string map serializes");
        std::fs::write(&index_path, text + "\n").map_err(io(&index_path))
    }

    /// Scores the probe against every enrolled template, best first (ties by
    /// label).
    pub fn identify(&self, probe: &Template, params: &MatchParams) -> Result<Vec<Ranked>, MatchError> {
        let mut out = Vec::with_capacity(self.index.len());
        for label in self.index.keys() {
            let gallery = self.load(label)?.expect("label comes from the index");
            let result = match_templates(probe, &gallery, params)?;
            out.push(Ranked { label: label.clone(), result });
        }
        out.sort_by(|a, b| b.result.score.total_cmp(&a.result.score).then(a.label.cmp(&b.label)));
        Ok(out)
    }
}
