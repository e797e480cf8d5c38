//! Conformal maps of grid domains onto ℍ, the chordal metric ρ, and the tip
//! structure modulus proxy.
//!
//! [`HalfPlaneMap`] is a raw map onto ℍ followed by a real Möbius normalization
//! sending `v̂₀ → 0`, `v̂ₑ → ∞` and a third boundary point (the arc-length
//! midpoint of the white arc) to 1. The raw map is either a closed form for
//! canonical domains or a geodesic zipper through the boundary polygon.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::explorer::ExplorerPath;
use crate::geom;
use crate::lattice::{Canonical, GridDomain, JordanPolygon};
use crate::loewner::{self, csqrt, slit_map, slit_map_inverse, DrivingFunction, LoewnerError, SlitStep};

pub const DEFAULT_MAP_TOL: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConformalError {
    #[error("map construction failed: {0}")]
    MapConstructionFailure(String),
    #[error("the domain has no closed-form description")]
    NoCanonicalForm,
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
}

/// `(z − i)/(z + i)`, with non-finite `z` treated as ∞ ↦ 1.
pub fn cayley(z: Complex64) -> Complex64 {
    if !z.is_finite() {
        return Complex64::new(1.0, 0.0);
    }
    (z - I) / (z + I)
}

/// Chordal distance `|φ(z) − φ(w)|` on ℍ̄ ∪ {∞}; pass a non-finite value for ∞.
pub fn rho_metric(z: Complex64, w: Complex64) -> f64 {
    (cayley(z) - cayley(w)).norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Rho,
}

/// Real Möbius map `k(w − a)/(w − b)` (or `k(w − a)` when `b = ∞`).
#[derive(Clone, Copy, Debug, PartialEq)]
struct Normalization {
    a: f64,
    b: Option<f64>,
    k: f64,
}

impl Normalization {
    fn new(a: f64, b: Option<f64>, c: f64) -> Result<Self, ConformalError> {
        let k = match b {
            None => 1.0 / (c - a),
            Some(b) => (c - b) / (c - a),
        };
        let det = match b {
            None => k,
            Some(b) => k * (a - b),
        };
        if !(k.is_finite() && det > 0.0) {
            return Err(ConformalError::MapConstructionFailure(format!("marked points out of order (a={a}, b={b:?}, c={c})")));
        }
        Ok(Normalization { a, b, k })
    }

    fn apply(&self, w: Complex64) -> Complex64 {
        if !w.is_finite() {
            return match self.b {
                None => Complex64::new(f64::INFINITY, 0.0),
                Some(_) => Complex64::new(self.k, 0.0),
            };
        }
        match self.b {
            None => (w - self.a) * self.k,
            Some(b) => self.k * (w - self.a) / (w - b),
        }
    }

    fn invert(&self, v: Complex64) -> Complex64 {
        match self.b {
            None => v / self.k + self.a,
            // v(w − b) = k(w − a)  ⇒  w = (v b − k a)/(v − k)
            Some(b) => (v * b - self.k * self.a) / (v - self.k),
        }
    }
}

/// Geodesic zipper through a closed boundary polygon; `z0 ↦ ∞`.
#[derive(Clone, Debug, PartialEq)]
struct Zipper {
    z0: Complex64,
    z1: Complex64,
    cells: Vec<(f64, f64)>,
    p: Option<f64>,
    sign: f64,
}

impl Zipper {
    /// `points` traverse the boundary once, counterclockwise, starting at `z0`.
    fn build(points: &[Complex64], interior: Complex64) -> Result<Zipper, ConformalError> {
        if points.len() < 3 {
            return Err(ConformalError::MapConstructionFailure("fewer than 3 zipper points".into()));
        }
        let (z0, z1) = (points[0], points[1]);
        let mut zs: Vec<Complex64> = points[2..].iter().map(|&z| I * csqrt((z - z1) / (z - z0))).collect();
        let mut cells = Vec::with_capacity(zs.len());
        let mut p: Option<f64> = None;
        for k in 0..zs.len() {
            let zeta = zs[k];
            let n2 = zeta.norm_sqr();
            let (c, d) = (zeta.re / n2, zeta.im / n2);
            if !(d > 0.0) || !c.is_finite() {
                return Err(ConformalError::MapConstructionFailure(format!("zipper point {k} left the half-plane")));
            }
            let h = 1.0 / d;
            cells.push((c, h));
            for w in &mut zs[k + 1..] {
                *w = Self::cell(*w, c, h);
            }
            p = Self::cell_real(p, c, h);
        }
        let mut z = Zipper { z0, z1, cells, p, sign: 1.0 };
        if z.forward(interior).im < 0.0 {
            z.sign = -1.0;
        }
        Ok(z)
    }

    fn cell(w: Complex64, c: f64, h: f64) -> Complex64 {
        let u = w / (1.0 - c * w);
        slit_map(u, SlitStep::from_height(0.0, h))
    }

    /// The cell acting on an extended real point (`None` = ∞).
    fn cell_real(p: Option<f64>, c: f64, h: f64) -> Option<f64> {
        let u = match p {
            None if c == 0.0 => return None,
            None => -1.0 / c,
            Some(p) if 1.0 - c * p == 0.0 => return None,
            Some(p) => p / (1.0 - c * p),
        };
        let sign = if u >= 0.0 { 1.0 } else { -1.0 };
        Some(sign * (u * u + h * h).sqrt())
    }

    fn forward(&self, z: Complex64) -> Complex64 {
        if z == self.z0 {
            return Complex64::new(f64::INFINITY, 0.0);
        }
        let mut w = I * csqrt((z - self.z1) / (z - self.z0));
        for &(c, h) in &self.cells {
            w = Self::cell(w, c, h);
        }
        let s = match self.p {
            Some(p) => w / (1.0 - w / p),
            None => w,
        };
        self.sign * s * s
    }

    fn inverse(&self, w: Complex64) -> Complex64 {
        let s = if self.sign > 0.0 { csqrt(w) } else { I * csqrt(w) };
        let mut u = match self.p {
            Some(p) => s / (1.0 + s / p),
            None => s,
        };
        for &(c, h) in self.cells.iter().rev() {
            let v = slit_map_inverse(u, SlitStep::from_height(0.0, h));
            u = v / (1.0 + c * v);
        }
        let q = -u * u;
        (self.z1 - q * self.z0) / (1.0 - q)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Raw {
    HalfDisk {
        center: Complex64,
        radius: f64,
    },
    /// Disk rotated so that the `v̂ₑ` direction is at angle 0.
    Disk {
        center: Complex64,
        radius: f64,
        rot: Complex64,
    },
    Zipper(Zipper),
}

impl Raw {
    fn forward(&self, z: Complex64) -> Complex64 {
        match self {
            Raw::HalfDisk { center, radius } => {
                let zeta = (z - center) / radius;
                let m = (1.0 + zeta) / (1.0 - zeta);
                m * m
            }
            Raw::Disk { center, radius, rot } => {
                let zeta = (z - center) / radius * rot.conj();
                I * (1.0 + zeta) / (1.0 - zeta)
            }
            Raw::Zipper(zip) => zip.forward(z),
        }
    }

    fn inverse(&self, w: Complex64) -> Complex64 {
        match self {
            Raw::HalfDisk { center, radius } => {
                let m = w.sqrt();
                center + radius * (m - 1.0) / (m + 1.0)
            }
            Raw::Disk { center, radius, rot } => {
                let m = -I * w;
                center + radius * rot * (m - 1.0) / (m + 1.0)
            }
            Raw::Zipper(zip) => zip.inverse(w),
        }
    }
}

/// Conformal map of a (grid) domain onto ℍ with `v̂₀ ↦ 0`, `v̂ₑ ↦ ∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfPlaneMap {
    raw: Raw,
    norm: Normalization,
    boundary: Vec<Complex64>,
    probe: f64,
}

impl HalfPlaneMap {
    pub fn forward(&self, z: Complex64) -> Complex64 {
        self.norm.apply(self.raw.forward(z))
    }

    pub fn inverse(&self, w: Complex64) -> Complex64 {
        self.raw.inverse(self.norm.invert(w))
    }

    /// Image of a boundary point, evaluated just inside the domain and projected to ℝ.
    pub fn boundary_image(&self, z: Complex64) -> f64 {
        self.norm.apply(Complex64::new(raw_boundary_value(&self.raw, &self.boundary, z, self.probe), 0.0)).re
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.raw, Raw::Zipper(_))
    }

    /// Number of zipper cells (0 for closed forms).
    pub fn cells(&self) -> usize {
        match &self.raw {
            Raw::Zipper(z) => z.cells.len(),
            _ => 0,
        }
    }
}

fn raw_boundary_value(raw: &Raw, boundary: &[Complex64], z: Complex64, probe: f64) -> f64 {
    let inward = inward_normal(boundary, z);
    raw.forward(z + inward * probe).re
}

/// Unit inward normal of the ccw polygon edge closest to `z`.
fn inward_normal(poly: &[Complex64], z: Complex64) -> Complex64 {
    let n = poly.len();
    let mut best = (f64::INFINITY, Complex64::new(0.0, 1.0));
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let d = geom::dist_to_segment(z, a, b);
        if d < best.0 {
            best = (d, I * (b - a) / (b - a).norm());
        }
    }
    best.1
}

/// Point at half the arc length of the ccw boundary path from `from` to `to` (both on `poly`).
fn arc_midpoint(poly: &[Complex64], from: Complex64, to: Complex64) -> Complex64 {
    let path = boundary_path(poly, from, to);
    let total: f64 = path.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut left = 0.5 * total;
    for w in path.windows(2) {
        let len = (w[1] - w[0]).norm();
        if len >= left && len > 0.0 {
            return w[0] + (w[1] - w[0]) * (left / len);
        }
        left -= len;
    }
    to
}

/// Ccw polyline along `poly` from boundary point `from` to boundary point `to`.
fn boundary_path(poly: &[Complex64], from: Complex64, to: Complex64) -> Vec<Complex64> {
    let n = poly.len();
    let edge_of = |p: Complex64| -> usize {
        (0..n)
            .min_by(|&i, &j| {
                geom::dist_to_segment(p, poly[i], poly[(i + 1) % n]).total_cmp(&geom::dist_to_segment(
                    p,
                    poly[j],
                    poly[(j + 1) % n],
                ))
            })
            .unwrap()
    };
    let (ef, et) = (edge_of(from), edge_of(to));
    let mut out = vec![from];
    let mut i = ef;
    let same_edge_ahead = ef == et && (to - poly[ef]).norm() >= (from - poly[ef]).norm();
    if !same_edge_ahead {
        loop {
            i = (i + 1) % n;
            out.push(poly[i]);
            if i == et {
                break;
            }
        }
    }
    out.push(to);
    out
}

/// Deepest vertex of the domain by graph distance from the boundary.
fn deep_point(dom: &GridDomain) -> Complex64 {
    let nv = dom.vertex_count();
    let mut depth = vec![usize::MAX; nv];
    let mut queue = std::collections::VecDeque::new();
    for (i, d) in depth.iter_mut().enumerate() {
        if dom.is_boundary(i) {
            *d = 0;
            queue.push_back(i);
        }
    }
    let mut last = queue.front().copied().unwrap_or(0);
    while let Some(i) = queue.pop_front() {
        last = i;
        for &j in &dom.neighbor_table()[i] {
            if j != crate::lattice::NO_VERTEX && depth[j as usize] == usize::MAX {
                depth[j as usize] = depth[i] + 1;
                queue.push_back(j as usize);
            }
        }
    }
    if depth[last] == 0 {
        dom.triangle_center(0)
    } else {
        dom.position(last)
    }
}

/// Zipper map of the grid domain, each boundary edge split into `subdivisions` pieces (even).
pub fn map_to_halfplane_zipper(dom: &GridDomain, subdivisions: usize) -> Result<HalfPlaneMap, ConformalError> {
    let s = subdivisions.max(2) + subdivisions % 2;
    let cycle = dom.boundary_cycle();
    let len = cycle.len();
    let mut points = Vec::with_capacity(len * s);
    let (ae, be) = cycle[dom.ve_edge()];
    let (pa, pb) = (dom.position(ae), dom.position(be));
    // start at v̂ₑ, finish the ve edge, then walk the rest of the cycle
    for j in (s / 2)..s {
        points.push(pa + (pb - pa) * (j as f64 / s as f64));
    }
    for k in 1..=len {
        let (a, b) = cycle[(dom.ve_edge() + k) % len];
        let (pa, pb) = (dom.position(a), dom.position(b));
        let stop = if k == len { s / 2 } else { s };
        for j in 0..stop {
            points.push(pa + (pb - pa) * (j as f64 / s as f64));
        }
    }
    let zip = Zipper::build(&points, deep_point(dom))?;
    let boundary = dom.boundary_polygon();
    let probe = 1e-9 * dom.mesh();
    let raw = Raw::Zipper(zip);
    let third = arc_midpoint(&boundary, dom.v0_hat(), dom.ve_hat());
    let a = raw_boundary_value(&raw, &boundary, dom.v0_hat(), probe);
    let c = raw_boundary_value(&raw, &boundary, third, probe);
    let norm = Normalization::new(a, None, c)?;
    Ok(HalfPlaneMap { raw, norm, boundary, probe })
}

/// Closed-form map of the continuum domain a canonical grid domain was built from.
pub fn map_to_halfplane_closed_form(dom: &GridDomain) -> Result<HalfPlaneMap, ConformalError> {
    let src = dom.source().ok_or(ConformalError::NoCanonicalForm)?;
    let canonical = src.canonical().ok_or(ConformalError::NoCanonicalForm)?;
    let boundary = dom.boundary_polygon();
    let third = arc_midpoint(&boundary, dom.v0_hat(), dom.ve_hat());
    closed_form(canonical, src, third, dom.mesh())
}

fn closed_form(canonical: &Canonical, src: &JordanPolygon, third: Complex64, scale: f64) -> Result<HalfPlaneMap, ConformalError> {
    let raw = match *canonical {
        Canonical::HalfDisk { center, radius } => Raw::HalfDisk { center: Complex64::new(center[0], center[1]), radius },
        Canonical::Disk { center, radius } => {
            let c = Complex64::new(center[0], center[1]);
            let e = src.ue() - c;
            Raw::Disk { center: c, radius, rot: e / e.norm() }
        }
    };
    let boundary = src.vertices().to_vec();
    let probe = 1e-9 * scale;
    let a = raw.forward(src.u0());
    let a = if a.is_finite() { a.re } else { return Err(ConformalError::MapConstructionFailure("u0 maps to infinity".into())) };
    let b = raw.forward(src.ue());
    let b = b.is_finite().then_some(b.re);
    let c = raw_boundary_value(&raw, &boundary, third, probe);
    let norm = Normalization::new(a, b, c)?;
    Ok(HalfPlaneMap { raw, norm, boundary, probe })
}

/// Default map: geodesic zipper with every boundary edge split in two.
pub fn map_to_halfplane(dom: &GridDomain) -> Result<HalfPlaneMap, ConformalError> {
    map_to_halfplane_zipper(dom, 2)
}

/// Pointwise image of an explorer path; `v̂₀ ↦ 0` exactly and `v̂ₑ ↦ ∞`.
pub fn map_curve(map: &HalfPlaneMap, path: &ExplorerPath) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = map_curve_lazy(map, path).collect();
    if path.points.len() > 1 {
        out.push(Complex64::new(f64::INFINITY, 0.0));
    }
    out
}

/// Lazy form of [`map_curve`] that stops before the terminal point `v̂ₑ`.
pub fn map_curve_lazy<'a>(map: &'a HalfPlaneMap, path: &'a ExplorerPath) -> impl Iterator<Item = Complex64> + 'a {
    let n = path.points.len();
    path.points[..n.saturating_sub(1)].iter().enumerate().map(move |(i, &z)| {
        if i == 0 {
            Complex64::new(map.boundary_image(z), 0.0)
        } else {
            map.forward(z)
        }
    })
}

/// Driving function of the mapped explorer midpoints, unzipped up to capacity `t_max`.
///
/// Step `k` of the result is the image of midpoint `k`, so the first `j` steps
/// describe the path after `j` explorer moves.
pub fn path_driving(map: &HalfPlaneMap, path: &ExplorerPath, t_max: f64) -> Result<DrivingFunction, LoewnerError> {
    let mids = path.midpoints();
    let n = mids.len().saturating_sub(1);
    let curve =
        mids[..n].iter().enumerate().map(
            |(i, &z)| {
                if i == 0 {
                    Complex64::new(map.boundary_image(z), 0.0)
                } else {
                    map.forward(z)
                }
            },
        );
    loewner::extract_driving_until(curve, t_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureModulusReport {
    pub delta: f64,
    pub eta: f64,
    pub witness: Option<(usize, usize)>,
}

impl StructureModulusReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Revisit-pair proxy of the tip structure modulus of a polyline.
pub fn tip_structure_modulus(curve: &[Complex64], delta: f64, metric: Metric) -> Result<StructureModulusReport, ConformalError> {
    tip_structure_modulus_in(curve, delta, metric, &[])
}

/// As [`tip_structure_modulus`], with chords also required not to cross the polygon `boundary`.
///
/// For each `t`, the earliest `s` with `|γ(s) − γ(t)| ≤ δ` whose chord crosses neither
/// `γ[0, t]` nor `boundary` gives the candidate `diam γ[s, t]`.
pub fn tip_structure_modulus_in(
    curve: &[Complex64],
    delta: f64,
    metric: Metric,
    boundary: &[Complex64],
) -> Result<StructureModulusReport, ConformalError> {
    if !(delta > 0.0) {
        return Err(ConformalError::NonPositiveDelta(delta));
    }
    let pts: Vec<Complex64> = match metric {
        Metric::Euclidean => curve.to_vec(),
        Metric::Rho => curve.iter().map(|&z| cayley(z)).collect(),
    };
    let boundary: Vec<Complex64> = match metric {
        Metric::Euclidean => boundary.to_vec(),
        Metric::Rho => Vec::new(),
    };
    let n = pts.len();
    let mut report = StructureModulusReport { delta, eta: delta, witness: None };
    if n < 3 {
        return Ok(report);
    }
    let grid = SpatialHash::new(&pts, delta);
    let bgrid = SpatialHash::new_segments(&boundary, delta);
    let boxes = SparseBoxes::new(&pts);
    let slack = 1e-12 * delta * delta;

    let mut candidates: Vec<usize> = Vec::new();
    for t in 2..n {
        candidates.clear();
        grid.points_near(pts[t], |s| {
            if s + 1 < t && (pts[s] - pts[t]).norm() <= delta {
                candidates.push(s);
            }
        });
        candidates.sort_unstable();
        for &s in &candidates {
            if boxes.diagonal(s, t) <= report.eta {
                // later candidates have smaller pieces
                break;
            }
            let (p, q) = (pts[s], pts[t]);
            let mut blocked = false;
            grid.segments_near(p, q, t, |i| {
                // segment [i, i+1] of γ[0, t], skipping those touching the chord ends
                if i + 1 == s || i == s || i + 1 == t || i == t {
                    return false;
                }
                if geom::segments_cross(p, q, pts[i], pts[i + 1], slack) {
                    blocked = true;
                }
                blocked
            });
            if !blocked && !boundary.is_empty() {
                bgrid.segments_near(p, q, usize::MAX, |i| {
                    let j = (i + 1) % boundary.len();
                    if geom::segments_cross(p, q, boundary[i], boundary[j], slack) {
                        blocked = true;
                    }
                    blocked
                });
            }
            if blocked {
                continue;
            }
            let d = geom::diameter(&pts[s..=t]);
            if d > report.eta {
                report.eta = d;
                report.witness = Some((s, t));
            }
            break;
        }
    }
    Ok(report)
}

/// Nested-bottleneck modulus: chord crosscuts that separate the tip from the target.
///
/// A chord of length at most `δ` from `γ(b)` back to an earlier point `γ(a)`, or to the
/// nearest point of `boundary`, that crosses neither `γ[0, b]` nor `boundary` closes a
/// pocket. When the curve turns into that pocket at `b`, every later tip until the
/// chord is next crossed at `c` is cut off from the target, and `diam γ[b, c]` is a
/// candidate. The pocket of a boundary chord is the one bounded by `γ[0, b]` and the
/// boundary arc back to `γ(0)` that avoids `target`. A curve that never crosses the
/// chord again did not enter the pocket, since it ends outside it.
pub fn nested_bottleneck_modulus(
    curve: &[Complex64],
    delta: f64,
    boundary: &[Complex64],
    target: Complex64,
) -> Result<StructureModulusReport, ConformalError> {
    nested_bottleneck_above(curve, delta, boundary, target, delta)
}

/// Whether [`nested_bottleneck_modulus`] exceeds `level`; faster, as smaller pieces are skipped.
pub fn nested_bottleneck_exceeds(
    curve: &[Complex64],
    delta: f64,
    boundary: &[Complex64],
    target: Complex64,
    level: f64,
) -> Result<bool, ConformalError> {
    Ok(nested_bottleneck_above(curve, delta, boundary, target, level.max(delta))?.witness.is_some())
}

fn nested_bottleneck_above(
    curve: &[Complex64],
    delta: f64,
    boundary: &[Complex64],
    target: Complex64,
    floor: f64,
) -> Result<StructureModulusReport, ConformalError> {
    if !(delta > 0.0) {
        return Err(ConformalError::NonPositiveDelta(delta));
    }
    let pts = curve;
    let n = pts.len();
    let mut report = StructureModulusReport { delta, eta: floor, witness: None };
    if n < 4 {
        report.eta = delta;
        return Ok(report);
    }
    // lattice distances tie exactly, so comparisons get a relative slack that rounding
    // cannot cross
    let tiny = 1e-9 * delta;
    let hop = pts.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max) * (1.0 + 1e-9);
    let reach_delta = delta + tiny;
    let grid = SpatialHash::new(pts, delta + hop);
    let bgrid = SpatialHash::new_segments(boundary, delta);
    let btree = SegmentTree::new_closed(boundary);
    let boxes = SparseBoxes::new(pts);
    let tree = SegmentTree::new(pts);
    let arcs = (!boundary.is_empty()).then(|| BoundaryArcs::new(boundary, pts[0], target));

    // first index c after b with a piece γ[b, c] wider than `eta`
    let reach = |b: usize, eta: f64| -> Option<usize> {
        if boxes.diagonal(b, n - 1) <= eta {
            return None;
        }
        let (mut lo, mut hi) = (b, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if boxes.diagonal(b, mid) > eta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };

    // exit time if the curve turns into the pocket closed by the chord [γ(b), w]
    let exit =
        |b: usize, w: Complex64, c_min: usize, clean: &dyn Fn() -> bool, pocket: &dyn Fn() -> Vec<Complex64>| -> Option<usize> {
            let p = pts[b];
            if tree.first_crossing(b + 1, c_min, p, w, pts, &|_| false).is_some() {
                return None;
            }
            let c = tree.first_crossing(c_min, n - 1, p, w, pts, &|_| false)?;
            if !clean() {
                return None;
            }
            // the first step off the chord's line decides the side
            let j = (b + 1..=c).find(|&j| geom::orient_snapped(p, w, pts[j]) != 0.0)?;
            geom::point_in_polygon_snapped(pts[j], &pocket(), tiny).then_some(c)
        };
    let boundary_clean = |p: Complex64, q: Complex64, bskip: &dyn Fn(usize) -> bool| {
        boundary.is_empty() || btree.first_crossing(0, boundary.len(), p, q, boundary, bskip).is_none()
    };

    let mut candidates: Vec<usize> = Vec::new();
    let mut later: Vec<usize> = Vec::new();
    let mut reached: Vec<bool> = Vec::new();
    for b in 2..n - 1 {
        let Some(c_min) = reach(b, report.eta) else {
            // pieces only shrink as b grows
            break;
        };
        candidates.clear();
        later.clear();
        grid.points_near(pts[b], |a| {
            let d = (pts[a] - pts[b]).norm();
            if a + 2 <= b && d <= reach_delta {
                candidates.push(a);
            }
            // any exit through a chord at b passes within δ + hop of γ(b) at some step ≥ c_min
            if a >= c_min && d <= reach_delta + hop {
                later.push(a);
            }
        });
        if later.is_empty() {
            continue;
        }
        // keep chords passing within one hop of a later point, found by angle around γ(b)
        let angle = |z: Complex64| (z - pts[b]).arg();
        let mut by_angle: Vec<(f64, usize)> = candidates.iter().map(|&a| (angle(pts[a]), a)).collect();
        by_angle.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        candidates.clear();
        candidates.extend(by_angle.iter().map(|x| x.1));
        let thetas: Vec<f64> = by_angle.iter().map(|x| x.0).collect();
        reached.clear();
        reached.resize(candidates.len(), false);
        for &j in &later {
            let r = (pts[j] - pts[b]).norm();
            let w = if r <= hop { PI } else { (hop / r).asin() + 1e-12 };
            let th = angle(pts[j]);
            for (lo, hi) in [(th - w, th + w), (th - w + 2.0 * PI, th + w + 2.0 * PI), (th - w - 2.0 * PI, th + w - 2.0 * PI)] {
                let start = thetas.partition_point(|&t| t < lo);
                for k in start..thetas.len() {
                    if thetas[k] > hi {
                        break;
                    }
                    if !reached[k] && geom::dist_to_segment(pts[j], pts[b], pts[candidates[k]]) <= hop {
                        reached[k] = true;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..candidates.len()).filter(|&k| reached[k]).map(|k| candidates[k]).collect();
        order.sort_unstable();
        for &a in &order {
            let (p, q) = (pts[b], pts[a]);
            let skip = |i: usize| i + 1 == a || i == a || i + 1 == b || i == b;
            let clean = || tree.first_crossing(0, b, p, q, pts, &skip).is_none() && boundary_clean(p, q, &|_| false);
            if let Some(c) = exit(b, q, c_min, &clean, &|| pts[a..=b].to_vec()) {
                let d = geom::diameter(&pts[b..=c]);
                if d > report.eta {
                    report.eta = d;
                    report.witness = Some((b, c));
                }
            }
        }
        if let Some(arcs) = &arcs {
            let Some(c_min) = reach(b, report.eta) else { break };
            let m = boundary.len();
            // every boundary point tied for nearest is tried
            for (k, w) in nearest_on_polygon(pts[b], boundary, &bgrid, reach_delta, tiny) {
                if (w - pts[b]).norm() <= tiny {
                    continue;
                }
                let skip = |i: usize| i + 1 == b || i == b || i == 0;
                let bskip = |i: usize| i == k || (w - boundary[i]).norm() <= tiny || (w - boundary[(i + 1) % m]).norm() <= tiny;
                let clean = || tree.first_crossing(0, b, pts[b], w, pts, &skip).is_none() && boundary_clean(pts[b], w, &bskip);
                let pocket = || {
                    let mut poly = pts[..=b].to_vec();
                    poly.push(w);
                    poly.extend(arcs.back(k, w));
                    poly
                };
                if let Some(c) = exit(b, w, c_min, &clean, &pocket) {
                    let d = geom::diameter(&pts[b..=c]);
                    if d > report.eta {
                        report.eta = d;
                        report.witness = Some((b, c));
                    }
                }
            }
        }
    }
    if report.witness.is_none() {
        report.eta = delta;
    }
    Ok(report)
}

/// Points of a closed polygon within `r` of `z` and within `tie` of the nearest one,
/// with their segment indices. Points closer than `tie` to each other are merged.
fn nearest_on_polygon(z: Complex64, poly: &[Complex64], grid: &SpatialHash, r: f64, tie: f64) -> Vec<(usize, Complex64)> {
    let m = poly.len();
    let mut found: Vec<(usize, Complex64, f64)> = Vec::new();
    let lo = z - Complex64::new(r, r);
    let hi = z + Complex64::new(r, r);
    grid.segments_near(lo, hi, usize::MAX, |i| {
        let p = geom::closest_on_segment(z, poly[i], poly[(i + 1) % m]);
        let d = (p - z).norm();
        if d <= r {
            found.push((i, p, d));
        }
        false
    });
    let Some(best) = found.iter().map(|f| f.2).min_by(f64::total_cmp) else { return Vec::new() };
    found.retain(|f| f.2 <= best + tie);
    found.sort_unstable_by_key(|f| f.0);
    let mut out: Vec<(usize, Complex64)> = Vec::new();
    for (i, p, _) in found {
        if out.iter().all(|o| (o.1 - p).norm() > tie) {
            out.push((i, p));
        }
    }
    out
}

/// Arcs of a closed polygon between a fixed start point and points on its edges.
struct BoundaryArcs<'a> {
    poly: &'a [Complex64],
    start_pos: f64,
    target_pos: f64,
}

impl<'a> BoundaryArcs<'a> {
    fn new(poly: &'a [Complex64], start: Complex64, target: Complex64) -> Self {
        let arcs = BoundaryArcs { poly, start_pos: 0.0, target_pos: 0.0 };
        BoundaryArcs { poly, start_pos: arcs.position(start), target_pos: arcs.position(target) }
    }

    /// Edge index plus fraction along the edge of the nearest boundary point.
    fn position(&self, z: Complex64) -> f64 {
        let m = self.poly.len();
        (0..m)
            .map(|i| {
                let (a, b) = (self.poly[i], self.poly[(i + 1) % m]);
                let t = (((z - a) * (b - a).conj()).re / (b - a).norm_sqr()).clamp(0.0, 1.0);
                (i as f64 + t, geom::dist_to_segment(z, a, b))
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .map(|x| x.0)
            .expect("polygon has edges")
    }

    /// Vertices met going from `w` (on edge `k`) back to the start along the arc avoiding
    /// the target, ending with the start point itself.
    fn back(&self, k: usize, w: Complex64) -> Vec<Complex64> {
        let m = self.poly.len();
        let (a, b) = (self.poly[k], self.poly[(k + 1) % m]);
        let wpos = k as f64 + (((w - a) * (b - a).conj()).re / (b - a).norm_sqr()).clamp(0.0, 1.0);
        let fwd = |x: f64| (x - wpos).rem_euclid(m as f64);
        let start_edge = self.start_pos.floor() as usize % m;
        let start = {
            let (a, b) = (self.poly[start_edge], self.poly[(start_edge + 1) % m]);
            a + (b - a) * (self.start_pos - start_edge as f64)
        };
        let mut out = Vec::new();
        if fwd(self.target_pos) > fwd(self.start_pos) {
            // counterclockwise
            let steps = (start_edge + m - k) % m;
            if !(steps == 0 && self.start_pos >= wpos) {
                let count = if steps == 0 { m } else { steps };
                out.extend((1..=count).map(|j| self.poly[(k + j) % m]));
            }
        } else {
            let steps = (k + m - start_edge) % m;
            if !(steps == 0 && wpos >= self.start_pos) {
                let count = if steps == 0 { m } else { steps };
                out.extend((0..count).map(|j| self.poly[(k + m - j) % m]));
            }
        }
        out.push(start);
        out
    }
}

/// Segment bounding boxes for earliest-crossing queries.
struct SegmentTree {
    size: usize,
    boxes: Vec<[f64; 4]>,
    closed: bool,
}

impl SegmentTree {
    fn build(pts: &[Complex64], segs: usize, closed: bool) -> Self {
        let size = segs.next_power_of_two().max(1);
        let empty = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        let mut boxes = vec![empty; 2 * size];
        for i in 0..segs {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            boxes[size + i] = [a.re.min(b.re), a.re.max(b.re), a.im.min(b.im), a.im.max(b.im)];
        }
        for i in (1..size).rev() {
            boxes[i] = merge(boxes[2 * i], boxes[2 * i + 1]);
        }
        SegmentTree { size, boxes, closed }
    }

    fn new(pts: &[Complex64]) -> Self {
        Self::build(pts, pts.len().saturating_sub(1), false)
    }

    fn new_closed(poly: &[Complex64]) -> Self {
        Self::build(poly, poly.len(), true)
    }

    /// Smallest segment index in `lo..hi`, not skipped, whose step crosses the chord `[p, q]`.
    fn first_crossing(
        &self,
        lo: usize,
        hi: usize,
        p: Complex64,
        q: Complex64,
        pts: &[Complex64],
        skip: &dyn Fn(usize) -> bool,
    ) -> Option<usize> {
        if lo >= hi || pts.is_empty() {
            return None;
        }
        let qb = [p.re.min(q.re), p.re.max(q.re), p.im.min(q.im), p.im.max(q.im)];
        let mut stack = vec![(1usize, 0usize, self.size)];
        while let Some((node, l, r)) = stack.pop() {
            let b = self.boxes[node];
            if r <= lo || l >= hi || b[0] > qb[1] || b[1] < qb[0] || b[2] > qb[3] || b[3] < qb[2] {
                continue;
            }
            if r - l == 1 {
                let next = if self.closed { (l + 1) % pts.len() } else { l + 1 };
                if !skip(l) && geom::step_crosses_chord(p, q, pts[l], pts[next]) {
                    return Some(l);
                }
                continue;
            }
            let mid = (l + r) / 2;
            // right pushed first so the left half is searched first
            stack.push((2 * node + 1, mid, r));
            stack.push((2 * node, l, mid));
        }
        None
    }
}

/// Uniform grid of cell size `h` over points (and the segments between consecutive ones).
struct SpatialHash {
    h: f64,
    cells: std::collections::HashMap<(i64, i64), Vec<usize>>,
    seg_cells: std::collections::HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialHash {
    fn key(&self, z: Complex64) -> (i64, i64) {
        ((z.re / self.h).floor() as i64, (z.im / self.h).floor() as i64)
    }

    fn new(pts: &[Complex64], h: f64) -> Self {
        let mut g = SpatialHash { h, cells: Default::default(), seg_cells: Default::default() };
        for (i, &z) in pts.iter().enumerate() {
            let k = g.key(z);
            g.cells.entry(k).or_default().push(i);
        }
        g.index_segments(pts, false);
        g
    }

    /// Closed polygon segments only.
    fn new_segments(poly: &[Complex64], h: f64) -> Self {
        let mut g = SpatialHash { h, cells: Default::default(), seg_cells: Default::default() };
        g.index_segments(poly, true);
        g
    }

    fn index_segments(&mut self, pts: &[Complex64], closed: bool) {
        let n = pts.len();
        let count = if closed { n } else { n.saturating_sub(1) };
        for i in 0..count {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let (ka, kb) = (self.key(a), self.key(b));
            for x in ka.0.min(kb.0)..=ka.0.max(kb.0) {
                for y in ka.1.min(kb.1)..=ka.1.max(kb.1) {
                    self.seg_cells.entry((x, y)).or_default().push(i);
                }
            }
        }
        for v in self.seg_cells.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
    }

    fn points_near(&self, z: Complex64, mut f: impl FnMut(usize)) {
        let (kx, ky) = self.key(z);
        for x in kx - 1..=kx + 1 {
            for y in ky - 1..=ky + 1 {
                if let Some(v) = self.cells.get(&(x, y)) {
                    v.iter().for_each(|&i| f(i));
                }
            }
        }
    }

    /// Calls `f` on segments (index `< limit`) in cells overlapping the box of `[p, q]`; stops when `f` returns true.
    fn segments_near(&self, p: Complex64, q: Complex64, limit: usize, mut f: impl FnMut(usize) -> bool) {
        let (kp, kq) = (self.key(p), self.key(q));
        let mut seen: Vec<usize> = Vec::new();
        for x in kp.0.min(kq.0)..=kp.0.max(kq.0) {
            for y in kp.1.min(kq.1)..=kp.1.max(kq.1) {
                if let Some(v) = self.seg_cells.get(&(x, y)) {
                    for &i in v {
                        if i >= limit || seen.contains(&i) {
                            continue;
                        }
                        seen.push(i);
                        if f(i) {
                            return;
                        }
                    }
                }
            }
        }
    }
}

/// Range bounding boxes in O(1) via sparse tables.
struct SparseBoxes {
    levels: Vec<Vec<[f64; 4]>>,
}

impl SparseBoxes {
    fn new(pts: &[Complex64]) -> Self {
        let mut levels = vec![pts.iter().map(|z| [z.re, z.re, z.im, z.im]).collect::<Vec<_>>()];
        let mut span = 1;
        while 2 * span <= pts.len() {
            let prev = levels.last().unwrap();
            let next: Vec<[f64; 4]> = (0..=pts.len() - 2 * span).map(|i| merge(prev[i], prev[i + span])).collect();
            levels.push(next);
            span *= 2;
        }
        SparseBoxes { levels }
    }

    /// Diagonal of the bounding box of points `s..=t`.
    fn diagonal(&self, s: usize, t: usize) -> f64 {
        let len = t - s + 1;
        let lvl = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let b = merge(self.levels[lvl][s], self.levels[lvl][t + 1 - (1 << lvl)]);
        ((b[1] - b[0]).powi(2) + (b[3] - b[2]).powi(2)).sqrt()
    }
}

fn merge(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0].min(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].max(b[3])]
}
