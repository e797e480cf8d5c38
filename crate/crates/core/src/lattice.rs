//! The triangular grid `TG^ε` and grid approximations of Jordan domains.
//!
//! Vertices are indexed by integer pairs `(m, n)` embedded at `ε·(m + n·e^{iπ/3})`.
//! A [`GridDomain`] is the largest edge-connected union of closed lattice
//! triangles contained in a [`JordanPolygon`], with two marked boundary-edge
//! midpoints splitting the boundary vertices into a white (counterclockwise)
//! arc and a black (clockwise) arc.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom;

/// Slack for point-in-polygon tests; points this close to the boundary count as inside.
pub const CONTAINMENT_SLACK: f64 = 1e-12;

/// Neighbor offsets in counterclockwise order; offset `k` embeds to `e^{ikπ/3}`.
pub const NEIGHBOR_OFFSETS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("no lattice triangle of mesh {eps} fits inside the domain")]
    EmptyApproximation { eps: f64 },
    #[error("both marked points snap to boundary edge {edge}")]
    AmbiguousMarks { edge: usize },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("mesh must be positive, got {0}")]
    NonPositiveMesh(f64),
    #[error("grid domain is not simply connected ({boundary_edges} boundary edges, cycle of {cycle_len})")]
    NotSimplyConnected { boundary_edges: usize, cycle_len: usize },
    #[error("malformed domain document: {0}")]
    Json(String),
}

/// A vertex of the triangular lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeCoord {
    pub m: i32,
    pub n: i32,
}

impl LatticeCoord {
    pub const fn new(m: i32, n: i32) -> Self {
        Self { m, n }
    }

    /// The six neighbors, counterclockwise from `(m + 1, n)`.
    pub fn neighbors(self) -> [LatticeCoord; 6] {
        NEIGHBOR_OFFSETS.map(|(dm, dn)| LatticeCoord::new(self.m + dm, self.n + dn))
    }

    pub fn offset(self, k: usize) -> LatticeCoord {
        let (dm, dn) = NEIGHBOR_OFFSETS[k % 6];
        LatticeCoord::new(self.m + dm, self.n + dn)
    }

    /// Complex position `ε·(m + n·e^{iπ/3})`.
    pub fn embed(self, eps: f64) -> Complex64 {
        Complex64::new(eps * (self.m as f64 + 0.5 * self.n as f64), eps * SQRT3_2 * self.n as f64)
    }
}

/// Free-function form of [`LatticeCoord::neighbors`].
pub fn neighbors(v: LatticeCoord) -> [LatticeCoord; 6] {
    v.neighbors()
}

/// An elementary lattice triangle: up-pointing `{(m,n), (m+1,n), (m,n+1)}` or
/// down-pointing `{(m+1,n), (m+1,n+1), (m,n+1)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeTriangle {
    pub m: i32,
    pub n: i32,
    pub up: bool,
}

impl LatticeTriangle {
    /// Corners in counterclockwise order.
    pub fn corners(self) -> [LatticeCoord; 3] {
        let (m, n) = (self.m, self.n);
        if self.up {
            [LatticeCoord::new(m, n), LatticeCoord::new(m + 1, n), LatticeCoord::new(m, n + 1)]
        } else {
            [LatticeCoord::new(m + 1, n), LatticeCoord::new(m + 1, n + 1), LatticeCoord::new(m, n + 1)]
        }
    }

    /// The triangle around `v` spanned by neighbor directions `k` and `k + 1`.
    pub fn around(v: LatticeCoord, k: usize) -> LatticeTriangle {
        match k % 6 {
            0 => LatticeTriangle { m: v.m, n: v.n, up: true },
            1 => LatticeTriangle { m: v.m - 1, n: v.n, up: false },
            2 => LatticeTriangle { m: v.m - 1, n: v.n, up: true },
            3 => LatticeTriangle { m: v.m - 1, n: v.n - 1, up: false },
            4 => LatticeTriangle { m: v.m, n: v.n - 1, up: true },
            _ => LatticeTriangle { m: v.m, n: v.n - 1, up: false },
        }
    }
}

/// Optional closed-form description of a polygon's underlying smooth domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Canonical {
    /// Upper half of the disk `|z - center| < radius` (diameter horizontal, at the bottom).
    HalfDisk {
        center: [f64; 2],
        radius: f64,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PolygonDocument {
    vertices: Vec<[f64; 2]>,
    u0: [f64; 2],
    ue: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    canonical: Option<Canonical>,
}

/// A closed simple polygon with two marked boundary points, stored counterclockwise.
#[derive(Clone, Debug, PartialEq)]
pub struct JordanPolygon {
    vertices: Vec<Complex64>,
    u0: Complex64,
    ue: Complex64,
    canonical: Option<Canonical>,
}

impl JordanPolygon {
    pub fn new(vertices: Vec<Complex64>, u0: Complex64, ue: Complex64) -> Result<Self, LatticeError> {
        let mut vertices = vertices;
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(LatticeError::InvalidPolygon("fewer than 3 vertices".into()));
        }
        if vertices.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LatticeError::InvalidPolygon("non-finite coordinate".into()));
        }
        if !geom::polygon_is_simple(&vertices) {
            return Err(LatticeError::InvalidPolygon("polygon self-intersects".into()));
        }
        if geom::signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let poly = JordanPolygon { vertices, u0, ue, canonical: None };
        let slack = 1e-9 * (1.0 + poly.diameter());
        for (name, p) in [("u0", u0), ("ue", ue)] {
            if geom::dist_to_polygon_boundary(p, &poly.vertices) > slack {
                return Err(LatticeError::InvalidPolygon(format!("{name} is not on the boundary")));
            }
        }
        Ok(poly)
    }

    pub fn with_canonical(mut self, canonical: Canonical) -> Self {
        self.canonical = Some(canonical);
        self
    }

    /// Upper half-disk with `arc_points` vertices on the arc (inscribed) and marks at the diameter ends.
    pub fn half_disk(center: Complex64, radius: f64, arc_points: usize) -> Self {
        let k = arc_points.max(2);
        let vertices: Vec<Complex64> =
            (0..=k).map(|j| center + Complex64::from_polar(radius, PI * j as f64 / k as f64)).collect();
        // arc runs from (c + r) to (c - r); the diameter closes the polygon
        JordanPolygon::new(vertices, center - radius, center + radius)
            .expect("half-disk polygon is simple")
            .with_canonical(Canonical::HalfDisk { center: [center.re, center.im], radius })
    }

    /// Inscribed regular `sides`-gon of the disk with marks at the given boundary angles.
    pub fn disk(center: Complex64, radius: f64, sides: usize, u0_angle: f64, ue_angle: f64) -> Self {
        let vertices: Vec<Complex64> =
            (0..sides).map(|j| center + Complex64::from_polar(radius, 2.0 * PI * j as f64 / sides as f64)).collect();
        let snap = |a: f64| geom::project_to_polygon_boundary(center + Complex64::from_polar(radius, a), &vertices);
        let (u0, ue) = (snap(u0_angle), snap(ue_angle));
        JordanPolygon::new(vertices, u0, ue)
            .expect("regular polygon is simple")
            .with_canonical(Canonical::Disk { center: [center.re, center.im], radius })
    }

    pub fn from_json(text: &str) -> Result<Self, LatticeError> {
        let doc: PolygonDocument = serde_json::from_str(text).map_err(|e| LatticeError::Json(e.to_string()))?;
        let c = |p: [f64; 2]| Complex64::new(p[0], p[1]);
        let poly = JordanPolygon::new(doc.vertices.into_iter().map(c).collect(), c(doc.u0), c(doc.ue))?;
        Ok(match doc.canonical {
            Some(k) => poly.with_canonical(k),
            None => poly,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = PolygonDocument {
            vertices: self.vertices.iter().map(|z| [z.re, z.im]).collect(),
            u0: [self.u0.re, self.u0.im],
            ue: [self.ue.re, self.ue.im],
            canonical: self.canonical.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("polygon serializes")
    }

    pub fn vertices(&self) -> &[Complex64] {
        &self.vertices
    }

    pub fn u0(&self) -> Complex64 {
        self.u0
    }

    pub fn ue(&self) -> Complex64 {
        self.ue
    }

    pub fn canonical(&self) -> Option<&Canonical> {
        self.canonical.as_ref()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        geom::point_in_polygon(z, &self.vertices, CONTAINMENT_SLACK)
    }

    pub fn diameter(&self) -> f64 {
        geom::diameter(&self.vertices)
    }

    pub fn with_marks_swapped(&self) -> Self {
        JordanPolygon { u0: self.ue, ue: self.u0, ..self.clone() }
    }
}

/// Triangular-lattice approximation of a Jordan domain with colored boundary arcs.
#[derive(Clone, Debug)]
pub struct GridDomain {
    mesh: f64,
    vertices: Vec<LatticeCoord>,
    index: HashMap<LatticeCoord, usize>,
    triangles: Vec<[usize; 3]>,
    neighbor_table: Vec<[u32; 6]>,
    edge_triangles: HashMap<(u32, u32), [u32; 2]>,
    boundary_cycle: Vec<(usize, usize)>,
    on_boundary: Vec<bool>,
    v0_edge: usize,
    ve_edge: usize,
    arc_plus: Vec<usize>,
    arc_minus: Vec<usize>,
    source: Option<JordanPolygon>,
}

/// Sentinel in [`GridDomain::neighbor_table`] for a neighbor outside the domain.
pub const NO_VERTEX: u32 = u32::MAX;
const NO_TRIANGLE: u32 = u32::MAX;

/// Grid approximation of `domain` at mesh `eps`.
pub fn build_domain_approximation(domain: &JordanPolygon, eps: f64) -> Result<GridDomain, LatticeError> {
    if !(eps > 0.0) {
        return Err(LatticeError::NonPositiveMesh(eps));
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in domain.vertices() {
        xmin = xmin.min(z.re);
        xmax = xmax.max(z.re);
        ymin = ymin.min(z.im);
        ymax = ymax.max(z.im);
    }
    let n_lo = (ymin / (eps * SQRT3_2)).floor() as i32 - 1;
    let n_hi = (ymax / (eps * SQRT3_2)).ceil() as i32 + 1;

    let mut inside_cache: HashMap<LatticeCoord, bool> = HashMap::new();
    let mut inside = |v: LatticeCoord| -> bool { *inside_cache.entry(v).or_insert_with(|| domain.contains(v.embed(eps))) };
    let mut tris = Vec::new();
    for n in n_lo..=n_hi {
        let shift = 0.5 * n as f64;
        let m_lo = (xmin / eps - shift).floor() as i32 - 2;
        let m_hi = (xmax / eps - shift).ceil() as i32 + 1;
        for m in m_lo..=m_hi {
            for up in [true, false] {
                let t = LatticeTriangle { m, n, up };
                let cs = t.corners();
                if !cs.iter().all(|&v| inside(v)) {
                    continue;
                }
                let centroid = (cs[0].embed(eps) + cs[1].embed(eps) + cs[2].embed(eps)) / 3.0;
                if domain.contains(centroid) {
                    tris.push(t);
                }
            }
        }
    }
    if tris.is_empty() {
        return Err(LatticeError::EmptyApproximation { eps });
    }
    let mut dom = GridDomain::from_triangles(eps, &tris, domain.u0(), domain.ue())?;
    dom.source = Some(domain.clone());
    Ok(dom)
}

/// White/black partition of the boundary vertices of `dom`.
pub fn boundary_arcs(dom: &GridDomain) -> (Vec<LatticeCoord>, Vec<LatticeCoord>) {
    (dom.arc_plus.iter().map(|&i| dom.vertices[i]).collect(), dom.arc_minus.iter().map(|&i| dom.vertices[i]).collect())
}

fn sorted_pair(a: usize, b: usize) -> (u32, u32) {
    if a < b {
        (a as u32, b as u32)
    } else {
        (b as u32, a as u32)
    }
}

/// Keeps the largest edge-connected component (ties: smallest lexicographic vertex).
fn largest_component(tris: &[LatticeTriangle]) -> Vec<LatticeTriangle> {
    let mut by_edge: HashMap<(LatticeCoord, LatticeCoord), Vec<usize>> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        let c = t.corners();
        for k in 0..3 {
            let (a, b) = (c[k], c[(k + 1) % 3]);
            let key = if a < b { (a, b) } else { (b, a) };
            by_edge.entry(key).or_default().push(i);
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); tris.len()];
    for list in by_edge.values() {
        if list.len() == 2 {
            adj[list[0]].push(list[1]);
            adj[list[1]].push(list[0]);
        }
    }
    let mut comp = vec![usize::MAX; tris.len()];
    let mut best: Option<(usize, LatticeCoord, usize)> = None;
    let mut n_comp = 0;
    for start in 0..tris.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        comp[start] = n_comp;
        let mut size = 0;
        let mut min_v = tris[start].corners()[0];
        while let Some(i) = queue.pop_front() {
            size += 1;
            for v in tris[i].corners() {
                min_v = min_v.min(v);
            }
            for &j in &adj[i] {
                if comp[j] == usize::MAX {
                    comp[j] = n_comp;
                    queue.push_back(j);
                }
            }
        }
        let better = match best {
            None => true,
            Some((s, v, _)) => size > s || (size == s && min_v < v),
        };
        if better {
            best = Some((size, min_v, n_comp));
        }
        n_comp += 1;
    }
    let keep = best.map(|b| b.2).unwrap_or(0);
    tris.iter().zip(&comp).filter(|(_, &c)| c == keep).map(|(t, _)| *t).collect()
}

/// Removes triangles at pinch vertices (vertices whose incident triangles form more than
/// one angular run), keeping the longest run. Returns whether anything changed.
fn remove_pinches(tris: &mut Vec<LatticeTriangle>) -> bool {
    let present: HashSet<LatticeTriangle> = tris.iter().copied().collect();
    let mut verts: Vec<LatticeCoord> = tris.iter().flat_map(|t| t.corners()).collect();
    verts.sort();
    verts.dedup();
    let mut drop: HashSet<LatticeTriangle> = HashSet::new();
    for v in verts {
        let flags: [bool; 6] = std::array::from_fn(|k| present.contains(&LatticeTriangle::around(v, k)));
        if flags.iter().all(|&f| f) {
            continue;
        }
        // runs of present triangles, starting after an absent slot
        let start = (0..6).find(|&k| !flags[k]).unwrap();
        let mut runs: Vec<Vec<usize>> = Vec::new();
        let mut cur: Vec<usize> = Vec::new();
        for j in 1..=6 {
            let k = (start + j) % 6;
            if flags[k] {
                cur.push(k);
            } else if !cur.is_empty() {
                runs.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            runs.push(cur);
        }
        if runs.len() > 1 {
            let keep =
                runs.iter().enumerate().max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0))).map(|(i, _)| i).unwrap();
            for (i, run) in runs.iter().enumerate() {
                if i != keep {
                    drop.extend(run.iter().map(|&k| LatticeTriangle::around(v, k)));
                }
            }
        }
    }
    if drop.is_empty() {
        return false;
    }
    tris.retain(|t| !drop.contains(t));
    true
}

impl GridDomain {
    /// Builds a domain from an explicit triangle set: keeps the largest edge-connected,
    /// pinch-free component and snaps the marks `u0`, `ue` to boundary-edge midpoints.
    pub fn from_triangles(
        eps: f64,
        triangles: &[LatticeTriangle],
        u0: Complex64,
        ue: Complex64,
    ) -> Result<GridDomain, LatticeError> {
        if !(eps > 0.0) {
            return Err(LatticeError::NonPositiveMesh(eps));
        }
        let mut tris: Vec<LatticeTriangle> = triangles.to_vec();
        tris.sort();
        tris.dedup();
        if tris.is_empty() {
            return Err(LatticeError::EmptyApproximation { eps });
        }
        loop {
            tris = largest_component(&tris);
            if !remove_pinches(&mut tris) {
                break;
            }
            if tris.is_empty() {
                return Err(LatticeError::EmptyApproximation { eps });
            }
        }
        tris.sort();

        let mut vertices: Vec<LatticeCoord> = tris.iter().flat_map(|t| t.corners()).collect();
        vertices.sort();
        vertices.dedup();
        let index: HashMap<LatticeCoord, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let triangles: Vec<[usize; 3]> = tris.iter().map(|t| t.corners().map(|v| index[&v])).collect();

        let mut edge_triangles: HashMap<(u32, u32), [u32; 2]> = HashMap::new();
        for (ti, t) in triangles.iter().enumerate() {
            for k in 0..3 {
                let e = edge_triangles.entry(sorted_pair(t[k], t[(k + 1) % 3])).or_insert([NO_TRIANGLE; 2]);
                if e[0] == NO_TRIANGLE {
                    e[0] = ti as u32;
                } else {
                    e[1] = ti as u32;
                }
            }
        }
        // directed boundary edges, domain on the left
        let mut next_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut n_boundary_edges = 0;
        for t in &triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if edge_triangles[&sorted_pair(a, b)][1] == NO_TRIANGLE {
                    next_of.insert(a, b);
                    n_boundary_edges += 1;
                }
            }
        }
        let (&first, _) = next_of.iter().next().expect("a finite triangle set has a boundary");
        let mut boundary_cycle = Vec::with_capacity(n_boundary_edges);
        let mut a = first;
        loop {
            let b = next_of[&a];
            boundary_cycle.push((a, b));
            a = b;
            if a == first || boundary_cycle.len() > n_boundary_edges {
                break;
            }
        }
        if boundary_cycle.len() != n_boundary_edges || a != first {
            return Err(LatticeError::NotSimplyConnected { boundary_edges: n_boundary_edges, cycle_len: boundary_cycle.len() });
        }
        let mut on_boundary = vec![false; vertices.len()];
        for &(a, _) in &boundary_cycle {
            on_boundary[a] = true;
        }
        let neighbor_table: Vec<[u32; 6]> =
            vertices.iter().map(|v| v.neighbors().map(|w| index.get(&w).map_or(NO_VERTEX, |&i| i as u32))).collect();

        let midpoint = |&(a, b): &(usize, usize)| 0.5 * (vertices[a].embed(eps) + vertices[b].embed(eps));
        let snap = |p: Complex64| -> usize {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, e) in boundary_cycle.iter().enumerate() {
                let d = (midpoint(e) - p).norm();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        };
        let v0_edge = snap(u0);
        let ve_edge = snap(ue);
        if v0_edge == ve_edge {
            return Err(LatticeError::AmbiguousMarks { edge: v0_edge });
        }
        let mut dom = GridDomain {
            mesh: eps,
            vertices,
            index,
            triangles,
            neighbor_table,
            edge_triangles,
            boundary_cycle,
            on_boundary,
            v0_edge,
            ve_edge,
            arc_plus: Vec::new(),
            arc_minus: Vec::new(),
            source: None,
        };
        dom.recolor();
        Ok(dom)
    }

    fn recolor(&mut self) {
        let len = self.boundary_cycle.len();
        let walk = |from_edge: usize, to_edge: usize| -> Vec<usize> {
            // vertices strictly after the midpoint of `from_edge` up to the start of `to_edge`
            let mut out = Vec::new();
            let mut i = from_edge;
            while i != to_edge {
                out.push(self.boundary_cycle[i].1);
                i = (i + 1) % len;
            }
            out
        };
        self.arc_plus = walk(self.v0_edge, self.ve_edge);
        self.arc_minus = walk(self.ve_edge, self.v0_edge);
    }

    /// Same domain with the roles of the two marked midpoints exchanged.
    pub fn with_marks_swapped(&self) -> GridDomain {
        let mut d = self.clone();
        std::mem::swap(&mut d.v0_edge, &mut d.ve_edge);
        d.source = self.source.as_ref().map(|s| s.with_marks_swapped());
        d.recolor();
        d
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn vertices(&self) -> &[LatticeCoord] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn index_of(&self, v: LatticeCoord) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn position(&self, i: usize) -> Complex64 {
        self.vertices[i].embed(self.mesh)
    }

    /// Neighbor indices of vertex `i` in counterclockwise order ([`NO_VERTEX`] if absent).
    pub fn neighbor_table(&self) -> &[[u32; 6]] {
        &self.neighbor_table
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.on_boundary[i]
    }

    pub fn is_interior(&self, i: usize) -> bool {
        !self.on_boundary[i]
    }

    pub fn boundary_cycle(&self) -> &[(usize, usize)] {
        &self.boundary_cycle
    }

    /// Positions of the boundary vertices in counterclockwise order.
    pub fn boundary_polygon(&self) -> Vec<Complex64> {
        self.boundary_cycle.iter().map(|&(a, _)| self.position(a)).collect()
    }

    pub fn v0_edge(&self) -> usize {
        self.v0_edge
    }

    pub fn ve_edge(&self) -> usize {
        self.ve_edge
    }

    pub fn edge_midpoint(&self, a: usize, b: usize) -> Complex64 {
        0.5 * (self.position(a) + self.position(b))
    }

    pub fn v0_hat(&self) -> Complex64 {
        let (a, b) = self.boundary_cycle[self.v0_edge];
        self.edge_midpoint(a, b)
    }

    pub fn ve_hat(&self) -> Complex64 {
        let (a, b) = self.boundary_cycle[self.ve_edge];
        self.edge_midpoint(a, b)
    }

    /// White boundary vertices (counterclockwise arc from `v̂₀` to `v̂ₑ`), in cycle order.
    pub fn arc_plus(&self) -> &[usize] {
        &self.arc_plus
    }

    /// Black boundary vertices (clockwise arc from `v̂₀` to `v̂ₑ`), in cycle order.
    pub fn arc_minus(&self) -> &[usize] {
        &self.arc_minus
    }

    /// Indicator boundary values: 1 on the white arc, 0 on the black arc, `None` inside.
    pub fn indicator_constraints(&self) -> Vec<Option<f64>> {
        let mut c = vec![None; self.vertices.len()];
        for &i in &self.arc_plus {
            c[i] = Some(1.0);
        }
        for &i in &self.arc_minus {
            c[i] = Some(0.0);
        }
        c
    }

    /// The (up to two) triangles sharing the edge `{a, b}`.
    pub fn triangles_on_edge(&self, a: usize, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_triangles
            .get(&sorted_pair(a, b))
            .into_iter()
            .flat_map(|e| e.iter())
            .filter(|&&t| t != NO_TRIANGLE)
            .map(|&t| t as usize)
    }

    pub fn triangle_center(&self, t: usize) -> Complex64 {
        let [a, b, c] = self.triangles[t];
        (self.position(a) + self.position(b) + self.position(c)) / 3.0
    }

    /// The polygon this domain approximates, when built by [`build_domain_approximation`].
    pub fn source(&self) -> Option<&JordanPolygon> {
        self.source.as_ref()
    }

    /// Diameter of the source polygon, or of the boundary polygon when there is none.
    pub fn reference_diameter(&self) -> f64 {
        match &self.source {
            Some(p) => p.diameter(),
            None => geom::diameter(&self.boundary_polygon()),
        }
    }

    /// Debug dump with the documented JSON schema.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            mesh: f64,
            vertices: Vec<[i32; 2]>,
            triangles: &'a [[usize; 3]],
            boundary_cycle: &'a [(usize, usize)],
            v0_edge: usize,
            ve_edge: usize,
            v0_hat: [f64; 2],
            ve_hat: [f64; 2],
            arc_plus: &'a [usize],
            arc_minus: &'a [usize],
        }
        let (v0, ve) = (self.v0_hat(), self.ve_hat());
        serde_json::to_string_pretty(&Dump {
            mesh: self.mesh,
            vertices: self.vertices.iter().map(|v| [v.m, v.n]).collect(),
            triangles: &self.triangles,
            boundary_cycle: &self.boundary_cycle,
            v0_edge: self.v0_edge,
            ve_edge: self.ve_edge,
            v0_hat: [v0.re, v0.im],
            ve_hat: [ve.re, ve.im],
            arc_plus: &self.arc_plus,
            arc_minus: &self.arc_minus,
        })
        .expect("domain serializes")
    }
}
