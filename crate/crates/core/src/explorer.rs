//! The harmonic explorer.
//!
//! The path crosses triangles through edges with one white and one black
//! endpoint, keeping white on its right. At each triangle the apex is colored
//! white with probability `h_n(apex)` (then the path leaves through the edge
//! joining the apex to the black endpoint) and black otherwise.
//!
//! Two samplers are provided. [`sample_path`] re-solves the Dirichlet problem
//! after every step and compares a uniform `Z` with `h_n(apex)`.
//! [`sample_path_walk`] colors the apex by the color first hit by a simple
//! random walk started there; the hit probability of white is exactly
//! `h_n(apex)`, so both samplers have the same law.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harmonic::{self, HarmonicError, HarmonicField};
use crate::lattice::{GridDomain, LatticeCoord};
use crate::rng::stream_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorerError {
    #[error("the explorer already reached the terminal midpoint")]
    AlreadyTerminated,
    #[error("step budget of {budget} exceeded")]
    StepBudgetExceeded { budget: usize },
    #[error("explorer left the domain through a boundary edge other than the target")]
    StrayBoundaryExit,
    #[error("vertex ({m}, {n}) is not free in both child configurations")]
    NotInterior { m: i32, n: i32 },
    #[error("Z must lie in [0, 1], got {0}")]
    InvalidUniform(f64),
    #[error("malformed path document: {0}")]
    Parse(String),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Turn {
    /// Apex colored white; exit through the edge to the black endpoint.
    Left,
    /// Apex colored black; exit through the edge to the white endpoint.
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Midpoint,
    Center,
}

/// One consumed random decision. `z` and `p` are absent for walk-sampled steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub z: Option<f64>,
    pub p: Option<f64>,
    pub turn: Turn,
}

/// A sampled explorer path: `v̂₀, c₁, v̂₁, …, c_N, v̂_N` with `v̂_N = v̂ₑ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplorerPath {
    pub mesh: f64,
    pub seed: u64,
    pub stream: u64,
    pub points: Vec<Complex64>,
    pub kinds: Vec<PointKind>,
    /// Apex vertex index and its color (true = white) for each step.
    pub apexes: Vec<(usize, bool)>,
    /// Triangle index crossed at each step.
    pub triangles: Vec<usize>,
    pub log: Vec<StepRecord>,
}

impl ExplorerPath {
    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.triangles.len()
    }

    /// The midpoints `v̂₀, …, v̂_N`.
    pub fn midpoints(&self) -> Vec<Complex64> {
        self.points.iter().step_by(2).copied().collect()
    }

    /// Vertex constraints after `j` steps: the initial boundary colors plus the first `j` apexes.
    pub fn constraints_after(&self, dom: &GridDomain, j: usize) -> Vec<Option<f64>> {
        let mut c = dom.indicator_constraints();
        for &(v, white) in &self.apexes[..j.min(self.apexes.len())] {
            c[v] = Some(if white { 1.0 } else { 0.0 });
        }
        c
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            format!("# eps={:?} seed={} stream={} N={}\nindex,x,y,kind\n", self.mesh, self.seed, self.stream, self.steps());
        for (i, (z, k)) in self.points.iter().zip(&self.kinds).enumerate() {
            let kind = match k {
                PointKind::Midpoint => "midpoint",
                PointKind::Center => "center",
            };
            let _ = writeln!(out, "{i},{:.17e},{:.17e},{kind}", z.re, z.im);
        }
        out
    }

    /// Reads the point polyline back from [`ExplorerPath::to_csv`] output (the step log is not stored).
    pub fn from_csv(text: &str) -> Result<ExplorerPath, ExplorerError> {
        let bad = |s: &str| ExplorerError::Parse(s.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty document"))?;
        let field = |key: &str| -> Result<&str, ExplorerError> {
            header
                .trim_start_matches('#')
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| bad(&format!("header lacks {key}")))
        };
        let mesh: f64 = field("eps")?.parse().map_err(|_| bad("eps"))?;
        let seed: u64 = field("seed")?.parse().map_err(|_| bad("seed"))?;
        let stream: u64 = field("stream").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
        lines.next();
        let mut points = Vec::new();
        let mut kinds = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(line));
            }
            let x: f64 = cols[1].parse().map_err(|_| bad(line))?;
            let y: f64 = cols[2].parse().map_err(|_| bad(line))?;
            points.push(Complex64::new(x, y));
            kinds.push(match cols[3] {
                "midpoint" => PointKind::Midpoint,
                "center" => PointKind::Center,
                _ => return Err(bad(line)),
            });
        }
        Ok(ExplorerPath { mesh, seed, stream, points, kinds, apexes: Vec::new(), triangles: Vec::new(), log: Vec::new() })
    }
}

/// Geometric state shared by both samplers: the current mixed edge and the path so far.
#[derive(Clone, Debug)]
struct Frontier {
    white: usize,
    black: usize,
    prev_triangle: Option<usize>,
    visited: Vec<bool>,
    points: Vec<Complex64>,
    kinds: Vec<PointKind>,
    apexes: Vec<(usize, bool)>,
    triangles: Vec<usize>,
    done: bool,
    budget: usize,
}

impl Frontier {
    fn new(dom: &GridDomain) -> Self {
        let (a0, b0) = dom.boundary_cycle()[dom.v0_edge()];
        Frontier {
            white: b0,
            black: a0,
            prev_triangle: None,
            visited: vec![false; dom.triangle_count()],
            points: vec![dom.v0_hat()],
            kinds: vec![PointKind::Midpoint],
            apexes: Vec::new(),
            triangles: Vec::new(),
            done: false,
            budget: 10 * dom.triangle_count(),
        }
    }

    fn next_apex(&self, dom: &GridDomain) -> Result<(usize, usize), ExplorerError> {
        if self.done {
            return Err(ExplorerError::AlreadyTerminated);
        }
        if self.triangles.len() >= self.budget {
            return Err(ExplorerError::StepBudgetExceeded { budget: self.budget });
        }
        let t = dom
            .triangles_on_edge(self.white, self.black)
            .find(|&t| Some(t) != self.prev_triangle)
            .ok_or(ExplorerError::StrayBoundaryExit)?;
        if self.visited[t] {
            return Err(ExplorerError::StepBudgetExceeded { budget: self.budget });
        }
        let apex =
            dom.triangles()[t].into_iter().find(|&v| v != self.white && v != self.black).expect("triangle has a third vertex");
        Ok((t, apex))
    }

    fn advance(&mut self, dom: &GridDomain, t: usize, apex: usize, white: bool) {
        self.visited[t] = true;
        if white {
            self.white = apex;
        } else {
            self.black = apex;
        }
        self.prev_triangle = Some(t);
        self.points.push(dom.triangle_center(t));
        self.kinds.push(PointKind::Center);
        self.points.push(dom.edge_midpoint(self.white, self.black));
        self.kinds.push(PointKind::Midpoint);
        self.apexes.push((apex, white));
        self.triangles.push(t);
        let (ae, be) = dom.boundary_cycle()[dom.ve_edge()];
        let (lo, hi) = (self.white.min(self.black), self.white.max(self.black));
        self.done = (lo, hi) == (ae.min(be), ae.max(be));
    }

    fn into_path(self, dom: &GridDomain, seed: u64, stream: u64, log: Vec<StepRecord>) -> ExplorerPath {
        ExplorerPath {
            mesh: dom.mesh(),
            seed,
            stream,
            points: self.points,
            kinds: self.kinds,
            apexes: self.apexes,
            triangles: self.triangles,
            log,
        }
    }
}

/// Explorer state carrying the current harmonic function `h_n`.
#[derive(Clone, Debug)]
pub struct ExplorerState<'a> {
    dom: &'a GridDomain,
    frontier: Frontier,
    field: HarmonicField,
    log: Vec<StepRecord>,
}

impl<'a> ExplorerState<'a> {
    /// Initial state: boundary colored, `h_0` solved to `tol`.
    pub fn new(dom: &'a GridDomain, tol: f64) -> Result<Self, ExplorerError> {
        let field = harmonic::solve_with_constraints(dom, dom.indicator_constraints(), tol, None)?;
        Ok(ExplorerState { dom, frontier: Frontier::new(dom), field, log: Vec::new() })
    }

    pub fn domain(&self) -> &'a GridDomain {
        self.dom
    }

    /// Steps taken so far.
    pub fn n(&self) -> usize {
        self.frontier.triangles.len()
    }

    pub fn is_terminated(&self) -> bool {
        self.frontier.done
    }

    pub fn current_midpoint(&self) -> Complex64 {
        *self.frontier.points.last().expect("path starts at v̂₀")
    }

    pub fn previous_midpoint(&self) -> Option<Complex64> {
        let p = &self.frontier.points;
        (p.len() >= 3).then(|| p[p.len() - 3])
    }

    pub fn field(&self) -> &HarmonicField {
        &self.field
    }

    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }

    /// The next apex `v_{n+1}` and `p = h_n(v_{n+1})`.
    pub fn next_apex(&self) -> Result<(LatticeCoord, f64), ExplorerError> {
        let (_, apex) = self.frontier.next_apex(self.dom)?;
        Ok((self.dom.vertices()[apex], self.field.value(apex)))
    }

    /// One explorer step driven by the uniform `z`.
    pub fn step(&self, z: f64) -> Result<ExplorerState<'a>, ExplorerError> {
        let mut next = self.clone();
        next.step_mut(z)?;
        Ok(next)
    }

    fn step_mut(&mut self, z: f64) -> Result<(), ExplorerError> {
        if !(0.0..=1.0).contains(&z) {
            return Err(ExplorerError::InvalidUniform(z));
        }
        let (t, apex) = self.frontier.next_apex(self.dom)?;
        let p = self.field.value(apex);
        // an already colored apex keeps its color, even for z = 0
        let white = if self.field.is_fixed(apex) { p >= 0.5 } else { z <= p };
        if !self.field.is_fixed(apex) {
            let value = if white { 1.0 } else { 0.0 };
            self.field = harmonic::update_after_step(self.dom, &self.field, self.dom.vertices()[apex], value)?;
        }
        self.frontier.advance(self.dom, t, apex, white);
        self.log.push(StepRecord { z: Some(z), p: Some(p), turn: if white { Turn::Left } else { Turn::Right } });
        Ok(())
    }

    /// Finalizes the (possibly unfinished) state as a path record.
    pub fn into_path(self, seed: u64, stream: u64) -> ExplorerPath {
        self.frontier.into_path(self.dom, seed, stream, self.log)
    }
}

/// Samples a path by re-solving `h_n` after each step; `Z` comes from stream 0 of `seed`.
pub fn sample_path(dom: &GridDomain, seed: u64, tol: f64) -> Result<ExplorerPath, ExplorerError> {
    let mut rng = stream_rng(seed, 0);
    let mut state = ExplorerState::new(dom, tol)?;
    while !state.is_terminated() {
        let z: f64 = rng.random();
        state.step_mut(z)?;
    }
    Ok(state.into_path(seed, 0))
}

/// Samples a path with random-walk apex coloring, drawing from `stream` of `seed`.
pub fn sample_path_walk(dom: &GridDomain, seed: u64, stream: u64) -> Result<ExplorerPath, ExplorerError> {
    let mut rng = stream_rng(seed, stream);
    let mut frontier = Frontier::new(dom);
    // 0 = uncolored, 1 = white, 2 = black
    let mut color: Vec<u8> = vec![0; dom.vertex_count()];
    for &i in dom.arc_plus() {
        color[i] = 1;
    }
    for &i in dom.arc_minus() {
        color[i] = 2;
    }
    let table = dom.neighbor_table();
    let mut log = Vec::new();
    while !frontier.done {
        let (t, apex) = frontier.next_apex(dom)?;
        let white = match color[apex] {
            1 => true,
            2 => false,
            _ => {
                let hit = walk_until_colored(apex, &color, table, &mut rng);
                color[apex] = hit;
                hit == 1
            }
        };
        frontier.advance(dom, t, apex, white);
        log.push(StepRecord { z: None, p: None, turn: if white { Turn::Left } else { Turn::Right } });
    }
    Ok(frontier.into_path(dom, seed, stream, log))
}

fn walk_until_colored(start: usize, color: &[u8], table: &[[u32; 6]], rng: &mut ChaCha8Rng) -> u8 {
    let mut v = start;
    loop {
        v = table[v][rng.random_range(0..6usize)] as usize;
        if color[v] != 0 {
            return color[v];
        }
    }
}

/// Compares `h_n(v)` with `p·h^L(v) + (1 − p)·h^R(v)`; returns `(lhs, rhs)`.
pub fn martingale_audit(state: &ExplorerState<'_>, v: LatticeCoord) -> Result<(f64, f64), ExplorerError> {
    let dom = state.dom;
    let (_, apex) = state.frontier.next_apex(dom)?;
    let vi = dom.index_of(v).ok_or(ExplorerError::NotInterior { m: v.m, n: v.n })?;
    if state.field.is_fixed(vi) || vi == apex {
        return Err(ExplorerError::NotInterior { m: v.m, n: v.n });
    }
    let rhs = state.field.value(vi);
    let p = state.field.value(apex);
    let child = |value: f64| -> Result<f64, ExplorerError> {
        let mut c = state.field.constraints().to_vec();
        c[apex] = Some(value);
        let f = harmonic::solve_with_constraints(dom, c, state.field.tol(), None)?;
        Ok(f.value(vi))
    };
    let lhs = if state.field.is_fixed(apex) { child(p)? } else { p * child(1.0)? + (1.0 - p) * child(0.0)? };
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_domain_approximation, JordanPolygon, LatticeTriangle};
    use std::f64::consts::PI;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn hexstar() -> GridDomain {
        let poly = JordanPolygon::disk(c(0., 0.), 1.05, 64, PI, 0.0);
        build_domain_approximation(&poly, 1.0).unwrap()
    }

    #[test]
    fn single_triangle_is_two_segments() {
        let tri = [LatticeTriangle { m: 0, n: 0, up: true }];
        let dom = GridDomain::from_triangles(1.0, &tri, c(0.5, -0.1), c(0.2, 0.5)).unwrap();
        let path = sample_path(&dom, 3, 1e-10).unwrap();
        assert_eq!(path.steps(), 1);
        assert_eq!(path.points.len(), 3);
        assert_eq!(path.points[1], dom.triangle_center(0));
        assert_eq!(path.points[2], dom.ve_hat());
    }

    #[test]
    fn hexstar_first_step_is_symmetric() {
        let dom = hexstar();
        let s = ExplorerState::new(&dom, 1e-10).unwrap();
        let (apex, p) = s.next_apex().unwrap();
        assert_eq!(apex, LatticeCoord::new(0, 0));
        assert!((p - 0.5).abs() < 1e-12);
        let next = s.step(0.3).unwrap();
        assert_eq!(next.log()[0].turn, Turn::Left);
        let next = s.step(0.7).unwrap();
        assert_eq!(next.log()[0].turn, Turn::Right);
    }

    #[test]
    fn forced_turns() {
        let dom = hexstar();
        let s = ExplorerState::new(&dom, 1e-10).unwrap().step(0.2).unwrap();
        // the center is now white; the next apex is a boundary vertex with p ∈ {0, 1}
        let (_, p) = s.next_apex().unwrap();
        assert!(p == 0.0 || p == 1.0);
        let z = if p == 1.0 { 1.0 } else { 1e-9 };
        let turn = s.step(z).unwrap().log()[1].turn;
        assert_eq!(turn, if p == 1.0 { Turn::Left } else { Turn::Right });
    }

    #[test]
    fn terminal_state_rejects_steps() {
        let tri = [LatticeTriangle { m: 0, n: 0, up: true }];
        let dom = GridDomain::from_triangles(1.0, &tri, c(0.5, -0.1), c(0.2, 0.5)).unwrap();
        let s = ExplorerState::new(&dom, 1e-10).unwrap().step(0.5).unwrap();
        assert!(s.is_terminated());
        assert_eq!(s.step(0.5).unwrap_err(), ExplorerError::AlreadyTerminated);
    }

    #[test]
    fn csv_round_trip() {
        let dom = hexstar();
        let path = sample_path(&dom, 7, 1e-10).unwrap();
        let csv = path.to_csv();
        assert!(csv.starts_with("# eps=1.0 seed=7"));
        let back = ExplorerPath::from_csv(&csv).unwrap();
        assert_eq!(back.points, path.points);
        assert_eq!(back.kinds, path.kinds);
    }
}
