//! Discrete Dirichlet problem on grid domains.
//!
//! The discrete Laplacian is the six-neighbor mean deviation
//! `Δh(v) = (1/6)·Σ_k [h(v + ε·e^{ikπ/3}) − h(v)]`. Solutions are computed by
//! successive over-relaxation in lexicographic vertex order.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::{GridDomain, LatticeCoord, NO_VERTEX};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Smallest residual threshold the solver will chase; below this, rounding dominates.
const RESIDUAL_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonicError {
    #[error("vertex ({m}, {n}) is missing a neighbor value")]
    MissingNeighbor { m: i32, n: i32 },
    #[error("boundary vertex ({m}, {n}) has no prescribed value")]
    MissingBoundaryValue { m: i32, n: i32 },
    #[error("({m}, {n}) is not a boundary vertex of the domain")]
    NotBoundary { m: i32, n: i32 },
    #[error("({m}, {n}) is not a vertex of the domain")]
    UnknownVertex { m: i32, n: i32 },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("constraint vector has {got} entries, domain has {want} vertices")]
    ShapeMismatch { got: usize, want: usize },
    #[error("no convergence after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },
}

/// Six-neighbor mean deviation of a tabulated field at `v`.
pub fn discrete_laplacian(field: &HashMap<LatticeCoord, f64>, v: LatticeCoord) -> Result<f64, HarmonicError> {
    let at = |w: LatticeCoord| field.get(&w).copied().ok_or(HarmonicError::MissingNeighbor { m: w.m, n: w.n });
    let center = at(v)?;
    let mut s = 0.0;
    for w in v.neighbors() {
        s += at(w)? - center;
    }
    Ok(s / 6.0)
}

/// Six-neighbor mean deviation of a function of the embedded position.
pub fn discrete_laplacian_fn(f: impl Fn(Complex64) -> f64, v: LatticeCoord, eps: f64) -> f64 {
    let center = f(v.embed(eps));
    v.neighbors().iter().map(|w| f(w.embed(eps)) - center).sum::<f64>() / 6.0
}

/// Prescribed values on boundary vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryData {
    pub values: BTreeMap<LatticeCoord, f64>,
}

impl BoundaryData {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, v: LatticeCoord, value: f64) {
        self.values.insert(v, value);
    }

    /// Indicator of the white arc: 1 on `arc_plus`, 0 on `arc_minus`.
    pub fn indicator(dom: &GridDomain) -> Self {
        Self::from_fn(dom, |i| if dom.arc_plus().contains(&i) { 1.0 } else { 0.0 })
    }

    /// Values `f(i)` on every boundary vertex index `i`.
    pub fn from_fn(dom: &GridDomain, mut f: impl FnMut(usize) -> f64) -> Self {
        let values = (0..dom.vertex_count()).filter(|&i| dom.is_boundary(i)).map(|i| (dom.vertices()[i], f(i))).collect();
        Self { values }
    }

    fn to_constraints(&self, dom: &GridDomain) -> Result<Vec<Option<f64>>, HarmonicError> {
        let mut c = vec![None; dom.vertex_count()];
        for (&v, &x) in &self.values {
            let i = dom.index_of(v).ok_or(HarmonicError::UnknownVertex { m: v.m, n: v.n })?;
            if !dom.is_boundary(i) {
                return Err(HarmonicError::NotBoundary { m: v.m, n: v.n });
            }
            c[i] = Some(x);
        }
        Ok(c)
    }
}

/// A discrete harmonic function with prescribed values on a vertex subset.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicField {
    values: Vec<f64>,
    constraints: Vec<Option<f64>>,
    residual: f64,
    tol: f64,
    sweeps: usize,
}

impl HarmonicField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn value_at(&self, dom: &GridDomain, v: LatticeCoord) -> Option<f64> {
        dom.index_of(v).map(|i| self.values[i])
    }

    /// Per-vertex prescribed values (`None` where the field is harmonic).
    pub fn constraints(&self) -> &[Option<f64>] {
        &self.constraints
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.constraints[i].is_some()
    }

    /// Max |Δh| over free vertices at return.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// CSV dump with columns `m,n,value`.
    pub fn to_csv(&self, dom: &GridDomain) -> String {
        let mut out = String::from("m,n,value\n");
        for (v, x) in dom.vertices().iter().zip(&self.values) {
            let _ = writeln!(out, "{},{},{:.17e}", v.m, v.n, x);
        }
        out
    }
}

/// Solves the Dirichlet problem with data on the boundary vertices of `dom`.
pub fn solve_dirichlet(dom: &GridDomain, bd: &BoundaryData, tol: f64) -> Result<HarmonicField, HarmonicError> {
    let c = bd.to_constraints(dom)?;
    solve_with_constraints(dom, c, tol, None)
}

/// Solves with an arbitrary set of fixed vertices (which must include the boundary).
///
/// Iteration stops once the residual is below `tol·(ε/R)²`, `R` the bounding-box
/// diagonal: the expected exit time of the walk is at most `(R/ε)²`, so this keeps
/// the pointwise error below `tol`.
pub fn solve_with_constraints(
    dom: &GridDomain,
    constraints: Vec<Option<f64>>,
    tol: f64,
    warm: Option<&[f64]>,
) -> Result<HarmonicField, HarmonicError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(HarmonicError::InvalidTolerance(tol));
    }
    let nv = dom.vertex_count();
    if constraints.len() != nv {
        return Err(HarmonicError::ShapeMismatch { got: constraints.len(), want: nv });
    }
    let table = dom.neighbor_table();
    let mut free: Vec<u32> = Vec::new();
    for i in 0..nv {
        if constraints[i].is_none() {
            if dom.is_boundary(i) || table[i].contains(&NO_VERTEX) {
                let v = dom.vertices()[i];
                return Err(HarmonicError::MissingBoundaryValue { m: v.m, n: v.n });
            }
            free.push(i as u32);
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in constraints.iter().flatten() {
        lo = lo.min(*x);
        hi = hi.max(*x);
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 0.0;
    }
    let mut values: Vec<f64> = match warm {
        Some(w) if w.len() == nv => w.to_vec(),
        _ => vec![0.5 * (lo + hi); nv],
    };
    for (i, c) in constraints.iter().enumerate() {
        if let Some(x) = c {
            values[i] = *x;
        }
    }

    let threshold = (tol * (dom.mesh() / bounding_diagonal(dom)).powi(2)).max(RESIDUAL_FLOOR).min(tol);
    let rho_j = (1.0 - 5.245 / free.len().max(1) as f64).max(0.0);
    let omega = 2.0 / (1.0 + (1.0 - rho_j * rho_j).sqrt());
    let budget = 50 * nv.max(1);

    let mut sweeps = 0;
    let mut residual = exact_residual(&values, &free, table);
    while residual > threshold {
        if sweeps >= budget {
            return Err(HarmonicError::NonConvergence { sweeps, residual });
        }
        let mut sweep_max = 0.0f64;
        for &i in &free {
            let nb = &table[i as usize];
            let s: f64 = nb.iter().map(|&j| values[j as usize]).sum();
            let r = s / 6.0 - values[i as usize];
            sweep_max = sweep_max.max(r.abs());
            values[i as usize] += omega * r;
        }
        sweeps += 1;
        if sweep_max <= threshold {
            residual = exact_residual(&values, &free, table);
        }
    }
    // the discrete maximum principle holds exactly after clamping to the data range
    for &i in &free {
        let x = &mut values[i as usize];
        *x = x.clamp(lo, hi);
    }
    residual = exact_residual(&values, &free, table);
    Ok(HarmonicField { values, constraints, residual, tol, sweeps })
}

/// Fixes one more vertex and re-solves, warm-started from the old values.
pub fn update_after_step(
    dom: &GridDomain,
    field: &HarmonicField,
    changed: LatticeCoord,
    new_value: f64,
) -> Result<HarmonicField, HarmonicError> {
    let i = dom.index_of(changed).ok_or(HarmonicError::UnknownVertex { m: changed.m, n: changed.n })?;
    let mut c = field.constraints.clone();
    c[i] = Some(new_value);
    solve_with_constraints(dom, c, field.tol, Some(&field.values))
}

fn exact_residual(values: &[f64], free: &[u32], table: &[[u32; 6]]) -> f64 {
    free.iter()
        .map(|&i| {
            let s: f64 = table[i as usize].iter().map(|&j| values[j as usize]).sum();
            (s / 6.0 - values[i as usize]).abs()
        })
        .fold(0.0, f64::max)
}

fn bounding_diagonal(dom: &GridDomain) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..dom.vertex_count() {
        let z = dom.position(i);
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt().max(dom.mesh())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_domain_approximation, JordanPolygon, LatticeTriangle};
    use std::f64::consts::PI;

    fn hexstar() -> GridDomain {
        let poly = JordanPolygon::disk(Complex64::new(0.0, 0.0), 1.05, 64, PI, 0.0);
        build_domain_approximation(&poly, 1.0).unwrap()
    }

    #[test]
    fn roots_of_unity_sum_to_zero() {
        for j in 1..=3 {
            let s: Complex64 = (0..6).map(|k| Complex64::from_polar(1.0, (j * k) as f64 * PI / 3.0)).sum();
            assert!(s.norm() < 1e-12, "j={j}");
        }
    }

    #[test]
    fn laplacian_of_linear_and_quadratic() {
        for &(m, n, eps) in &[(0, 0, 1.0), (3, -7, 0.05), (-12, 40, 0.013)] {
            let v = LatticeCoord::new(m, n);
            assert!(discrete_laplacian_fn(|z| z.re, v, eps).abs() < 1e-12);
            assert!(discrete_laplacian_fn(|_| 3.5, v, eps).abs() < 1e-12);
            assert!((discrete_laplacian_fn(|z| z.norm_sqr(), v, eps) - eps * eps).abs() < 1e-12);
        }
        let mut map = HashMap::new();
        let v = LatticeCoord::new(0, 0);
        map.insert(v, 1.0);
        assert!(matches!(discrete_laplacian(&map, v), Err(HarmonicError::MissingNeighbor { .. })));
        for w in v.neighbors() {
            map.insert(w, 2.0);
        }
        assert_eq!(discrete_laplacian(&map, v).unwrap(), 1.0);
    }

    #[test]
    fn hexstar_center_is_mean() {
        let dom = hexstar();
        let bd = BoundaryData::indicator(&dom);
        let h = solve_dirichlet(&dom, &bd, DEFAULT_TOL).unwrap();
        let c = dom.index_of(LatticeCoord::new(0, 0)).unwrap();
        assert!((h.value(c) - 0.5).abs() < 1e-12);
        let ones = BoundaryData::from_fn(&dom, |_| 1.0);
        let h1 = solve_dirichlet(&dom, &ones, DEFAULT_TOL).unwrap();
        assert!(h1.values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_interior_vertices_match_linear_system() {
        // hexstars around (0,0) and (1,0) merged: two interior vertices
        let mut tris = Vec::new();
        for c in [LatticeCoord::new(0, 0), LatticeCoord::new(1, 0)] {
            for k in 0..6 {
                tris.push(LatticeTriangle::around(c, k));
            }
        }
        let dom = GridDomain::from_triangles(1.0, &tris, Complex64::new(-1.0, 0.0), Complex64::new(2.0, 0.0)).unwrap();
        let a = dom.index_of(LatticeCoord::new(0, 0)).unwrap();
        let b = dom.index_of(LatticeCoord::new(1, 0)).unwrap();
        assert!(dom.is_interior(a) && dom.is_interior(b));
        assert_eq!(dom.vertex_count(), 10);
        let g = |z: Complex64| (z.re * 1.3 + z.im * z.im).sin();
        let bd = BoundaryData::from_fn(&dom, |i| g(dom.position(i)));
        let h = solve_dirichlet(&dom, &bd, DEFAULT_TOL).unwrap();
        // 6x_a = x_b + Sa, 6x_b = x_a + Sb
        let sum_bd = |c: usize, other: usize| -> f64 {
            dom.neighbor_table()[c].iter().filter(|&&j| j as usize != other).map(|&j| g(dom.position(j as usize))).sum()
        };
        let (sa, sb) = (sum_bd(a, b), sum_bd(b, a));
        let xa = (6.0 * sa + sb) / 35.0;
        let xb = (6.0 * sb + sa) / 35.0;
        assert!((h.value(a) - xa).abs() <= DEFAULT_TOL);
        assert!((h.value(b) - xb).abs() <= DEFAULT_TOL);
    }

    #[test]
    fn rejects_bad_inputs() {
        let dom = hexstar();
        let c = LatticeCoord::new(0, 0);
        let mut bd = BoundaryData::indicator(&dom);
        bd.insert(c, 0.3);
        assert!(matches!(solve_dirichlet(&dom, &bd, 1e-10), Err(HarmonicError::NotBoundary { .. })));
        let mut partial = BoundaryData::indicator(&dom);
        let first = *partial.values.keys().next().unwrap();
        partial.values.remove(&first);
        assert!(matches!(solve_dirichlet(&dom, &partial, 1e-10), Err(HarmonicError::MissingBoundaryValue { .. })));
        assert!(matches!(solve_dirichlet(&dom, &BoundaryData::indicator(&dom), 0.0), Err(HarmonicError::InvalidTolerance(_))));
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let dom = hexstar();
        let h = solve_dirichlet(&dom, &BoundaryData::indicator(&dom), 1e-10).unwrap();
        let csv = h.to_csv(&dom);
        assert!(csv.starts_with("m,n,value\n"));
        assert_eq!(csv.lines().count(), 8);
    }
}
