//! Exponent algebra, Monte Carlo estimators and power-law fits.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::conformal::{self, HalfPlaneMap};
use crate::explorer::ExplorerPath;
use crate::geom;
use crate::harmonic::{self, HarmonicError};
use crate::lattice::GridDomain;
use crate::loewner::{self, apply_steps, DrivingFunction};

/// Proportionality constant in the modulus hypothesis `δ > c₀·ε`.
pub const MODULUS_C0: f64 = 2.0;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("(beta, r) = ({beta}, {r}) outside (sqrt(3)/2, 1) x (0, 1)")]
    DomainViolation { beta: f64, r: f64 },
    #[error("need at least 3 distinct points, got {0}")]
    TooFewPoints(usize),
    #[error("errors must be positive, got {0}")]
    NonPositiveError(f64),
    #[error("empty sample set")]
    EmptySamples,
    #[error("only {n} samples reach t = {t} (need 30)")]
    InsufficientSamples { t: f64, n: usize },
    #[error("sample {index} does not reach capacity {t}")]
    SampleTooShort { index: usize, t: f64 },
    #[error("delta = {delta} must exceed {c0}·eps = {}", c0 * eps)]
    DeltaTooSmall { delta: f64, eps: f64, c0: f64 },
    #[error("test vertex at {x}, {y} is closer than {min} to the boundary or the path")]
    TestVertexTooClose { x: f64, y: f64, min: f64 },
    #[error("driving function has {have} steps, checkpoint needs {need}")]
    DrivingTooShort { have: usize, need: usize },
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error(transparent)]
    Conformal(#[from] conformal::ConformalError),
}

// ---------------------------------------------------------------- exponents

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub beta_star: f64,
    pub r_star: f64,
    pub nu_star: f64,
    pub m_star: f64,
    pub cubic_residual: f64,
}

pub fn chi(beta: f64) -> f64 {
    1.5 * beta + 0.5 + beta * beta / (2.0 * (1.0 + beta))
}

/// The three branches `r(1 − β)`, `χ(β) − 2`, `(1 − r)/2`.
pub fn nu_branches(beta: f64, r: f64) -> [f64; 3] {
    [r * (1.0 - beta), -1.5 + 1.5 * beta + beta * beta / (2.0 * (1.0 + beta)), 0.5 - 0.5 * r]
}

/// `(χ, q, ν)` at `(β, r)`.
pub fn exponent_functions(beta: f64, r: f64) -> Result<(f64, f64, f64), AnalysisError> {
    if !(beta > 3f64.sqrt() / 2.0 && beta < 1.0 && r > 0.0 && r < 1.0) {
        return Err(AnalysisError::DomainViolation { beta, r });
    }
    let c = chi(beta);
    let q = (17.0 / 8.0 * beta).min(c - 2.0);
    let nu = nu_branches(beta, r).into_iter().fold(f64::INFINITY, f64::min);
    Ok((c, q, nu))
}

fn cubic(b: f64) -> f64 {
    ((8.0 * b - 14.0) * b - 6.0) * b + 11.0
}

/// Maximizer of `ν` over the open rectangle: `β*` solves the cubic, `r* = 1/(3 − 2β*)`.
pub fn optimize_exponents() -> ExponentTable {
    let (mut lo, mut hi) = (3f64.sqrt() / 2.0, 1.0);
    // cubic > 0 at sqrt(3)/2 and < 0 at 1
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if cubic(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let r = 1.0 / (3.0 - 2.0 * beta);
    let nu = nu_branches(beta, r).into_iter().fold(f64::INFINITY, f64::min);
    ExponentTable { beta_star: beta, r_star: r, nu_star: nu, m_star: nu / (2.0 - beta), cubic_residual: cubic(beta).abs() }
}

impl ExponentTable {
    pub fn to_text(&self) -> String {
        format!(
            "     beta_star={:.4}\n        r_star={:.4}\n       nu_star={:.4}\n        m_star={:.4}\ncubic_residual={:.3e}\n",
            self.beta_star, self.r_star, self.nu_star, self.m_star, self.cubic_residual
        )
    }
}

// ---------------------------------------------------------------- power laws

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr: f64,
    /// Fitted `C` in `err ≈ C·ε^exponent`.
    pub prefactor: f64,
}

/// Least-squares slope of `ln err` against `ln ε`.
pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerLawFit, AnalysisError> {
    let mut eps: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 3 {
        return Err(AnalysisError::TooFewPoints(eps.len()));
    }
    if let Some(&(_, e)) = pairs.iter().find(|p| !(p.1 > 0.0) || !(p.0 > 0.0)) {
        return Err(AnalysisError::NonPositiveError(e));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = if n > 2.0 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(PowerLawFit { exponent: slope, stderr, prefactor: intercept.exp() })
}

// ---------------------------------------------------------------- marginals

/// Asymptotic Kolmogorov–Smirnov critical values `c(α)/√n` for α = 10%, 5%, 1%.
pub const KS_COEFFICIENTS: [(f64, f64); 3] = [(0.10, 1.224), (0.05, 1.358), (0.01, 1.628)];

pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    let c = KS_COEFFICIENTS.iter().find(|(a, _)| (*a - alpha).abs() < 1e-12).map(|p| p.1).unwrap_or(1.628);
    c / (n as f64).sqrt()
}

/// One-sample KS statistic of `xs` against `N(0, var)` (maximal, 1, when `var = 0`).
pub fn ks_statistic_normal(xs: &[f64], var: f64) -> f64 {
    if xs.is_empty() {
        return 1.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let cdf = |x: f64| -> f64 {
        if var > 0.0 {
            Normal::new(0.0, var.sqrt()).expect("positive sd").cdf(x)
        } else if x >= 0.0 {
            1.0
        } else {
            0.0
        }
    };
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub t: f64,
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    /// KS statistic against `N(0, 4t)`.
    pub ks: f64,
    pub ks_crit_1pct: f64,
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

/// Per `t`: mean, variance and KS distance to `N(0, 4t)` of `W(t)` across samples.
pub fn marginal_distance(samples: &[DrivingFunction], t_grid: &[f64]) -> Result<Vec<MarginalRow>, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    t_grid
        .iter()
        .map(|&t| {
            let xs: Vec<f64> = samples.iter().filter_map(|d| d.value_at(t)).collect();
            if xs.len() < 30 {
                return Err(AnalysisError::InsufficientSamples { t, n: xs.len() });
            }
            let (mean, var) = mean_var(&xs);
            Ok(MarginalRow {
                t,
                n: xs.len(),
                mean,
                var,
                ks: ks_statistic_normal(&xs, 4.0 * t),
                ks_crit_1pct: ks_critical(0.01, xs.len()),
            })
        })
        .collect()
}

// ---------------------------------------------------------------- moments

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub n: usize,
    /// Mean of `W(t_m) − W(t_n)`.
    pub mean_inc: f64,
    pub mean_inc_z: f64,
    /// Mean of `(W(t_m) − W(t_n))² − 4(t_m − t_n)`.
    pub var_defect: f64,
    pub var_defect_z: f64,
    pub stop_indices: Vec<usize>,
    pub flagged: Vec<bool>,
}

impl MomentStats {
    pub fn flagged_fraction(&self) -> f64 {
        self.flagged.iter().filter(|&&f| f).count() as f64 / self.n.max(1) as f64
    }
}

/// Stopping index `m` after `n`: the first `k > n` with `(t_k − t_n) ∨ (W_k − W_n)² ≥ thr`.
/// Returns `(m, flagged)`; flagged samples stop at the last index.
pub fn stopping_index(d: &DrivingFunction, n: usize, thr: f64) -> (usize, bool) {
    let (t, w) = (d.times(), d.values());
    for k in n + 1..t.len() {
        if (t[k] - t[n]).max((w[k] - w[n]).powi(2)) >= thr {
            return (k, false);
        }
    }
    (t.len() - 1, true)
}

pub fn driving_moment_stats(samples: &[DrivingFunction], eps: f64, n_time: f64) -> Result<MomentStats, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    let thr = eps.cbrt();
    let mut incs = Vec::with_capacity(samples.len());
    let mut defects = Vec::with_capacity(samples.len());
    let mut stop_indices = Vec::with_capacity(samples.len());
    let mut flagged = Vec::with_capacity(samples.len());
    for (i, d) in samples.iter().enumerate() {
        let n = d.index_at(n_time).ok_or(AnalysisError::SampleTooShort { index: i, t: n_time })?;
        let (m, flag) = stopping_index(d, n, thr);
        let dw = d.values()[m] - d.values()[n];
        incs.push(dw);
        defects.push(dw * dw - 4.0 * (d.times()[m] - d.times()[n]));
        stop_indices.push(m);
        flagged.push(flag);
    }
    let z = |xs: &[f64]| -> (f64, f64) {
        let (m, v) = mean_var(xs);
        let se = (v / xs.len() as f64).sqrt();
        (m, if se > 0.0 { m / se } else { 0.0 })
    };
    let (mean_inc, mean_inc_z) = z(&incs);
    let (var_defect, var_defect_z) = z(&defects);
    Ok(MomentStats { n: samples.len(), mean_inc, mean_inc_z, var_defect, var_defect_z, stop_indices, flagged })
}

// ---------------------------------------------------------------- observable

/// Lattice vertices on a sublattice of spacing about `spacing`, at distance at least
/// `min_dist` from the domain boundary and from the first `j` steps of `path`.
pub fn select_test_vertices(dom: &GridDomain, path: Option<&ExplorerPath>, j: usize, spacing: f64, min_dist: f64) -> Vec<usize> {
    let stride = ((spacing / dom.mesh()).round() as i32).max(1);
    let boundary = dom.boundary_polygon();
    let prefix: &[Complex64] = match path {
        Some(p) => &p.points[..(2 * j + 1).min(p.points.len())],
        None => &[],
    };
    (0..dom.vertex_count())
        .filter(|&i| {
            let v = dom.vertices()[i];
            v.m.rem_euclid(stride) == 0 && v.n.rem_euclid(stride) == 0 && dom.is_interior(i)
        })
        .filter(|&i| {
            let z = dom.position(i);
            geom::dist_to_polygon_boundary(z, &boundary) >= min_dist && polyline_distance(z, prefix) >= min_dist
        })
        .collect()
}

fn polyline_distance(z: Complex64, pts: &[Complex64]) -> f64 {
    match pts.len() {
        0 => f64::INFINITY,
        1 => (z - pts[0]).norm(),
        _ => pts.windows(2).map(|w| geom::dist_to_segment(z, w[0], w[1])).fold(f64::INFINITY, f64::min),
    }
}

/// Continuum harmonic measure of `(0, ∞)` seen from `z ∈ ℍ`.
pub fn h_tilde(z: Complex64) -> f64 {
    1.0 - z.arg() / std::f64::consts::PI
}

/// `max_v |h_j(v) − h̃(φ_j(v) − W_j)|` over `test_vertices`, where `h_j` solves the
/// Dirichlet problem after `j` explorer steps and `φ_j` is the first `j` slit steps of
/// `drv` composed with `map`. Step `k` of `drv` must correspond to midpoint `k` of `path`.
pub fn observable_error(
    dom: &GridDomain,
    path: &ExplorerPath,
    j: usize,
    map: &HalfPlaneMap,
    drv: &DrivingFunction,
    test_vertices: &[usize],
    tol: f64,
) -> Result<f64, AnalysisError> {
    if drv.len() < j + 1 {
        return Err(AnalysisError::DrivingTooShort { have: drv.len().saturating_sub(1), need: j });
    }
    let min = 0.1 * dom.reference_diameter();
    let boundary = dom.boundary_polygon();
    let prefix = &path.points[..(2 * j + 1).min(path.points.len())];
    for &v in test_vertices {
        let z = dom.position(v);
        if geom::dist_to_polygon_boundary(z, &boundary) < min || polyline_distance(z, prefix) < min {
            return Err(AnalysisError::TestVertexTooClose { x: z.re, y: z.im, min });
        }
    }
    let field = harmonic::solve_with_constraints(dom, path.constraints_after(dom, j), tol, None)?;
    let steps = drv.steps();
    let w = drv.values()[j];
    Ok(test_vertices
        .iter()
        .map(|&v| {
            let zj = apply_steps(map.forward(dom.position(v)), &steps[..j]);
            (field.value(v) - h_tilde(zj - w)).abs()
        })
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------- modulus

/// Path points up to the first one within `sigma` of `target`.
pub fn stop_near(points: &[Complex64], target: Complex64, sigma: f64) -> &[Complex64] {
    let end = points.iter().position(|z| (z - target).norm() <= sigma).unwrap_or(points.len());
    &points[..end.max(1)]
}

/// Fraction of paths whose nested-bottleneck modulus `η(δ)` exceeds `δ^r`, with paths
/// stopped at distance `0.1·diam D` from `v̂ₑ`.
pub fn modulus_exceedance(dom: &GridDomain, samples: &[ExplorerPath], delta: f64, r: f64) -> Result<f64, AnalysisError> {
    let eps = dom.mesh();
    if !(delta > MODULUS_C0 * eps) {
        return Err(AnalysisError::DeltaTooSmall { delta, eps, c0: MODULUS_C0 });
    }
    if samples.is_empty() {
        return Err(AnalysisError::EmptySamples);
    }
    let sigma = 0.1 * dom.reference_diameter();
    let boundary = dom.boundary_polygon();
    let threshold = delta.powf(r);
    let mut hits = 0usize;
    for p in samples {
        let pts = stop_near(&p.points, dom.ve_hat(), sigma);
        if conformal::nested_bottleneck_exceeds(pts, delta, &boundary, dom.ve_hat(), threshold)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

// ---------------------------------------------------------------- traces

/// Sup over capacity times of `ρ(γ_W(t_k), γ_B(t_k))`, where `B` is a speed-4 Brownian
/// path pinned to `W` at every `t_k` and bridged with `sub` sub-steps in between.
pub fn bridged_trace_distance<R: Rng>(drv: &DrivingFunction, sub: usize, rng: &mut R) -> f64 {
    let sub = sub.max(1);
    let (t, w) = (drv.times(), drv.values());
    let mut times = vec![0.0];
    let mut values = vec![w[0]];
    let mut marks = vec![0usize];
    for k in 1..t.len() {
        let (a, b) = (t[k - 1], t[k]);
        let mut prev_t = a;
        let mut prev_w = *values.last().unwrap();
        for j in 1..sub {
            let s = a + (b - a) * j as f64 / sub as f64;
            if !(s > prev_t && s < b) {
                // an interval of a few ulps is not refined
                continue;
            }
            let mean = prev_w + (w[k] - prev_w) * (s - prev_t) / (b - prev_t);
            let var = 4.0 * (s - prev_t) * (b - s) / (b - prev_t);
            let z: f64 = StandardNormal.sample(rng);
            prev_w = mean + var.sqrt() * z;
            prev_t = s;
            times.push(s);
            values.push(prev_w);
        }
        times.push(b);
        values.push(w[k]);
        marks.push(times.len() - 1);
    }
    let fine = DrivingFunction::new(times, values).expect("refined times increase");
    let gw = loewner::solve_trace(drv);
    let gb = loewner::solve_trace(&fine);
    marks.iter().enumerate().map(|(k, &m)| conformal::rho_metric(gw.points[k], gb.points[m])).fold(0.0, f64::max)
}

/// Area of the lattice cell, handy for sample-size heuristics.
pub fn cell_area(eps: f64) -> f64 {
    SQRT3_2 * eps * eps
}
