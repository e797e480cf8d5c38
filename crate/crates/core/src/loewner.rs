//! Chordal Loewner numerics built on vertical-slit maps.
//!
//! A curve `z₀, z₁, …, z_K` in the closed upper half-plane is unzipped one point
//! at a time: the current image `z'` of the next point defines the slit step
//! `(x, dcap) = (Re z', (Im z')²/4)`, and every remaining point is pushed through
//! `g(z) = x + sqrt((z − x)² + y²)`. The driving function is piecewise constant:
//! `W = W_k` on `(t_{k−1}, t_k]`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoewnerError {
    #[error("curve point {index} reached the boundary after unzipping (Im = {im:e})")]
    PointOnBoundary { index: usize, im: f64 },
    #[error("curve must start on the real line (Im = {0:e})")]
    StartNotReal(f64),
    #[error("curve needs at least two points")]
    TooShort,
    #[error("slit height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("invalid time step dt = {dt} for horizon {t_max}")]
    InvalidStep { dt: f64, t_max: f64 },
    #[error("capacity times must start at 0 and strictly increase (index {0})")]
    NonMonotoneTimes(usize),
    #[error("malformed driving document: {0}")]
    Parse(String),
}

/// Elementary vertical slit at `x` with capacity increment `dcap` (height `2·sqrt(dcap)`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlitStep {
    pub x: f64,
    pub dcap: f64,
}

impl SlitStep {
    pub fn from_height(x: f64, y: f64) -> Self {
        SlitStep { x, dcap: 0.25 * y * y }
    }

    pub fn height(&self) -> f64 {
        2.0 * self.dcap.sqrt()
    }
}

/// Principal square root by the algebraic formula (no trigonometry).
#[inline]
pub fn csqrt(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    if x == 0.0 && y == 0.0 {
        return Complex64::new(0.0, y);
    }
    let t = (0.5 * (x.abs() + x.hypot(y))).sqrt();
    if x >= 0.0 {
        Complex64::new(t, 0.5 * y / t)
    } else {
        Complex64::new(0.5 * y.abs() / t, t.copysign(y))
    }
}

/// The root of `a` in the closed upper half-plane; on the real axis the sign follows `hint`.
#[inline]
fn upper_root(a: Complex64, hint: f64) -> Complex64 {
    let r = csqrt(a);
    if r.im < 0.0 || (r.im == 0.0 && (r.re > 0.0) != (hint >= 0.0)) {
        -r
    } else {
        r
    }
}

/// Forward slit map `x + sqrt((z − x)² + y²)`, onto ℍ from ℍ minus the slit.
pub fn slit_map(z: Complex64, step: SlitStep) -> Complex64 {
    let y = step.height();
    let u = z - step.x;
    // (u − iy)(u + iy) avoids cancellation near the tip
    let a = (u - Complex64::new(0.0, y)) * (u + Complex64::new(0.0, y));
    step.x + upper_root(a, u.re)
}

/// Inverse slit map `x + sqrt((w − x)² − y²)`; `w = x` goes to the tip.
pub fn slit_map_inverse(w: Complex64, step: SlitStep) -> Complex64 {
    let y = step.height();
    let u = w - step.x;
    let a = (u - y) * (u + y);
    step.x + upper_root(a, u.re)
}

/// Half-plane capacity `y²/4` of a vertical slit of height `y`.
pub fn hcap_of_slit(y: f64) -> Result<f64, LoewnerError> {
    if !(y > 0.0) {
        return Err(LoewnerError::NonPositiveHeight(y));
    }
    Ok(0.25 * y * y)
}

/// Pushes `z` through the forward maps of `steps` in order.
pub fn apply_steps(z: Complex64, steps: &[SlitStep]) -> Complex64 {
    steps.iter().fold(z, |z, &s| slit_map(z, s))
}

/// Pulls `w` back through the inverse maps of `steps` in reverse order.
pub fn unapply_steps(w: Complex64, steps: &[SlitStep]) -> Complex64 {
    steps.iter().rev().fold(w, |w, &s| slit_map_inverse(w, s))
}

/// Samples `(t_k, W_k)` with `t₀ = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrivingFunction {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl DrivingFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, LoewnerError> {
        if times.is_empty() || times.len() != values.len() {
            return Err(LoewnerError::TooShort);
        }
        if times[0] != 0.0 {
            return Err(LoewnerError::NonMonotoneTimes(0));
        }
        if let Some(k) = (1..times.len()).find(|&k| !(times[k] > times[k - 1])) {
            return Err(LoewnerError::NonMonotoneTimes(k));
        }
        Ok(DrivingFunction { times, values })
    }

    /// Driving function of a slit-step sequence started from `w0`.
    ///
    /// A step whose capacity is below the resolution of the running time (a tip deep in a
    /// fjord of the earlier curve) still advances time by one ulp, so times stay strictly
    /// increasing and sample `k` stays aligned with step `k`.
    pub fn from_steps(w0: f64, steps: &[SlitStep]) -> Self {
        let mut times = Vec::with_capacity(steps.len() + 1);
        let mut values = Vec::with_capacity(steps.len() + 1);
        times.push(0.0);
        values.push(w0);
        let mut t = 0.0;
        for s in steps {
            t = (t + s.dcap).max(t.next_up());
            times.push(t);
            values.push(s.x);
        }
        DrivingFunction { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn total_capacity(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Slit steps `k = 1..K` with `x = W_k`, `dcap = t_k − t_{k−1}`.
    pub fn steps(&self) -> Vec<SlitStep> {
        (1..self.times.len()).map(|k| SlitStep { x: self.values[k], dcap: self.times[k] - self.times[k - 1] }).collect()
    }

    /// `W(t)` under the left-closed convention `W = W_k` on `(t_{k−1}, t_k]`; `None` past the end.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return self.values.first().copied();
        }
        let k = self.times.partition_point(|&s| s < t);
        self.values.get(k).copied()
    }

    /// First index with `t_k ≥ t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&s| s < t);
        (k < self.times.len()).then_some(k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,W\n");
        for (t, w) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t:.17e},{w:.17e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, LoewnerError> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
            let mut it = line.split(',');
            let mut next = || -> Result<f64, LoewnerError> {
                it.next().and_then(|s| s.trim().parse().ok()).ok_or_else(|| LoewnerError::Parse(line.to_string()))
            };
            times.push(next()?);
            values.push(next()?);
        }
        DrivingFunction::new(times, values)
    }
}

/// Points of a half-plane curve with their capacity times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceCurve {
    pub points: Vec<Complex64>,
    pub times: Vec<f64>,
}

impl TraceCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y\n");
        for (t, z) in self.times.iter().zip(&self.points) {
            let _ = writeln!(out, "{t:.17e},{:.17e},{:.17e}", z.re, z.im);
        }
        out
    }
}

/// Unzips the whole curve.
pub fn extract_driving(curve: &[Complex64]) -> Result<DrivingFunction, LoewnerError> {
    extract_driving_until(curve.iter().copied(), f64::INFINITY)
}

/// Unzips until the accumulated capacity first reaches `t_max`.
///
/// Points are consumed lazily, so an expensive upstream map is only evaluated
/// on the prefix that is actually needed.
pub fn extract_driving_until(curve: impl IntoIterator<Item = Complex64>, t_max: f64) -> Result<DrivingFunction, LoewnerError> {
    let mut it = curve.into_iter();
    let z0 = it.next().ok_or(LoewnerError::TooShort)?;
    if z0.im.abs() > 1e-9 * z0.norm().max(1.0) {
        return Err(LoewnerError::StartNotReal(z0.im));
    }
    let mut steps: Vec<SlitStep> = Vec::new();
    let mut t = 0.0;
    for (k, z) in it.enumerate() {
        if t >= t_max {
            break;
        }
        let z = apply_steps(z, &steps);
        if !(z.im > 0.0) {
            return Err(LoewnerError::PointOnBoundary { index: k + 1, im: z.im });
        }
        let step = SlitStep::from_height(z.re, z.im);
        t += step.dcap;
        steps.push(step);
    }
    if steps.is_empty() {
        return Err(LoewnerError::TooShort);
    }
    Ok(DrivingFunction::from_steps(z0.re, &steps))
}

/// Inserts points so that consecutive points are at most `spacing` apart.
pub fn resample_polyline(points: &[Complex64], spacing: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        if i > 0 {
            let a = points[i - 1];
            let pieces = ((p - a).norm() / spacing).ceil().max(1.0) as usize;
            for j in 1..pieces {
                out.push(a + (p - a) * (j as f64 / pieces as f64));
            }
        }
        out.push(p);
    }
    out
}

/// Tip positions `γ(t_k) = F_{k−1}(W_k + i·y_k)`, with `F_{k−1}` the inverse of the first `k − 1` slit maps.
pub fn solve_trace(drv: &DrivingFunction) -> TraceCurve {
    let steps = drv.steps();
    let mut points = Vec::with_capacity(drv.len());
    points.push(Complex64::new(drv.values()[0], 0.0));
    for (k, s) in steps.iter().enumerate() {
        let tip = Complex64::new(s.x, s.height());
        points.push(unapply_steps(tip, &steps[..k]));
    }
    TraceCurve { points, times: drv.times().to_vec() }
}

/// `W(k·dt) = sqrt(κ)·B(k·dt)` sampled with independent Gaussian increments.
pub fn sample_driving<R: Rng>(kappa: f64, t_max: f64, dt: f64, rng: &mut R) -> Result<DrivingFunction, LoewnerError> {
    if !(dt > 0.0 && dt < t_max && t_max.is_finite()) || !(kappa >= 0.0) {
        return Err(LoewnerError::InvalidStep { dt, t_max });
    }
    let k = (t_max / dt).round() as usize;
    let normal = Normal::new(0.0, (kappa * dt).sqrt()).expect("finite variance");
    let mut times = Vec::with_capacity(k + 1);
    let mut values = Vec::with_capacity(k + 1);
    let mut w = 0.0;
    times.push(0.0);
    values.push(0.0);
    for j in 1..=k {
        w += normal.sample(rng);
        times.push(j as f64 * dt);
        values.push(w);
    }
    Ok(DrivingFunction { times, values })
}

/// SLE₄ driving `B(4t)` on `[0, T]`, from stream 0 of `seed`.
pub fn sample_sle4_driving(t_max: f64, dt: f64, seed: u64) -> Result<DrivingFunction, LoewnerError> {
    sample_driving(4.0, t_max, dt, &mut stream_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    #[test]
    fn slit_map_closed_forms() {
        let s = SlitStep::from_height(0.7, 1.3);
        assert!((slit_map(c(0.7, 1.3), s) - c(0.7, 0.0)).norm() < 1e-15);
        let s = SlitStep::from_height(0.0, 2.0);
        assert!((slit_map(c(0.0, 3.0), s) - c(0.0, 5f64.sqrt())).norm() < 1e-14);
        let s = SlitStep::from_height(0.0, 1.0);
        let r = 100.0;
        let g = slit_map(c(r, 0.0), s);
        assert!((g.re - r - 1.0 / (2.0 * r)).abs() <= 1.0 / r.powi(3));
        assert_eq!(hcap_of_slit(2.0).unwrap(), 1.0);
        assert!(hcap_of_slit(0.0).is_err());
    }

    #[test]
    fn real_axis_goes_to_real_axis() {
        let s = SlitStep::from_height(0.2, 0.5);
        for x in [-3.0, -0.1, 0.19, 0.21, 4.0] {
            let g = slit_map(c(x, 0.0), s);
            assert_eq!(g.im, 0.0);
            assert_eq!(g.re > 0.2, x > 0.2);
        }
        // both sides of the slit
        assert!(slit_map(c(0.2 + 1e-12, 0.3), s).re > 0.2);
        assert!(slit_map(c(0.2 - 1e-12, 0.3), s).re < 0.2);
    }

    #[test]
    fn single_slit_driving() {
        let d = extract_driving(&[c(0.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(d.times(), &[0.0, 0.25]);
        assert_eq!(d.values(), &[0.0, 0.0]);
        assert_eq!(d.value_at(0.1), Some(0.0));
        assert_eq!(d.value_at(0.3), None);
    }

    #[test]
    fn vertical_segment_capacity_converges() {
        for k in [4usize, 64, 1024] {
            let pts: Vec<Complex64> = (0..=k).map(|j| c(0.0, j as f64 / k as f64)).collect();
            let d = extract_driving(&pts).unwrap();
            assert!(d.values().iter().all(|w| w.abs() < 1e-12));
            assert!((d.total_capacity() - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn unresolvable_capacity_still_advances_time() {
        let d = DrivingFunction::from_steps(0.0, &[SlitStep { x: 0.0, dcap: 0.1 }, SlitStep { x: 0.3, dcap: 1e-25 }]);
        assert!(d.times()[2] > d.times()[1]);
        assert!(d.times()[2] - d.times()[1] < 1e-16);
        assert!(DrivingFunction::new(d.times().to_vec(), d.values().to_vec()).is_ok());
    }

    #[test]
    fn zero_driving_trace() {
        let d = DrivingFunction::new(vec![0.0, 0.25, 0.5, 1.0], vec![0.0; 4]).unwrap();
        let tr = solve_trace(&d);
        for (t, z) in tr.times.iter().zip(&tr.points) {
            assert!((z - c(0.0, 2.0 * t.sqrt())).norm() < 1e-12);
        }
    }

    #[test]
    fn boundary_points_are_rejected() {
        let err = extract_driving(&[c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.5)]).unwrap_err();
        assert!(matches!(err, LoewnerError::PointOnBoundary { index: 2, .. }));
        assert!(matches!(extract_driving(&[c(0.0, 1.0), c(0.0, 2.0)]), Err(LoewnerError::StartNotReal(_))));
    }

    #[test]
    fn driving_csv_round_trip_and_time_checks() {
        let d = sample_sle4_driving(1.0, 0.01, 11).unwrap();
        assert_eq!(d.len(), 101);
        assert_eq!(DrivingFunction::from_csv(&d.to_csv()).unwrap(), d);
        assert_eq!(sample_sle4_driving(1.0, 0.01, 11).unwrap(), d);
        assert!(DrivingFunction::new(vec![0.0, 0.1, 0.1], vec![0.0; 3]).is_err());
        assert!(sample_sle4_driving(1.0, 2.0, 1).is_err());
    }

    #[test]
    fn resampling_bounds_spacing() {
        let pts = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.35)];
        let r = resample_polyline(&pts, 0.1);
        assert!(r.windows(2).all(|w| (w[1] - w[0]).norm() <= 0.1 + 1e-15));
        assert_eq!(r.first(), Some(&pts[0]));
        assert_eq!(r.last(), Some(&pts[2]));
    }
}
