//! Small planar geometry kernel on `Complex64` points.

use num_complex::Complex64;

/// Twice the signed area of the triangle `(a, b, c)`; positive when counterclockwise.
#[inline]
pub fn orient(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

/// Euclidean distance from `p` to the closed segment `[a, b]`.
pub fn dist_to_segment(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    (p - closest_on_segment(p, a, b)).norm()
}

pub fn closest_on_segment(p: Complex64, a: Complex64, b: Complex64) -> Complex64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).re * d.re + (p - a).im * d.im) / len2;
    a + d * t.clamp(0.0, 1.0)
}

/// Whether the open segments `(p1, p2)` and `(q1, q2)` cross at a single interior point.
///
/// Touching at endpoints and collinear overlaps are not reported; `slack` absorbs
/// rounding in the orientation tests.
pub fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64, slack: f64) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > slack && d2 < -slack) || (d1 < -slack && d2 > slack)) && ((d3 > slack && d4 < -slack) || (d3 < -slack && d4 > slack))
}

/// [`orient`] with values within `1e-12·|b − a|·|c − a|` snapped to zero.
///
/// Lattice configurations are either exactly collinear or far from it, so the snap
/// removes rounding noise without merging distinct cases.
#[inline]
pub fn orient_snapped(a: Complex64, b: Complex64, c: Complex64) -> f64 {
    let d = orient(a, b, c);
    if d.abs() <= 1e-12 * (b - a).norm() * (c - a).norm() {
        0.0
    } else {
        d
    }
}

/// Whether the path step `a → b` passes from one side of the chord `[p, q]` to the other.
///
/// Sides are half-open (points on the chord's line count as the negative side), so a
/// polyline running through a chord at a vertex is counted exactly once.
pub fn step_crosses_chord(p: Complex64, q: Complex64, a: Complex64, b: Complex64) -> bool {
    let (d1, d2) = (orient_snapped(p, q, a), orient_snapped(p, q, b));
    if (d1 > 0.0) == (d2 > 0.0) {
        return false;
    }
    let (d3, d4) = (orient_snapped(a, b, p), orient_snapped(a, b, q));
    d3 * d4 <= 0.0 && !(d3 == 0.0 && d4 == 0.0)
}

/// Whether the closed segments `[p1, p2]` and `[q1, q2]` share any point.
pub fn segments_touch(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64, slack: f64) -> bool {
    if segments_cross(p1, p2, q1, q2, slack) {
        return true;
    }
    dist_to_segment(p1, q1, q2) <= slack
        || dist_to_segment(p2, q1, q2) <= slack
        || dist_to_segment(q1, p1, p2) <= slack
        || dist_to_segment(q2, p1, p2) <= slack
}

/// Signed area of a closed polygon (positive when counterclockwise).
pub fn signed_area(poly: &[Complex64]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a.re * b.im - b.re * a.im;
    }
    0.5 * s
}

/// Distance from `p` to the boundary of the closed polygon `poly`.
pub fn dist_to_polygon_boundary(p: Complex64, poly: &[Complex64]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| dist_to_segment(p, poly[i], poly[(i + 1) % n])).fold(f64::INFINITY, f64::min)
}

/// Closest point to `p` on the boundary of `poly`.
pub fn project_to_polygon_boundary(p: Complex64, poly: &[Complex64]) -> Complex64 {
    let n = poly.len();
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for i in 0..n {
        let q = closest_on_segment(p, poly[i], poly[(i + 1) % n]);
        let d = (q - p).norm();
        if d < best_d {
            best_d = d;
            best = q;
        }
    }
    best
}

/// Even-odd point-in-polygon test; points within `slack` of the boundary count as inside.
pub fn point_in_polygon(p: Complex64, poly: &[Complex64], slack: f64) -> bool {
    if dist_to_polygon_boundary(p, poly) <= slack {
        return true;
    }
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.im > p.im) != (b.im > p.im) {
            let x = a.re + (p.im - a.im) / (b.im - a.im) * (b.re - a.re);
            if p.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Ray-casting containment that is stable under rigid motions of lattice data.
///
/// Vertices count as above `p` only if higher by more than `tol`, and the side of each
/// crossing edge uses [`orient_snapped`]. Points on an edge give an arbitrary answer.
pub fn point_in_polygon_snapped(p: Complex64, poly: &[Complex64], tol: f64) -> bool {
    let above = |v: Complex64| v.im - p.im > tol;
    let mut inside = false;
    let mut j = poly.len().saturating_sub(1);
    for i in 0..poly.len() {
        let (a, b) = (poly[j], poly[i]);
        if above(a) != above(b) {
            let (lo, hi) = if above(b) { (a, b) } else { (b, a) };
            if orient_snapped(lo, hi, p) > 0.0 {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Whether the closed polygon has no self-intersections (O(n²) check).
pub fn polygon_is_simple(poly: &[Complex64]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if adjacent {
                // adjacent edges may only share their common vertex
                let shared = if j == i + 1 { b } else { a };
                let (other_mine, other_theirs) = if j == i + 1 { (a, d) } else { (b, c) };
                if orient(other_mine, shared, other_theirs).abs() < 1e-15
                    && ((other_mine - shared).re * (other_theirs - shared).re
                        + (other_mine - shared).im * (other_theirs - shared).im)
                        > 0.0
                {
                    return false;
                }
                continue;
            }
            if segments_touch(a, b, c, d, 0.0) {
                return false;
            }
        }
    }
    true
}

/// Diameter of a point set (convex hull followed by an exhaustive hull scan).
pub fn diameter(points: &[Complex64]) -> f64 {
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for i in 0..hull.len() {
        for j in (i + 1)..hull.len() {
            best = best.max((hull[i] - hull[j]).norm());
        }
    }
    best
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Complex64> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Complex64> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
