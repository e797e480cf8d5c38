use std::f64::consts::PI;
use std::sync::OnceLock;

use hexplore::harmonic::{discrete_laplacian_fn, solve_dirichlet, solve_with_constraints, BoundaryData};
use hexplore::lattice::{build_domain_approximation, GridDomain, JordanPolygon, LatticeCoord};
use hexplore::Complex64;
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn domain() -> &'static GridDomain {
    static DOM: OnceLock<GridDomain> = OnceLock::new();
    DOM.get_or_init(|| {
        let poly = JordanPolygon::disk(Complex64::new(0.1, -0.2), 0.6, 48, PI, 0.3);
        build_domain_approximation(&poly, 0.06).unwrap()
    })
}

/// Boundary data from a few random Fourier modes of the boundary angle.
fn data(dom: &GridDomain, coef: &[f64]) -> BoundaryData {
    BoundaryData::from_fn(dom, |i| {
        let z = dom.position(i) - Complex64::new(0.1, -0.2);
        let a = z.arg();
        coef.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * a + k as f64).sin()).sum::<f64>() / coef.len() as f64
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_identities(m in -500i32..500, n in -500i32..500, eps in 0.001f64..1.0) {
        let v = LatticeCoord::new(m, n);
        let z = v.embed(eps);
        let scale = 1.0 + z.norm_sqr();
        prop_assert!(discrete_laplacian_fn(|w| w.re, v, eps).abs() <= 1e-12 * scale);
        prop_assert!(discrete_laplacian_fn(|w| w.im, v, eps).abs() <= 1e-12 * scale);
        prop_assert!((discrete_laplacian_fn(|w| w.norm_sqr(), v, eps) - eps * eps).abs() <= 1e-12 * scale);
        prop_assert!(discrete_laplacian_fn(|w| (w * w).re, v, eps).abs() <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linearity(c1 in prop::collection::vec(-1.0f64..1.0, 3), c2 in prop::collection::vec(-1.0f64..1.0, 3),
                 a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let dom = domain();
        let (d1, d2) = (data(dom, &c1), data(dom, &c2));
        let mut mix = BoundaryData::new();
        for (v, x) in &d1.values {
            mix.insert(*v, a * x + b * d2.values[v]);
        }
        let f1 = solve_dirichlet(dom, &d1, TOL).unwrap();
        let f2 = solve_dirichlet(dom, &d2, TOL).unwrap();
        let f = solve_dirichlet(dom, &mix, TOL).unwrap();
        for i in 0..dom.vertex_count() {
            let want = a * f1.value(i) + b * f2.value(i);
            prop_assert!((f.value(i) - want).abs() <= 2.0 * TOL, "vertex {}: {} vs {}", i, f.value(i), want);
        }
    }

    #[test]
    fn uniqueness_and_maximum_principle(c in prop::collection::vec(-1.0f64..1.0, 3), warm in -5.0f64..5.0) {
        let dom = domain();
        let bd = data(dom, &c);
        let f = solve_dirichlet(dom, &bd, TOL).unwrap();
        let constraints = f.constraints().to_vec();
        let start = vec![warm; dom.vertex_count()];
        let g = solve_with_constraints(dom, constraints, TOL, Some(&start)).unwrap();
        let lo = bd.values.values().copied().fold(f64::INFINITY, f64::min);
        let hi = bd.values.values().copied().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..dom.vertex_count() {
            prop_assert!((f.value(i) - g.value(i)).abs() <= 2.0 * TOL);
            prop_assert!(f.value(i) >= lo && f.value(i) <= hi);
        }
    }
}

#[test]
fn discrete_harmonic_data_is_reproduced() {
    // Re z² and Im z are exactly discrete harmonic, so they solve their own Dirichlet problem.
    let dom = domain();
    for f in [|z: Complex64| (z * z).re, |z: Complex64| z.im - 0.3 * z.re] {
        let bd = BoundaryData::from_fn(dom, |i| f(dom.position(i)));
        let h = solve_dirichlet(dom, &bd, TOL).unwrap();
        for i in 0..dom.vertex_count() {
            assert!((h.value(i) - f(dom.position(i))).abs() <= TOL, "vertex {i}");
        }
    }
}

#[test]
fn interior_vertices_have_six_neighbors_in_the_domain() {
    let dom = domain();
    for i in (0..dom.vertex_count()).filter(|&i| dom.is_interior(i)) {
        for w in dom.vertices()[i].neighbors() {
            assert!(dom.index_of(w).is_some());
        }
    }
}
