use std::sync::OnceLock;

use hexplore::analysis::{h_tilde, stop_near};
use hexplore::conformal::{map_to_halfplane, nested_bottleneck_modulus, rho_metric, StructureModulusReport};
use hexplore::explorer::{sample_path_walk, ExplorerPath};
use hexplore::harmonic::{solve_dirichlet, BoundaryData};
use hexplore::lattice::{build_domain_approximation, GridDomain, JordanPolygon};
use hexplore::Complex64;
use proptest::prelude::*;

fn half_disk(eps: f64) -> GridDomain {
    build_domain_approximation(&JordanPolygon::half_disk(Complex64::new(0.0, 0.0), 1.0, 256), eps).unwrap()
}

struct Fixture {
    dom: GridDomain,
    paths: Vec<ExplorerPath>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dom = half_disk(0.05);
        let paths = (0..16).map(|i| sample_path_walk(&dom, 3, i).unwrap()).collect();
        Fixture { dom, paths }
    })
}

fn modulus(curve: &[Complex64], delta: f64, boundary: &[Complex64], target: Complex64) -> StructureModulusReport {
    nested_bottleneck_modulus(curve, delta, boundary, target).unwrap()
}

proptest! {
    #[test]
    fn rho_is_comparable_to_euclidean(r1 in 0.0f64..10.0, a1 in 0.0f64..std::f64::consts::PI,
                                      r2 in 0.0f64..10.0, a2 in 0.0f64..std::f64::consts::PI) {
        let z = Complex64::from_polar(r1, a1);
        let w = Complex64::from_polar(r2, a2);
        let d = (z - w).norm();
        let i = Complex64::new(0.0, 1.0);
        let rho = rho_metric(z, w);
        // closed form of the Cayley distance
        prop_assert!((rho - 2.0 * d / ((z + i).norm() * (w + i).norm())).abs() <= 1e-12);
        // |z + i| lies in [1, 11] on the test set, so c = 121/2 works
        let c = 60.5;
        prop_assert!(rho >= d / c - 1e-15 && rho <= c * d + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn modulus_is_monotone_and_at_least_delta(k in 0usize..16, d1 in 0.11f64..0.4, d2 in 0.11f64..0.4) {
        let f = fixture();
        let path = &f.paths[k];
        let curve = stop_near(&path.points, f.dom.ve_hat(), 0.1);
        let boundary = f.dom.boundary_polygon();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let a = modulus(curve, lo, &boundary, f.dom.ve_hat());
        let b = modulus(curve, hi, &boundary, f.dom.ve_hat());
        prop_assert!(a.eta >= lo && b.eta >= hi);
        prop_assert!(a.eta <= b.eta, "eta({lo}) = {} > eta({hi}) = {}", a.eta, b.eta);
    }

    #[test]
    fn modulus_is_invariant_under_rigid_motions(k in 0usize..16, angle in -3.2f64..3.2, tx in -5.0f64..5.0, ty in -5.0f64..5.0) {
        let f = fixture();
        let delta = 0.2137;
        let curve = stop_near(&f.paths[k].points, f.dom.ve_hat(), 0.1);
        let boundary = f.dom.boundary_polygon();
        let base = modulus(curve, delta, &boundary, f.dom.ve_hat());
        let rot = Complex64::from_polar(1.0, angle);
        let shift = Complex64::new(tx, ty);
        let mv = |z: &Complex64| z * rot + shift;
        let curve2: Vec<Complex64> = curve.iter().map(mv).collect();
        let boundary2: Vec<Complex64> = boundary.iter().map(mv).collect();
        let moved = modulus(&curve2, delta, &boundary2, mv(&f.dom.ve_hat()));
        prop_assert!((moved.eta - base.eta).abs() <= 1e-9, "{} vs {}", moved.eta, base.eta);
    }
}

#[test]
fn map_reproduces_the_harmonic_measure_of_the_white_arc() {
    // the j = 0 observable: h_0(v) against 1 − arg(φ(v))/π at vertices away from the boundary
    let mut errors = Vec::new();
    for eps in [0.08, 0.04] {
        let dom = half_disk(eps);
        let map = map_to_halfplane(&dom).unwrap();
        let h = solve_dirichlet(&dom, &BoundaryData::indicator(&dom), 1e-10).unwrap();
        let poly = dom.boundary_polygon();
        let mut worst: f64 = 0.0;
        for i in (0..dom.vertex_count()).filter(|&i| dom.is_interior(i)) {
            let z = dom.position(i);
            let far =
                poly.iter().zip(poly.iter().cycle().skip(1)).all(|(&a, &b)| hexplore::geom::dist_to_segment(z, a, b) >= 0.2);
            if far {
                worst = worst.max((h.value(i) - h_tilde(map.forward(z))).abs());
            }
        }
        errors.push(worst);
    }
    assert!(errors[0] < 0.02 && errors[1] < 0.01, "{errors:?}");
    assert!(errors[1] < errors[0]);
}
