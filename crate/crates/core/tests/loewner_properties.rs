use hexplore::loewner::{
    extract_driving, hcap_of_slit, sample_sle4_driving, slit_map, slit_map_inverse, solve_trace, DrivingFunction, SlitStep,
};
use hexplore::Complex64;
use proptest::prelude::*;

/// A polyline from the real axis with strictly increasing height.
fn rising_curve() -> impl Strategy<Value = Vec<Complex64>> {
    (-1.0f64..1.0, prop::collection::vec((-0.6f64..0.6, 0.02f64..0.2), 2..40)).prop_map(|(x0, incs)| {
        let mut z = Complex64::new(x0, 0.0);
        let mut out = vec![z];
        for (dx, dy) in incs {
            z += Complex64::new(dx * dy, dy);
            out.push(z);
        }
        out
    })
}

fn slit_steps() -> impl Strategy<Value = Vec<SlitStep>> {
    prop::collection::vec((-2.0f64..2.0, 1e-4f64..0.05), 1..60)
        .prop_map(|v| v.into_iter().map(|(x, dcap)| SlitStep { x, dcap }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scaling_covariance(curve in rising_curve(), lambda in prop::sample::select(vec![0.5, 2.0, 3.7])) {
        let w = extract_driving(&curve).unwrap();
        let scaled: Vec<Complex64> = curve.iter().map(|z| z * lambda).collect();
        let ws = extract_driving(&scaled).unwrap();
        prop_assert_eq!(w.len(), ws.len());
        for k in 0..w.len() {
            prop_assert!((ws.times()[k] - lambda * lambda * w.times()[k]).abs() <= 1e-9 * (1.0 + ws.times()[k]));
            prop_assert!((ws.values()[k] - lambda * w.values()[k]).abs() <= 1e-9 * (1.0 + ws.values()[k].abs()));
        }
    }

    #[test]
    fn translation_covariance(curve in rising_curve(), c in -5.0f64..5.0) {
        let w = extract_driving(&curve).unwrap();
        let moved: Vec<Complex64> = curve.iter().map(|z| z + c).collect();
        let wm = extract_driving(&moved).unwrap();
        for k in 0..w.len() {
            prop_assert!((wm.times()[k] - w.times()[k]).abs() <= 1e-9 * (1.0 + w.times()[k]));
            prop_assert!((wm.values()[k] - w.values()[k] - c).abs() <= 1e-9);
        }
    }

    #[test]
    fn capacity_is_additive(curve in rising_curve()) {
        let w = extract_driving(&curve).unwrap();
        let total: f64 = w.steps().iter().map(|s| s.dcap).sum();
        prop_assert!((w.total_capacity() - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn trace_and_extraction_are_inverse(steps in slit_steps(), w0 in -1.0f64..1.0) {
        let drv = DrivingFunction::from_steps(w0, &steps);
        let back = extract_driving(&solve_trace(&drv).points).unwrap();
        prop_assert_eq!(back.len(), drv.len());
        for k in 0..drv.len() {
            prop_assert!((back.times()[k] - drv.times()[k]).abs() <= 1e-9);
            prop_assert!((back.values()[k] - drv.values()[k]).abs() <= 1e-9);
        }
    }

    #[test]
    fn slit_map_round_trip(x in -3.0f64..3.0, y in 0.01f64..2.0, re in -5.0f64..5.0, im in 0.001f64..5.0) {
        let step = SlitStep::from_height(x, y);
        let z = Complex64::new(re, im);
        let w = slit_map(z, step);
        prop_assert!(w.im >= 0.0);
        prop_assert!((slit_map_inverse(w, step) - z).norm() <= 1e-9 * (1.0 + z.norm()));
        prop_assert!((hcap_of_slit(y).unwrap() - y * y / 4.0).abs() <= 1e-15);
    }
}

#[test]
fn sle4_marginal_variance() {
    // Var W(t) = 4t for the sampled driving, as an oracle on the sampler itself
    let n = 4000;
    let xs: Vec<f64> = (0..n).map(|s| sample_sle4_driving(0.5, 0.01, s).unwrap().value_at(0.5).unwrap()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // the sample variance of n normals has relative sd sqrt(2/(n-1))
    assert!((var / 2.0 - 1.0).abs() <= 4.0 * (2.0 / (n - 1) as f64).sqrt(), "var {var}");
    assert!(mean.abs() <= 4.0 * (2.0 / n as f64).sqrt(), "mean {mean}");
}
