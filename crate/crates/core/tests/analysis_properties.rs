use hexplore::analysis::{exponent_functions, fit_power_law, ks_critical, ks_statistic_normal, nu_branches, optimize_exponents};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BETA_MIN: f64 = 0.866_025_403_784_438_6;

/// Brute-force maximum of ν on an `n × n` grid of the open rectangle.
fn grid_max(n: usize) -> (f64, f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 1..n {
        let beta = BETA_MIN + (1.0 - BETA_MIN) * i as f64 / n as f64;
        for j in 1..n {
            let r = j as f64 / n as f64;
            let (_, _, nu) = exponent_functions(beta, r).unwrap();
            if nu > best.0 {
                best = (nu, beta, r);
            }
        }
    }
    best
}

#[test]
fn nu_is_the_smallest_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let beta = rng.random_range(BETA_MIN + 1e-9..1.0);
        let r = rng.random_range(1e-9..1.0);
        let (_, _, nu) = exponent_functions(beta, r).unwrap();
        let b = nu_branches(beta, r);
        assert!(b.iter().all(|&x| nu <= x));
        assert!(b.contains(&nu));
    }
}

#[test]
fn optimum_matches_grid_search() {
    let t = optimize_exponents();
    let coarse = grid_max(600);
    let fine = grid_max(1800);
    for (nu, beta, r) in [coarse, fine] {
        assert!((nu - t.nu_star).abs() < 1e-3, "grid nu {nu} vs {}", t.nu_star);
        assert!((beta - t.beta_star).abs() < 1e-2 && (r - t.r_star).abs() < 1e-2);
        assert!(nu <= t.nu_star + 1e-12);
    }
    assert!((coarse.0 - fine.0).abs() < 1e-3);
    let b = nu_branches(t.beta_star, t.r_star);
    assert!((b[0] - b[2]).abs() < 1e-3 && (b[1] - b[2]).abs() < 1e-3);
    assert_eq!(optimize_exponents(), t);
}

#[test]
fn ks_critical_values_scale_with_root_n() {
    assert!((ks_critical(0.01, 500) - 1.628 / 500f64.sqrt()).abs() < 1e-12);
    assert!(ks_critical(0.05, 100) < ks_critical(0.01, 100));
}

proptest! {
    #[test]
    fn power_law_fit_recovers_exponent(a in -2.0f64..2.0, c in 0.01f64..100.0, e0 in 0.001f64..0.5, k in 3usize..7) {
        let pairs: Vec<(f64, f64)> = (0..k).map(|i| {
            let eps = e0 / 1.7f64.powi(i as i32);
            (eps, c * eps.powf(a))
        }).collect();
        let f = fit_power_law(&pairs).unwrap();
        prop_assert!((f.exponent - a).abs() < 1e-9);
        prop_assert!((f.prefactor / c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ks_is_scale_invariant(xs in prop::collection::vec(-3.0f64..3.0, 5..200), s in 0.1f64..10.0, var in 0.1f64..4.0) {
        let d = ks_statistic_normal(&xs, var);
        let scaled: Vec<f64> = xs.iter().map(|x| x * s).collect();
        let ds = ks_statistic_normal(&scaled, var * s * s);
        prop_assert!((d - ds).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&d));
    }
}
