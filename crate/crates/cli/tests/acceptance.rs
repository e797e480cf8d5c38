//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! The Monte Carlo criteria (5 to 8) share one run of `configs/convergence.json`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use hexplore::analysis::{driving_moment_stats, optimize_exponents};
use hexplore::conformal;
use hexplore::experiment::{run_experiment, ConvergenceReport};
use hexplore::explorer::{martingale_audit, sample_path_walk, ExplorerState};
use hexplore::harmonic::discrete_laplacian_fn;
use hexplore::lattice::{build_domain_approximation, JordanPolygon};
use hexplore::loewner::{extract_driving, sample_sle4_driving, solve_trace, DrivingFunction, SlitStep};
use hexplore::rng::stream_rng;
use hexplore::Complex64;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn half_disk() -> JordanPolygon {
    let text = std::fs::read_to_string(root().join("domains/half_disk.json")).expect("domain file");
    JordanPolygon::from_json(&text).expect("valid domain")
}

fn exponent_table() -> Outcome {
    let start = Instant::now();
    let t = optimize_exponents();
    let secs = start.elapsed().as_secs_f64();
    let want = [(t.beta_star, 0.9079), (t.r_star, 0.8445), (t.nu_star, 0.0778), (t.m_star, 0.0712)];
    let ok = want.iter().all(|(got, w)| (got - w).abs() <= 1e-3) && t.cubic_residual <= 1e-8 && secs < 1.0;
    outcome(
        ok,
        format!(
            "beta* {:.4}, r* {:.4}, nu* {:.4}, m* {:.4}, cubic residual {:.1e}, {:.3} s",
            t.beta_star, t.r_star, t.nu_star, t.m_star, t.cubic_residual, secs
        ),
    )
}

fn laplacian_identities() -> Outcome {
    let dom = build_domain_approximation(&half_disk(), 0.05).expect("domain");
    let eps = dom.mesh();
    let mut rng = stream_rng(2, 0);
    let interior: Vec<usize> = (0..dom.vertex_count()).filter(|&i| dom.is_interior(i)).collect();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let v = dom.vertices()[interior[rng.random_range(0..interior.len())]];
        worst = worst.max(discrete_laplacian_fn(|z| z.re, v, eps).abs());
        worst = worst.max((discrete_laplacian_fn(|z| z.norm_sqr(), v, eps) - eps * eps).abs());
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.2e} over 1000 random interior vertices, want <= 1e-12"))
}

fn martingale() -> Outcome {
    let tol = 1e-10;
    let dom = build_domain_approximation(&half_disk(), 0.05).expect("domain");
    let mut rng = stream_rng(3, 0);
    let mut state = ExplorerState::new(&dom, tol).expect("initial state");
    let (mut pairs, mut worst) = (0usize, 0.0f64);
    while pairs < 120 {
        if state.is_terminated() {
            state = ExplorerState::new(&dom, tol).expect("initial state");
        }
        for _ in 0..4 {
            let i = rng.random_range(0..dom.vertex_count());
            if let Ok((lhs, rhs)) = martingale_audit(&state, dom.vertices()[i]) {
                worst = worst.max((lhs - rhs).abs());
                pairs += 1;
            }
        }
        state = state.step(rng.random()).expect("explorer step");
    }
    outcome(
        worst <= 10.0 * tol,
        format!("{pairs} (state, vertex) pairs, max |E h_next - h_n| {worst:.2e}, want <= {:.0e}", 10.0 * tol),
    )
}

fn loewner_round_trips() -> Outcome {
    let times: Vec<f64> = (0..=256).map(|k| k as f64 / 256.0).collect();
    let zero = DrivingFunction::new(times.clone(), vec![0.0; times.len()]).expect("zero driving");
    let trace = solve_trace(&zero);
    let mut vertical: f64 = 0.0;
    for (t, k) in [(0.25, 64), (1.0, 256)] {
        vertical = vertical.max((trace.points[k] - Complex64::new(0.0, 2.0 * f64::sqrt(t))).norm());
    }

    let mut rng = stream_rng(4, 0);
    let mut duality: f64 = 0.0;
    for _ in 0..20 {
        let steps: Vec<SlitStep> =
            (0..200).map(|_| SlitStep { x: rng.random_range(-1.0..1.0), dcap: rng.random_range(1e-4..1e-2) }).collect();
        let drv = DrivingFunction::from_steps(0.0, &steps);
        let back = extract_driving(&solve_trace(&drv).points).expect("unzip trace");
        for k in 0..drv.len() {
            duality = duality.max((back.values()[k] - drv.values()[k]).abs()).max((back.times()[k] - drv.times()[k]).abs());
        }
    }

    let dom = build_domain_approximation(&half_disk(), 0.02).expect("domain");
    let map = conformal::map_to_halfplane(&dom).expect("map");
    let mut scaling: f64 = 0.0;
    for i in 0..10 {
        let path = sample_path_walk(&dom, 5, i).expect("path");
        let drv = conformal::path_driving(&map, &path, 0.25).expect("driving");
        let curve: Vec<Complex64> = conformal::map_curve_lazy(&map, &path).step_by(2).take(drv.len()).collect();
        for lambda in [0.5, 2.0] {
            let scaled: Vec<Complex64> = curve.iter().map(|z| z * lambda).collect();
            let ws = extract_driving(&scaled).expect("scaled driving");
            for k in 0..drv.len() {
                let dt = (ws.times()[k] - lambda * lambda * drv.times()[k]).abs() / (1.0 + ws.times()[k]);
                let dw = (ws.values()[k] - lambda * drv.values()[k]).abs() / (1.0 + ws.values()[k].abs());
                scaling = scaling.max(dt).max(dw);
            }
        }
    }
    outcome(
        vertical <= 1e-6 && duality <= 1e-9 && scaling <= 1e-9,
        format!(
            "zero driving |gamma - 2i sqrt t| {vertical:.1e} (<= 1e-6), trace/unzip {duality:.1e} (<= 1e-9), scaling on 10 paths {scaling:.1e} (<= 1e-9)"
        ),
    )
}

fn criteria_named<'a>(report: &'a ConvergenceReport, prefix: &str) -> Vec<&'a hexplore::experiment::Criterion> {
    report.criteria.iter().filter(|c| c.name.starts_with(prefix)).collect()
}

fn observable_slope(report: &ConvergenceReport) -> Outcome {
    match &report.observable_fit {
        Some(f) => {
            let errs: Vec<String> = report.entries.iter().map(|e| format!("{}: {:.4}", e.eps, e.observable.mean)).collect();
            outcome(
                (0.3..=0.7).contains(&f.exponent),
                format!(
                    "slope {:.3} ± {:.3} in [0.3, 0.7], C = {:.3}; mean max error {}",
                    f.exponent,
                    f.stderr,
                    f.prefactor,
                    errs.join(", ")
                ),
            )
        }
        None => outcome(false, "no observable fit".into()),
    }
}

fn driving_marginals(report: &ConvergenceReport) -> Outcome {
    let mut checks = criteria_named(report, "marginal eps=0.02 ");
    checks.extend(criteria_named(report, "ks_trend"));
    let passed = checks.len() == 3 && checks.iter().all(|c| c.passed);
    let detail: Vec<String> = checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    outcome(passed, detail.join("; "))
}

fn moment_fixed_point(report: &ConvergenceReport) -> Outcome {
    let eps: f64 = 0.02;
    let horizon = 0.05 + eps.cbrt() + 0.05;
    let bm: Vec<DrivingFunction> =
        (0..10_000).map(|s| sample_sle4_driving(horizon, 1e-3, 9_000 + s).expect("Brownian driving")).collect();
    let st = driving_moment_stats(&bm, eps, 0.05).expect("moment stats");
    let bm_ok = st.mean_inc_z.abs() <= 3.0 && st.var_defect_z.abs() <= 3.0;
    let mut explorer_ok = true;
    let mut rows = Vec::new();
    for e in &report.entries {
        let m = &e.moments;
        explorer_ok &= m.flagged_fraction < 0.05 && m.increment_triggered > 0.0;
        rows.push(format!(
            "eps {}: flagged {:.3}, increment-stopped {:.2}, var_defect {:.3} (z {:.1}, reported)",
            e.eps, m.flagged_fraction, m.increment_triggered, m.var_defect, m.var_defect_z
        ));
    }
    outcome(
        bm_ok && explorer_ok,
        format!(
            "B(4t) x 10^4: mean_inc z {:.2}, var_defect z {:.2} (|z| <= 3); explorer {}",
            st.mean_inc_z,
            st.var_defect_z,
            rows.join("; ")
        ),
    )
}

fn structure_modulus(report: &ConvergenceReport) -> Outcome {
    let Some(entry) = report.entries.iter().find(|e| (e.eps - 0.02).abs() < 1e-12) else {
        return outcome(false, "no eps = 0.02 entry".into());
    };
    let rows: Vec<(f64, f64)> = entry.modulus.iter().filter_map(|m| m.exceedance.map(|x| (m.delta, x))).collect();
    let monotone = rows.windows(2).all(|w| w[1].1 <= w[0].1);
    let bound = rows.iter().find(|r| (r.0 - 0.2).abs() < 1e-12).map(|r| r.1);
    let passed = rows.len() == 3 && monotone && bound.is_some_and(|b| b <= 0.3);
    let table: Vec<String> = rows.iter().map(|(d, x)| format!("delta {d}: {x:.3}")).collect();
    outcome(
        passed,
        format!(
            "P(eta(delta) > delta^0.8) {}; non-increasing: {monotone}; <= 0.3 at delta 0.2: {}",
            table.join(", "),
            bound.is_some_and(|b| b <= 0.3)
        ),
    )
}

fn run(bin: &str, args: &[&str]) -> Result<(), String> {
    let status = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
    if status.status.success() || status.status.code() == Some(4) {
        Ok(())
    } else {
        Err(format!("{bin} {args:?}: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let explorer = env!("CARGO_BIN_EXE_explorer");
    let sle = env!("CARGO_BIN_EXE_sle");
    let analyze = env!("CARGO_BIN_EXE_analyze");
    let domain = root().join("domains/half_disk.json");
    let domain = domain.to_str().expect("utf-8 path");
    let config = root().join("configs/quick.json");
    let config = config.to_str().expect("utf-8 path");
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let p = |name: &str| d.join(format!("{k}_{name}")).to_string_lossy().into_owned();
        let jobs: Vec<(&str, Vec<String>)> = vec![
            (
                explorer,
                vec!["sample", "--domain", domain, "--eps", "0.1", "--seed", "7", "--threads", threads, "--out", &p("exact.csv")]
                    .into_iter()
                    .map(String::from)
                    .collect(),
            ),
            (
                explorer,
                vec![
                    "sample",
                    "--domain",
                    domain,
                    "--eps",
                    "0.03",
                    "--sampler",
                    "walk",
                    "--seed",
                    "7",
                    "--threads",
                    threads,
                    "--out",
                    &p("walk.csv"),
                ]
                .into_iter()
                .map(String::from)
                .collect(),
            ),
            (
                explorer,
                vec!["drive", "--domain", domain, "--path", &p("walk.csv"), "--threads", threads, "--out", &p("drive.csv")]
                    .into_iter()
                    .map(String::from)
                    .collect(),
            ),
            (
                sle,
                vec!["trace", "--seed", "11", "--t-max", "0.5", "--dt", "0.002", "--threads", threads, "--out", &p("trace.csv")]
                    .into_iter()
                    .map(String::from)
                    .collect(),
            ),
            (
                analyze,
                vec![
                    "modulus",
                    "--domain",
                    domain,
                    "--path",
                    &p("walk.csv"),
                    "--delta",
                    "0.1",
                    "--threads",
                    threads,
                    "--out",
                    &p("modulus.json"),
                ]
                .into_iter()
                .map(String::from)
                .collect(),
            ),
            (
                analyze,
                vec!["exponents", "--threads", threads, "--out", &p("exponents.json")].into_iter().map(String::from).collect(),
            ),
            (
                analyze,
                vec!["convergence", "--config", config, "--threads", threads, "--out", &p("report")]
                    .into_iter()
                    .map(String::from)
                    .collect(),
            ),
        ];
        for (bin, args) in &jobs {
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            if let Err(e) = run(bin, &args) {
                return outcome(false, e);
            }
        }
    }
    let mut files = vec!["exact.csv", "walk.csv", "drive.csv", "trace.csv", "modulus.json", "exponents.json"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for f in ["report.json", "variance.csv", "summary.csv", "modulus.csv", "variance.svg", "fits.svg"] {
        files.push(format!("report/{f}"));
    }
    for f in &files {
        let a = std::fs::read(d.join(format!("0_{f}")));
        let b = std::fs::read(d.join(format!("1_{f}")));
        match (a, b) {
            (Ok(a), Ok(b)) if a == b => compared += 1,
            _ => mismatches.push(f.clone()),
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{compared} outputs byte-identical across --threads 1 and 3; mismatches: {mismatches:?}"),
    )
}

fn main() {
    let mut failed = 0;
    let mut line = |k: usize, name: &str, o: Outcome| {
        println!("criterion {k} {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    };
    line(1, "exponent table", exponent_table());
    line(2, "discrete Laplacian identities", laplacian_identities());
    line(3, "martingale audit", martingale());
    line(4, "Loewner round trips", loewner_round_trips());

    let (cfg, poly) = hexplore_cli::load_config(&root().join("configs/convergence.json")).expect("acceptance config");
    let start = Instant::now();
    let report = run_experiment(&cfg, &poly, 0).expect("convergence run");
    eprintln!("convergence run: {:.0} s", start.elapsed().as_secs_f64());
    line(5, "observable error slope", observable_slope(&report));
    line(6, "driving marginals", driving_marginals(&report));
    line(7, "moment-estimate fixed point", moment_fixed_point(&report));
    line(8, "structure modulus", structure_modulus(&report));
    line(9, "determinism", determinism());

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
