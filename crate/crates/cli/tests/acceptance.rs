//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use serde_json::json;
use tangent_cli::report::to_json;
use tangent_cli::{run, ExperimentConfig, Report, RunOptions};
use tangent_core::degree_mc::{quadrature_oracle, Integrand, MonteCarlo};
use tangent_core::gauss_space::BasisSpec;
use tangent_core::jump_process::JumpPath;
use tangent_core::seeding::{stream, Purpose};
use tangent_core::shift_map::ShiftOperator;

const SEED: u64 = 1;

/// Configs already run with one worker, kept for the determinism criterion.
static RUNS: Mutex<Vec<(String, ExperimentConfig, String)>> = Mutex::new(Vec::new());

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn evenly_spaced_events(sizes: &[f64]) -> serde_json::Value {
    let step = 1.0 / (sizes.len() + 1) as f64;
    sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| json!({"time": (i + 1) as f64 * step, "size": s}))
        .collect()
}

fn config(sizes: &[f64], dimension: usize, kind: &str, experiment: serde_json::Value) -> ExperimentConfig {
    let doc = json!({
        "seed": SEED,
        "horizon": 1.0,
        "basis": {"dimension": dimension, "kind": kind},
        "process": {"type": "fixed_jumps", "events": evenly_spaced_events(sizes)},
        "eps": 0.0,
        "experiment": experiment,
    });
    serde_json::from_value(doc).expect("acceptance config parses")
}

fn run_logged(label: &str, cfg: &ExperimentConfig) -> Report {
    let report = run(cfg, &RunOptions { workers: 1, timing: false }).unwrap_or_else(|e| panic!("{label}: {e}"));
    let text = to_json(&report).expect("report serializes");
    RUNS.lock().unwrap().push((label.to_string(), cfg.clone(), text));
    report
}

fn check(report: &Report, name: &str) -> (bool, f64, f64) {
    let c = report.checks.iter().find(|c| c.name == name).unwrap_or_else(|| panic!("missing check {name}"));
    (c.passed, c.value, c.target)
}

fn failed_checks(report: &Report) -> Vec<String> {
    report.checks.iter().filter(|c| !c.passed).map(|c| format!("{}={}", c.name, c.value)).collect()
}

/// Eight sizes drawn once, uniform on (−0.25, 2.0).
fn degree_sizes() -> Vec<f64> {
    let mut rng = stream(SEED, Purpose::JumpSizes, 0);
    (0..8).map(|_| rng.random_range(-0.25..2.0)).collect()
}

fn degree_like(kind: &str) -> Outcome {
    let sizes = degree_sizes();
    let mut with_flip = sizes.clone();
    with_flip.push(-1.9);
    let mut detail = Vec::new();
    let mut passed = true;
    for (label, sizes, samples, target) in [("8 jumps", &sizes, 100_000, 1.0), ("9 jumps", &with_flip, 1_000_000, -1.0)] {
        let target = if kind == "abs_jacobian" { 1.0 } else { target };
        let cfg = config(sizes, sizes.len(), "abstract", json!({"kind": kind, "samples": samples}));
        let start = Instant::now();
        let report = run_logged(&format!("{kind} {label}"), &cfg);
        let secs = start.elapsed().as_secs_f64();
        let est = &report.estimates[0].estimate;
        let ok = report.passed && est.target == Some(target);
        passed &= ok;
        detail.push(format!(
            "{label}: mean {:.5} ± {:.5} (target {target}, n={}, {secs:.1}s)",
            est.mean, est.stderr, est.n
        ));
    }
    outcome(passed, detail.join("; "))
}

fn criterion_1() -> Outcome {
    degree_like("degree")
}

fn criterion_2() -> Outcome {
    degree_like("abs_jacobian")
}

fn criterion_3() -> Outcome {
    let cfg = config(
        &[0.4, -0.2],
        2,
        "abstract",
        json!({
            "kind": "change_of_variables",
            "samples": 100_000,
            "test_function": {"kind": "cosine_cylinder", "coefficients": [0.7, -1.1]},
            "quadrature_nodes": 64,
        }),
    );
    let report = run_logged("change_of_variables", &cfg);
    let needed = ["residual", "weighted_pushforward_vs_oracle", "plain_vs_oracle"];
    let all_present = needed.iter().all(|n| report.checks.iter().any(|c| c.name == *n));
    let (_, lhs, oracle_lhs) = check(&report, "weighted_pushforward_vs_oracle");
    let (_, rhs, oracle_rhs) = check(&report, "plain_vs_oracle");
    outcome(
        report.passed && all_present,
        format!(
            "residual {:.2e}; E[f∘U·Λ] {lhs:.5} vs oracle {oracle_lhs:.5}; E[f] {rhs:.5} vs oracle {oracle_rhs:.5}; failed {:?}",
            check(&report, "residual").1,
            failed_checks(&report)
        ),
    )
}

fn criterion_4() -> Outcome {
    let cfg = config(
        &[0.5],
        1,
        "abstract",
        json!({
            "kind": "preimage_sum",
            "samples": 100_000,
            "test_function": {"kind": "indicator_box", "lower": [2.5], "upper": [4.0]},
            "test_function_g": {"kind": "indicator_box", "lower": [1.8], "upper": [3.0]},
            "tol": 1e-3,
        }),
    );
    let report = run_logged("preimage_sum", &cfg);
    let (_, left, oracle_left) = check(&report, "left_vs_oracle");
    let (_, right, oracle_right) = check(&report, "right_vs_oracle");
    outcome(
        report.passed,
        format!("left {left:.6} vs {oracle_left:.6}; right {right:.6} vs {oracle_right:.6}; failed {:?}", failed_checks(&report)),
    )
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for lambda in [-1.9, -0.5, 0.0, 0.5, 2.0] {
        let op = ShiftOperator::from_eigenvalues(&[lambda], 1, 0.0).unwrap();
        let signed = quadrature_oracle(&op, Integrand::Jacobian, 128).unwrap();
        let abs = quadrature_oracle(&op, Integrand::AbsJacobian, 128).unwrap();
        let sign = (1.0f64 + lambda).signum();
        worst = worst.max((signed - sign).abs()).max((abs - 1.0).abs());
    }
    outcome(worst <= 1e-8, format!("max deviation {worst:.2e} (128 nodes)"))
}

fn criterion_6() -> Outcome {
    let mut passed = true;
    let mut detail = Vec::new();
    for (label, sizes) in [("middle", vec![0.3, -1.0, 0.8]), ("alone", vec![-1.0]), ("last", vec![1.5, -0.4, -1.0])] {
        let path = JumpPath::evenly_spaced(&sizes, 1.0).unwrap();
        let d = path.carleman_determinant(1.0, 0.0).unwrap();
        for kind in ["degree", "abs_jacobian"] {
            let cfg = config(&sizes, sizes.len(), "abstract", json!({"kind": kind, "samples": 20_000}));
            let report = run_logged(&format!("degenerate {label} {kind}"), &cfg);
            let (zero_ok, zero_mean, _) = check(&report, "all_samples_zero");
            let (det_ok, det, _) = check(&report, "det2_zero");
            passed &= report.passed && zero_ok && det_ok && det == 0.0 && zero_mean == 0.0 && d == 0.0;
        }
        detail.push(format!("{label}: D={d}"));
    }
    let poisson: ExperimentConfig = serde_json::from_value(json!({
        "seed": SEED,
        "horizon": 1.0,
        "basis": {"dimension": 64},
        "process": {"type": "compound_poisson", "rate": 6.0,
                    "size_dist": {"kind": "fixed", "sizes": [-1.0, 0.5]}, "max_jumps": 64},
        "experiment": {"kind": "degree", "samples": 20_000},
    }))
    .unwrap();
    let report = run_logged("degenerate compound poisson", &poisson);
    let flagged = report.checks.iter().any(|c| c.name == "all_samples_zero");
    passed &= report.passed && flagged;
    detail.push(format!("compound Poisson path with {} jumps: checked={flagged}", report.jump_count));
    outcome(passed, format!("Λ ≡ 0 and D = 0 in every case ({})", detail.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut passed = true;
    let mut worst_rate = 0.0f64;
    let mut worst_roundtrip = 0.0f64;
    let mut worst_sde = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut failures = Vec::new();
    for trial in 0..24u64 {
        let mut rng = stream(SEED, Purpose::JumpSizes, 100 + trial);
        // even trials keep max |λ| ≤ 0.8 for Picard; odd trials spread over (−3, 3)
        let sizes: Vec<f64> = (0..8)
            .map(|_| loop {
                let s: f64 = if trial % 2 == 0 { rng.random_range(-0.8..=0.8) } else { rng.random_range(-3.0..3.0) };
                if (1.0 + s).abs() > 0.05 {
                    break s;
                }
            })
            .collect();
        let mut cfg = config(&sizes, 63, "schauder", json!({"kind": "invert", "tol": 1e-10}));
        cfg.seed = Some(SEED + trial);
        let report = run_logged(&format!("invert trial {trial}"), &cfg);
        let (_, roundtrip, _) = check(&report, "exact_roundtrip");
        let (_, sde, _) = check(&report, "functional_sde_residual");
        worst_roundtrip = worst_roundtrip.max(roundtrip);
        worst_sde = worst_sde.max(sde);
        if trial % 2 == 0 {
            let (_, rate, rho) = check(&report, "picard_rate");
            let (_, gap, _) = check(&report, "picard_vs_exact");
            worst_rate = worst_rate.max((rate - rho).abs() / rho);
            worst_gap = worst_gap.max(gap);
        }
        if !report.passed {
            failures.push(format!("trial {trial}: {:?}", failed_checks(&report)));
        }
        passed &= report.passed;
    }
    outcome(
        passed,
        format!(
            "24 configs: roundtrip ≤ {worst_roundtrip:.1e}, Picard gap ≤ {worst_gap:.1e}, rate error ≤ {:.1}%, SDE residual ≤ {worst_sde:.1e} {failures:?}",
            100.0 * worst_rate
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = config(&[0.06, -0.04, 0.09, -0.02, 0.03], 5, "abstract", json!({"kind": "evolve", "scales": [1.0, 0.5, 0.25, 0.125]}));
    let report = run_logged("evolve", &cfg);
    let scaling = report.scaling.as_ref().expect("scaling table");
    let rows: Vec<String> = scaling.rows.iter().map(|r| format!("c={} gap={:.3e}", r.scale, r.max_difference)).collect();
    let (ok, slope, _) = check(&report, "scaling_slope");
    outcome(report.passed && ok, format!("slope {slope:.3} (need ≥ 1.8); {}", rows.join(", ")))
}

fn criterion_9() -> Outcome {
    // λ_n = (−1)^n n^{−0.75}, n = 2..=10001; n = 1 would make the operator degenerate
    let sizes: Vec<f64> = (2..=10_001u32).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * f64::from(n).powf(-0.75)).collect();
    let cfg = config(&sizes, sizes.len(), "abstract", json!({"kind": "truncation_study", "levels": 12}));
    let report = run_logged("truncation_study", &cfg);
    let rows = report.truncation.as_ref().expect("truncation table");
    let first = rows.first().unwrap();
    let last = rows.last().unwrap();
    outcome(
        report.passed && rows.len() == 12,
        format!(
            "|D^ε − D^0|: {:.3e} → {:.3e}; distance: {:.3e} → {:.3e} over ε = 2^-1..2^-12",
            first.det2_gap, last.det2_gap, first.distance, last.distance
        ),
    )
}

fn criterion_10() -> Outcome {
    let n = 100_000;
    let dim = 4;
    let mc = MonteCarlo::new(SEED, 1);
    let mut passed = true;
    let mut worst = 0.0f64;
    for coord in 0..dim {
        let [m1, m2, m4] = mc.run(dim, n, |s| {
            let x = s.xi()[coord];
            [x, x * x, x.powi(4)]
        });
        for (m, target) in [(m1, 0.0), (m2, 1.0), (m4, 3.0)] {
            let z = (m.mean() - target).abs() / m.stderr();
            worst = worst.max(z);
            passed &= z <= 5.0;
        }
    }
    let mut gram_err = 0.0f64;
    for dimension in [63, 64, 255] {
        let gram = BasisSpec::schauder(dimension).unwrap().derivative_gram().unwrap();
        for (i, row) in gram.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                gram_err = gram_err.max((v - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    passed &= gram_err <= 1e-10;
    outcome(passed, format!("moments within {worst:.2}σ (mean, E ξ², E ξ⁴ on {dim} coords); Gram error {gram_err:.1e}"))
}

fn criterion_11() -> Outcome {
    let runs = RUNS.lock().unwrap().clone();
    let mut mismatched = Vec::new();
    for (label, cfg, single) in &runs {
        let report = run(cfg, &RunOptions { workers: 4, timing: false }).unwrap();
        if to_json(&report).unwrap() != *single {
            mismatched.push(label.clone());
        }
    }
    outcome(
        mismatched.is_empty() && !runs.is_empty(),
        format!("{} reports compared between 1 and 4 workers; mismatched {mismatched:?}", runs.len()),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("degree identity", criterion_1),
        ("invertibility |Λ|", criterion_2),
        ("change of variables", criterion_3),
        ("preimage sum", criterion_4),
        ("quadrature vs closed form", criterion_5),
        ("degeneracy", criterion_6),
        ("inverse round trip", criterion_7),
        ("Λ recursion consistency", criterion_8),
        ("truncation convergence", criterion_9),
        ("Gaussian model sanity", criterion_10),
        ("worker-count determinism", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion_{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id == *p || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                outcome(false, format!("panicked: {msg}"))
            });
        let status = if result.passed { "PASS" } else { "FAIL" };
        if !result.passed {
            failures += 1;
        }
        println!("{status} {id} {name} [{:.1}s]: {}", start.elapsed().as_secs_f64(), result.detail);
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
