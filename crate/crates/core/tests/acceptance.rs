//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture`
//! doubles as a readable report.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfent::cocycle::{integral_norm_growth, integral_reports};
use surfent::curve::{decompose_eps_bounded, pieces_cover_unit_interval, Curve};
use surfent::dynamics::cocycle_jacobian;
use surfent::entropy::{
    greedy_separated_set, greedy_spanning_set, katok_estimate, largest_dip, przytycki_audit, verify_separated,
    verify_spanning, DEFAULT_SATURATION,
};
use surfent::oscillator::{cos_integral_sweep, restricted_growth_report, DEFAULT_CELL_BUDGET};
use surfent::polyline::curve_growth_series;
use surfent::sampling::SamplePlan;
use surfent::selftest::{builtin_systems, has_constant_jacobian};
use surfent::times::{geometric_gap_audit, geometric_times_from};
use surfent::{operator_norm, zoo, Point2, SurfaceSystem};

fn report(criterion: u32, pass: bool, detail: String) {
    println!("criterion {criterion}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// `log` of the spectral radius of `[[2, 1], [1, 1]]`, from its
/// characteristic polynomial `x² − 3x + 1`.
fn cat_entropy_oracle() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

fn random_point(system: &SurfaceSystem, rng: &mut ChaCha8Rng) -> Point2 {
    match system.domain.extent() {
        Some(r) if r.is_bounded() => Point2::new(rng.random_range(r.u_min..r.u_max), rng.random_range(r.v_min..r.v_max)),
        _ => Point2::new(rng.random(), rng.random()),
    }
}

#[test]
fn criterion_01_cat_map_three_estimators_agree() {
    let start = Instant::now();
    let h = cat_entropy_oracle();
    let cat = zoo::cat();
    let n_list: Vec<usize> = (1..=30).collect();
    let cocycle = integral_norm_growth(&cat, &SamplePlan::stratified(200, 7), &n_list).unwrap().extrapolated_rate;
    let curve = curve_growth_series(&cat, &Curve::horizontal_loop(0.0), &n_list, 1e-9).unwrap().extrapolated_rate;
    let cloud = SamplePlan::stratified(400, 11).shuffled_cloud(&cat, 11).unwrap();
    let katok = katok_estimate(&cat, &cloud, &(1..=7).collect::<Vec<_>>(), &[0.05], DEFAULT_SATURATION).unwrap()[0]
        .slope
        .expect("at least two unsaturated horizons");
    let elapsed = start.elapsed();
    let pass = (cocycle - h).abs() <= 0.05
        && (curve - h).abs() <= 0.05
        && (katok - h).abs() <= 0.10
        && elapsed <= Duration::from_secs(60);
    report(
        1,
        pass,
        format!("cocycle {cocycle:.6}, curve {curve:.6}, katok(eps=0.05) {katok:.6}, target {h:.6}, {:.1}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_02_oscillator_growth_matches_case_table() {
    // rate = log3/5 for a ≤ 3^{1/5}; log3 − 4 log a up to 3^{1/4}; 0 beyond
    let cases = [(1.10, 3f64.ln() / 5.0), (1.28, 3f64.ln() - 4.0 * 1.28f64.ln()), (1.50, 0.0)];
    let n_list: Vec<usize> = (4..=80).step_by(2).collect();
    let mut lines = Vec::new();
    let mut pass = true;
    for (a, expected) in cases {
        let start = Instant::now();
        let r = restricted_growth_report(a, &n_list, 1e-8, DEFAULT_CELL_BUDGET).unwrap();
        let elapsed = start.elapsed();
        let fit = r.series.extrapolated_rate;
        let last_n = r.series.last().n;
        pass &= (fit - expected).abs() <= 0.03 && last_n >= 20 && elapsed <= Duration::from_secs(300);
        lines.push(format!("a={a}: fit {fit:.5} vs {expected:.5} (n<={last_n}, {:.0}s)", elapsed.as_secs_f64()));
    }
    report(2, pass, lines.join("; "));
}

#[test]
fn criterion_03_cos_integral_sweep_strict() {
    let rows = cos_integral_sweep(1e-9).unwrap();
    let failures = rows.iter().filter(|r| !r.pass || r.truncated.partial_cmp(&r.bound) != Some(std::cmp::Ordering::Greater)).count();
    report(3, rows.len() == 36 && failures == 0, format!("{} points, {failures} failures", rows.len()));
}

#[test]
fn criterion_04_jensen_ordering() {
    let plan = SamplePlan::stratified(64, 3);
    let mut worst_gap = f64::INFINITY;
    let mut worst_equality: f64 = 0.0;
    let mut checked = 0;
    for sys in builtin_systems() {
        let constant = has_constant_jacobian(&sys);
        for n in 1..=10 {
            // open systems lose every sample after a few steps
            let Ok(reports) = integral_reports(&sys, &plan, &[n]) else { break };
            let r = &reports[0];
            checked += 1;
            worst_gap = worst_gap.min(r.log_of_mean - r.mean_of_log);
            if constant {
                worst_equality = worst_equality.max((r.log_of_mean - r.mean_of_log).abs());
            }
        }
    }
    report(
        4,
        worst_gap >= -1e-12 && worst_equality <= 1e-12 && checked >= 40,
        format!("{checked} (system, n) pairs, min gap {worst_gap:.3e}, constant-Jacobian max |gap| {worst_equality:.3e}"),
    );
}

/// Geometric times straight from their definition: `m` qualifies when every
/// block ending at `m` averages at least `tau`.
fn brute_force_geometric(rp: &[f64], tau: f64) -> Vec<usize> {
    (1..=rp.len())
        .filter(|&m| (0..m).all(|k| rp[k..m].iter().sum::<f64>() >= tau * (m - k) as f64))
        .collect()
}

#[test]
fn criterion_05_geometric_times_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let mut audit_failures = 0;
    for i in 0..1000 {
        let len = rng.random_range(1..=200);
        // half the sequences are integer-valued so that ties are exact
        let (rp, tau): (Vec<f64>, f64) = if i % 2 == 0 {
            ((0..len).map(|_| rng.random_range(-2..=4) as f64).collect(), rng.random_range(0..=2) as f64)
        } else {
            ((0..len).map(|_| rng.random_range(-1.0..3.0)).collect(), rng.random_range(0.5..1.5))
        };
        let fast = geometric_times_from(&rp, tau);
        if fast != brute_force_geometric(&rp, tau) {
            mismatches += 1;
        }
        if !geometric_gap_audit(&rp, &fast, tau) {
            audit_failures += 1;
        }
    }
    report(5, mismatches == 0 && audit_failures == 0, format!("1000 sequences, {mismatches} mismatches, {audit_failures} gap-audit failures"));
}

#[test]
fn criterion_06_curve_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = Vec::new();
    for c in 0..50 {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(0.55..0.9);
        let omega = rng.random_range(1.0..8.0);
        let amplitude = rng.random_range(0.0..0.1) / (omega * omega);
        let curve = Curve::wave(
            Point2::new(rng.random(), rng.random()),
            (speed * angle.cos(), speed * angle.sin()),
            amplitude,
            omega,
            rng.random_range(0.0..std::f64::consts::TAU),
        )
        .unwrap();
        curve.check_admissible().unwrap();
        for (eps, expected) in [(1.0 / 100.0, 100), (1.0 / 250.0, 250), (1.0 / 1000.0, 1000)] {
            let pieces = decompose_eps_bounded(&curve, eps).unwrap();
            let bounded = pieces.iter().all(|p| p.curve.is_eps_bounded(eps).unwrap());
            if pieces.len() != expected || !pieces_cover_unit_interval(&pieces, 1e-12) || !bounded {
                failures.push(format!("curve {c} eps {eps}"));
            }
        }
    }
    report(6, failures.is_empty(), format!("150 decompositions, failures: {failures:?}"));
}

#[test]
fn criterion_07_cocycle_composition_and_submultiplicativity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    let systems = builtin_systems();
    for sys in &systems {
        let mut done = 0;
        while done < 10_000 {
            let x = random_point(sys, &mut rng);
            let m = rng.random_range(0..=8);
            let n = rng.random_range(0..=8);
            // Split on the lifted orbit: re-wrapping f^m x onto the torus
            // perturbs its low bits, which chaotic dynamics then amplify.
            let Ok(y) = sys.iterate_lift(x, m) else { continue };
            let Ok(whole) = cocycle_jacobian(sys, x, m + n) else { continue };
            let head = cocycle_jacobian(sys, x, m).unwrap();
            let tail = cocycle_jacobian(sys, y, n).unwrap();
            let scale = operator_norm(&tail) * operator_norm(&head);
            worst = worst.max((tail * head).max_abs_diff(&whole) / scale);
            if operator_norm(&whole) > scale * (1.0 + 1e-9) {
                violations += 1;
            }
            done += 1;
        }
    }
    report(
        7,
        worst <= 1e-9 && violations == 0,
        format!("{} systems x 10^4 triples, max relative defect {worst:.3e}, {violations} norm violations", systems.len()),
    );
}

#[test]
fn criterion_08_packing_covering_sandwich() {
    let cat = zoo::cat();
    let cloud = SamplePlan::stratified(50, 5).shuffled_cloud(&cat, 5).unwrap();
    let mut failures = Vec::new();
    for n in 1..=10 {
        for eps in [0.2, 0.1] {
            let sep = greedy_separated_set(&cat, &cloud, n, eps).unwrap();
            let span = greedy_spanning_set(&cat, &cloud, n, eps).unwrap();
            let span_half = greedy_spanning_set(&cat, &cloud, n, eps / 2.0).unwrap();
            let valid = verify_separated(&cat, &sep.points, n, eps).unwrap()
                && verify_spanning(&cat, &cloud, &span.points, n, eps).unwrap()
                && verify_spanning(&cat, &cloud, &span_half.points, n, eps / 2.0).unwrap();
            if !(valid && span.len() <= sep.len() && sep.len() <= span_half.len()) {
                failures.push(format!("n={n} eps={eps}: {} {} {}", span.len(), sep.len(), span_half.len()));
            }
        }
    }
    report(8, failures.is_empty(), format!("cloud {}, n 1..10, eps {{0.2, 0.1}}, failures: {failures:?}", cloud.len()));
}

#[test]
fn criterion_09_ball_integral_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let centers: Vec<Point2> = (0..8).map(|_| Point2::new(rng.random(), rng.random())).collect();
    let n_list: Vec<usize> = (1..=12).collect();
    let mut lines = Vec::new();
    let mut pass = true;
    for sys in [zoo::cat(), zoo::make_perturbed_cat(0.05).unwrap()] {
        let audit = przytycki_audit(&sys, &centers, &n_list, 0.1, 200).unwrap();
        let dip = largest_dip(&audit.envelope);
        let positive = audit.positive && audit.envelope.iter().all(|e| e.1 > 0.0);
        pass &= positive && dip <= 0.10 && audit.envelope.len() == n_list.len();
        lines.push(format!("{}: positive {positive}, largest dip {:.2}%", sys.name, 100.0 * dip));
    }
    report(9, pass, lines.join("; "));
}

/// Exit code, stdout and the sorted `(name, bytes)` list of written files.
type RunRecord = (i32, Vec<u8>, Vec<(String, Vec<u8>)>);

fn run_cli(args: &[&str], threads: usize, out: &Path) -> RunRecord {
    let output = Command::new(env!("CARGO_BIN_EXE_surfent"))
        .args(args)
        .arg("--threads")
        .arg(threads.to_string())
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .map(|d| {
            d.map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect()
        })
        .unwrap_or_default();
    files.sort();
    (output.status.code().unwrap_or(-1), output.stdout, files)
}

#[test]
fn criterion_10_thread_count_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 2] = [
        &["selftest"],
        &["estimate", "--system", "perturbed-cat", "--method", "cocycle,curve,katok,lambda", "--n", "1..8", "--grid", "60"],
    ];
    let mut lines = Vec::new();
    let mut pass = true;
    for (i, args) in runs.iter().enumerate() {
        let results: Vec<_> = [1, 4, 8].iter().map(|&t| run_cli(args, t, &dir.path().join(format!("run{i}-{t}")))).collect();
        let identical = results.windows(2).all(|w| w[0] == w[1]);
        let ok = results[0].0 == 0 && !results[0].2.is_empty();
        pass &= identical && ok;
        lines.push(format!("`{}`: exit {}, {} files, identical across 1/4/8 threads: {identical}", args[0], results[0].0, results[0].2.len()));
    }
    report(10, pass, lines.join("; "));
}
