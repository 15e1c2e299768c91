//! A quick invariant suite over the built-in systems, run by the `selftest`
//! subcommand. Every check is deterministic for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cocycle::{integral_reports, norm_series, JENSEN_SLACK};
use crate::curve::{decompose_eps_bounded, pieces_cover_unit_interval, piece_count, Curve};
use crate::dynamics::{cocycle_jacobian, Point2, SurfaceSystem};
use crate::entropy::{greedy_separated_set, greedy_spanning_set, verify_separated};
use crate::error::{Error, Result};
use crate::linalg::operator_norm;
use crate::oscillator::{cos_integral_sweep, monotonicity_count_audit, theoretical_rate};
use crate::polyline::curve_growth_series;
use crate::sampling::SamplePlan;
use crate::times::{geometric_gap_audit, geometric_times_from};
use crate::zoo;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.to_string(), pass, detail }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((pass, detail)) => Check::new(name, pass, detail),
            Err(e) => Check::new(name, false, format!("error: {e}")),
        }
    }
}

/// The built-in systems with their default parameters.
pub fn builtin_systems() -> Vec<SurfaceSystem> {
    vec![
        zoo::cat(),
        zoo::identity(),
        zoo::shear(),
        zoo::make_diag_linear(1.5).expect("valid parameter"),
        zoo::make_standard_map(6.0).expect("valid parameter"),
        zoo::make_perturbed_cat(0.05).expect("valid parameter"),
    ]
}

/// Systems whose Jacobian does not depend on the point.
pub fn has_constant_jacobian(system: &SurfaceSystem) -> bool {
    let probes = [Point2::new(0.13, 0.71), Point2::new(0.52, 0.29), Point2::new(0.87, 0.44)];
    let j0 = system.jacobian(probes[0]);
    probes.iter().all(|&p| system.jacobian(p).max_abs_diff(&j0) == 0.0)
}

/// Geometric times straight from the definition, `O(n²)`.
pub fn geometric_times_brute_force(rho_prime: &[f64], tau: f64) -> Vec<usize> {
    (1..=rho_prime.len())
        .filter(|&m| (0..m).all(|k| rho_prime[k..m].iter().sum::<f64>() >= tau * (m - k) as f64))
        .collect()
}

fn random_point(system: &SurfaceSystem, rng: &mut ChaCha8Rng) -> Point2 {
    match system.domain.extent() {
        Some(r) if r.is_bounded() => Point2::new(
            r.u_min + (r.u_max - r.u_min) * rng.random::<f64>(),
            r.v_min + (r.v_max - r.v_min) * rng.random::<f64>(),
        ),
        _ => Point2::new(rng.random(), rng.random()),
    }
}

fn jensen() -> Result<(bool, String)> {
    let mut worst = f64::INFINITY;
    let mut worst_constant: f64 = 0.0;
    for sys in builtin_systems() {
        let plan = SamplePlan::grid(32);
        // open systems are checked only up to the horizon where samples remain
        let mut reports = Vec::new();
        for n in 1..=8 {
            match integral_reports(&sys, &plan, &[n]) {
                Ok(r) => reports.extend(r),
                Err(Error::NoSamples(_)) if n > 1 => break,
                Err(e) => return Err(e),
            }
        }
        for r in &reports {
            worst = worst.min(r.jensen_gap);
            if has_constant_jacobian(&sys) {
                worst_constant = worst_constant.max(r.jensen_gap.abs());
            }
        }
    }
    Ok((
        worst >= -JENSEN_SLACK && worst_constant <= JENSEN_SLACK,
        format!("min gap {worst:.3e}, max constant-Jacobian gap {worst_constant:.3e}"),
    ))
}

fn geometric_oracle(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut mismatches = 0;
    let mut audit_failures = 0;
    for _ in 0..200 {
        let len = rng.random_range(1..=120);
        let tau = rng.random_range(0.5..1.5);
        let rp: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..3.0)).collect();
        let fast = geometric_times_from(&rp, tau);
        if fast != geometric_times_brute_force(&rp, tau) {
            mismatches += 1;
        }
        if !geometric_gap_audit(&rp, &fast, tau) {
            audit_failures += 1;
        }
    }
    (mismatches == 0 && audit_failures == 0, format!("{mismatches} mismatches, {audit_failures} gap-audit failures in 200 sequences"))
}

fn cocycle_algebra(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for sys in builtin_systems() {
        let mut done = 0;
        while done < 500 {
            let x = random_point(&sys, rng);
            let m = rng.random_range(0..=6);
            let n = rng.random_range(0..=6);
            let Ok(whole) = cocycle_jacobian(&sys, x, m + n) else { continue };
            let head = cocycle_jacobian(&sys, x, m)?;
            let Ok(y) = sys.iterate_lift(x, m) else { continue };
            let Ok(tail) = cocycle_jacobian(&sys, y, n) else { continue };
            let prod = tail * head;
            let scale = operator_norm(&tail) * operator_norm(&head);
            worst = worst.max(prod.max_abs_diff(&whole) / scale);
            if operator_norm(&whole) > scale * (1.0 + 1e-9) {
                violations += 1;
            }
            done += 1;
        }
    }
    Ok((worst <= 1e-9 && violations == 0, format!("max relative composition defect {worst:.3e}, {violations} norm violations")))
}

fn decomposition(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut failures = 0;
    let mut total = 0;
    for _ in 0..10 {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(0.55..0.9);
        let omega = rng.random_range(1.0..6.0);
        let amplitude = rng.random_range(0.0..0.1) / (omega * omega);
        let curve = Curve::wave(
            Point2::new(rng.random(), rng.random()),
            (speed * angle.cos(), speed * angle.sin()),
            amplitude,
            omega,
            rng.random_range(0.0..std::f64::consts::TAU),
        )?;
        for eps in [0.01, 0.004, 0.001] {
            total += 1;
            let pieces = decompose_eps_bounded(&curve, eps)?;
            let mut ok = pieces.len() == piece_count(eps) && pieces_cover_unit_interval(&pieces, 1e-12);
            for p in &pieces {
                ok &= p.curve.is_eps_bounded(eps)?;
            }
            if !ok {
                failures += 1;
            }
        }
    }
    Ok((failures == 0, format!("{failures} failures in {total} decompositions")))
}

fn sandwich(seed: u64) -> Result<(bool, String)> {
    let cat = zoo::cat();
    let cloud = SamplePlan::stratified(50, seed).shuffled_cloud(&cat, seed)?;
    let mut failures = 0;
    for n in 1..=4 {
        for eps in [0.2, 0.1] {
            let sep = greedy_separated_set(&cat, &cloud, n, eps)?;
            let span = greedy_spanning_set(&cat, &cloud, n, eps)?;
            let span_half = greedy_spanning_set(&cat, &cloud, n, eps / 2.0)?;
            if !(span.len() <= sep.len() && sep.len() <= span_half.len() && verify_separated(&cat, &sep.points, n, eps)?) {
                failures += 1;
            }
        }
    }
    Ok((failures == 0, format!("{failures} failures over n = 1..4, eps in {{0.2, 0.1}}")))
}

fn cat_rates() -> Result<(bool, String)> {
    let cat = zoo::cat();
    let h = cat.known_entropy.expect("cat entropy is known");
    let n_list: Vec<usize> = (1..=20).collect();
    let reports = integral_reports(&cat, &SamplePlan::grid(64), &n_list)?;
    let cocycle = norm_series(&reports)?.extrapolated_rate;
    let curve = curve_growth_series(&cat, &Curve::horizontal_loop(0.0), &n_list, 1e-9)?.extrapolated_rate;
    Ok((
        (cocycle - h).abs() <= 0.05 && (curve - h).abs() <= 0.05,
        format!("cocycle {cocycle:.6}, curve {curve:.6}, entropy {h:.6}"),
    ))
}

fn oscillator_audits() -> Result<(bool, String)> {
    let left = 3f64.powf(0.2);
    let right = 3f64.powf(0.25);
    let continuous = (theoretical_rate(left)? - 3f64.ln() / 5.0).abs() <= 1e-12 && theoretical_rate(right)?.abs() <= 1e-12;
    let cos_failures = cos_integral_sweep(1e-9)?.iter().filter(|r| !r.pass).count();
    let mut mono_failures = 0;
    for a in [1.05, 1.1, 1.2] {
        for n in [5, 10, 15] {
            if !monotonicity_count_audit(a, n)?.pass {
                mono_failures += 1;
            }
        }
    }
    Ok((
        continuous && cos_failures == 0 && mono_failures == 0,
        format!("rate continuous: {continuous}, cos-integral failures {cos_failures}/36, monotonicity failures {mono_failures}/9"),
    ))
}

fn maps_invert(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst_inv: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for sys in builtin_systems() {
        let pts: Vec<Point2> = (0..200).map(|_| random_point(&sys, rng)).collect();
        worst_inv = worst_inv.max(zoo::inverse_defect(&sys, &pts));
        worst_fd = worst_fd.max(zoo::jacobian_fd_defect(&sys, &pts, 1e-6));
    }
    (worst_inv <= 1e-9 && worst_fd <= 1e-5, format!("inverse defect {worst_inv:.3e}, Jacobian FD defect {worst_fd:.3e}"))
}

/// Runs every check; the order of the returned list is fixed.
pub fn run_selftest(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (p, d) = maps_invert(&mut rng);
    let mut checks = vec![Check::new("maps_invert", p, d)];
    checks.push(Check::from_result("jensen_ordering", jensen()));
    let (p, d) = geometric_oracle(&mut rng);
    checks.push(Check::new("geometric_times_oracle", p, d));
    checks.push(Check::from_result("cocycle_algebra", cocycle_algebra(&mut rng)));
    checks.push(Check::from_result("decomposition_contract", decomposition(&mut rng)));
    checks.push(Check::from_result("packing_covering_sandwich", sandwich(seed)));
    checks.push(Check::from_result("cat_map_rates", cat_rates()));
    checks.push(Check::from_result("oscillator_audits", oscillator_audits()));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_matches_hand_example() {
        // partial sums of ρ′ − 1: 1, −1, 0, 2
        let rp = [2.0, -1.0, 2.0, 3.0];
        assert_eq!(geometric_times_brute_force(&rp, 1.0), vec![1, 4]);
        assert_eq!(geometric_times_from(&rp, 1.0), vec![1, 4]);
    }

    #[test]
    fn constant_jacobian_detection() {
        assert!(has_constant_jacobian(&zoo::cat()));
        assert!(!has_constant_jacobian(&zoo::make_standard_map(6.0).unwrap()));
    }
}
