//! Growth of `∫‖Df^n‖` and `∫log‖Df^n‖` over sample plans, with Jensen,
//! Fubini and locality audits.
//!
//! Integrals are area-normalized means, which shifts `log ∫` by a constant
//! and leaves growth rates unchanged. Each sample point is iterated once up
//! to the largest requested horizon; its log-norms at the requested
//! horizons are recorded on the way.

use rayon::prelude::*;
use serde::Serialize;

use crate::curve::Curve;
use crate::dynamics::{Domain, Point2, Rect, SurfaceSystem};
use crate::error::{Error, Result};
use crate::growth::{Extrapolation, GrowthSeries};
use crate::linalg::ScaledProduct;
use crate::polyline::arc_length;
use crate::sampling::{SamplePlan, SampleScheme};

/// Fraction of escaped samples above which a report is flagged.
pub const ESCAPE_WARN_FRACTION: f64 = 0.1;
/// Slack allowed for the Jensen ordering.
pub const JENSEN_SLACK: f64 = 1e-12;
const QUADRATURE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralReport {
    pub n: usize,
    /// log of the area-weighted mean of `‖Df^n‖`.
    pub log_of_mean: f64,
    /// Area-weighted mean of `log ‖Df^n‖`.
    pub mean_of_log: f64,
    pub jensen_gap: f64,
    pub samples: usize,
    pub escapes: usize,
    pub unreliable: bool,
    /// Spread of `log_of_mean` over four interleaved half-density sub-plans;
    /// `None` when the plan cannot be split evenly.
    pub quadrature_error: Option<f64>,
}

fn validate_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::param("horizon list is empty"));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("horizons must be positive and strictly increasing"));
    }
    Ok(())
}

/// Log-norms of `Df^n_x` at the requested horizons; `None` from the first
/// horizon whose orbit segment leaves the domain.
fn sample_log_norms(system: &SurfaceSystem, x: Point2, n_list: &[usize]) -> Vec<Option<f64>> {
    let mut out = vec![None; n_list.len()];
    if !system.contains(x) {
        return out;
    }
    let n_max = *n_list.last().expect("validated nonempty");
    let mut prod = ScaledProduct::identity();
    let mut p = x;
    let mut next = 0;
    for k in 1..=n_max {
        prod.push(&system.jacobian(p));
        if n_list[next] == k {
            out[next] = Some(prod.log_norm());
            next += 1;
        }
        if k < n_max {
            p = system.map().lift(p);
            if !system.contains(p) {
                break;
            }
        }
    }
    out
}

/// `(log of weighted mean of e^ℓ, weighted mean of ℓ)`, both computed
/// relative to the largest `ℓ` so a constant integrand is reproduced exactly.
fn log_means(values: &[(f64, f64)]) -> Option<(f64, f64)> {
    let top = values.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !top.is_finite() {
        return None;
    }
    let mut wsum = 0.0;
    let mut esum = 0.0;
    let mut lsum = 0.0;
    for &(l, w) in values {
        wsum += w;
        esum += w * (l - top).exp();
        lsum += w * (l - top);
    }
    Some((top + (esum / wsum).ln(), top + lsum / wsum))
}

fn subplan_index(scheme: &SampleScheme, idx: usize) -> Option<usize> {
    let k = match scheme {
        SampleScheme::UniformGrid { density } => *density,
        SampleScheme::StratifiedRandom { strata_per_axis, .. } => *strata_per_axis,
    };
    if k < 2 || k % 2 != 0 {
        return None;
    }
    Some((idx % k) % 2 + 2 * ((idx / k) % 2))
}

/// One report per horizon in `n_list`.
pub fn integral_reports(system: &SurfaceSystem, plan: &SamplePlan, n_list: &[usize]) -> Result<Vec<IntegralReport>> {
    validate_n_list(n_list)?;
    let samples = plan.samples(system)?;
    let table: Vec<Vec<Option<f64>>> = samples
        .par_iter()
        .map(|s| sample_log_norms(system, s.point, n_list))
        .collect();
    let mut reports = Vec::with_capacity(n_list.len());
    for (col, &n) in n_list.iter().enumerate() {
        let mut vals = Vec::with_capacity(samples.len());
        let mut parts: [Vec<(f64, f64)>; 4] = Default::default();
        let mut splittable = true;
        for (idx, (s, row)) in samples.iter().zip(&table).enumerate() {
            if let Some(l) = row[col] {
                vals.push((l, s.weight));
                match subplan_index(&plan.scheme, idx) {
                    Some(q) => parts[q].push((l, s.weight)),
                    None => splittable = false,
                }
            }
        }
        let escapes = samples.len() - vals.len();
        let (log_of_mean, mean_of_log) =
            log_means(&vals).ok_or_else(|| Error::NoSamples(format!("all samples escaped before n = {n}")))?;
        let quadrature_error = if splittable {
            let spread = parts
                .iter()
                .filter_map(|p| log_means(p))
                .map(|(lm, _)| (lm - log_of_mean).abs())
                .fold(0.0, f64::max);
            Some(spread + QUADRATURE_FLOOR * log_of_mean.abs().max(1.0))
        } else {
            None
        };
        reports.push(IntegralReport {
            n,
            log_of_mean,
            mean_of_log,
            jensen_gap: log_of_mean - mean_of_log,
            samples: vals.len(),
            escapes,
            unreliable: escapes as f64 > ESCAPE_WARN_FRACTION * samples.len() as f64,
            quadrature_error,
        });
    }
    Ok(reports)
}

/// `a_n = (1/n) log ∫‖Df^n_x‖ dx`.
pub fn integral_norm_growth(system: &SurfaceSystem, plan: &SamplePlan, n_list: &[usize]) -> Result<GrowthSeries> {
    let reps = integral_reports(system, plan, n_list)?;
    norm_series(&reps)
}

/// `c_n = (1/n) ∫ log‖Df^n_x‖ dx`.
pub fn integral_log_norm_growth(system: &SurfaceSystem, plan: &SamplePlan, n_list: &[usize]) -> Result<GrowthSeries> {
    let reps = integral_reports(system, plan, n_list)?;
    log_norm_series(&reps)
}

pub fn norm_series(reports: &[IntegralReport]) -> Result<GrowthSeries> {
    GrowthSeries::from_pairs(reports.iter().map(|r| (r.n, r.log_of_mean / r.n as f64)), Extrapolation::InverseNFit)
}

pub fn log_norm_series(reports: &[IntegralReport]) -> Result<GrowthSeries> {
    GrowthSeries::from_pairs(reports.iter().map(|r| (r.n, r.mean_of_log / r.n as f64)), Extrapolation::InverseNFit)
}

/// Single-horizon report; fails if the Jensen ordering is violated beyond
/// rounding slack.
pub fn jensen_audit(system: &SurfaceSystem, plan: &SamplePlan, n: usize) -> Result<IntegralReport> {
    let rep = integral_reports(system, plan, &[n])?[0];
    if rep.jensen_gap < -JENSEN_SLACK {
        return Err(Error::InvariantViolated(format!("Jensen gap {} < 0 at n = {n}", rep.jensen_gap)));
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FubiniAudit {
    pub n: usize,
    pub rect: Rect,
    /// Area-mean of `‖Df^n‖` over the rectangle.
    pub lhs: f64,
    /// `max_h Vol(f^n h)/width + max_v Vol(f^n v)/height` over the sampled
    /// horizontal lines `h` and vertical lines `v`.
    pub rhs: f64,
    pub max_horizontal: f64,
    pub max_vertical: f64,
    pub holds: bool,
}

/// Compares `∫_R ‖Df^n‖` with line-length growth through `R`, using
/// `‖Df^n‖ ≤ ‖∂_u f^n‖ + ‖∂_v f^n‖` and Fubini on each term.
pub fn fubini_line_bound_audit(
    system: &SurfaceSystem,
    rect: Rect,
    n: usize,
    line_count: usize,
    tol: f64,
) -> Result<FubiniAudit> {
    if !matches!(system.domain, Domain::PlaneBox(_)) {
        return Err(Error::param("the line-growth audit needs a planar system"));
    }
    if line_count == 0 || n == 0 {
        return Err(Error::param("need n ≥ 1 and at least one line"));
    }
    let plan = SamplePlan::grid(line_count).within(rect);
    let rep = integral_reports(system, &plan, &[n])?[0];
    if rep.escapes > 0 {
        return Err(Error::OutOfDomain { step: n });
    }
    let lhs = rep.log_of_mean.exp();
    let offsets: Vec<f64> = (0..line_count).map(|i| (i as f64 + 0.5) / line_count as f64).collect();
    let lengths = |horizontal: bool| -> Result<f64> {
        let ls: Vec<f64> = offsets
            .par_iter()
            .map(|&s| {
                let c = if horizontal {
                    let v = rect.v_min + s * rect.height();
                    Curve::segment(Point2::new(rect.u_min, v), Point2::new(rect.u_max, v))
                } else {
                    let u = rect.u_min + s * rect.width();
                    Curve::segment(Point2::new(u, rect.v_min), Point2::new(u, rect.v_max))
                };
                arc_length(system, &c, n, tol).map(|a| a.length)
            })
            .collect::<Result<_>>()?;
        Ok(ls.into_iter().fold(0.0, f64::max))
    };
    let max_horizontal = lengths(true)?;
    let max_vertical = lengths(false)?;
    let rhs = max_horizontal / rect.width() + max_vertical / rect.height();
    Ok(FubiniAudit { n, rect, lhs, rhs, max_horizontal, max_vertical, holds: lhs <= rhs * (1.0 + tol) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityAudit {
    pub region: Rect,
    pub local: GrowthSeries,
    pub global: GrowthSeries,
    pub rate_difference: f64,
}

/// Integral growth over a sub-rectangle versus the whole domain, with the
/// same sampling scheme.
pub fn locality_audit(system: &SurfaceSystem, plan: &SamplePlan, n_list: &[usize], region: Rect) -> Result<LocalityAudit> {
    if !(region.area() > 0.0) {
        return Err(Error::param("locality region must have positive area"));
    }
    let local = integral_norm_growth(system, &plan.within(region), n_list)?;
    let global = integral_norm_growth(system, &SamplePlan { region: crate::sampling::Region::Full, ..*plan }, n_list)?;
    let rate_difference = (local.extrapolated_rate - global.extrapolated_rate).abs();
    Ok(LocalityAudit { region, local, global, rate_difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::operator_norm;
    use crate::zoo;

    fn cat_power_norm_log(n: usize) -> f64 {
        let m = crate::dynamics::cocycle_jacobian(&zoo::cat(), Point2::new(0.0, 0.0), n).unwrap();
        operator_norm(&m).ln()
    }

    #[test]
    fn cat_integrals_are_exact() {
        let ns: Vec<usize> = (1..=30).collect();
        let reps = integral_reports(&zoo::cat(), &SamplePlan::grid(16), &ns).unwrap();
        for r in &reps {
            let exact = cat_power_norm_log(r.n);
            assert!((r.log_of_mean - exact).abs() <= 1e-12 * exact.max(1.0), "n = {}", r.n);
            assert!(r.jensen_gap.abs() <= 1e-12);
        }
        let s = norm_series(&reps).unwrap();
        assert!((s.extrapolated_rate - 0.962424).abs() < 1e-3);
        let c = log_norm_series(&reps).unwrap();
        assert!((c.extrapolated_rate - 0.962424).abs() < 1e-3);
    }

    #[test]
    fn identity_integrals_vanish() {
        let reps = integral_reports(&zoo::identity(), &SamplePlan::stratified(8, 1), &[1, 2, 5]).unwrap();
        assert!(reps.iter().all(|r| r.log_of_mean == 0.0 && r.mean_of_log == 0.0));
    }

    #[test]
    fn diag_without_escape_detection_is_log_three() {
        let d = zoo::make_diag_linear(1.5).unwrap().unbounded();
        let plan = SamplePlan::grid(10).within(Rect::square(1.0));
        let s = integral_norm_growth(&d, &plan, &[1, 2, 3, 7, 12]).unwrap();
        for e in &s.entries {
            assert!((e.value - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn escapes_are_counted_and_flagged() {
        let d = zoo::make_diag_linear(1.5).unwrap();
        let plan = SamplePlan::grid(10).within(Rect::square(1.0));
        let reps = integral_reports(&d, &plan, &[1, 3]).unwrap();
        assert_eq!(reps[0].escapes, 0);
        assert!(reps[1].escapes > 0 && reps[1].unreliable);
        assert!(matches!(integral_reports(&d, &plan, &[40]), Err(Error::NoSamples(_))));
    }

    #[test]
    fn jensen_on_nonconstant_integrand() {
        let pc = zoo::make_perturbed_cat(0.05).unwrap();
        let rep = jensen_audit(&pc, &SamplePlan::grid(64), 10).unwrap();
        assert!(rep.jensen_gap > 0.0);
        let sm = zoo::make_standard_map(6.0).unwrap();
        let reps = integral_reports(&sm, &SamplePlan::grid(64), &[1, 2, 4, 8, 12]).unwrap();
        for r in reps {
            assert!(r.mean_of_log <= r.log_of_mean);
        }
    }

    #[test]
    fn fubini_examples() {
        let d = zoo::make_diag_linear(1.5).unwrap().unbounded();
        let a = fubini_line_bound_audit(&d, Rect::square(1.0), 3, 8, 1e-9).unwrap();
        assert!((a.lhs - 27.0).abs() < 1e-9);
        assert!((a.max_vertical - 54.0).abs() < 1e-9);
        assert!(a.holds);
        let id = zoo::make_linear_planar(crate::linalg::Jacobian2::IDENTITY, Rect::square(2.0)).unwrap();
        let a = fubini_line_bound_audit(&id, Rect::square(1.0), 4, 5, 1e-9).unwrap();
        assert!((a.lhs - 1.0).abs() < 1e-12 && (a.rhs - 2.0).abs() < 1e-9);
        assert!(fubini_line_bound_audit(&zoo::cat(), Rect::unit(), 2, 4, 1e-6).is_err());
        let bounded = zoo::make_diag_linear(1.5).unwrap();
        assert!(fubini_line_bound_audit(&bounded, Rect::square(1.0), 3, 4, 1e-6).is_err());
    }

    #[test]
    fn locality_for_constant_integrand() {
        let cat = zoo::cat();
        let ns: Vec<usize> = (1..=20).collect();
        let a = locality_audit(&cat, &SamplePlan::grid(8), &ns, Rect::new(0.0, 0.1, 0.0, 0.1).unwrap()).unwrap();
        assert!(a.rate_difference < 1e-9);
        assert!((a.local.extrapolated_rate - 0.962424).abs() < 1e-3);
    }

    #[test]
    fn refinement_within_reported_error() {
        let pc = zoo::make_perturbed_cat(0.05).unwrap();
        let ns = [1, 2, 4, 6];
        let coarse = integral_reports(&pc, &SamplePlan::grid(32), &ns).unwrap();
        let fine = integral_reports(&pc, &SamplePlan::grid(64), &ns).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            let err = c.quadrature_error.unwrap();
            assert!((c.log_of_mean - f.log_of_mean).abs() <= err, "n={} {} vs {}", c.n, (c.log_of_mean - f.log_of_mean).abs(), err);
        }
    }

    #[test]
    fn bad_horizons_rejected() {
        let cat = zoo::cat();
        assert!(integral_reports(&cat, &SamplePlan::grid(4), &[]).is_err());
        assert!(integral_reports(&cat, &SamplePlan::grid(4), &[3, 2]).is_err());
        assert!(integral_reports(&cat, &SamplePlan::grid(4), &[0, 2]).is_err());
    }
}
