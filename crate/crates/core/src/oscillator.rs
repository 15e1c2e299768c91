//! The oscillating curve `σ(x) = (x, x⁵ sin(1/x))` under `diag(a, 3)`.
//!
//! After `n` iterations the part of `Aⁿσ` inside `[−1, 1]²` is the graph of
//! `g_n(u) = 3ⁿa^{−5n}u⁵ sin(aⁿ/u)` over `I_n = {u ∈ [0, 1] : |g_n(u)| ≤ 1}`.
//! All integrals here are taken in the variable `t = aⁿ/u`, where
//!
//! ```text
//! g_n = 3ⁿ sin t / t⁵,    g_n′ = K (5 sin t − t cos t) / t⁴,    K = (3/a)ⁿ,
//! ```
//!
//! and `du = aⁿ/t² dt`. The `t` axis is cut into oscillation cells
//! `[jπ/2, (j+1)π/2]` on which `sin` is monotone, so `|g_n|` is unimodal per
//! cell and the clipped set is found by bisection. Small `u` (large `t`) is
//! summed analytically once `g_n′²` is negligible.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::{Extrapolation, GrowthSeries};
use crate::report::{fmt_f64, CsvTable};

pub const DEFAULT_CELL_BUDGET: usize = 10_000_000;
pub const DEFAULT_TOL: f64 = 1e-8;

/// Maximum bisection depth inside one oscillation cell.
const MAX_SPLIT_DEPTH: usize = 16;
/// Cells per parallel work unit; chunk sums are added in order so the
/// result does not depend on the thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscParams {
    pub a: f64,
    pub n: usize,
}

impl OscParams {
    pub fn new(a: f64, n: usize) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::param(format!("the oscillator example needs a > 1, got {a}")));
        }
        if n == 0 {
            return Err(Error::param("the oscillator example needs n >= 1"));
        }
        Ok(OscParams { a, n })
    }

    fn ln_an(&self) -> f64 {
        self.n as f64 * self.a.ln()
    }

    /// `ln K = n (ln 3 − ln a)`.
    fn ln_k(&self) -> f64 {
        self.n as f64 * (3f64.ln() - self.a.ln())
    }

    /// `|g_n| ≤ 1` is automatic for `t ≥ 3^{n/5}`.
    fn clip_horizon(&self) -> f64 {
        (self.n as f64 * 3f64.ln() / 5.0).exp()
    }

    /// `ln |g_n|` as a function of `t`.
    fn ln_abs_g(&self, t: f64) -> f64 {
        self.n as f64 * 3f64.ln() + t.sin().abs().ln() - 5.0 * t.ln()
    }

    /// Arc-length density `√(1 + g_n′²)·aⁿ/t²` in the variable `t`.
    fn density(&self, t: f64, k: f64, an: f64) -> f64 {
        let (s, c) = t.sin_cos();
        let t2 = t * t;
        let gp = k * (5.0 * s - t * c) / (t2 * t2);
        gp.hypot(1.0) * an / t2
    }
}

/// `g_n(u)` and `g_n′(u)`; both vanish at `u = 0`.
pub fn g_n_value_and_derivative(u: f64, a: f64, n: usize) -> (f64, f64) {
    if u == 0.0 {
        return (0.0, 0.0);
    }
    let ln3 = 3f64.ln();
    let n = n as f64;
    let t = (n * a.ln() - u.ln()).exp();
    let (s, c) = t.sin_cos();
    let lt = t.ln();
    let g = s * (n * ln3 - 5.0 * lt).exp();
    let gp = (5.0 * s - t * c) * (n * (ln3 - a.ln()) - 4.0 * lt).exp();
    (g, gp)
}

/// Exact limiting rate of `(1/n) log Length(Aⁿσ ∩ [−1, 1]²)`.
pub fn theoretical_rate(a: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::param(format!("theoretical rate needs a > 1, got {a}")));
    }
    let ln3 = 3f64.ln();
    let la = a.ln();
    Ok(if la <= ln3 / 5.0 {
        ln3 / 5.0
    } else if la < ln3 / 4.0 {
        ln3 - 4.0 * la
    } else {
        0.0
    })
}

/// `3ⁿa^{−4n}/(2π(1+2π)⁴) − 1`, a lower bound for the clipped length when
/// `3^{1/5} < a < 3^{1/4}`.
pub fn length_lower_bound(a: f64, n: usize) -> f64 {
    let n = n as f64;
    (n * (3f64.ln() - 4.0 * a.ln())).exp() / (2.0 * PI * (1.0 + 2.0 * PI).powi(4)) - 1.0
}

fn gauss_legendre_15() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        const M: usize = 15;
        let legendre = |x: f64| {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=M {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // (P_M, P_M′)
            (p1, M as f64 * (x * p1 - p0) / (x * x - 1.0))
        };
        (0..M)
            .map(|i| {
                let mut x = (PI * (i as f64 + 0.75) / (M as f64 + 0.5)).cos();
                for _ in 0..100 {
                    let (p, dp) = legendre(x);
                    let dx = p / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                let (_, dp) = legendre(x);
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

fn gauss15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    half * gauss_legendre_15().iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>()
}

/// Adaptive Gauss–Legendre on `[lo, hi]` with relative tolerance `tol`.
fn integrate(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let mid = 0.5 * (lo + hi);
        let left = gauss15(f, lo, mid);
        let right = gauss15(f, mid, hi);
        let both = left + right;
        if depth >= MAX_SPLIT_DEPTH || (both - whole).abs() <= tol * both.abs() {
            return both;
        }
        rec(f, lo, mid, left, tol, depth + 1) + rec(f, mid, hi, right, tol, depth + 1)
    }
    if hi <= lo {
        return 0.0;
    }
    rec(f, lo, hi, gauss15(f, lo, hi), tol, 0)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Subintervals of `[lo, hi]` (inside cell `j`) where `|g_n| ≤ 1`.
fn kept_pieces(p: &OscParams, j: u64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let h = |t: f64| p.ln_abs_g(t);
    let keep_monotone = |a: f64, b: f64, increasing: bool, out: &mut Vec<(f64, f64)>| {
        if b <= a {
            return;
        }
        let (ha, hb) = (h(a), h(b));
        match (ha <= 0.0, hb <= 0.0) {
            (true, true) => out.push((a, b)),
            (false, false) => {}
            _ => {
                let r = bisect(h, a, b);
                if increasing {
                    out.push((a, r));
                } else {
                    out.push((r, b));
                }
            }
        }
    };
    let mut out = Vec::with_capacity(2);
    let cell_lo = j as f64 * FRAC_PI_2;
    let cell_hi = cell_lo + FRAC_PI_2;
    // |sin| rises on even cells, where |g| peaks at the root of 5 sin t = t cos t
    let phi = |t: f64| 5.0 * t.sin() - t * t.cos();
    let peak = if j.is_multiple_of(2) && j > 0 && (phi(cell_lo) > 0.0) != (phi(cell_hi) > 0.0) {
        Some(bisect(phi, cell_lo, cell_hi))
    } else {
        None
    };
    match peak {
        Some(tp) if tp > lo && tp < hi => {
            keep_monotone(lo, tp, true, &mut out);
            keep_monotone(tp, hi, false, &mut out);
            if out.len() == 2 && out[0].1 == out[1].0 {
                out = vec![(out[0].0, out[1].1)];
            }
        }
        Some(tp) if tp >= hi => keep_monotone(lo, hi, true, &mut out),
        _ => keep_monotone(lo, hi, false, &mut out),
    }
    out
}

/// The `t` range `[t_lo, t_hi]` covered by oscillation cells, split into
/// cell-aligned pieces.
#[derive(Debug, Clone, Copy)]
struct CellRange {
    t_lo: f64,
    t_hi: f64,
    first: u64,
    last: u64,
}

impl CellRange {
    fn new(t_lo: f64, t_hi: f64) -> Self {
        let first = (t_lo / FRAC_PI_2).floor() as u64;
        let last = ((t_hi / FRAC_PI_2).ceil() as u64).max(first + 1);
        CellRange { t_lo, t_hi, first, last }
    }

    fn count(&self) -> usize {
        if self.t_hi <= self.t_lo {
            0
        } else {
            (self.last - self.first) as usize
        }
    }

    fn bounds(&self, j: u64) -> (f64, f64) {
        let lo = (j as f64 * FRAC_PI_2).max(self.t_lo);
        let hi = ((j + 1) as f64 * FRAC_PI_2).min(self.t_hi);
        (lo, hi)
    }

    /// `Σ_j cell(j)` in fixed-size chunks, summed in order.
    fn sum(&self, cell: impl Fn(u64) -> f64 + Sync) -> f64 {
        let count = self.count() as u64;
        let chunks = count.div_ceil(CHUNK as u64);
        let partial: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = self.first + c * CHUNK as u64;
                let end = (start + CHUNK as u64).min(self.first + count);
                (start..end).map(&cell).sum::<f64>()
            })
            .collect();
        partial.iter().sum()
    }
}

/// Cut-off `t_c` for the analytic tail.
///
/// On `u ≤ u_c = aⁿ/t_c` the density differs from `1 + g′²/2` by at most
/// `g′⁴/8`, and `∫₀^{u_c} g′²/2 du ≤ u_c·K²(1 + 5/t_c)²/(14 t_c⁶)`, so the
/// averaged tail is within `tol·u_c` once `K²(1 + 5/t)²/(14 t⁶) ≤ tol`.
fn tail_horizon(ln_k: f64, tol: f64) -> f64 {
    let excess = |t: f64| 2.0 * ln_k + 2.0 * (1.0 + 5.0 / t).ln() - 14f64.ln() - 6.0 * t.ln() - tol.ln();
    let mut hi = ((2.0 * ln_k - 14f64.ln() - tol.ln()) / 6.0).exp().max(1.0);
    while excess(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while lo > 1e-300 && excess(lo) <= 0.0 {
        lo /= 2.0;
    }
    bisect(excess, lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClippedLength {
    pub n: usize,
    pub length: f64,
    /// Oscillation cells integrated numerically.
    pub cells: usize,
    /// `u` below which the length is summed analytically.
    pub u_tail: f64,
}

/// Number of oscillation cells [`restricted_length`] would integrate.
pub fn predicted_cells(a: f64, n: usize, tol: f64) -> Result<usize> {
    let p = OscParams::new(a, n)?;
    Ok(plan_cells(&p, tol).0.count())
}

fn plan_cells(p: &OscParams, tol: f64) -> (CellRange, f64) {
    let t_lo = p.ln_an().exp();
    let t_hi = tail_horizon(p.ln_k(), tol).max(p.clip_horizon()).max(t_lo);
    (CellRange::new(t_lo, t_hi), t_hi)
}

/// `Length(Aⁿσ ∩ [−1, 1]²) = ∫_{I_n} √(1 + g_n′²) du`.
pub fn restricted_length(a: f64, n: usize, tol: f64, cell_budget: usize) -> Result<ClippedLength> {
    if !(tol > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    let p = OscParams::new(a, n)?;
    let (range, t_hi) = plan_cells(&p, tol);
    if range.count() > cell_budget {
        return Err(Error::BudgetExhausted(format!(
            "n = {n} needs {} oscillation cells, budget {cell_budget}",
            range.count()
        )));
    }
    let an = p.ln_an().exp();
    let k = p.ln_k().exp();
    let clip = p.clip_horizon();
    let body = range.sum(|j| {
        let (lo, hi) = range.bounds(j);
        let f = |t: f64| p.density(t, k, an);
        if lo >= clip {
            integrate(&f, lo, hi, tol)
        } else {
            kept_pieces(&p, j, lo, hi).iter().map(|&(x, y)| integrate(&f, x, y, tol)).sum()
        }
    });
    // u ∈ [0, u_tail]: √(1+g′²) ≈ 1 + g′²/2 with sin², cos² averaged to 1/2
    let u_tail = (p.ln_an() - t_hi.ln()).exp();
    let k2 = k * k;
    let t6 = t_hi.powi(6);
    let tail = u_tail * (1.0 + (25.0 * k2 / (9.0 * t6 * t_hi * t_hi) + k2 / (7.0 * t6)) / 4.0);
    Ok(ClippedLength { n, length: body + tail, cells: range.count(), u_tail })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictedGrowthRow {
    pub a: f64,
    pub n: usize,
    pub length: f64,
    /// `(1/n) log L_n`.
    pub rate: f64,
    pub theoretical: f64,
    pub residual: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictedGrowthReport {
    pub a: f64,
    pub tol: f64,
    pub rows: Vec<RestrictedGrowthRow>,
    /// First requested horizon dropped because it exceeded the cell budget.
    pub truncated_at: Option<usize>,
    pub series: GrowthSeries,
    pub theoretical: f64,
}

impl RestrictedGrowthReport {
    /// Columns `a, n, L_n, rate, theoretical, residual`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["a", "n", "L_n", "rate", "theoretical", "residual"]);
        for r in &self.rows {
            t.push(vec![
                fmt_f64(r.a),
                r.n.to_string(),
                fmt_f64(r.length),
                fmt_f64(r.rate),
                fmt_f64(r.theoretical),
                fmt_f64(r.residual),
            ]);
        }
        t
    }
}

/// Clipped lengths for each `n` in `n_list` until the cell budget is hit.
pub fn restricted_growth_report(a: f64, n_list: &[usize], tol: f64, cell_budget: usize) -> Result<RestrictedGrowthReport> {
    let theoretical = theoretical_rate(a)?;
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("horizons must be positive and strictly increasing"));
    }
    let mut rows = Vec::new();
    let mut truncated_at = None;
    for &n in n_list {
        if predicted_cells(a, n, tol)? > cell_budget {
            truncated_at = Some(n);
            break;
        }
        let l = restricted_length(a, n, tol, cell_budget)?;
        let rate = l.length.ln() / n as f64;
        rows.push(RestrictedGrowthRow {
            a,
            n,
            length: l.length,
            rate,
            theoretical,
            residual: rate - theoretical,
            cells: l.cells,
        });
    }
    if rows.is_empty() {
        return Err(Error::BudgetExhausted(format!("no horizon of {n_list:?} fits {cell_budget} cells")));
    }
    let series = GrowthSeries::from_pairs(rows.iter().map(|r| (r.n, r.rate)), Extrapolation::InverseNFit)?;
    Ok(RestrictedGrowthReport { a, tol, rows, truncated_at, series, theoretical })
}

/// Growth series of the clipped length with the default cell budget; the
/// headline rate is the `rate + β/n` fit intercept.
pub fn restricted_growth(a: f64, n_list: &[usize], tol: f64) -> Result<GrowthSeries> {
    Ok(restricted_growth_report(a, n_list, tol, DEFAULT_CELL_BUDGET)?.series)
}

/// `I_n` as disjoint closed intervals in `u`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleSet {
    pub intervals: Vec<(f64, f64)>,
    pub full: bool,
}

/// The set `I_n = {u ∈ [0, 1] : |g_n(u)| ≤ 1}`.
pub fn admissible_set(a: f64, n: usize, max_intervals: usize) -> Result<AdmissibleSet> {
    let p = OscParams::new(a, n)?;
    let t_lo = p.ln_an().exp();
    let clip = p.clip_horizon();
    if clip <= t_lo {
        return Ok(AdmissibleSet { intervals: vec![(0.0, 1.0)], full: true });
    }
    let range = CellRange::new(t_lo, clip);
    if range.count() > max_intervals {
        return Err(Error::BudgetExhausted(format!("I_{n} spans {} cells", range.count())));
    }
    let mut kept_t: Vec<(f64, f64)> = Vec::new();
    for j in range.first..range.last {
        let (lo, hi) = range.bounds(j);
        for (x, y) in kept_pieces(&p, j, lo, hi) {
            match kept_t.last_mut() {
                Some(last) if last.1 == x => last.1 = y,
                _ => kept_t.push((x, y)),
            }
        }
    }
    // everything beyond the clip horizon is kept
    match kept_t.last_mut() {
        Some(last) if last.1 == clip => last.1 = f64::INFINITY,
        _ => kept_t.push((clip, f64::INFINITY)),
    }
    let an = t_lo;
    let mut intervals: Vec<(f64, f64)> = kept_t.iter().rev().map(|&(x, y)| (an / y, an / x)).collect();
    intervals[0].0 = 0.0;
    let full = intervals.len() == 1 && intervals[0] == (0.0, 1.0);
    Ok(AdmissibleSet { intervals, full })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CosIntegralAudit {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    /// `∫₀ᵇ u³|cos(aⁿ/u)| du`.
    pub numeric: f64,
    /// The part of `numeric` computed cell by cell; a lower estimate of the
    /// integral up to quadrature error.
    pub truncated: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Checks `∫₀ᵇ u³|cos(aⁿ/u)| du ≥ a^{4n}b⁴/(2π(aⁿ+2πb)⁴)`.
///
/// In `t = aⁿ/u` the integral is `a^{4n} ∫_{aⁿ/b}^∞ |cos t|/t⁵ dt`; it is
/// integrated over cells between zeros of `cos` until the remainder bound
/// `T^{−4}/4` falls below `tol` times the running sum. The remainder is then
/// added with `|cos|` replaced by its mean `2/π`.
pub fn cos_integral_audit(a: f64, b: f64, n: usize, tol: f64, cell_budget: usize) -> Result<CosIntegralAudit> {
    if !(a > 0.0 && b > 0.0 && tol > 0.0) || n == 0 {
        return Err(Error::param("need a, b, tol > 0 and n >= 1"));
    }
    let ln_an = n as f64 * a.ln();
    let t0 = (ln_an - b.ln()).exp();
    let f = |t: f64| t.cos().abs() / t.powi(5);
    // cell k is [(k − 1/2)π, (k + 1/2)π], between consecutive zeros of cos
    let mut k = (t0 / PI + 0.5).floor() as u64;
    let mut lo = t0;
    let mut sum = 0.0;
    let mut cells = 0usize;
    loop {
        let hi = (k as f64 + 0.5) * PI;
        sum += integrate(&f, lo, hi, tol);
        cells += 1;
        lo = hi;
        k += 1;
        if lo.powi(-4) / 4.0 <= tol * sum {
            break;
        }
        if cells > cell_budget {
            return Err(Error::BudgetExhausted(format!("cos integral needs more than {cell_budget} cells")));
        }
    }
    let scale = (4.0 * ln_an).exp();
    let truncated = scale * sum;
    let numeric = scale * (sum + 2.0 / PI * lo.powi(-4) / 4.0);
    let ln_bound = 4.0 * ln_an + 4.0 * b.ln() - (2.0 * PI).ln() - 4.0 * (ln_an.exp() + 2.0 * PI * b).ln();
    let bound = ln_bound.exp();
    Ok(CosIntegralAudit { a, b, n, numeric, truncated, bound, pass: truncated > bound })
}

/// The grid `a ∈ {1.1, 1.5, 2}`, `b ∈ {0.5, 1}`, `n ∈ 1..=6`.
pub fn cos_integral_sweep(tol: f64) -> Result<Vec<CosIntegralAudit>> {
    let mut out = Vec::with_capacity(36);
    for a in [1.1, 1.5, 2.0] {
        for b in [0.5, 1.0] {
            for n in 1..=6 {
                out.push(cos_integral_audit(a, b, n, tol, DEFAULT_CELL_BUDGET)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityAudit {
    pub a: f64,
    pub n: usize,
    /// Roots of `tan t = t/5` in `[aⁿ, 3^{n/5}]`.
    pub count: usize,
    /// `3^{n/5}/π + 2`.
    pub bound: f64,
    pub pass: bool,
}

/// Counts the critical points of `|g_n|` (roots of `tan t = t/5`) on
/// `[aⁿ, 3^{n/5}]`, one bisection per branch `(kπ − π/2, kπ + π/2)`.
pub fn monotonicity_count_audit(a: f64, n: usize) -> Result<MonotonicityAudit> {
    let p = OscParams::new(a, n)?;
    let lo = p.ln_an().exp();
    let hi = p.clip_horizon();
    let bound = hi / PI + 2.0;
    let mut count = 0;
    if hi > lo {
        let k_first = ((lo - FRAC_PI_2) / PI).ceil().max(0.0) as u64;
        let k_last = ((hi + FRAC_PI_2) / PI).floor() as u64;
        if k_last - k_first > DEFAULT_CELL_BUDGET as u64 {
            return Err(Error::BudgetExhausted(format!("{} branches exceed the cell budget", k_last - k_first)));
        }
        for k in k_first..=k_last {
            let root = if k == 0 {
                0.0
            } else {
                // 5 sin t − t cos t changes sign exactly once per branch
                let c = k as f64 * PI;
                let psi = |t: f64| 5.0 * t.sin() - t * t.cos();
                bisect(psi, c - FRAC_PI_2 + 1e-12, c + FRAC_PI_2 - 1e-12)
            };
            if root >= lo && root <= hi {
                count += 1;
            }
        }
    }
    Ok(MonotonicityAudit { a, n, count, bound, pass: (count as f64) <= bound })
}
