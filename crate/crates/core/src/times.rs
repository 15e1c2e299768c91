//! Orbit-level diagnostics: geometric and expanded times, trapping times,
//! quantized derivative data, empirical measures and the finite-horizon
//! convex split of curve growth.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::curve::Curve;
use crate::dynamics::{lift_step, rho, rho_prime, Point2, SurfaceSystem, TangentPoint};
use crate::error::{Error, Result};
use crate::linalg::{vec_norm, ScaledProduct};
use crate::polyline::arc_length;
use crate::report::{fmt_f64, CsvTable};

/// Default expansion threshold per step in the geometric-time test.
pub const DEFAULT_THRESHOLD: f64 = 1.0;
/// Default scale standing in for the small constant of the trapping balls.
pub const DEFAULT_EPS_SCALE: f64 = 0.01;

/// `m ∈ [1, n]` is geometric iff `Σ_{i=k}^{m−1} ρ′_i ≥ τ·(m − k)` for every
/// `0 ≤ k < m`. With `S_j = Σ_{i<j}(ρ′_i − τ)` this is `S_m ≥ max_{k<m} S_k`,
/// so one pass with a running maximum suffices.
pub fn geometric_times_from(rho_prime: &[f64], tau: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 0.0;
    let mut best = 0.0;
    for (i, &r) in rho_prime.iter().enumerate() {
        s += r - tau;
        if s >= best {
            out.push(i + 1);
            best = s;
        }
    }
    out
}

/// Geometric times of `x̂` up to `n` with threshold `τ`.
pub fn geometric_times(system: &SurfaceSystem, xh: &TangentPoint, n: usize, tau: f64) -> Result<Vec<usize>> {
    let (_, rp, _) = cocycle_values(system, xh, n)?;
    Ok(geometric_times_from(&rp, tau))
}

/// `E^L`: the union of `[i, j]` over `i ≤ j` in `E` with `j − i ≤ L`,
/// restricted to `[0, n]`.
pub fn expand_times(e: &[usize], l: usize, n: usize) -> Vec<usize> {
    let sorted: BTreeSet<usize> = e.iter().copied().filter(|&m| m <= n).collect();
    let v: Vec<usize> = sorted.into_iter().collect();
    let mut out = Vec::with_capacity(v.len());
    for (idx, &m) in v.iter().enumerate() {
        if idx > 0 {
            let prev = v[idx - 1];
            if m - prev <= l {
                out.extend(prev + 1..m);
            }
        }
        out.push(m);
    }
    out
}

/// For every non-geometric `m`, with `n*` the largest geometric time below
/// `m` (or 0), checks `Σ_{i=n*}^{m−1} ρ′_i < τ·(m − n*)`.
pub fn geometric_gap_audit(rho_prime: &[f64], e: &[usize], tau: f64) -> bool {
    let geo: BTreeSet<usize> = e.iter().copied().collect();
    let mut last = 0usize;
    for m in 1..=rho_prime.len() {
        if geo.contains(&m) {
            last = m;
            continue;
        }
        let sum: f64 = rho_prime[last..m].iter().sum();
        if sum >= tau * (m - last) as f64 {
            return false;
        }
    }
    true
}

/// `(ρ_i, ρ′_i, f̂^i x̂)` for `i ∈ [0, n)`.
pub fn cocycle_values(system: &SurfaceSystem, xh: &TangentPoint, n: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<TangentPoint>)> {
    system.check_start(xh.base)?;
    let mut r = Vec::with_capacity(n);
    let mut rp = Vec::with_capacity(n);
    let mut pts = Vec::with_capacity(n);
    let mut cur = *xh;
    for i in 0..n {
        r.push(rho(system, &cur));
        rp.push(rho_prime(system, &cur));
        pts.push(cur);
        if i + 1 < n {
            cur = lift_step(system, &cur).map_err(|_| Error::OutOfDomain { step: i + 1 })?;
        }
    }
    Ok((r, rp, pts))
}

/// Default trapping radius `ε/(100·‖Df‖)`.
pub fn default_trapping_radius(system: &SurfaceSystem, eps_scale: f64) -> f64 {
    eps_scale / (100.0 * system.norm_bounds.df.max(1.0))
}

/// Largest `k ≤ n` such that the orbit of `x` stays within `radius` of some
/// source orbit for the first `k` iterates (times `0..k`); 0 if none.
pub fn trapping_time(system: &SurfaceSystem, x: Point2, n: usize, radius: f64) -> usize {
    let mut best = 0;
    for src in &system.periodic_sources {
        let mut y = x;
        let mut z = src.point;
        let mut k = 0;
        while k < n && system.contains(y) && system.distance(y, z) < radius {
            k += 1;
            if k == n {
                break;
            }
            match (system.forward(y), system.forward(z)) {
                (Ok(a), Ok(b)) => {
                    y = a;
                    z = b;
                }
                _ => break,
            }
        }
        best = best.max(k);
    }
    best
}

/// Quantized derivative data on the grid `(1/p)ℤ`, stored as integer
/// numerators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizedData {
    pub p: usize,
    /// `⌈log‖Df^p_{f^i x}‖⌉`.
    pub beta_prime: Vec<i64>,
    /// `⌈log‖Df^p_{f^i x} v_i‖⌉` for the unit direction `v_i` of `f̂^i x̂`.
    pub beta_double_prime: Vec<i64>,
}

impl QuantizedData {
    pub fn beta_prime_value(&self, i: usize) -> f64 {
        self.beta_prime[i] as f64 / self.p as f64
    }

    pub fn beta_double_prime_value(&self, i: usize) -> f64 {
        self.beta_double_prime[i] as f64 / self.p as f64
    }
}

pub fn quantized_data(system: &SurfaceSystem, xh: &TangentPoint, n: usize, p: usize) -> Result<QuantizedData> {
    if p == 0 {
        return Err(Error::param("block length p must be at least 1"));
    }
    let (_, _, pts) = cocycle_values(system, xh, n + p - 1)?;
    let mut bp = Vec::with_capacity(n);
    let mut bpp = Vec::with_capacity(n);
    for i in 0..n {
        let mut prod = ScaledProduct::identity();
        for pt in &pts[i..i + p] {
            prod.push(&system.jacobian(pt.base));
        }
        bp.push(prod.log_norm().ceil() as i64);
        bpp.push(prod.log_norm_of(pts[i].unit()).ceil() as i64);
    }
    Ok(QuantizedData { p, beta_prime: bp, beta_double_prime: bpp })
}

/// Atoms `f̂^i x̂`, `i ∈ E`, each of mass `1/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    pub n: usize,
    pub atoms: Vec<TangentPoint>,
}

impl EmpiricalMeasure {
    pub fn weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.len() as f64 / self.n as f64
    }

    /// Integral of `g` against the measure.
    pub fn integrate(&self, g: impl Fn(&TangentPoint) -> f64) -> f64 {
        self.atoms.iter().map(g).sum::<f64>() * self.weight()
    }

    /// Projection to the base (angles dropped).
    pub fn projection(&self) -> Vec<Point2> {
        self.atoms.iter().map(|a| a.base).collect()
    }
}

pub fn empirical_measure(system: &SurfaceSystem, xh: &TangentPoint, n: usize, e: &[usize]) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::param("horizon must be positive"));
    }
    if let Some(&bad) = e.iter().find(|&&i| i >= n) {
        return Err(Error::param(format!("time {bad} lies outside [0, {n})")));
    }
    let (_, _, pts) = cocycle_values(system, xh, n)?;
    Ok(EmpiricalMeasure { n, atoms: e.iter().map(|&i| pts[i]).collect() })
}

/// `#([m, n) ∩ E^L) / n`.
pub fn alpha_fraction(e_l: &[usize], m: usize, n: usize) -> Result<f64> {
    if m > n || n == 0 {
        return Err(Error::param(format!("need 0 ≤ m ≤ n and n > 0, got m = {m}, n = {n}")));
    }
    let set: BTreeSet<usize> = e_l.iter().copied().collect();
    Ok(set.range(m..n).count() as f64 / n as f64)
}

/// Knobs shared by the orbit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeConfig {
    pub tau: f64,
    pub l: usize,
    pub p: usize,
    pub eps_scale: f64,
    /// Trapping-ball radius; `None` selects [`default_trapping_radius`].
    pub radius: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { tau: DEFAULT_THRESHOLD, l: 3, p: 1, eps_scale: DEFAULT_EPS_SCALE, radius: None }
    }
}

impl TimeConfig {
    pub fn radius_for(&self, system: &SurfaceSystem) -> f64 {
        self.radius.unwrap_or_else(|| default_trapping_radius(system, self.eps_scale))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitProfile {
    pub start: TangentPoint,
    pub n: usize,
    pub rho: Vec<f64>,
    pub rho_prime: Vec<f64>,
    pub geometric: Vec<usize>,
    pub expanded: Vec<usize>,
    pub trapping_time: usize,
    pub quantized: QuantizedData,
    pub config: TimeConfig,
}

impl OrbitProfile {
    pub fn compute(system: &SurfaceSystem, xh: &TangentPoint, n: usize, cfg: &TimeConfig) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("horizon must be positive"));
        }
        let (r, rp, _) = cocycle_values(system, xh, n)?;
        let geometric = geometric_times_from(&rp, cfg.tau);
        let expanded = expand_times(&geometric, cfg.l, n);
        let trapping_time = trapping_time(system, xh.base, n, cfg.radius_for(system));
        let quantized = quantized_data(system, xh, n, cfg.p)?;
        Ok(OrbitProfile { start: *xh, n, rho: r, rho_prime: rp, geometric, expanded, trapping_time, quantized, config: *cfg })
    }

    pub fn gap_audit(&self) -> bool {
        geometric_gap_audit(&self.rho_prime, &self.geometric, self.config.tau)
    }

    pub fn alpha(&self) -> f64 {
        alpha_fraction(&self.expanded, self.trapping_time.min(self.n), self.n).expect("m ≤ n by construction")
    }

    /// Row `i` (1-based) describes the step from time `i − 1` to `i`: the
    /// cocycle values at `f̂^{i−1} x̂` and whether `i` is a geometric or
    /// expanded time.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["i", "rho", "rho_prime", "is_geometric", "in_E_L", "beta_prime", "beta_double_prime"]);
        let geo: BTreeSet<usize> = self.geometric.iter().copied().collect();
        let exp: BTreeSet<usize> = self.expanded.iter().copied().collect();
        for i in 1..=self.n {
            t.push(vec![
                i.to_string(),
                fmt_f64(self.rho[i - 1]),
                fmt_f64(self.rho_prime[i - 1]),
                u8::from(geo.contains(&i)).to_string(),
                u8::from(exp.contains(&i)).to_string(),
                fmt_f64(self.quantized.beta_prime_value(i - 1)),
                fmt_f64(self.quantized.beta_double_prime_value(i - 1)),
            ]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexSplitReport {
    pub n: usize,
    pub l: usize,
    pub points: usize,
    /// `(1/n) log Vol(f^n σ)`.
    pub measured_growth: f64,
    /// Mean of `α` over the sampled curve points.
    pub alpha: f64,
    pub mean_trapping_time: f64,
    pub reference_entropy: f64,
    pub reference_lambda: f64,
    /// `λ⁺/r`.
    pub yomdin_term: f64,
    /// `α·h + (1 − α)·λ⁺/r`.
    pub convex_bound: f64,
    /// `measured_growth − convex_bound`; reported, not asserted.
    pub residual: f64,
}

/// Number of curve points averaged in [`convex_split_report`].
pub const CONVEX_SPLIT_POINTS: usize = 64;

/// Finite-horizon comparison of curve growth with the convex combination of
/// the entropy and the Yomdin term, with `α` averaged over curve points and
/// each point's trapping time as its cut.
pub fn convex_split_report(
    system: &SurfaceSystem,
    curve: &Curve,
    n: usize,
    cfg: &TimeConfig,
    reference_h: f64,
    reference_lambda: f64,
    tol: f64,
) -> Result<ConvexSplitReport> {
    if n == 0 {
        return Err(Error::param("horizon must be positive"));
    }
    let len = arc_length(system, curve, n, tol)?.length;
    let profiles: Vec<(f64, usize)> = (0..CONVEX_SPLIT_POINTS)
        .into_par_iter()
        .map(|i| {
            let t = (i as f64 + 0.5) / CONVEX_SPLIT_POINTS as f64;
            let base = system.canonicalize(curve.point(t)?);
            let d = curve.derivative(t)?;
            if !(vec_norm(d) > 0.0) {
                return Err(Error::InadmissibleCurve(format!("zero speed at t = {t}")));
            }
            let prof = OrbitProfile::compute(system, &TangentPoint::from_vector(base, d), n, cfg)?;
            Ok((prof.alpha(), prof.trapping_time))
        })
        .collect::<Result<_>>()?;
    let alpha = profiles.iter().map(|p| p.0).sum::<f64>() / profiles.len() as f64;
    let mean_trap = profiles.iter().map(|p| p.1 as f64).sum::<f64>() / profiles.len() as f64;
    let yomdin = system.yomdin_term(reference_lambda);
    let bound = alpha * reference_h + (1.0 - alpha) * yomdin;
    let measured = len.ln() / n as f64;
    Ok(ConvexSplitReport {
        n,
        l: cfg.l,
        points: profiles.len(),
        measured_growth: measured,
        alpha,
        mean_trapping_time: mean_trap,
        reference_entropy: reference_h,
        reference_lambda,
        yomdin_term: yomdin,
        convex_bound: bound,
        residual: measured - bound,
    })
}
