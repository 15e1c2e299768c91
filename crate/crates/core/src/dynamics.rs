//! Surface maps, tangent cocycles and the projective lift.
//!
//! Two phase spaces are supported: the flat torus `ℝ²/ℤ²` and planar
//! rectangles with the identity chart. Maps are given on the universal
//! cover (`lift`), so curves can be pushed forward without wrapping and
//! arc length is measured with the Euclidean metric.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::growth::{Extrapolation, GrowthSeries};
use crate::linalg::{operator_norm, vec_norm, Jacobian2, ScaledProduct};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub const fn new(u: f64, v: f64) -> Self {
        Point2 { u, v }
    }

    pub fn offset(self, du: f64, dv: f64) -> Self {
        Point2 { u: self.u + du, v: self.v + dv }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// Reduces a coordinate to `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed minimal representative of `x` modulo 1, in `[-½, ½]`.
pub fn wrap_delta(x: f64) -> f64 {
    x - x.round()
}

/// Axis-aligned rectangle; infinite bounds describe the whole plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Rect {
    pub const UNBOUNDED: Rect = Rect {
        u_min: f64::NEG_INFINITY,
        u_max: f64::INFINITY,
        v_min: f64::NEG_INFINITY,
        v_max: f64::INFINITY,
    };

    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64) -> Result<Self> {
        if !(u_min < u_max && v_min < v_max) {
            return Err(Error::param(format!("empty rectangle [{u_min},{u_max}]×[{v_min},{v_max}]")));
        }
        Ok(Rect { u_min, u_max, v_min, v_max })
    }

    pub fn square(half: f64) -> Self {
        Rect { u_min: -half, u_max: half, v_min: -half, v_max: half }
    }

    pub fn unit() -> Self {
        Rect { u_min: 0.0, u_max: 1.0, v_min: 0.0, v_max: 1.0 }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.u >= self.u_min && p.u <= self.u_max && p.v >= self.v_min && p.v <= self.v_max
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_bounded(&self) -> bool {
        self.area().is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// Flat torus, coordinates canonicalized to `[0,1)²`.
    Torus,
    /// Planar rectangle; leaving it is an error.
    PlaneBox(Rect),
}

impl Domain {
    /// The rectangle used for sampling the whole domain, if finite.
    pub fn extent(&self) -> Option<Rect> {
        match self {
            Domain::Torus => Some(Rect::unit()),
            Domain::PlaneBox(r) if r.is_bounded() => Some(*r),
            Domain::PlaneBox(_) => None,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Torus)
    }
}

/// A point of the projective tangent bundle: a base point and a direction
/// class stored as an angle in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentPoint {
    pub base: Point2,
    pub angle: f64,
}

impl TangentPoint {
    pub fn new(base: Point2, angle: f64) -> Self {
        TangentPoint { base, angle: reduce_angle(angle) }
    }

    /// Direction class of a nonzero vector.
    pub fn from_vector(base: Point2, v: (f64, f64)) -> Self {
        Self::new(base, v.1.atan2(v.0))
    }

    pub fn unit(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (c, s)
    }
}

/// Reduces an angle modulo π to `[0, π)`.
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// A closed-form surface diffeomorphism given on the universal cover.
pub trait SurfaceMap: Send + Sync + fmt::Debug {
    fn lift(&self, p: Point2) -> Point2;
    fn lift_inverse(&self, p: Point2) -> Point2;
    fn jacobian(&self, p: Point2) -> Jacobian2;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicSource {
    pub point: Point2,
    pub period: usize,
}

/// Grid maxima of `‖Df‖` and `‖Df⁻¹‖`; lower bounds on the true suprema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBounds {
    pub df: f64,
    pub df_inv: f64,
    pub grid_density: usize,
}

pub const DEFAULT_NORM_GRID: usize = 64;

/// A surface diffeomorphism together with the metadata the estimators need.
#[derive(Debug, Clone)]
pub struct SurfaceSystem {
    pub name: String,
    map: Arc<dyn SurfaceMap>,
    pub domain: Domain,
    pub smoothness: f64,
    pub known_entropy: Option<f64>,
    pub known_lambda_plus: Option<f64>,
    pub periodic_sources: Vec<PeriodicSource>,
    pub norm_bounds: NormBounds,
}

impl SurfaceSystem {
    pub fn new(name: impl Into<String>, map: Arc<dyn SurfaceMap>, domain: Domain) -> Self {
        let mut sys = SurfaceSystem {
            name: name.into(),
            map,
            domain,
            smoothness: f64::INFINITY,
            known_entropy: None,
            known_lambda_plus: None,
            periodic_sources: Vec::new(),
            norm_bounds: NormBounds { df: 1.0, df_inv: 1.0, grid_density: 0 },
        };
        sys.norm_bounds = sys.estimate_norm_bounds(DEFAULT_NORM_GRID);
        sys
    }

    pub fn with_smoothness(mut self, r: f64) -> Result<Self> {
        if r.is_nan() || r <= 1.0 {
            return Err(Error::param(format!("smoothness order must exceed 1, got {r}")));
        }
        self.smoothness = r;
        Ok(self)
    }

    pub fn with_known_entropy(mut self, h: Option<f64>) -> Self {
        self.known_entropy = h;
        self
    }

    pub fn with_known_lambda_plus(mut self, l: Option<f64>) -> Self {
        self.known_lambda_plus = l;
        self
    }

    pub fn with_sources(mut self, sources: Vec<PeriodicSource>) -> Self {
        self.periodic_sources = sources;
        self
    }

    pub fn with_norm_grid(mut self, density: usize) -> Self {
        self.norm_bounds = self.estimate_norm_bounds(density.max(1));
        self
    }

    /// Same map on the whole plane: no escape detection. Has no effect on
    /// torus systems.
    pub fn unbounded(&self) -> Self {
        let mut s = self.clone();
        if let Domain::PlaneBox(_) = s.domain {
            s.domain = Domain::PlaneBox(Rect::UNBOUNDED);
        }
        s
    }

    pub fn map(&self) -> &Arc<dyn SurfaceMap> {
        &self.map
    }

    pub fn contains(&self, p: Point2) -> bool {
        match self.domain {
            Domain::Torus => p.u.is_finite() && p.v.is_finite(),
            Domain::PlaneBox(r) => r.contains(p),
        }
    }

    pub fn canonicalize(&self, p: Point2) -> Point2 {
        match self.domain {
            Domain::Torus => Point2::new(wrap_unit(p.u), wrap_unit(p.v)),
            Domain::PlaneBox(_) => p,
        }
    }

    /// Distance in the phase space (flat quotient metric on the torus).
    pub fn distance(&self, p: Point2, q: Point2) -> f64 {
        match self.domain {
            Domain::Torus => wrap_delta(p.u - q.u).hypot(wrap_delta(p.v - q.v)),
            Domain::PlaneBox(_) => p.dist(q),
        }
    }

    pub fn jacobian(&self, p: Point2) -> Jacobian2 {
        self.map.jacobian(p)
    }

    /// One application of the map on the universal cover; on the plane the
    /// image must stay in the box.
    pub fn step_lift(&self, p: Point2) -> Result<Point2> {
        let q = self.map.lift(p);
        if self.contains(q) {
            Ok(q)
        } else {
            Err(Error::OutOfDomain { step: 1 })
        }
    }

    pub fn forward(&self, p: Point2) -> Result<Point2> {
        self.step_lift(p).map(|q| self.canonicalize(q))
    }

    pub fn inverse(&self, p: Point2) -> Result<Point2> {
        let q = self.map.lift_inverse(p);
        if self.contains(q) {
            Ok(self.canonicalize(q))
        } else {
            Err(Error::OutOfDomain { step: 1 })
        }
    }

    /// `f^n(p)` on the universal cover; the error names the first iterate
    /// outside the box.
    pub fn iterate_lift(&self, p: Point2, n: usize) -> Result<Point2> {
        self.check_start(p)?;
        let mut q = p;
        for k in 1..=n {
            q = self.map.lift(q);
            if !self.contains(q) {
                return Err(Error::OutOfDomain { step: k });
            }
        }
        Ok(q)
    }

    pub fn iterate(&self, p: Point2, n: usize) -> Result<Point2> {
        self.iterate_lift(p, n).map(|q| self.canonicalize(q))
    }

    /// Canonical orbit `x, f(x), …, f^n(x)` (length `n + 1`).
    pub fn orbit(&self, p: Point2, n: usize) -> Result<Vec<Point2>> {
        self.check_start(p)?;
        let mut out = Vec::with_capacity(n + 1);
        let mut q = self.canonicalize(p);
        out.push(q);
        for k in 1..=n {
            let next = self.map.lift(q);
            if !self.contains(next) {
                return Err(Error::OutOfDomain { step: k });
            }
            q = self.canonicalize(next);
            out.push(q);
        }
        Ok(out)
    }

    pub(crate) fn check_start(&self, p: Point2) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { step: 0 })
        }
    }

    /// Yomdin threshold `λ⁺/r` for a given Lyapunov rate.
    pub fn yomdin_term(&self, lambda_plus: f64) -> f64 {
        lambda_plus / self.smoothness
    }

    fn estimate_norm_bounds(&self, density: usize) -> NormBounds {
        let rect = self.domain.extent().unwrap_or(Rect::square(1.0));
        let mut df: f64 = 0.0;
        let mut df_inv: f64 = 0.0;
        for i in 0..density {
            for j in 0..density {
                let p = Point2::new(
                    rect.u_min + rect.width() * (i as f64 + 0.5) / density as f64,
                    rect.v_min + rect.height() * (j as f64 + 0.5) / density as f64,
                );
                let jac = self.map.jacobian(p);
                df = df.max(operator_norm(&jac));
                if let Some(inv) = jac.inverse() {
                    df_inv = df_inv.max(operator_norm(&inv));
                }
            }
        }
        NormBounds { df, df_inv, grid_density: density }
    }
}

/// The ordered product `Df_{f^{n−1}x} ··· Df_x`; the identity for `n = 0`.
pub fn cocycle_jacobian(system: &SurfaceSystem, x: Point2, n: usize) -> Result<Jacobian2> {
    system.check_start(x)?;
    let mut acc = Jacobian2::IDENTITY;
    let mut p = x;
    for k in 0..n {
        acc = system.jacobian(p) * acc;
        if k + 1 < n {
            p = system.map.lift(p);
            if !system.contains(p) {
                return Err(Error::OutOfDomain { step: k + 1 });
            }
        }
    }
    Ok(acc)
}

/// `log ‖Df^n_x‖` for each `n` in `1..=n_max`, using a renormalized product.
pub fn log_norm_profile(system: &SurfaceSystem, x: Point2, n_max: usize) -> Result<Vec<f64>> {
    system.check_start(x)?;
    let mut prod = ScaledProduct::identity();
    let mut p = x;
    let mut out = Vec::with_capacity(n_max);
    for k in 0..n_max {
        prod.push(&system.jacobian(p));
        out.push(prod.log_norm());
        if k + 1 < n_max {
            p = system.map.lift(p);
            if !system.contains(p) {
                return Err(Error::OutOfDomain { step: k + 1 });
            }
        }
    }
    Ok(out)
}

/// Canonical lift `(x,[v]) ↦ (f x, [Df_x v])`.
pub fn lift_step(system: &SurfaceSystem, xh: &TangentPoint) -> Result<TangentPoint> {
    let base = system.forward(xh.base)?;
    let w = system.jacobian(xh.base).apply(xh.unit());
    Ok(TangentPoint::from_vector(base, w))
}

/// `ρ(x,[v]) = log ‖Df_x v‖` for the unit vector of the stored direction.
pub fn rho(system: &SurfaceSystem, xh: &TangentPoint) -> f64 {
    vec_norm(system.jacobian(xh.base).apply(xh.unit())).ln()
}

/// `ρ′ = ρ − (1/r)·log ‖Df_x‖`.
pub fn rho_prime(system: &SurfaceSystem, xh: &TangentPoint) -> f64 {
    let jac = system.jacobian(xh.base);
    let rho = vec_norm(jac.apply(xh.unit())).ln();
    rho - operator_norm(&jac).ln() / system.smoothness
}

/// Deterministic cell-centred grid covering the domain (`density²` points).
pub fn domain_grid(system: &SurfaceSystem, density: usize) -> Result<Vec<Point2>> {
    let rect = system
        .domain
        .extent()
        .ok_or_else(|| Error::param("unbounded domain has no default sampling grid"))?;
    Ok(rect_grid(&rect, density))
}

pub fn rect_grid(rect: &Rect, density: usize) -> Vec<Point2> {
    let mut pts = Vec::with_capacity(density * density);
    for j in 0..density {
        for i in 0..density {
            pts.push(Point2::new(
                rect.u_min + rect.width() * (i as f64 + 0.5) / density as f64,
                rect.v_min + rect.height() * (j as f64 + 0.5) / density as f64,
            ));
        }
    }
    pts
}

/// `b_n = (1/n) max_grid log ‖Df^n‖` for `n = 1..=n_max`, extrapolated by the
/// sub-additive minimum. Grid points whose orbit leaves a planar box stop
/// contributing from the escape step on.
pub fn lambda_plus_series(system: &SurfaceSystem, grid: &[Point2], n_max: usize) -> Result<GrowthSeries> {
    if grid.is_empty() {
        return Err(Error::NoSamples("empty sample grid".into()));
    }
    if n_max == 0 {
        return Err(Error::param("n_max must be at least 1"));
    }
    let profiles: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&x| partial_log_norms(system, x, n_max))
        .collect();
    let mut pairs = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let best = profiles
            .iter()
            .filter_map(|p| p.get(n - 1).copied())
            .fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            return Err(Error::NoSamples(format!("every grid orbit escaped before step {n}")));
        }
        pairs.push((n, best / n as f64));
    }
    GrowthSeries::from_pairs(pairs, Extrapolation::SubadditiveMin)
}

/// Log-norms up to the escape step (or `n_max`).
pub(crate) fn partial_log_norms(system: &SurfaceSystem, x: Point2, n_max: usize) -> Vec<f64> {
    if !system.contains(x) {
        return Vec::new();
    }
    let mut prod = ScaledProduct::identity();
    let mut p = x;
    let mut out = Vec::with_capacity(n_max);
    for k in 0..n_max {
        prod.push(&system.jacobian(p));
        out.push(prod.log_norm());
        if k + 1 < n_max {
            p = system.map.lift(p);
            if !system.contains(p) {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    fn golden_sq() -> f64 {
        (3.0 + 5f64.sqrt()) / 2.0
    }

    #[test]
    fn cat_cocycle_powers() {
        let cat = zoo::cat();
        let x = Point2::new(0.3, 0.7);
        assert_eq!(cocycle_jacobian(&cat, x, 1).unwrap(), Jacobian2::new(2.0, 1.0, 1.0, 1.0));
        // oracle: [[2,1],[1,1]]² by hand = [[5,3],[3,2]]
        assert_eq!(cocycle_jacobian(&cat, x, 2).unwrap(), Jacobian2::new(5.0, 3.0, 3.0, 2.0));
        assert_eq!(cocycle_jacobian(&cat, x, 0).unwrap(), Jacobian2::IDENTITY);
    }

    #[test]
    fn empty_product_for_any_system() {
        let sm = zoo::make_standard_map(6.0).unwrap();
        assert_eq!(cocycle_jacobian(&sm, Point2::new(0.1, 0.2), 0).unwrap(), Jacobian2::IDENTITY);
    }

    #[test]
    fn escape_step_is_reported() {
        let diag = zoo::make_diag_linear(1.5).unwrap();
        // v triples each step: 0.1, 0.3, 0.9, 2.7, so the orbit leaves [-2,2]² at step 3
        let err = cocycle_jacobian(&diag, Point2::new(0.0, 0.1), 5).unwrap_err();
        assert_eq!(err, Error::OutOfDomain { step: 3 });
        assert_eq!(
            cocycle_jacobian(&diag, Point2::new(3.0, 0.0), 1).unwrap_err(),
            Error::OutOfDomain { step: 0 }
        );
    }

    #[test]
    fn lift_step_examples() {
        let id = zoo::identity();
        let xh = TangentPoint::new(Point2::new(0.2, 0.4), 1.1);
        assert_eq!(lift_step(&id, &xh).unwrap(), xh);

        let diag = zoo::make_linear_planar(Jacobian2::diag(2.0, 1.0), Rect::square(10.0)).unwrap();
        let h = TangentPoint::new(Point2::new(0.5, 0.5), 0.0);
        let img = lift_step(&diag, &h).unwrap();
        assert_eq!(img.angle, 0.0);
        assert_eq!(img.base, Point2::new(1.0, 0.5));

        let rot = zoo::make_linear_planar(Jacobian2::rotation(PI / 2.0), Rect::square(10.0)).unwrap();
        let img = lift_step(&rot, &TangentPoint::new(Point2::new(0.0, 0.0), 0.0)).unwrap();
        // oracle: R(π/2)·(1,0) = (0,1), direction π/2
        assert!((img.angle - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn angles_are_projective() {
        let a = TangentPoint::new(Point2::new(0.0, 0.0), 0.3);
        let b = TangentPoint::new(Point2::new(0.0, 0.0), 0.3 + PI);
        let c = TangentPoint::from_vector(Point2::new(0.0, 0.0), (-(0.3f64.cos()), -(0.3f64.sin())));
        assert!((a.angle - b.angle).abs() < 1e-12);
        assert!((a.angle - c.angle).abs() < 1e-12);
        assert!(TangentPoint::new(Point2::new(0.0, 0.0), -1e-18).angle < PI);
    }

    #[test]
    fn rho_examples() {
        let id = zoo::identity();
        let xh = TangentPoint::new(Point2::new(0.2, 0.4), 1.1);
        assert_eq!(rho(&id, &xh), 0.0);
        assert_eq!(rho_prime(&id, &xh.clone()), 0.0);

        let a = 1.5;
        let diag = zoo::make_diag_linear(a).unwrap().with_smoothness(2.0).unwrap();
        let h = TangentPoint::new(Point2::new(0.0, 0.0), 0.0);
        assert!((rho(&diag, &h) - a.ln()).abs() < 1e-15);
        assert!((rho_prime(&diag, &h) - (a.ln() - 0.5 * 3f64.ln())).abs() < 1e-15);

        let cat = zoo::cat();
        // leading eigenvector of [[2,1],[1,1]] is (1, φ−1) with φ the golden ratio
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let lead = TangentPoint::from_vector(Point2::new(0.1, 0.1), (1.0, phi - 1.0));
        assert!((rho(&cat, &lead) - golden_sq().ln()).abs() < 1e-14);
        assert!((rho(&cat, &lead) - 0.962424).abs() < 1e-6);
        // r → ∞ recovers ρ; finite r approaches it monotonically
        assert_eq!(rho_prime(&cat, &lead), rho(&cat, &lead));
        let mut prev = f64::NEG_INFINITY;
        for r in [2.0, 10.0, 100.0, 1e6] {
            let cat_r = zoo::cat().with_smoothness(r).unwrap();
            let rp = rho_prime(&cat_r, &lead);
            assert!(rp > prev && rp < rho(&cat, &lead));
            prev = rp;
        }
        assert!((prev - rho(&cat, &lead)).abs() < 1e-5);
    }

    #[test]
    fn lambda_plus_examples() {
        let cat = zoo::cat();
        let grid = domain_grid(&cat, 8).unwrap();
        let s = lambda_plus_series(&cat, &grid, 20).unwrap();
        for e in &s.entries {
            assert!((e.value - golden_sq().ln()).abs() < 1e-12);
        }
        assert!((s.extrapolated_rate - 0.962424).abs() < 1e-6);

        let id = zoo::identity();
        let s = lambda_plus_series(&id, &domain_grid(&id, 4).unwrap(), 5).unwrap();
        assert!(s.entries.iter().all(|e| e.value == 0.0));

        let diag = zoo::make_diag_linear(1.5).unwrap();
        let s = lambda_plus_series(&diag, &[Point2::new(0.0, 0.0)], 6).unwrap();
        for e in &s.entries {
            assert!((e.value - 3f64.ln()).abs() < 1e-15);
        }
        assert!(lambda_plus_series(&diag, &[], 3).is_err());
    }

    #[test]
    fn standard_map_at_zero_coupling_has_no_exponent() {
        let sm = zoo::make_standard_map(0.0).unwrap();
        let grid = domain_grid(&sm, 6).unwrap();
        let s = lambda_plus_series(&sm, &grid, 200).unwrap();
        // ‖[[1,n],[0,1]]‖ grows linearly, so b_n = O(log n / n)
        assert!(s.extrapolated_rate < 0.03);
    }

    #[test]
    fn torus_canonicalization_and_distance() {
        let cat = zoo::cat();
        let p = cat.forward(Point2::new(0.9, 0.8)).unwrap();
        assert!((p.u - 0.6).abs() < 1e-12 && (p.v - 0.7).abs() < 1e-12);
        assert!((cat.distance(Point2::new(0.05, 0.5), Point2::new(0.95, 0.5)) - 0.1).abs() < 1e-12);
        assert_eq!(wrap_unit(-1e-20), 0.0);
    }
}
