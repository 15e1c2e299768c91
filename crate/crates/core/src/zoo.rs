//! Built-in closed-form systems with analytic Jacobians.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::dynamics::{wrap_delta, Domain, PeriodicSource, Point2, Rect, SurfaceMap, SurfaceSystem};
use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Jacobian2};

const TAU: f64 = 2.0 * PI;

/// Linear map `p ↦ M p` on the plane or the universal cover of the torus.
#[derive(Debug, Clone, Copy)]
struct LinearMap {
    m: Jacobian2,
    inv: Jacobian2,
}

impl SurfaceMap for LinearMap {
    fn lift(&self, p: Point2) -> Point2 {
        let (u, v) = self.m.apply((p.u, p.v));
        Point2::new(u, v)
    }

    fn lift_inverse(&self, p: Point2) -> Point2 {
        let (u, v) = self.inv.apply((p.u, p.v));
        Point2::new(u, v)
    }

    fn jacobian(&self, _p: Point2) -> Jacobian2 {
        self.m
    }
}

/// Chirikov standard map in the form `(u + v + κ sin 2πu, v + κ sin 2πu)`
/// with `κ = k/2π`.
#[derive(Debug, Clone, Copy)]
struct StandardMap {
    k: f64,
}

impl SurfaceMap for StandardMap {
    fn lift(&self, p: Point2) -> Point2 {
        let kick = self.k / TAU * (TAU * p.u).sin();
        Point2::new(p.u + p.v + kick, p.v + kick)
    }

    fn lift_inverse(&self, p: Point2) -> Point2 {
        let u = p.u - p.v;
        Point2::new(u, p.v - self.k / TAU * (TAU * u).sin())
    }

    fn jacobian(&self, p: Point2) -> Jacobian2 {
        let kc = self.k * (TAU * p.u).cos();
        Jacobian2::new(1.0 + kc, 1.0, kc, 1.0)
    }
}

/// `A ∘ S` with `S(u, v) = (u + eps·sin 2πv, v)` and `A` the cat matrix.
#[derive(Debug, Clone, Copy)]
struct PerturbedCat {
    eps: f64,
}

const CAT: Jacobian2 = Jacobian2::new(2.0, 1.0, 1.0, 1.0);
const CAT_INV: Jacobian2 = Jacobian2::new(1.0, -1.0, -1.0, 2.0);

impl SurfaceMap for PerturbedCat {
    fn lift(&self, p: Point2) -> Point2 {
        let s = (p.u + self.eps * (TAU * p.v).sin(), p.v);
        let (u, v) = CAT.apply(s);
        Point2::new(u, v)
    }

    fn lift_inverse(&self, p: Point2) -> Point2 {
        let (u, v) = CAT_INV.apply((p.u, p.v));
        Point2::new(u - self.eps * (TAU * v).sin(), v)
    }

    fn jacobian(&self, p: Point2) -> Jacobian2 {
        CAT * Jacobian2::new(1.0, TAU * self.eps * (TAU * p.v).cos(), 0.0, 1.0)
    }
}

/// Torus map `x ↦ Mx mod 1` for an integer matrix with determinant ±1.
pub fn make_toral_automorphism(m11: i64, m12: i64, m21: i64, m22: i64) -> Result<SurfaceSystem> {
    let det = m11 * m22 - m12 * m21;
    if det.abs() != 1 {
        return Err(Error::param(format!("toral automorphism needs |det| = 1, got det = {det}")));
    }
    let m = Jacobian2::new(m11 as f64, m12 as f64, m21 as f64, m22 as f64);
    let inv = m.inverse().expect("unimodular matrix is invertible");
    let radius = spectral_radius(&m);
    let h = if radius > 1.0 { radius.ln() } else { 0.0 };
    let name = match (m11, m12, m21, m22) {
        (2, 1, 1, 1) => "cat".to_string(),
        (1, 0, 0, 1) => "identity".to_string(),
        (1, 1, 0, 1) => "shear".to_string(),
        _ => format!("toral[{m11},{m12};{m21},{m22}]"),
    };
    Ok(SurfaceSystem::new(name, Arc::new(LinearMap { m, inv }), Domain::Torus)
        .with_known_entropy(Some(h))
        .with_known_lambda_plus(Some(h)))
}

/// Arnold's cat map `[[2,1],[1,1]]`.
pub fn cat() -> SurfaceSystem {
    make_toral_automorphism(2, 1, 1, 1).expect("cat matrix is unimodular")
}

pub fn identity() -> SurfaceSystem {
    make_toral_automorphism(1, 0, 0, 1).expect("identity is unimodular")
}

pub fn shear() -> SurfaceSystem {
    make_toral_automorphism(1, 1, 0, 1).expect("shear is unimodular")
}

/// Default box for the planar diagonal system.
pub const DIAG_BOX_HALF_WIDTH: f64 = 2.0;

/// `diag(a, 3)` on the box `[−2, 2]²` with the origin as a fixed source.
pub fn make_diag_linear(a: f64) -> Result<SurfaceSystem> {
    if a.is_nan() || a <= 1.0 {
        return Err(Error::param(format!("diag(a,3) needs a > 1, got {a}")));
    }
    let m = Jacobian2::diag(a, 3.0);
    let inv = Jacobian2::diag(1.0 / a, 1.0 / 3.0);
    let lam = a.max(3.0).ln();
    Ok(SurfaceSystem::new(
        format!("diag[{a}]"),
        Arc::new(LinearMap { m, inv }),
        Domain::PlaneBox(Rect::square(DIAG_BOX_HALF_WIDTH)),
    )
    .with_known_lambda_plus(Some(lam))
    .with_sources(vec![PeriodicSource { point: Point2::new(0.0, 0.0), period: 1 }]))
}

/// An arbitrary invertible linear map on a planar box; a testing aid for
/// degenerate or non-hyperbolic cases such as `diag(1,3)` or rotations.
pub fn make_linear_planar(m: Jacobian2, rect: Rect) -> Result<SurfaceSystem> {
    let inv = m
        .inverse()
        .ok_or_else(|| Error::param("linear map must be invertible"))?;
    if !m.is_finite() {
        return Err(Error::param("linear map has non-finite entries"));
    }
    let lam = spectral_radius(&m).ln();
    Ok(SurfaceSystem::new(
        format!("linear[{},{};{},{}]", m.a, m.b, m.c, m.d),
        Arc::new(LinearMap { m, inv }),
        Domain::PlaneBox(rect),
    )
    .with_known_lambda_plus(Some(lam)))
}

pub fn make_standard_map(k: f64) -> Result<SurfaceSystem> {
    if k.is_nan() || k < 0.0 {
        return Err(Error::param(format!("standard map needs k ≥ 0, got {k}")));
    }
    let sys = SurfaceSystem::new(format!("standard[{k}]"), Arc::new(StandardMap { k }), Domain::Torus);
    Ok(if k == 0.0 { sys.with_known_entropy(Some(0.0)).with_known_lambda_plus(Some(0.0)) } else { sys })
}

pub fn make_perturbed_cat(eps: f64) -> Result<SurfaceSystem> {
    if eps.is_nan() || eps.abs() >= 0.1 {
        return Err(Error::param(format!("perturbed cat needs |eps| < 0.1, got {eps}")));
    }
    Ok(SurfaceSystem::new(format!("perturbed-cat[{eps}]"), Arc::new(PerturbedCat { eps }), Domain::Torus))
}

/// Parameters for named systems, e.g. `k=6` or `a=1.5`.
pub type Params = BTreeMap<String, f64>;

/// Parses `k=v` pairs separated by commas.
pub fn parse_params(text: &str) -> Result<Params> {
    let mut out = Params::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::param(format!("parameter `{part}` is not of the form key=value")))?;
        let val: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("parameter `{}` has non-numeric value `{}`", k.trim(), v.trim())))?;
        out.insert(k.trim().to_string(), val);
    }
    Ok(out)
}

fn take(params: &Params, key: &str, default: Option<f64>) -> Result<f64> {
    match params.get(key).copied().or(default) {
        Some(v) => Ok(v),
        None => Err(Error::param(format!("missing parameter `{key}`"))),
    }
}

fn take_int(params: &Params, key: &str) -> Result<i64> {
    let v = take(params, key, None)?;
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::param(format!("parameter `{key}` must be an integer, got {v}")));
    }
    Ok(v as i64)
}

/// Names accepted by [`system_by_name`].
pub const SYSTEM_NAMES: &[&str] = &["cat", "identity", "shear", "toral", "diag", "standard", "perturbed-cat"];

/// Builds a named system. Every system additionally accepts `r` (smoothness
/// order, default ∞).
pub fn system_by_name(name: &str, params: &Params) -> Result<SurfaceSystem> {
    let known: &[&str] = match name {
        "cat" | "identity" | "shear" => &[],
        "toral" => &["m11", "m12", "m21", "m22"],
        "diag" => &["a"],
        "standard" => &["k"],
        "perturbed-cat" => &["eps"],
        _ => return Err(Error::UnknownSystem(name.to_string())),
    };
    if let Some(bad) = params.keys().find(|k| k.as_str() != "r" && !known.contains(&k.as_str())) {
        return Err(Error::param(format!("system `{name}` does not take parameter `{bad}`")));
    }
    let sys = match name {
        "cat" => cat(),
        "identity" => identity(),
        "shear" => shear(),
        "toral" => make_toral_automorphism(
            take_int(params, "m11")?,
            take_int(params, "m12")?,
            take_int(params, "m21")?,
            take_int(params, "m22")?,
        )?,
        "diag" => make_diag_linear(take(params, "a", Some(1.5))?)?,
        "standard" => make_standard_map(take(params, "k", Some(6.0))?)?,
        _ => make_perturbed_cat(take(params, "eps", Some(0.05))?)?,
    };
    match params.get("r") {
        Some(&r) => sys.with_smoothness(r),
        None => Ok(sys),
    }
}

/// Polishes an approximate periodic point of the given period by Newton's
/// method on `f^p(z) − z` (taken modulo ℤ² on the torus).
pub fn refine_periodic_point(system: &SurfaceSystem, seed: Point2, period: usize, max_iter: usize) -> Result<Point2> {
    if period == 0 {
        return Err(Error::param("period must be at least 1"));
    }
    let mut z = seed;
    for _ in 0..max_iter {
        let img = system.iterate_lift(z, period)?;
        let (mut du, mut dv) = (img.u - z.u, img.v - z.v);
        if system.domain.is_torus() {
            du = wrap_delta(du);
            dv = wrap_delta(dv);
        }
        if du.hypot(dv) < 1e-14 {
            return Ok(system.canonicalize(z));
        }
        let jac = crate::dynamics::cocycle_jacobian(system, z, period)?;
        let g = Jacobian2::new(jac.a - 1.0, jac.b, jac.c, jac.d - 1.0);
        let ginv = g
            .inverse()
            .ok_or_else(|| Error::InvariantViolated("Df^p − I is singular at the Newton iterate".into()))?;
        let (su, sv) = ginv.apply((du, dv));
        z = Point2::new(z.u - su, z.v - sv);
    }
    let img = system.iterate(z, period)?;
    if system.distance(img, system.canonicalize(z)) < 1e-9 {
        Ok(system.canonicalize(z))
    } else {
        Err(Error::BudgetExhausted(format!("Newton refinement did not converge in {max_iter} steps")))
    }
}

/// Result of checking one listed source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceCertificate {
    pub source: PeriodicSource,
    pub return_distance: f64,
    pub min_eigen_modulus: f64,
}

impl SourceCertificate {
    pub fn holds(&self) -> bool {
        self.return_distance < 1e-9 && self.min_eigen_modulus > 1.0
    }
}

fn min_eigen_modulus(j: &Jacobian2) -> f64 {
    let t = j.trace();
    let disc = t * t - 4.0 * j.det();
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((t + s) * 0.5).abs().min(((t - s) * 0.5).abs())
    } else {
        j.det().abs().sqrt()
    }
}

/// Checks that every listed source returns to itself and is repelling.
pub fn certify_sources(system: &SurfaceSystem) -> Result<Vec<SourceCertificate>> {
    system
        .periodic_sources
        .iter()
        .map(|s| {
            let img = system.iterate(s.point, s.period)?;
            let jac = crate::dynamics::cocycle_jacobian(system, s.point, s.period)?;
            Ok(SourceCertificate {
                source: *s,
                return_distance: system.distance(img, system.canonicalize(s.point)),
                min_eigen_modulus: min_eigen_modulus(&jac),
            })
        })
        .collect()
}

/// Largest `|f⁻¹(f(p)) − p|` over the points (torus differences reduced).
pub fn inverse_defect(system: &SurfaceSystem, points: &[Point2]) -> f64 {
    let map = system.map();
    points
        .iter()
        .map(|&p| {
            let back = map.lift_inverse(map.lift(p));
            if system.domain.is_torus() {
                wrap_delta(back.u - p.u).hypot(wrap_delta(back.v - p.v))
            } else {
                back.dist(p)
            }
        })
        .fold(0.0, f64::max)
}

/// Largest entrywise gap between the analytic Jacobian and central
/// differences of the lifted map with step `h`.
pub fn jacobian_fd_defect(system: &SurfaceSystem, points: &[Point2], h: f64) -> f64 {
    let map = system.map();
    points
        .iter()
        .map(|&p| {
            let fu = (map.lift(p.offset(h, 0.0)), map.lift(p.offset(-h, 0.0)));
            let fv = (map.lift(p.offset(0.0, h)), map.lift(p.offset(0.0, -h)));
            let fd = Jacobian2::new(
                (fu.0.u - fu.1.u) / (2.0 * h),
                (fv.0.u - fv.1.u) / (2.0 * h),
                (fu.0.v - fu.1.v) / (2.0 * h),
                (fv.0.v - fv.1.v) / (2.0 * h),
            );
            fd.max_abs_diff(&map.jacobian(p))
        })
        .fold(0.0, f64::max)
}
