//! Parametrized curves, derivative bounds, boundedness checks and the
//! splitting of an admissible curve into ε-bounded pieces.
//!
//! A [`Curve`] is a base shape restricted to a parameter window:
//! `σ(t) = shape(t0 + dt·t)` for `t ∈ [0,1]`. Affine reparametrizations of a
//! curve are therefore again curves, and derivative bounds scale by `dt^s`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::Serialize;

use crate::dynamics::{cocycle_jacobian, Point2, SurfaceSystem};
use crate::error::{Error, Result};
use crate::linalg::vec_norm;

/// Samples used for sup/inf of `‖d_tσ‖` when no closed form is available.
const DERIVATIVE_SAMPLES: usize = 1025;
/// Parameter step of the central difference used for second derivatives of
/// curves without analytic higher-order bounds.
pub const SECOND_DERIVATIVE_FD_STEP: f64 = 1e-5;

#[derive(Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveShape {
    /// `start + s·(end − start)`.
    Segment { start: Point2, end: Point2 },
    /// `origin + s·direction + amplitude·sin(omega·s + phase)·n̂`, where `n̂`
    /// is the unit normal obtained by rotating `direction` by +π/2.
    Wave { origin: Point2, direction: (f64, f64), amplitude: f64, omega: f64, phase: f64 },
    /// `(s, s⁵ sin(1/s))`, extended continuously by the origin at `s = 0`.
    Oscillator,
    /// `f^n ∘ base`; first derivatives by the chain rule.
    Iterated {
        #[serde(skip)]
        system: SurfaceSystem,
        base: Box<CurveShape>,
        n: usize,
    },
}

impl fmt::Debug for CurveShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveShape::Segment { start, end } => write!(f, "Segment({start:?} -> {end:?})"),
            CurveShape::Wave { origin, direction, amplitude, omega, phase } => {
                write!(f, "Wave(o={origin:?}, d={direction:?}, A={amplitude}, w={omega}, phi={phase})")
            }
            CurveShape::Oscillator => write!(f, "Oscillator"),
            CurveShape::Iterated { system, base, n } => write!(f, "Iterated({}, {base:?}, n={n})", system.name),
        }
    }
}

/// Position and first derivative of `(x, x⁵ sin(1/x))`.
pub fn sigma_osc(x: f64) -> (Point2, (f64, f64)) {
    if x == 0.0 {
        return (Point2::new(0.0, 0.0), (1.0, 0.0));
    }
    let (s, c) = (1.0 / x).sin_cos();
    let x3 = x * x * x;
    let x4 = x3 * x;
    (Point2::new(x, x4 * x * s), (1.0, 5.0 * x4 * s - x3 * c))
}

impl CurveShape {
    fn normal(direction: (f64, f64)) -> (f64, f64) {
        let len = vec_norm(direction);
        (-direction.1 / len, direction.0 / len)
    }

    pub fn point(&self, s: f64) -> Result<Point2> {
        Ok(match self {
            CurveShape::Segment { start, end } => {
                Point2::new(start.u + s * (end.u - start.u), start.v + s * (end.v - start.v))
            }
            CurveShape::Wave { origin, direction, amplitude, omega, phase } => {
                let nrm = Self::normal(*direction);
                let w = amplitude * (omega * s + phase).sin();
                Point2::new(origin.u + s * direction.0 + w * nrm.0, origin.v + s * direction.1 + w * nrm.1)
            }
            CurveShape::Oscillator => sigma_osc(s).0,
            CurveShape::Iterated { system, base, n } => system.iterate_lift(base.point(s)?, *n)?,
        })
    }

    pub fn derivative(&self, s: f64) -> Result<(f64, f64)> {
        Ok(match self {
            CurveShape::Segment { start, end } => (end.u - start.u, end.v - start.v),
            CurveShape::Wave { direction, amplitude, omega, phase, .. } => {
                let nrm = Self::normal(*direction);
                let w = amplitude * omega * (omega * s + phase).cos();
                (direction.0 + w * nrm.0, direction.1 + w * nrm.1)
            }
            CurveShape::Oscillator => sigma_osc(s).1,
            CurveShape::Iterated { system, base, n } => {
                let jac = cocycle_jacobian(system, base.point(s)?, *n)?;
                jac.apply(base.derivative(s)?)
            }
        })
    }

    /// Upper bound on `sup_s ‖d^k shape‖` over the whole parameter range for
    /// `k ≥ 2`, when known in closed form.
    pub fn higher_bound(&self, k: usize) -> Option<f64> {
        match self {
            CurveShape::Segment { .. } => Some(0.0),
            CurveShape::Wave { amplitude, omega, .. } => Some(amplitude.abs() * omega.abs().powi(k as i32)),
            _ => None,
        }
    }

    fn is_closed_form(&self) -> bool {
        matches!(self, CurveShape::Segment { .. } | CurveShape::Wave { .. })
    }
}

/// Largest and smallest `|cos θ|` over `[θ0, θ1]`.
fn cos_abs_range(theta0: f64, theta1: f64) -> (f64, f64) {
    let (lo, hi) = if theta0 <= theta1 { (theta0, theta1) } else { (theta1, theta0) };
    let ends_max = lo.cos().abs().max(hi.cos().abs());
    let ends_min = lo.cos().abs().min(hi.cos().abs());
    let contains = |offset: f64| {
        let k = ((lo - offset) / std::f64::consts::PI).ceil();
        offset + k * std::f64::consts::PI <= hi
    };
    let max = if contains(0.0) { 1.0 } else { ends_max };
    let min = if contains(FRAC_PI_2) { 0.0 } else { ends_min };
    (max, min)
}

/// A parametrized curve `t ↦ shape(t0 + dt·t)`, `t ∈ [0,1]`, with a
/// smoothness order used by the boundedness checks.
#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub shape: CurveShape,
    pub t0: f64,
    pub dt: f64,
    pub order: usize,
}

/// Boundedness verdict with the quantities behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundednessReport {
    /// `‖dσ‖ = sup_t ‖d_tσ‖`.
    pub first_sup: f64,
    /// `min_t ‖d_tσ‖`.
    pub first_min: f64,
    /// `max_{2≤s≤r} ‖d^sσ‖`.
    pub higher_max: f64,
    pub bounded: bool,
    /// `‖dσ‖ ≤ 2·min_t‖d_tσ‖`, the consequence of boundedness.
    pub consequence_holds: bool,
}

impl Curve {
    pub fn new(shape: CurveShape) -> Self {
        Curve { shape, t0: 0.0, dt: 1.0, order: 2 }
    }

    pub fn segment(start: Point2, end: Point2) -> Self {
        Self::new(CurveShape::Segment { start, end })
    }

    /// The closed loop `[0,1) × {v}` on the torus.
    pub fn horizontal_loop(v: f64) -> Self {
        Self::segment(Point2::new(0.0, v), Point2::new(1.0, v))
    }

    /// The closed loop `{u} × [0,1)` on the torus.
    pub fn vertical_loop(u: f64) -> Self {
        Self::segment(Point2::new(u, 0.0), Point2::new(u, 1.0))
    }

    pub fn wave(origin: Point2, direction: (f64, f64), amplitude: f64, omega: f64, phase: f64) -> Result<Self> {
        if !(vec_norm(direction) > 0.0) {
            return Err(Error::param("wave direction must be nonzero"));
        }
        Ok(Self::new(CurveShape::Wave { origin, direction, amplitude, omega, phase }))
    }

    pub fn oscillator() -> Self {
        Self::new(CurveShape::Oscillator)
    }

    pub fn with_order(mut self, r: usize) -> Self {
        self.order = r.max(1);
        self
    }

    /// `f^n ∘ σ` as a curve in its own right.
    pub fn iterated(&self, system: &SurfaceSystem, n: usize) -> Curve {
        Curve {
            shape: CurveShape::Iterated { system: system.clone(), base: Box::new(self.shape.clone()), n },
            t0: self.t0,
            dt: self.dt,
            order: self.order,
        }
    }

    /// The reparametrization `σ ∘ θ` with `θ(t) = scale·t + offset`.
    pub fn reparametrize(&self, scale: f64, offset: f64) -> Curve {
        Curve { shape: self.shape.clone(), t0: self.t0 + self.dt * offset, dt: self.dt * scale, order: self.order }
    }

    fn param(&self, t: f64) -> f64 {
        self.t0 + self.dt * t
    }

    pub fn point(&self, t: f64) -> Result<Point2> {
        self.shape.point(self.param(t))
    }

    pub fn derivative(&self, t: f64) -> Result<(f64, f64)> {
        let d = self.shape.derivative(self.param(t))?;
        Ok((d.0 * self.dt, d.1 * self.dt))
    }

    /// `(sup_t ‖d_tσ‖, min_t ‖d_tσ‖)`; exact for segments and waves,
    /// sampled otherwise.
    pub fn first_derivative_range(&self) -> Result<(f64, f64)> {
        let scale = self.dt.abs();
        match &self.shape {
            CurveShape::Segment { start, end } => {
                let l = start.dist(*end) * scale;
                Ok((l, l))
            }
            CurveShape::Wave { direction, amplitude, omega, phase, .. } => {
                let s0 = self.t0;
                let s1 = self.t0 + self.dt;
                let (cmax, cmin) = cos_abs_range(omega * s0 + phase, omega * s1 + phase);
                let base = vec_norm(*direction);
                let aw = (amplitude * omega).abs();
                Ok((base.hypot(aw * cmax) * scale, base.hypot(aw * cmin) * scale))
            }
            _ => {
                let mut sup: f64 = 0.0;
                let mut inf = f64::INFINITY;
                for i in 0..DERIVATIVE_SAMPLES {
                    let t = i as f64 / (DERIVATIVE_SAMPLES - 1) as f64;
                    let d = vec_norm(self.derivative(t)?);
                    sup = sup.max(d);
                    inf = inf.min(d);
                }
                Ok((sup, inf))
            }
        }
    }

    /// Upper bound on `‖d^sσ‖` for `s ≥ 2`.
    pub fn higher_derivative_bound(&self, s: usize) -> Result<f64> {
        if let Some(b) = self.shape.higher_bound(s) {
            return Ok(b * self.dt.abs().powi(s as i32));
        }
        if s == 2 {
            return self.fd_second_derivative_sup();
        }
        Err(Error::DerivativeBoundUnavailable { order: s })
    }

    fn fd_second_derivative_sup(&self) -> Result<f64> {
        let h = SECOND_DERIVATIVE_FD_STEP;
        let mut sup: f64 = 0.0;
        for i in 0..DERIVATIVE_SAMPLES {
            let t = (i as f64 / (DERIVATIVE_SAMPLES - 1) as f64).clamp(h, 1.0 - h);
            let a = self.derivative(t + h)?;
            let b = self.derivative(t - h)?;
            sup = sup.max(vec_norm(((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h))));
        }
        Ok(sup)
    }

    /// `max_{2≤s≤r} ‖d^sσ‖` (zero when `r < 2`).
    pub fn higher_max(&self) -> Result<f64> {
        let mut m: f64 = 0.0;
        for s in 2..=self.order {
            m = m.max(self.higher_derivative_bound(s)?);
        }
        Ok(m)
    }

    pub fn boundedness(&self) -> Result<BoundednessReport> {
        let (first_sup, first_min) = self.first_derivative_range()?;
        let higher_max = self.higher_max()?;
        let bounded = higher_max <= first_sup / 6.0;
        Ok(BoundednessReport {
            first_sup,
            first_min,
            higher_max,
            bounded,
            consequence_holds: first_sup <= 2.0 * first_min,
        })
    }

    /// `max_{2≤s≤r} ‖d^sσ‖ ≤ ‖dσ‖/6`.
    pub fn is_bounded(&self) -> Result<bool> {
        Ok(self.boundedness()?.bounded)
    }

    /// Bounded and `‖dσ‖ ≤ eps`.
    pub fn is_eps_bounded(&self, eps: f64) -> Result<bool> {
        let rep = self.boundedness()?;
        Ok(rep.bounded && rep.first_sup <= eps)
    }

    /// `‖σ‖_{C^r} = max_{1≤s≤r} ‖d^sσ‖`.
    pub fn cr_norm(&self) -> Result<f64> {
        Ok(self.first_derivative_range()?.0.max(self.higher_max()?))
    }

    /// `‖σ‖_{C^r} ≤ 1` and `‖d_tσ‖ ≥ 1/2` everywhere; closed-form shapes only,
    /// since the check needs every derivative up to order `r`.
    pub fn check_admissible(&self) -> Result<()> {
        if !self.shape.is_closed_form() && self.order > 2 {
            return Err(Error::DerivativeBoundUnavailable { order: 3 });
        }
        let norm = self.cr_norm()?;
        let (_, min) = self.first_derivative_range()?;
        if norm > 1.0 {
            return Err(Error::InadmissibleCurve(format!("C^r norm {norm} exceeds 1")));
        }
        if min < 0.5 {
            return Err(Error::InadmissibleCurve(format!("speed drops to {min} < 1/2")));
        }
        Ok(())
    }
}

/// Piece count `⌈1/ε⌉`, with `1/ε` snapped to the nearest integer when it
/// is one up to rounding.
pub fn piece_count(eps: f64) -> usize {
    let q = 1.0 / eps;
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r {
        r as usize
    } else {
        q.ceil() as usize
    }
}

/// One piece `σ ∘ θ_j` of a decomposition, with `θ_j(t) = δt + b_j`.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePiece {
    pub index: usize,
    pub offset: f64,
    pub scale: f64,
    pub curve: Curve,
}

/// Splits an admissible curve into `N = ⌈1/ε⌉` affine pieces of parameter
/// length `δ = 1/N`; the last piece is anchored at `1 − δ`.
pub fn decompose_eps_bounded(curve: &Curve, eps: f64) -> Result<Vec<CurvePiece>> {
    if !(eps > 0.0 && eps <= 0.01) {
        return Err(Error::param(format!("eps must lie in (0, 1/100], got {eps}")));
    }
    curve.check_admissible()?;
    let n = piece_count(eps);
    let delta = 1.0 / n as f64;
    Ok((1..=n)
        .map(|j| {
            let offset = if j < n { (j - 1) as f64 * delta } else { 1.0 - delta };
            CurvePiece { index: j, offset, scale: delta, curve: curve.reparametrize(delta, offset) }
        })
        .collect())
}

/// True when the parameter windows of the pieces cover `[0,1]` (up to `slack`).
pub fn pieces_cover_unit_interval(pieces: &[CurvePiece], slack: f64) -> bool {
    let mut iv: Vec<(f64, f64)> = pieces.iter().map(|p| (p.offset, p.offset + p.scale)).collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = 0.0;
    for (a, b) in iv {
        if a > reach + slack {
            return false;
        }
        reach = f64::max(reach, b);
    }
    reach >= 1.0 - slack
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn oscillator_values() {
        let x = 1.0 / std::f64::consts::PI;
        let (p, _) = sigma_osc(x);
        assert!((p.u - x).abs() < 1e-15 && p.v.abs() < 1e-17);
        assert_eq!(sigma_osc(0.0), (Point2::new(0.0, 0.0), (1.0, 0.0)));
        let x = 2.0 / std::f64::consts::PI;
        assert!((sigma_osc(x).0.v - x.powi(5)).abs() < 1e-15);
    }

    #[test]
    fn straight_and_wavy_boundedness() {
        let seg = Curve::segment(Point2::new(0.0, 0.0), Point2::new(0.5, 0.0));
        assert!(seg.is_bounded().unwrap());
        let w = Curve::wave(Point2::new(0.0, 0.0), (1.0, 0.0), 0.5, 50.0, 0.0).unwrap();
        let rep = w.boundedness().unwrap();
        assert_eq!(rep.higher_max, 1250.0);
        assert!(!rep.bounded);
    }

    #[test]
    fn eps_bounded_segments() {
        let short = Curve::segment(Point2::new(0.0, 0.0), Point2::new(0.05, 0.0));
        let long = Curve::segment(Point2::new(0.0, 0.0), Point2::new(0.5, 0.0));
        assert!(short.is_eps_bounded(0.1).unwrap());
        assert!(!long.is_eps_bounded(0.1).unwrap());
    }

    #[test]
    fn exact_speed_range_matches_sampling() {
        let w = Curve::wave(Point2::new(0.1, 0.2), (0.6, 0.3), 0.01, 7.0, 0.4).unwrap().reparametrize(0.3, 0.25);
        let (sup, min) = w.first_derivative_range().unwrap();
        let mut s_sup: f64 = 0.0;
        let mut s_min = f64::INFINITY;
        for i in 0..=20000 {
            let d = vec_norm(w.derivative(i as f64 / 20000.0).unwrap());
            s_sup = s_sup.max(d);
            s_min = s_min.min(d);
        }
        assert!(sup >= s_sup - 1e-15 && sup - s_sup < 1e-8);
        assert!(min <= s_min + 1e-15 && s_min - min < 1e-8);
    }

    #[test]
    fn piece_counts() {
        assert_eq!(piece_count(0.01), 100);
        assert_eq!(piece_count(0.003), 334);
        assert_eq!(piece_count(1.0 / 250.0), 250);
        assert_eq!(piece_count(0.001), 1000);
    }

    #[test]
    fn decomposition_layout() {
        let c = Curve::segment(Point2::new(0.1, 0.1), Point2::new(0.8, 0.3));
        let pieces = decompose_eps_bounded(&c, 0.003).unwrap();
        assert_eq!(pieces.len(), 334);
        assert!((pieces[1].offset - 0.002994).abs() < 1e-6);
        assert!((pieces[333].offset - (1.0 - 1.0 / 334.0)).abs() < 1e-15);
        assert!(pieces_cover_unit_interval(&pieces, 1e-12));
        for p in &pieces {
            assert!(p.curve.is_eps_bounded(0.003).unwrap());
        }
        assert!(decompose_eps_bounded(&c, 0.02).is_err());
        let fast = Curve::segment(Point2::new(0.0, 0.0), Point2::new(2.0, 0.0));
        assert!(matches!(decompose_eps_bounded(&fast, 0.01), Err(Error::InadmissibleCurve(_))));
    }

    #[test]
    fn unavailable_bounds_are_reported() {
        let osc = Curve::oscillator().with_order(3);
        assert_eq!(osc.is_bounded(), Err(Error::DerivativeBoundUnavailable { order: 3 }));
        // second order falls back to finite differences
        assert!(Curve::oscillator().higher_derivative_bound(2).unwrap().is_finite());
    }

    #[test]
    fn iterated_curve_derivative_uses_chain_rule() {
        let cat = zoo::cat();
        let c = Curve::horizontal_loop(0.3).iterated(&cat, 2);
        // oracle: A² e1 = (5, 3)
        assert_eq!(c.derivative(0.4).unwrap(), (5.0, 3.0));
        let p = c.point(0.5).unwrap();
        assert!((p.u - 3.4).abs() < 1e-12 && (p.v - 2.1).abs() < 1e-12);
        let rep = c.boundedness().unwrap();
        assert!(rep.bounded && rep.higher_max < 1e-6);
    }
}
