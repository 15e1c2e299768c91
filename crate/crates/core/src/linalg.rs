//! 2×2 real matrices and a renormalized product accumulator.

use std::ops::Mul;

/// A 2×2 real matrix `[[a, b], [c, d]]`, used for single-step Jacobians and
/// for cocycle products along orbits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Jacobian2 {
    pub const IDENTITY: Jacobian2 = Jacobian2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Jacobian2 { a, b, c, d }
    }

    pub const fn diag(x: f64, y: f64) -> Self {
        Jacobian2 { a: x, b: 0.0, c: 0.0, d: y }
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Jacobian2 { a: c, b: -s, c: s, d: c }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    /// Returns `None` for a singular matrix.
    pub fn inverse(&self) -> Option<Jacobian2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Jacobian2 {
            a: self.d / det,
            b: -self.b / det,
            c: -self.c / det,
            d: self.a / det,
        })
    }

    pub fn scale(&self, s: f64) -> Jacobian2 {
        Jacobian2 { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }

    /// First column, i.e. the image of `e1`.
    pub fn column1(&self) -> (f64, f64) {
        (self.a, self.c)
    }

    /// Second column, i.e. the image of `e2`.
    pub fn column2(&self) -> (f64, f64) {
        (self.b, self.d)
    }

    pub fn max_abs_diff(&self, other: &Jacobian2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }
}

impl Mul for Jacobian2 {
    type Output = Jacobian2;

    fn mul(self, r: Jacobian2) -> Jacobian2 {
        Jacobian2 {
            a: self.a * r.a + self.b * r.c,
            b: self.a * r.b + self.b * r.d,
            c: self.c * r.a + self.d * r.c,
            d: self.c * r.b + self.d * r.d,
        }
    }
}

/// Largest singular value of `j`.
///
/// Closed form for 2×2: with `p = ½‖(a+d, c−b)‖` and `q = ½‖(a−d, b+c)‖`
/// the singular values are `p + q` and `|p − q|`.
pub fn operator_norm(j: &Jacobian2) -> f64 {
    let p = (j.a + j.d).hypot(j.c - j.b);
    let q = (j.a - j.d).hypot(j.b + j.c);
    0.5 * (p + q)
}

/// Smallest singular value of `j`.
pub fn min_singular_value(j: &Jacobian2) -> f64 {
    let p = (j.a + j.d).hypot(j.c - j.b);
    let q = (j.a - j.d).hypot(j.b + j.c);
    0.5 * (p - q).abs()
}

pub fn vec_norm(v: (f64, f64)) -> f64 {
    v.0.hypot(v.1)
}

/// Spectral radius of a real 2×2 matrix.
pub fn spectral_radius(j: &Jacobian2) -> f64 {
    let t = j.trace();
    let disc = t * t - 4.0 * j.det();
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((t + s) * 0.5).abs().max(((t - s) * 0.5).abs())
    } else {
        j.det().abs().sqrt()
    }
}

const RESCALE_HIGH: f64 = 1e64;
const RESCALE_LOW: f64 = 1e-64;

/// Running product `M_k ··· M_1` stored as `exp(log_scale) · mat`.
///
/// The matrix part is renormalized whenever its norm leaves
/// `[1e-64, 1e64]`, so products of thousands of factors never overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledProduct {
    mat: Jacobian2,
    log_scale: f64,
}

impl Default for ScaledProduct {
    fn default() -> Self {
        Self::identity()
    }
}

impl ScaledProduct {
    pub fn identity() -> Self {
        ScaledProduct { mat: Jacobian2::IDENTITY, log_scale: 0.0 }
    }

    /// Left-multiplies by the next step: `P ← step · P`.
    pub fn push(&mut self, step: &Jacobian2) {
        self.mat = *step * self.mat;
        let m = self.mat.max_abs_entry();
        if !(RESCALE_LOW..=RESCALE_HIGH).contains(&m) && m > 0.0 && m.is_finite() {
            self.mat = self.mat.scale(1.0 / m);
            self.log_scale += m.ln();
        }
    }

    pub fn log_norm(&self) -> f64 {
        self.log_scale + operator_norm(&self.mat).ln()
    }

    /// log of `‖P v‖` for a unit vector `v`.
    pub fn log_norm_of(&self, v: (f64, f64)) -> f64 {
        self.log_scale + vec_norm(self.mat.apply(v)).ln()
    }

    pub fn normalized(&self) -> Jacobian2 {
        self.mat
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// The product without renormalization; may overflow for long products.
    pub fn to_matrix(&self) -> Jacobian2 {
        self.mat.scale(self.log_scale.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_norm(j: &Jacobian2, dirs: usize) -> f64 {
        (0..dirs)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / dirs as f64;
                vec_norm(j.apply((th.cos(), th.sin())))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn norm_of_identity_and_diagonal() {
        assert_eq!(operator_norm(&Jacobian2::IDENTITY), 1.0);
        assert_eq!(operator_norm(&Jacobian2::diag(1.5, 3.0)), 3.0);
        assert_eq!(operator_norm(&Jacobian2::diag(3.5, 3.0)), 3.5);
    }

    #[test]
    fn cat_matrix_norm_matches_eigenvalue() {
        // symmetric positive definite: norm is the top eigenvalue (3+√5)/2
        let cat = Jacobian2::new(2.0, 1.0, 1.0, 1.0);
        let expected = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((operator_norm(&cat) - expected).abs() < 1e-14);
        assert!((operator_norm(&cat) - 2.618034).abs() < 1e-6);
        assert!((spectral_radius(&cat) - expected).abs() < 1e-14);
    }

    #[test]
    fn norm_matches_direction_sweep() {
        let mats = [
            Jacobian2::new(2.0, 1.0, 1.0, 1.0),
            Jacobian2::new(0.3, -4.0, 2.5, 1.1),
            Jacobian2::new(1.0, 7.0, 0.0, 1.0),
            Jacobian2::rotation(0.7),
            Jacobian2::new(-1.0, 0.5, 0.25, -3.0),
        ];
        for m in mats {
            let brute = brute_norm(&m, 3600);
            let exact = operator_norm(&m);
            assert!(exact >= brute - 1e-12);
            assert!((exact - brute).abs() <= 1e-6 * exact.max(1.0), "{m:?}");
        }
    }

    #[test]
    fn singular_values_multiply_to_det() {
        let m = Jacobian2::new(0.3, -4.0, 2.5, 1.1);
        let prod = operator_norm(&m) * min_singular_value(&m);
        assert!((prod - m.det().abs()).abs() < 1e-12);
    }

    #[test]
    fn scaled_product_survives_long_products() {
        let cat = Jacobian2::new(2.0, 1.0, 1.0, 1.0);
        let mut p = ScaledProduct::identity();
        for _ in 0..2000 {
            p.push(&cat);
        }
        let expected = 2000.0 * ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((p.log_norm() - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = Jacobian2::new(0.3, -4.0, 2.5, 1.1);
        let id = m * m.inverse().unwrap();
        assert!(id.max_abs_diff(&Jacobian2::IDENTITY) < 1e-14);
        assert!(Jacobian2::new(1.0, 2.0, 2.0, 4.0).inverse().is_none());
    }
}
