//! Numerical estimation of topological entropy for smooth surface
//! diffeomorphisms.
//!
//! The crate provides closed-form test systems ([`zoo`]), the tangent
//! cocycle and its projective lift ([`dynamics`]), growth estimators based
//! on the integral of `‖Df^n‖` ([`cocycle`]), on curve length under
//! iteration ([`curve`]) and on separated sets ([`entropy`]), orbit-level
//! diagnostics ([`times`]) and an exactly analysable oscillating-curve
//! example ([`oscillator`]).

// `!(x > 0.0)` is used throughout to reject NaN together with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cocycle;
pub mod curve;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod growth;
pub mod linalg;
pub mod oscillator;
pub mod polyline;
pub mod report;
pub mod sampling;
pub mod selftest;
pub mod times;
pub mod zoo;

pub use dynamics::{Point2, Rect, SurfaceSystem, TangentPoint};
pub use error::{Error, Result};
pub use growth::{Extrapolation, GrowthSeries};
pub use linalg::{operator_norm, Jacobian2};
