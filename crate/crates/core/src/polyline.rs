//! Adaptive polyline approximation of `f^n ∘ σ` and its (clipped) length.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::curve::Curve;
use crate::dynamics::{Point2, Rect, SurfaceSystem};
use crate::error::{Error, Result};
use crate::growth::{Extrapolation, GrowthSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefineConfig {
    pub tol: f64,
    pub initial_intervals: usize,
    pub min_width: f64,
    pub max_vertices: usize,
}

impl RefineConfig {
    pub fn with_tol(tol: f64) -> Self {
        RefineConfig { tol, ..Self::default() }
    }
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig { tol: 1e-6, initial_intervals: 64, min_width: 1e-12, max_vertices: 1 << 22 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vertex {
    pub t: f64,
    pub p: Point2,
}

/// Image polyline with vertices ordered by parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    pub vertices: Vec<Vertex>,
    /// Largest relative two-chord excess left among the final intervals.
    pub achieved_excess: f64,
    /// Smallest parameter width among the final intervals.
    pub finest_width: f64,
    /// False when the vertex budget stopped refinement early.
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcLength {
    pub length: f64,
    pub vertices: usize,
    pub complete: bool,
    pub achieved_excess: f64,
}

struct Interval {
    a: Vertex,
    m: Vertex,
    b: Vertex,
    excess: f64,
}

impl Interval {
    fn new(a: Vertex, m: Vertex, b: Vertex) -> Self {
        let c0 = a.p.dist(b.p);
        let two = a.p.dist(m.p) + m.p.dist(b.p);
        let excess = if two > 0.0 { (two - c0) / two } else { 0.0 };
        Interval { a, m, b, excess }
    }
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Interval {}

impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Interval {
    // max-heap on excess; among equal excess the leftmost interval wins
    fn cmp(&self, other: &Self) -> Ordering {
        self.excess
            .total_cmp(&other.excess)
            .then_with(|| other.a.t.total_cmp(&self.a.t))
    }
}

fn image(system: &SurfaceSystem, curve: &Curve, n: usize, t: f64) -> Result<Vertex> {
    let p = system.iterate_lift(curve.point(t)?, n)?;
    if !(p.u.is_finite() && p.v.is_finite()) {
        return Err(Error::InvariantViolated(format!("non-finite image point at t = {t}")));
    }
    Ok(Vertex { t, p })
}

/// Refines the image of `f^n ∘ σ` until every interval's two-chord length
/// exceeds its chord by a relative factor of at most `tol`, the interval is
/// narrower than `min_width`, or the vertex budget is spent.
pub fn image_polyline(system: &SurfaceSystem, curve: &Curve, n: usize, cfg: &RefineConfig) -> Result<Polyline> {
    if !(cfg.tol > 0.0) {
        return Err(Error::param("refinement tolerance must be positive"));
    }
    let k = cfg.initial_intervals.max(1);
    let mut heap = BinaryHeap::with_capacity(4 * k);
    let mut vertices = 2 * k + 1;
    let first: Vec<Vertex> = (0..=2 * k)
        .map(|i| image(system, curve, n, i as f64 / (2 * k) as f64))
        .collect::<Result<_>>()?;
    for i in 0..k {
        heap.push(Interval::new(first[2 * i], first[2 * i + 1], first[2 * i + 2]));
    }
    let mut done: Vec<Interval> = Vec::with_capacity(heap.len());
    let mut complete = true;
    while let Some(iv) = heap.pop() {
        if iv.excess <= cfg.tol || iv.b.t - iv.a.t < cfg.min_width {
            done.push(iv);
            continue;
        }
        if vertices + 2 > cfg.max_vertices {
            complete = false;
            done.push(iv);
            done.extend(heap.drain());
            break;
        }
        let left = image(system, curve, n, 0.5 * (iv.a.t + iv.m.t))?;
        let right = image(system, curve, n, 0.5 * (iv.m.t + iv.b.t))?;
        vertices += 2;
        heap.push(Interval::new(iv.a, left, iv.m));
        heap.push(Interval::new(iv.m, right, iv.b));
    }
    done.sort_by(|x, y| x.a.t.total_cmp(&y.a.t));
    let achieved_excess = done.iter().map(|iv| iv.excess).fold(0.0, f64::max);
    let finest_width = done.iter().map(|iv| iv.b.t - iv.a.t).fold(f64::INFINITY, f64::min);
    let mut out = Vec::with_capacity(2 * done.len() + 1);
    for iv in &done {
        out.push(iv.a);
        out.push(iv.m);
    }
    if let Some(last) = done.last() {
        out.push(last.b);
    }
    Ok(Polyline { vertices: out, achieved_excess, finest_width, complete })
}

impl Polyline {
    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].p.dist(w[1].p)).sum()
    }

    /// Length of the part of the polyline inside `rect`.
    pub fn clipped_length(&self, rect: &Rect) -> f64 {
        self.vertices.windows(2).map(|w| clipped_segment_length(w[0].p, w[1].p, rect)).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,u,v")?;
        for v in &self.vertices {
            writeln!(w, "{},{},{}", crate::report::fmt_f64(v.t), crate::report::fmt_f64(v.p.u), crate::report::fmt_f64(v.p.v))?;
        }
        Ok(())
    }
}

/// Length of `[p, q] ∩ rect` by Liang–Barsky clipping.
pub fn clipped_segment_length(p: Point2, q: Point2, rect: &Rect) -> f64 {
    let (du, dv) = (q.u - p.u, q.v - p.v);
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for (den, num) in [
        (-du, p.u - rect.u_min),
        (du, rect.u_max - p.u),
        (-dv, p.v - rect.v_min),
        (dv, rect.v_max - p.v),
    ] {
        if den == 0.0 {
            if num < 0.0 {
                return 0.0;
            }
        } else {
            let r = num / den;
            if den < 0.0 {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
    }
    if hi <= lo {
        0.0
    } else {
        (hi - lo) * du.hypot(dv)
    }
}

/// Length of `f^n ∘ σ`.
pub fn arc_length(system: &SurfaceSystem, curve: &Curve, n: usize, tol: f64) -> Result<ArcLength> {
    arc_length_with(system, curve, n, &RefineConfig::with_tol(tol))
}

pub fn arc_length_with(system: &SurfaceSystem, curve: &Curve, n: usize, cfg: &RefineConfig) -> Result<ArcLength> {
    let poly = image_polyline(system, curve, n, cfg)?;
    Ok(ArcLength {
        length: poly.length(),
        vertices: poly.vertices.len(),
        complete: poly.complete,
        achieved_excess: poly.achieved_excess,
    })
}

/// Length of `f^n ∘ σ` inside `rect`.
pub fn clipped_arc_length(system: &SurfaceSystem, curve: &Curve, n: usize, rect: &Rect, tol: f64) -> Result<ArcLength> {
    let poly = image_polyline(system, curve, n, &RefineConfig::with_tol(tol))?;
    Ok(ArcLength {
        length: poly.clipped_length(rect),
        vertices: poly.vertices.len(),
        complete: poly.complete,
        achieved_excess: poly.achieved_excess,
    })
}

/// Per-horizon lengths of `f^n ∘ σ`, computed in parallel.
pub fn arc_lengths(system: &SurfaceSystem, curve: &Curve, n_list: &[usize], tol: f64) -> Result<Vec<ArcLength>> {
    n_list.par_iter().map(|&n| arc_length(system, curve, n, tol)).collect()
}

fn series_from_lengths(n_list: &[usize], lengths: &[f64]) -> Result<GrowthSeries> {
    let mut pairs = Vec::with_capacity(n_list.len());
    for (&n, &l) in n_list.iter().zip(lengths) {
        if !(l > 0.0) {
            return Err(Error::InvariantViolated(format!("image length {l} at n = {n} is not positive")));
        }
        pairs.push((n, l.ln() / n as f64));
    }
    GrowthSeries::from_pairs(pairs, Extrapolation::InverseNFit)
}

/// `(1/n) log Vol(f^n σ)` with the `rate + β/n` extrapolation.
pub fn curve_growth_series(system: &SurfaceSystem, curve: &Curve, n_list: &[usize], tol: f64) -> Result<GrowthSeries> {
    let lengths: Vec<f64> = arc_lengths(system, curve, n_list, tol)?.iter().map(|a| a.length).collect();
    series_from_lengths(n_list, &lengths)
}

/// `(1/n) log Length(f^n σ ∩ rect)`, iterating on the whole plane.
pub fn clipped_curve_growth_series(
    system: &SurfaceSystem,
    curve: &Curve,
    n_list: &[usize],
    rect: &Rect,
    tol: f64,
) -> Result<GrowthSeries> {
    let open = system.unbounded();
    let lengths: Vec<f64> = n_list
        .par_iter()
        .map(|&n| clipped_arc_length(&open, curve, n, rect, tol).map(|a| a.length))
        .collect::<Result<_>>()?;
    series_from_lengths(n_list, &lengths)
}

/// Per-horizon maximum of the image lengths over an admissible family.
pub fn sup_curve_growth(system: &SurfaceSystem, family: &[Curve], n_list: &[usize], tol: f64) -> Result<GrowthSeries> {
    if family.is_empty() {
        return Err(Error::param("curve family is empty"));
    }
    for c in family {
        c.check_admissible()?;
    }
    let per_curve: Vec<Vec<ArcLength>> = family
        .iter()
        .map(|c| arc_lengths(system, c, n_list, tol))
        .collect::<Result<_>>()?;
    let lengths: Vec<f64> = (0..n_list.len())
        .map(|i| per_curve.iter().map(|row| row[i].length).fold(0.0, f64::max))
        .collect();
    series_from_lengths(n_list, &lengths)
}
