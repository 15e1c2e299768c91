//! Dynamical balls, separated and spanning sets on finite clouds, Katok
//! slopes and the ball-integral audit.
//!
//! All set constructions work on a precomputed orbit table. Candidate pairs
//! are found through a hash on the grid cells occupied at the first and last
//! time of the orbit segment: two points within `eps` in the dynamical
//! metric are within `eps` at both ends, so only the 9×9 neighbouring cell
//! pairs need inspection.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{cocycle_jacobian, Domain, Point2, Rect, SurfaceSystem};
use crate::error::{Error, Result};
use crate::growth::{least_squares_line, Extrapolation, GrowthSeries};
use crate::linalg::{min_singular_value, operator_norm, ScaledProduct};

/// `d(f^k y, f^k c) < eps` for `0 ≤ k < n`; leaving a planar domain counts
/// as leaving the ball.
pub fn in_dynamical_ball(system: &SurfaceSystem, center: Point2, y: Point2, n: usize, eps: f64) -> bool {
    if !system.contains(center) || !system.contains(y) {
        return false;
    }
    let mut a = system.canonicalize(center);
    let mut b = system.canonicalize(y);
    for k in 0..n {
        if system.distance(a, b) >= eps {
            return false;
        }
        if k + 1 < n {
            match (system.forward(a), system.forward(b)) {
                (Ok(p), Ok(q)) => {
                    a = p;
                    b = q;
                }
                _ => return false,
            }
        }
    }
    true
}

/// Canonical orbit segments `x, …, f^{n−1}x` of a point cloud.
#[derive(Debug, Clone)]
pub struct OrbitTable {
    pub n: usize,
    pub points: Vec<Point2>,
    /// `None` for points whose orbit segment leaves the domain.
    orbits: Vec<Option<Vec<Point2>>>,
}

impl OrbitTable {
    pub fn build(system: &SurfaceSystem, cloud: &[Point2], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("orbit length must be at least 1"));
        }
        let orbits = cloud.par_iter().map(|&p| system.orbit(p, n - 1).ok()).collect();
        Ok(OrbitTable { n, points: cloud.to_vec(), orbits })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn escaped(&self) -> usize {
        self.orbits.iter().filter(|o| o.is_none()).count()
    }

    fn orbit(&self, i: usize) -> Option<&[Point2]> {
        self.orbits[i].as_deref()
    }
}

/// `max_{k<n} d(f^k a, f^k b) ≤ eps`, with early exit.
fn within(system: &SurfaceSystem, a: &[Point2], b: &[Point2], n: usize, eps: f64) -> bool {
    a[..n].iter().zip(&b[..n]).all(|(p, q)| system.distance(*p, *q) <= eps)
}

/// Dynamical distance `max_{k<n} d(f^k a, f^k b)`.
pub fn dynamical_distance(system: &SurfaceSystem, a: Point2, b: Point2, n: usize) -> Result<f64> {
    let oa = system.orbit(a, n.saturating_sub(1))?;
    let ob = system.orbit(b, n.saturating_sub(1))?;
    Ok(oa.iter().zip(&ob).map(|(p, q)| system.distance(*p, *q)).fold(0.0, f64::max))
}

/// Cell grid with cells at least `eps` wide.
#[derive(Debug, Clone, Copy)]
struct CellGrid {
    rect: Rect,
    cols: i64,
    rows: i64,
    wrap: bool,
}

impl CellGrid {
    fn new(system: &SurfaceSystem, eps: f64) -> Self {
        let (rect, wrap) = match system.domain {
            Domain::Torus => (Rect::unit(), true),
            Domain::PlaneBox(r) => (r, false),
        };
        let count = |len: f64| -> i64 {
            if !len.is_finite() {
                return 1;
            }
            let c = (len / eps).floor() as i64;
            // with fewer than three cells the wrapped neighbourhood repeats cells
            if c < 3 {
                1
            } else {
                c
            }
        };
        CellGrid { rect, cols: count(rect.width()), rows: count(rect.height()), wrap }
    }

    fn cell(&self, p: Point2) -> (i64, i64) {
        let f = |x: f64, lo: f64, len: f64, k: i64| -> i64 {
            if k == 1 {
                return 0;
            }
            (((x - lo) / len * k as f64).floor() as i64).clamp(0, k - 1)
        };
        (f(p.u, self.rect.u_min, self.rect.width(), self.cols), f(p.v, self.rect.v_min, self.rect.height(), self.rows))
    }

    fn neighbours(&self, c: (i64, i64)) -> Vec<(i64, i64)> {
        let axis = |x: i64, k: i64| -> Vec<i64> {
            if k == 1 {
                return vec![0];
            }
            let mut v = Vec::with_capacity(3);
            for d in -1..=1 {
                let y = x + d;
                if self.wrap {
                    v.push(y.rem_euclid(k));
                } else if (0..k).contains(&y) {
                    v.push(y);
                }
            }
            v
        };
        let us = axis(c.0, self.cols);
        let vs = axis(c.1, self.rows);
        us.iter().flat_map(|&u| vs.iter().map(move |&v| (u, v))).collect()
    }
}

type Key = (i64, i64, i64, i64);

struct PairIndex {
    grid: CellGrid,
    buckets: HashMap<Key, Vec<usize>>,
}

impl PairIndex {
    fn new(system: &SurfaceSystem, eps: f64) -> Self {
        PairIndex { grid: CellGrid::new(system, eps), buckets: HashMap::new() }
    }

    fn key(&self, orbit: &[Point2], n: usize) -> Key {
        let a = self.grid.cell(orbit[0]);
        let b = self.grid.cell(orbit[n - 1]);
        (a.0, a.1, b.0, b.1)
    }

    fn insert(&mut self, orbit: &[Point2], n: usize, idx: usize) {
        let k = self.key(orbit, n);
        self.buckets.entry(k).or_default().push(idx);
    }

    /// Indices that may lie within `eps` of `orbit`, in insertion order per
    /// bucket.
    fn candidates<'a>(&'a self, orbit: &[Point2], n: usize) -> impl Iterator<Item = usize> + 'a {
        let a = self.grid.cell(orbit[0]);
        let b = self.grid.cell(orbit[n - 1]);
        let first = self.grid.neighbours(a);
        let last = self.grid.neighbours(b);
        let mut keys = Vec::with_capacity(first.len() * last.len());
        for p in &first {
            for q in &last {
                keys.push((p.0, p.1, q.0, q.1));
            }
        }
        keys.into_iter().filter_map(|k| self.buckets.get(&k)).flat_map(|v| v.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatedSet {
    pub n: usize,
    pub eps: f64,
    /// Cloud indices in insertion order.
    pub indices: Vec<usize>,
    pub points: Vec<Point2>,
    /// Cloud points skipped because their orbit left the domain.
    pub escaped: usize,
}

impl SeparatedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn check_eps_n(n: usize, eps: f64) -> Result<()> {
    if n == 0 || !(eps > 0.0) {
        return Err(Error::param(format!("need n ≥ 1 and eps > 0, got n = {n}, eps = {eps}")));
    }
    Ok(())
}

/// Greedy pass in cloud order keeping every candidate whose dynamical
/// distance to all kept points exceeds `eps`; the result is maximal within
/// the cloud.
pub fn greedy_separated_from_table(system: &SurfaceSystem, table: &OrbitTable, n: usize, eps: f64) -> Result<SeparatedSet> {
    check_eps_n(n, eps)?;
    if n > table.n {
        return Err(Error::param(format!("orbit table holds {} steps, {n} requested", table.n)));
    }
    if table.is_empty() {
        return Err(Error::NoSamples("empty candidate cloud".into()));
    }
    let mut index = PairIndex::new(system, eps);
    let mut kept = Vec::new();
    for i in 0..table.len() {
        let Some(oi) = table.orbit(i) else { continue };
        let close = index
            .candidates(oi, n)
            .any(|j| within(system, oi, table.orbit(j).expect("only valid orbits are indexed"), n, eps));
        if !close {
            index.insert(oi, n, i);
            kept.push(i);
        }
    }
    Ok(SeparatedSet {
        n,
        eps,
        points: kept.iter().map(|&i| table.points[i]).collect(),
        indices: kept,
        escaped: table.escaped(),
    })
}

pub fn greedy_separated_set(system: &SurfaceSystem, cloud: &[Point2], n: usize, eps: f64) -> Result<SeparatedSet> {
    check_eps_n(n, eps)?;
    let table = OrbitTable::build(system, cloud, n)?;
    greedy_separated_from_table(system, &table, n, eps)
}

/// Exhaustive pairwise check that every two points are more than `eps`
/// apart in the `n`-step dynamical metric.
pub fn verify_separated(system: &SurfaceSystem, points: &[Point2], n: usize, eps: f64) -> Result<bool> {
    let orbits: Vec<Vec<Point2>> = points.iter().map(|&p| system.orbit(p, n - 1)).collect::<Result<_>>()?;
    Ok((0..orbits.len()).into_par_iter().all(|i| {
        (i + 1..orbits.len()).all(|j| !within(system, &orbits[i], &orbits[j], n, eps))
    }))
}

/// True when every cloud point lies within `eps` (dynamical metric) of some
/// point of `set`.
pub fn verify_spanning(system: &SurfaceSystem, cloud: &[Point2], set: &[Point2], n: usize, eps: f64) -> Result<bool> {
    let centers: Vec<Vec<Point2>> = set.iter().map(|&p| system.orbit(p, n - 1)).collect::<Result<_>>()?;
    let table = OrbitTable::build(system, cloud, n)?;
    Ok((0..table.len()).into_par_iter().all(|i| match table.orbit(i) {
        Some(o) => centers.iter().any(|c| within(system, o, c, n, eps)),
        None => false,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanningSet {
    pub n: usize,
    pub eps: f64,
    pub indices: Vec<usize>,
    pub points: Vec<Point2>,
    /// Size of the greedy max-coverage cover before comparison with the
    /// maximal separated set.
    pub greedy_size: usize,
    /// Size of the maximal separated set, which also covers the cloud.
    pub separated_size: usize,
}

impl SpanningSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(PartialEq, Eq)]
struct Gain {
    gain: usize,
    idx: usize,
}

impl Ord for Gain {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.cmp(&other.gain).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Gain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A cover of the cloud by `(n, eps)` dynamical balls (closed, `≤ eps`).
///
/// Greedy max-coverage picks, with lazy gain updates, the cloud point whose
/// ball covers most uncovered points (smallest index on ties). Any maximal
/// `eps`-separated set is also a cover, so the smaller of the two is
/// returned.
pub fn greedy_spanning_set(system: &SurfaceSystem, cloud: &[Point2], n: usize, eps: f64) -> Result<SpanningSet> {
    check_eps_n(n, eps)?;
    let table = OrbitTable::build(system, cloud, n)?;
    if table.is_empty() {
        return Err(Error::NoSamples("empty candidate cloud".into()));
    }
    let escaped = table.escaped();
    if escaped > 0 {
        return Err(Error::CoverImpossible { uncovered: escaped });
    }
    let mut index = PairIndex::new(system, eps);
    for i in 0..table.len() {
        index.insert(table.orbit(i).expect("no escapes"), n, i);
    }
    let cover_lists: Vec<Vec<usize>> = (0..table.len())
        .into_par_iter()
        .map(|i| {
            let oi = table.orbit(i).expect("no escapes");
            let mut v: Vec<usize> = index
                .candidates(oi, n)
                .filter(|&j| within(system, oi, table.orbit(j).expect("no escapes"), n, eps))
                .collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut covered = vec![false; table.len()];
    let mut remaining = table.len();
    let mut heap: BinaryHeap<Gain> = cover_lists.iter().enumerate().map(|(idx, l)| Gain { gain: l.len(), idx }).collect();
    let mut chosen = Vec::new();
    while remaining > 0 {
        let Some(top) = heap.pop() else {
            return Err(Error::CoverImpossible { uncovered: remaining });
        };
        let fresh = cover_lists[top.idx].iter().filter(|&&j| !covered[j]).count();
        if fresh == 0 {
            continue;
        }
        if let Some(next) = heap.peek() {
            if fresh < next.gain || (fresh == next.gain && next.idx < top.idx) {
                heap.push(Gain { gain: fresh, idx: top.idx });
                continue;
            }
        }
        for &j in &cover_lists[top.idx] {
            if !covered[j] {
                covered[j] = true;
                remaining -= 1;
            }
        }
        chosen.push(top.idx);
    }
    let sep = greedy_separated_from_table(system, &table, n, eps)?;
    let greedy_size = chosen.len();
    let indices = if sep.len() < greedy_size { sep.indices.clone() } else { chosen };
    Ok(SpanningSet {
        n,
        eps,
        points: indices.iter().map(|&i| table.points[i]).collect(),
        indices,
        greedy_size,
        separated_size: sep.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatokCount {
    pub n: usize,
    pub count: usize,
    /// Counts above the saturation level are limited by the cloud, not the
    /// dynamics, and are left out of the fit.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatokSeries {
    pub eps: f64,
    pub counts: Vec<KatokCount>,
    /// Least-squares slope of `log count` against `n` over the larger half of
    /// the unsaturated horizons; `None` with fewer than two of them.
    pub slope: Option<f64>,
    pub series: GrowthSeries,
}

/// Fraction of the cloud above which a separated count is deemed saturated.
pub const DEFAULT_SATURATION: f64 = 0.05;

/// Separated-set growth per `eps` (given in decreasing order).
pub fn katok_estimate(
    system: &SurfaceSystem,
    cloud: &[Point2],
    n_list: &[usize],
    eps_list: &[f64],
    saturation: f64,
) -> Result<Vec<KatokSeries>> {
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("horizons must be positive and strictly increasing"));
    }
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1] >= w[0]) || !(eps_list[eps_list.len() - 1] > 0.0) {
        return Err(Error::param("eps list must be positive and strictly decreasing"));
    }
    let n_max = *n_list.last().expect("nonempty");
    let table = OrbitTable::build(system, cloud, n_max)?;
    let limit = saturation * (table.len() - table.escaped()) as f64;
    eps_list
        .iter()
        .map(|&eps| {
            // Horizons are evaluated in fixed-size batches and the list stops
            // at the first saturated count, whose successors would only be
            // slower to compute and equally uninformative.
            let mut counts: Vec<KatokCount> = Vec::with_capacity(n_list.len());
            for batch in n_list.chunks(KATOK_BATCH) {
                let part: Vec<KatokCount> = batch
                    .par_iter()
                    .map(|&n| {
                        greedy_separated_from_table(system, &table, n, eps).map(|s| KatokCount {
                            n,
                            count: s.len(),
                            saturated: s.len() as f64 > limit,
                        })
                    })
                    .collect::<Result<_>>()?;
                let stop = part.iter().position(|c| c.saturated);
                counts.extend(part.into_iter().take(stop.map_or(batch.len(), |i| i + 1)));
                if stop.is_some() {
                    break;
                }
            }
            let series = GrowthSeries::from_pairs(
                counts.iter().map(|c| (c.n, (c.count as f64).ln() / c.n as f64)),
                Extrapolation::CountSlope,
            )?;
            let usable: Vec<&KatokCount> = counts.iter().filter(|c| !c.saturated).collect();
            let take = usable.len().div_ceil(2).max(2).min(usable.len());
            let window = &usable[usable.len() - take..];
            let xs: Vec<f64> = window.iter().map(|c| c.n as f64).collect();
            let ys: Vec<f64> = window.iter().map(|c| (c.count as f64).ln()).collect();
            let slope = least_squares_line(&xs, &ys).map(|(_, s)| s);
            Ok(KatokSeries { eps, counts, slope, series })
        })
        .collect()
}

const KATOK_BATCH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallIntegral {
    pub n: usize,
    /// `I(z, n) = Σ w·‖Df^n_x‖` over samples `x ∈ B(z, n, eps)`.
    pub integral: f64,
    pub samples_in_ball: usize,
    /// `I·2^n/eps²`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrzytyckiAudit {
    pub eps: f64,
    pub centers: Vec<Point2>,
    /// `per_center[i][j]`: center `i`, horizon `n_list[j]`.
    pub per_center: Vec<Vec<BallIntegral>>,
    /// Minimum of `I·2^n/eps²` over centres with nonempty balls.
    pub envelope: Vec<(usize, f64)>,
    pub empty_balls: usize,
    pub positive: bool,
}

/// Ball integrals `I(z, n)` for each center.
///
/// `B(z, n, eps)` is a strip of width about `eps·λ^{-(n−1)}` and is curved
/// for nonlinear maps, so it is sampled through its image under `f^k` with
/// `k = ⌊(n−1)/2⌋`: that image is a small, nearly linear patch around
/// `f^k z`. A `density × density` grid on a square around `f^k z` is pulled
/// back by `f^{−k}` and weighted by `1/|det Df^k|`. The square is widened
/// until no in-ball sample lies on its border, or until it reaches
/// half-width `eps`.
pub fn przytycki_audit(
    system: &SurfaceSystem,
    z_list: &[Point2],
    n_list: &[usize],
    eps: f64,
    density: usize,
) -> Result<PrzytyckiAudit> {
    if !(eps > 0.0) || density < 2 || z_list.is_empty() {
        return Err(Error::param("need eps > 0, density >= 2 and at least one center"));
    }
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("horizons must be positive and strictly increasing"));
    }
    let n_max = *n_list.last().expect("nonempty");
    let mut per_center = Vec::with_capacity(z_list.len());
    for &z in z_list {
        let center_orbit = system.orbit(z, n_max - 1)?;
        let mut row = Vec::with_capacity(n_list.len());
        for &n in n_list {
            row.push(ball_integral(system, z, &center_orbit[..n], eps, density)?);
        }
        per_center.push(row);
    }
    let mut empty_balls = 0;
    let mut envelope = Vec::with_capacity(n_list.len());
    for (j, &n) in n_list.iter().enumerate() {
        let mut m = f64::INFINITY;
        for row in &per_center {
            if row[j].samples_in_ball == 0 {
                empty_balls += 1;
            } else {
                m = m.min(row[j].normalized);
            }
        }
        envelope.push((n, m));
    }
    let positive = envelope.iter().all(|&(_, v)| v.is_finite() && v > 0.0);
    Ok(PrzytyckiAudit { eps, centers: z_list.to_vec(), per_center, envelope, empty_balls, positive })
}

const MAX_WIDENINGS: usize = 24;

fn ball_integral(system: &SurfaceSystem, z: Point2, center_orbit: &[Point2], eps: f64, density: usize) -> Result<BallIntegral> {
    let n = center_orbit.len();
    let k = (n - 1) / 2;
    let zk = center_orbit[k];
    let forward = operator_norm(&cocycle_jacobian(system, zk, n - 1 - k)?);
    let backward = 1.0 / min_singular_value(&cocycle_jacobian(system, z, k)?);
    let mut half = (2.0 * eps * (1.0 / forward + 1.0 / backward)).min(eps);
    for _ in 0..MAX_WIDENINGS {
        let d = 2.0 * half / density as f64;
        let rows: Vec<(bool, Option<(f64, f64)>)> = (0..density * density)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % density, idx / density);
                let y = Point2::new(zk.u - half + d * (i as f64 + 0.5), zk.v - half + d * (j as f64 + 0.5));
                let border = i == 0 || j == 0 || i + 1 == density || j + 1 == density;
                (border, pulled_back_log_norm(system, y, k, center_orbit, eps))
            })
            .collect();
        let touches = rows.iter().any(|(b, l)| *b && l.is_some());
        if touches && half < eps {
            half = (2.0 * half).min(eps);
            continue;
        }
        // integrand ‖Df^n_x‖ / |det Df^k_x| in the coordinates y = f^k x
        let logs: Vec<f64> = rows.into_iter().filter_map(|(_, l)| l.map(|(norm, det)| norm - det)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let integral = if logs.is_empty() { 0.0 } else { top.exp() * d * d * logs.iter().map(|l| (l - top).exp()).sum::<f64>() };
        return Ok(BallIntegral {
            n,
            integral,
            samples_in_ball: logs.len(),
            normalized: integral * 2f64.powi(n as i32) / (eps * eps),
        });
    }
    Err(Error::BudgetExhausted(format!("ball at n = {n} kept touching its sampling square")))
}

/// For `y` near `f^k z`: with `x = f^{−k} y`, returns
/// `(log ‖Df^n_x‖, log |det Df^k_x|)` when `x ∈ B(z, n, eps)`.
fn pulled_back_log_norm(system: &SurfaceSystem, y: Point2, k: usize, center_orbit: &[Point2], eps: f64) -> Option<(f64, f64)> {
    if !system.contains(y) {
        return None;
    }
    let mut x = system.canonicalize(y);
    for _ in 0..k {
        x = system.inverse(x).ok()?;
    }
    let mut prod = ScaledProduct::identity();
    let mut log_det = 0.0;
    for (j, c) in center_orbit.iter().enumerate() {
        if system.distance(x, *c) >= eps {
            return None;
        }
        let jac = system.jacobian(x);
        if j < k {
            log_det += jac.det().abs().ln();
        }
        prod.push(&jac);
        if j + 1 < center_orbit.len() {
            x = system.forward(x).ok()?;
        }
    }
    Some((prod.log_norm(), log_det))
}

/// Largest relative dip `max(0, 1 − e_{j+1}/e_j)` along an envelope.
pub fn largest_dip(envelope: &[(usize, f64)]) -> f64 {
    envelope.windows(2).map(|w| (1.0 - w[1].1 / w[0].1).max(0.0)).fold(0.0, f64::max)
}
