//! Power-of-distance densities `a(x)·d(x)^α`, adaptive quadrature over
//! convex regions, and sampled doubling constants on ellipsoids.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, Ellipsoid, Mat2, Polygon, Vec2};

/// Positive coefficient `a(x)` multiplying the distance power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Coefficient {
    Constant { value: f64 },
    /// `value + gradient·x`.
    Affine { value: f64, gradient: [f64; 2] },
    /// `value + slope·|x|`.
    Radial { value: f64, slope: f64 },
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant { value: 1.0 }
    }
}

impl Coefficient {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        match *self {
            Coefficient::Constant { value } => value,
            Coefficient::Affine { value, gradient } => value + gradient[0] * x.x + gradient[1] * x.y,
            Coefficient::Radial { value, slope } => value + slope * x.norm(),
        }
    }

    /// Hölder data of the coefficient restricted to `body`.
    pub fn holder_data(&self, body: &ConvexBody) -> HolderData {
        let verts = body.vertices();
        let (lower, upper, seminorm) = match *self {
            Coefficient::Constant { value } => (value, value, 0.0),
            Coefficient::Affine { value: _, gradient } => {
                let vals: Vec<f64> = verts.iter().map(|v| self.eval(*v)).collect();
                let (lo, hi) = min_max(&vals);
                (lo, hi, Vec2::new(gradient[0], gradient[1]).norm())
            }
            Coefficient::Radial { value, slope } => {
                let rmax = verts.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let rmin = if body.contains(Vec2::zeros()) {
                    0.0
                } else {
                    body.as_polygon().distance_to_boundary(Vec2::zeros())
                };
                let a = value + slope * rmin;
                let b = value + slope * rmax;
                (a.min(b), a.max(b), slope.abs())
            }
        };
        HolderData { exponent: 1.0, seminorm, lower, upper }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Hölder exponent and seminorm plus positive bounds of a coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderData {
    pub exponent: f64,
    pub seminorm: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Which distance the density's power is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistanceMode {
    /// Distance to the boundary of the body.
    #[default]
    Boundary,
    /// Distance to the line `{x·normal = offset}`, for the body lying on the
    /// side `x·normal >= offset` (`normal` is the inner unit normal). Models
    /// densities that degenerate on one flat edge only.
    Edge { normal: [f64; 2], offset: f64 },
}

/// The density `a(x)·d(x)^α` on a convex body, zero outside.
#[derive(Clone, Debug)]
pub struct PowerDensity {
    body: ConvexBody,
    alpha: f64,
    coeff: Coefficient,
    mode: DistanceMode,
    planes: Vec<(Vec2, f64)>,
    holder: HolderData,
}

impl PowerDensity {
    pub fn new(body: ConvexBody, alpha: f64, coeff: Coefficient) -> Result<Self> {
        Self::with_mode(body, alpha, coeff, DistanceMode::Boundary)
    }

    pub fn with_mode(
        body: ConvexBody,
        alpha: f64,
        coeff: Coefficient,
        mode: DistanceMode,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if let DistanceMode::Edge { normal, .. } = mode {
            let n = Vec2::new(normal[0], normal[1]).norm();
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("edge normal must be a unit vector"));
            }
        }
        let holder = coeff.holder_data(&body);
        if !(holder.lower > 0.0 && holder.upper.is_finite()) {
            return Err(Error::invalid(format!(
                "coefficient must be bounded between positive constants on the body, range [{}, {}]",
                holder.lower, holder.upper
            )));
        }
        let planes = body.as_polygon().halfplanes();
        Ok(PowerDensity { body, alpha, coeff, mode, planes, holder })
    }

    /// `d^α` with `a ≡ 1`.
    pub fn uniform_coefficient(body: ConvexBody, alpha: f64) -> Result<Self> {
        Self::new(body, alpha, Coefficient::one())
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn coefficient(&self) -> &Coefficient {
        &self.coeff
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn holder_data(&self) -> HolderData {
        self.holder
    }

    /// Smallest halfplane slack at `x`, or `None` outside the body. Points
    /// within roundoff of the boundary count as on it.
    fn slack(&self, x: Vec2) -> Option<f64> {
        let eps = 1e-12 * (1.0 + x.norm());
        let mut d = f64::INFINITY;
        for (n, c) in &self.planes {
            let s = c - n.dot(&x);
            if s < -eps {
                return None;
            }
            d = d.min(s.max(0.0));
        }
        Some(d)
    }

    /// Splits `piece` into parts on which the nearest edge is fixed, so the
    /// distance is smooth on each part. Candidate edges are the ones nearest
    /// to some vertex, plus their neighbours.
    fn smooth_parts(&self, piece: &Polygon) -> Vec<Polygon> {
        if !matches!(self.mode, DistanceMode::Boundary) || self.planes.len() < 2 {
            return vec![piece.clone()];
        }
        let m = self.planes.len();
        let nearest = |x: Vec2| {
            let mut best = (f64::INFINITY, 0);
            for (i, (n, c)) in self.planes.iter().enumerate() {
                let s = c - n.dot(&x);
                if s < best.0 {
                    best = (s, i);
                }
            }
            best.1
        };
        let v = piece.vertices();
        let first = nearest(v[0]);
        let mut found: Vec<usize> = v.iter().map(|&x| nearest(x)).collect();
        if found.iter().all(|&i| i == first) {
            return vec![piece.clone()];
        }
        found.sort_unstable();
        found.dedup();
        let mut cands: Vec<usize> = found.iter().flat_map(|&i| [(i + m - 1) % m, i, (i + 1) % m]).collect();
        cands.sort_unstable();
        cands.dedup();
        let mut parts = Vec::with_capacity(cands.len());
        for &i in &cands {
            let (ni, ci) = self.planes[i];
            let mut part = piece.clone();
            for &j in &cands {
                if j == i || part.is_empty() {
                    continue;
                }
                let (nj, cj) = self.planes[j];
                // slack_i <= slack_j
                let normal = nj - ni;
                let len = normal.norm();
                if len == 0.0 {
                    continue;
                }
                part = part.clip(normal / len, (cj - ci) / len);
            }
            if !part.is_empty() {
                parts.push(part);
            }
        }
        parts
    }

    /// The distance entering the power, `0` outside the body.
    pub fn distance(&self, x: Vec2) -> f64 {
        let Some(d) = self.slack(x) else { return 0.0 };
        match self.mode {
            DistanceMode::Boundary => d,
            DistanceMode::Edge { normal, offset } => {
                (normal[0] * x.x + normal[1] * x.y - offset).max(0.0)
            }
        }
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        if self.alpha == 0.0 {
            // the boundary is null for α = 0
            return if self.slack(x).is_some() { self.coeff.eval(x) } else { 0.0 };
        }
        let d = self.distance(x);
        if d == 0.0 {
            return 0.0;
        }
        self.coeff.eval(x) * d.powf(self.alpha)
    }
}

/// `a(x)·d(x)^α`, or `0` outside the body.
pub fn eval_density(f: &PowerDensity, x: Vec2) -> f64 {
    f.eval(x)
}

/// Result of an adaptive quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// `∫ x f` over the same region.
    pub moment: Vec2,
    pub error_estimate: f64,
    pub cells: usize,
    pub converged: bool,
}

/// Leaf-cell budget of [`integrate`].
pub const DEFAULT_CELL_BUDGET: usize = 400_000;

struct Cell {
    fine: f64,
    error: f64,
    fine_moment: Vec2,
    children: Vec<(Polygon, f64)>,
}

struct Ranked(f64, usize);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Mass of `f` over `region ∩ body` to relative tolerance `tol`.
pub fn integrate(f: &PowerDensity, region: &ConvexBody, tol: f64) -> Result<Integral> {
    integrate_polygon(f, region.as_polygon(), tol, DEFAULT_CELL_BUDGET)
}

/// [`integrate`] over an arbitrary convex polygon with an explicit budget.
///
/// Cells are squares cut against the integration domain; each cell is
/// scored by the difference between its own quadrature and the sum of its
/// four children's (quadrants of its bounding box), and the worst cell is
/// split first. Cells are also split along the ridges of the distance. The per-cell rule is
/// exact for quadratics, so smooth cells converge fast and the budget goes
/// to the boundary layer, where it is refined geometrically.
pub fn integrate_polygon(
    f: &PowerDensity,
    region: &Polygon,
    tol: f64,
    budget: usize,
) -> Result<Integral> {
    if !(tol > 0.0) {
        return Err(Error::invalid("integration tolerance must be positive"));
    }
    let domain = region.intersect(f.body.as_polygon());
    if domain.is_empty() {
        return Ok(Integral {
            value: 0.0,
            moment: Vec2::zeros(),
            error_estimate: 0.0,
            cells: 0,
            converged: true,
        });
    }
    let (lo, hi) = domain.bounding_box();
    let side = (hi - lo).max();
    let n0 = 8usize;
    let h = side / n0 as f64;

    let mut cells: Vec<Cell> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut error = 0.0;
    for i in 0..n0 {
        for j in 0..n0 {
            let clo = lo + Vec2::new(i as f64 * h, j as f64 * h);
            let chi = clo + Vec2::new(h, h);
            let piece = domain.clip_box(clo, chi);
            if piece.is_empty() {
                continue;
            }
            let (m, _) = cell_rule(f, &piece);
            let cell = make_cell(f, &piece, m);
            total += cell.fine;
            error += cell.error;
            heap.push(Ranked(cell.error, cells.len()));
            cells.push(cell);
        }
    }
    let mut leaves = cells.len() * 4;
    while error > tol * total.abs() && leaves < budget {
        let Some(Ranked(err, idx)) = heap.pop() else { break };
        if err == 0.0 {
            break;
        }
        let children = std::mem::take(&mut cells[idx].children);
        total -= cells[idx].fine;
        error -= err;
        leaves -= 4;
        for (piece, m) in children {
            let cell = make_cell(f, &piece, m);
            let e = cell.error;
            total += cell.fine;
            error += e;
            leaves += cell.children.len().max(1);
            heap.push(Ranked(e, cells.len()));
            cells.push(cell);
        }
    }
    // resum the leaves; the running totals above only steer refinement
    let mut value = 0.0;
    let mut mom = Vec2::zeros();
    let mut err_sum = 0.0;
    let mut count = 0usize;
    for Ranked(e, idx) in heap.iter() {
        value += cells[*idx].fine;
        mom += cells[*idx].fine_moment;
        err_sum += e;
        count += 1;
    }
    Ok(Integral {
        value,
        moment: mom,
        error_estimate: err_sum,
        cells: count,
        converged: err_sum <= tol * value.abs(),
    })
}

/// Degree-2 rule on a fan triangulation of each smooth part: each triangle
/// gets the mean of its three edge midpoints.
fn cell_rule(f: &PowerDensity, piece: &Polygon) -> (f64, Vec2) {
    let mut mass = 0.0;
    let mut moment = Vec2::zeros();
    for part in f.smooth_parts(piece) {
        let v = part.vertices();
        for i in 1..v.len().saturating_sub(1) {
            let (a, b, c) = (v[0], v[i], v[i + 1]);
            let area = 0.5 * crate::geometry::cross(b - a, c - a);
            for m in [(a + b) * 0.5, (b + c) * 0.5, (c + a) * 0.5] {
                let w = area / 3.0 * f.eval(m);
                mass += w;
                moment += m * w;
            }
        }
    }
    (mass, moment)
}

fn make_cell(f: &PowerDensity, piece: &Polygon, coarse: f64) -> Cell {
    // split the piece's own box so every split separates it
    let (lo, hi) = piece.bounding_box();
    let mid = (lo + hi) * 0.5;
    let quads = [
        (lo, mid),
        (Vec2::new(mid.x, lo.y), Vec2::new(hi.x, mid.y)),
        (Vec2::new(lo.x, mid.y), Vec2::new(mid.x, hi.y)),
        (mid, hi),
    ];
    let mut fine = 0.0;
    let mut fine_moment = Vec2::zeros();
    let mut children = Vec::with_capacity(4);
    for (clo, chi) in quads {
        let sub = piece.clip_box(clo, chi);
        if sub.is_empty() {
            continue;
        }
        let (m, fm) = cell_rule(f, &sub);
        fine += m;
        fine_moment += fm;
        children.push((sub, m));
    }
    let error = (fine - coarse).abs();
    Cell { fine, error, fine_moment, children }
}

/// `∫_E f / ∫_{½E} f`, or `None` when the half-ellipsoid carries no mass.
pub fn doubling_ratio(f: &PowerDensity, e: &Ellipsoid, resolution: usize, tol: f64) -> Result<Option<f64>> {
    let outer = e.to_polygon(resolution);
    let inner = e.dilate(0.5).to_polygon(resolution);
    convex_doubling_ratio_of(f, &outer, &inner, tol)
}

/// `f(S) / f(½S)` with `½S` the dilation of `S` about its barycenter.
pub fn convex_doubling_ratio(f: &PowerDensity, s: &Polygon, tol: f64) -> Result<Option<f64>> {
    let c = s
        .centroid()
        .ok_or_else(|| Error::Degenerate("zero-area set".into()))?;
    convex_doubling_ratio_of(f, s, &s.scale_about(c, 0.5), tol)
}

fn convex_doubling_ratio_of(
    f: &PowerDensity,
    outer: &Polygon,
    inner: &Polygon,
    tol: f64,
) -> Result<Option<f64>> {
    let half = integrate_polygon(f, inner, tol, DEFAULT_CELL_BUDGET)?;
    if !(half.value > 0.0) {
        return Ok(None);
    }
    let full = integrate_polygon(f, outer, tol, DEFAULT_CELL_BUDGET)?;
    Ok(Some(full.value / half.value))
}

/// Sampled ellipsoid doubling constant.
#[derive(Clone, Debug)]
pub struct DoublingEstimate {
    pub constant: f64,
    pub worst: Option<Ellipsoid>,
    pub samples: usize,
    pub skipped: usize,
    /// Samples whose ellipsoid left the body.
    pub crossing: usize,
}

/// Options for [`doubling_constant_with`].
#[derive(Clone, Copy, Debug)]
pub struct DoublingOptions {
    /// Radii are log-uniform in `[min_radius·diam, diam]`.
    pub min_radius: f64,
    /// Width of the boundary collar as a fraction of the diameter.
    pub collar: f64,
    /// Vertex count of the ellipse polygons.
    pub resolution: usize,
    pub tol: f64,
}

impl Default for DoublingOptions {
    fn default() -> Self {
        DoublingOptions { min_radius: 1e-3, collar: 0.05, resolution: 64, tol: 1e-4 }
    }
}

pub fn doubling_constant(f: &PowerDensity, n_samples: usize, seed: u64) -> Result<DoublingEstimate> {
    doubling_constant_with(f, n_samples, seed, DoublingOptions::default())
}

/// Maximum of `∫_E f / ∫_{½E} f` over random ellipsoids centered in the
/// closure of the body.
///
/// Half the centers are drawn from a boundary collar (a quarter of those
/// exactly on the boundary), half uniformly from the body. Each sample uses
/// its own ChaCha stream, so results do not depend on thread scheduling.
pub fn doubling_constant_with(
    f: &PowerDensity,
    n_samples: usize,
    seed: u64,
    opts: DoublingOptions,
) -> Result<DoublingEstimate> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let body = f.body();
    let diam = body.diameter();
    let (lo, hi) = body.bounding_box();
    let perimeter = body.perimeter();
    let verts = body.vertices().to_vec();

    let results: Vec<Result<(Option<f64>, Ellipsoid, bool)>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let center = if rng.random_bool(0.5) {
                let width = opts.collar * diam;
                if rng.random_bool(0.25) {
                    boundary_point(&verts, perimeter, rng.random::<f64>())
                } else {
                    loop {
                        let x = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
                        let d = body.boundary_distance(x);
                        if body.contains(x) && d < width {
                            break x;
                        }
                    }
                }
            } else {
                loop {
                    let x = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
                    if body.contains(x) {
                        break x;
                    }
                }
            };
            let log_lo = (opts.min_radius * diam).ln();
            let log_hi = diam.ln();
            let r1 = rng.random_range(log_lo..log_hi).exp();
            let r2 = rng.random_range(log_lo..log_hi).exp();
            let theta: f64 = rng.random_range(0.0..PI);
            let (s, c) = theta.sin_cos();
            let rot = Mat2::new(c, -s, s, c);
            let gen = rot * Mat2::new(r1, 0.0, 0.0, r2) * rot.transpose();
            let e = Ellipsoid::new(center, (gen + gen.transpose()) * 0.5)?;
            let crossing = !e.inside_polygon(body.as_polygon(), 0.0);
            let r = doubling_ratio(f, &e, opts.resolution, opts.tol)?;
            Ok((r, e, crossing))
        })
        .collect();

    let mut best = 0.0_f64;
    let mut worst = None;
    let mut skipped = 0;
    let mut crossing = 0;
    for r in results {
        let (ratio, e, cross) = r?;
        if cross {
            crossing += 1;
        }
        match ratio {
            Some(q) if q.is_finite() => {
                if q > best {
                    best = q;
                    worst = Some(e);
                }
            }
            _ => skipped += 1,
        }
    }
    Ok(DoublingEstimate { constant: best.max(1.0), worst, samples: n_samples, skipped, crossing })
}

fn boundary_point(verts: &[Vec2], perimeter: f64, u: f64) -> Vec2 {
    let mut target = u * perimeter;
    let n = verts.len();
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let len = (b - a).norm();
        if target <= len {
            return a + (b - a) * (target / len);
        }
        target -= len;
    }
    verts[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_square() -> ConvexBody {
        ConvexBody::rect(Vec2::zeros(), Vec2::new(1.0, 1.0)).unwrap()
    }

    #[test]
    fn eval_examples() {
        let sq = unit_square();
        let f0 = PowerDensity::uniform_coefficient(sq.clone(), 0.0).unwrap();
        assert_eq!(eval_density(&f0, Vec2::new(0.2, 0.7)), 1.0);
        assert_eq!(eval_density(&f0, Vec2::new(2.0, 0.7)), 0.0);

        let disk = ConvexBody::disk(Vec2::zeros(), 1.0, 4096).unwrap();
        let f1 = PowerDensity::uniform_coefficient(disk, 1.0).unwrap();
        assert_relative_eq!(eval_density(&f1, Vec2::zeros()), 1.0, epsilon = 1e-6);

        let sq2 = ConvexBody::square(1.0).unwrap();
        let a = Coefficient::Radial { value: 1.0, slope: 0.1 };
        let f2 = PowerDensity::new(sq2, 2.0, a).unwrap();
        let x = Vec2::new(0.3, 0.4);
        let d = [1.0 - x.x, 1.0 + x.x, 1.0 - x.y, 1.0 + x.y].into_iter().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(eval_density(&f2, x), (1.0 + 0.05) * d * d, epsilon = 1e-14);
    }

    #[test]
    fn coefficient_must_stay_positive() {
        let sq = ConvexBody::square(1.0).unwrap();
        let bad = Coefficient::Affine { value: 0.5, gradient: [1.0, 0.0] };
        assert!(PowerDensity::new(sq.clone(), 1.0, bad).is_err());
        assert!(PowerDensity::uniform_coefficient(sq, -1.0).is_err());
    }

    #[test]
    fn integrate_area() {
        let sq = unit_square();
        let f = PowerDensity::uniform_coefficient(sq.clone(), 0.0).unwrap();
        let r = integrate(&f, &sq, 1e-10).unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn integrate_strip_distance() {
        let strip = ConvexBody::rect(Vec2::new(-10.0, 0.0), Vec2::new(10.0, 1.0)).unwrap();
        let f = PowerDensity::uniform_coefficient(strip, 1.0).unwrap();
        let cell = unit_square();
        let r = integrate(&f, &cell, 1e-8).unwrap();
        assert_relative_eq!(r.value, 0.25, max_relative = 1e-7);
    }

    #[test]
    fn integrate_singular_power_converges() {
        // ∫₀¹ t^{1/2} dt = 2/3 over a unit-width strip cell
        let strip = ConvexBody::rect(Vec2::new(-10.0, 0.0), Vec2::new(10.0, 100.0)).unwrap();
        let f = PowerDensity::uniform_coefficient(strip, 0.5).unwrap();
        let r = integrate(&f, &unit_square(), 1e-6).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.value, 2.0 / 3.0, max_relative = 1e-5);
    }

    #[test]
    fn edge_mode_measures_distance_to_one_side() {
        let body = ConvexBody::rect(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 1.0)).unwrap();
        let mode = DistanceMode::Edge { normal: [0.0, 1.0], offset: 0.0 };
        let f = PowerDensity::with_mode(body.clone(), 2.0, Coefficient::one(), mode).unwrap();
        assert_relative_eq!(f.eval(Vec2::new(0.99, 0.5)), 0.25);
        let r = integrate(&f, &body, 1e-10).unwrap();
        assert_relative_eq!(r.value, 2.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn uniform_doubling_inside_is_four() {
        let sq = ConvexBody::square(1.0).unwrap();
        let f = PowerDensity::uniform_coefficient(sq, 0.0).unwrap();
        let e = Ellipsoid::new(Vec2::new(0.1, 0.0), Mat2::new(0.3, 0.1, 0.1, 0.2)).unwrap();
        let r = doubling_ratio(&f, &e, 64, 1e-10).unwrap().unwrap();
        assert_relative_eq!(r, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn far_ellipsoid_is_skipped() {
        let sq = ConvexBody::square(1.0).unwrap();
        let f = PowerDensity::uniform_coefficient(sq, 1.0).unwrap();
        let e = Ellipsoid::ball(Vec2::new(10.0, 10.0), 0.5).unwrap();
        assert!(doubling_ratio(&f, &e, 64, 1e-6).unwrap().is_none());
    }

    #[test]
    fn moments_match_centroid() {
        let tri = ConvexBody::polygon(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        let f = PowerDensity::uniform_coefficient(tri.clone(), 0.0).unwrap();
        let r = integrate(&f, &tri, 1e-12).unwrap();
        let c = r.moment / r.value;
        assert_relative_eq!(c.x, 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(c.y, 1.0 / 3.0, epsilon = 1e-12);
    }
}
