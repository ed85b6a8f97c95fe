use crate::error::{Error, Result};
use crate::geometry::{Mat2, Polygon, Vec2};
use crate::transport2d::{ConvexPotential, Domain};

/// Bisection steps for every ray search.
const RAY_BISECTIONS: usize = 64;
/// Box doublings before a classical section is declared unbounded.
const MAX_DOUBLINGS: usize = 60;

#[derive(Clone, Debug)]
pub struct SectionOptions {
    /// Rays used when the potential has no exact sublevel polygon.
    pub rays: usize,
    /// Inner normal `ν` at `x0`; derived from the domain when `None`.
    pub normal: Option<Vec2>,
    /// Fixed analysis region. Sections meeting its edges are truncated.
    /// When `None` the region is a box around `x0` that grows until the
    /// section fits.
    pub bound: Option<Polygon>,
    /// Centered mode stops once `|barycenter − x0| ≤ center_tol·diam(S)`.
    pub center_tol: f64,
    /// Damping of the centered slope update.
    pub kappa: f64,
    pub max_iter: usize,
    /// Relative distance to an edge that counts as touching it.
    pub touch_tol: f64,
}

impl Default for SectionOptions {
    fn default() -> Self {
        SectionOptions {
            rays: 256,
            normal: None,
            bound: None,
            center_tol: 1e-3,
            kappa: 0.5,
            max_iter: 200,
            touch_tol: 1e-9,
        }
    }
}

/// A section `{u < ℓ}` with `ℓ(z) = u(x0) + p·(z − x0) + h` and its
/// extents measured from `x0`.
#[derive(Clone, Debug)]
pub struct SectionStats {
    pub x0: Vec2,
    pub h: f64,
    /// Extent along the inner normal `ν`.
    pub d_h: f64,
    /// Extent along `−τ`, with `τ = (ν_y, −ν_x)`.
    pub l_h: f64,
    /// Extent along `+τ`.
    pub r_h: f64,
    pub w_h: f64,
    pub centered: bool,
    pub polygon: Polygon,
    /// The section meets an artificial window edge or the fixed bound.
    pub truncated: bool,
    /// Slope of `ℓ`.
    pub slope: Vec2,
    pub barycenter: Vec2,
    pub normal: Vec2,
    /// Slope updates taken by the centered iteration (0 for classical).
    pub iterations: usize,
}

impl SectionStats {
    /// Offset `c` with `ℓ(z) = p·z + c`.
    pub fn plane_offset(&self, u: &dyn ConvexPotential) -> f64 {
        u.value(self.x0) + self.h - self.slope.dot(&self.x0)
    }

    pub fn area(&self) -> f64 {
        self.polygon.area()
    }
}

/// Classical section `S_h(u, x0, p)` clipped to the closed domain, or the
/// centered section of height `h` with barycenter `x0` when `centered`.
///
/// Centered sections live on the whole plane (the potential's convex
/// extension); they are truncated only by the fixed bound or by artificial
/// window edges.
pub fn extract_section(
    u: &dyn ConvexPotential,
    x0: Vec2,
    p: Vec2,
    h: f64,
    centered: bool,
    opts: &SectionOptions,
) -> Result<SectionStats> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("section height must be positive, got {h}")));
    }
    if opts.rays < 8 {
        return Err(Error::invalid("at least 8 rays are needed"));
    }
    if !u.value(x0).is_finite() {
        return Err(Error::invalid("potential is not finite at x0"));
    }
    let normal = opts.normal.map(|n| n.normalize()).unwrap_or_else(|| domain_normal(u, x0));
    if centered {
        centered_section(u, x0, p, h, normal, opts)
    } else {
        classical_section(u, x0, p, h, normal, opts)
    }
}

fn domain_normal(u: &dyn ConvexPotential, x0: Vec2) -> Vec2 {
    match u.domain() {
        Domain::HalfPlane { inner_normal, .. } => inner_normal.normalize(),
        Domain::Window(w) => w.genuine_normal(x0).unwrap_or(Vec2::new(0.0, 1.0)),
        Domain::Plane => Vec2::new(0.0, 1.0),
    }
}

fn square(center: Vec2, r: f64) -> Polygon {
    Polygon::rect(center - Vec2::repeat(r), center + Vec2::repeat(r))
}

/// The closed domain intersected with `region`.
fn clip_to_domain(u: &dyn ConvexPotential, region: &Polygon) -> Polygon {
    match u.domain() {
        Domain::Plane => region.clone(),
        Domain::HalfPlane { inner_normal, offset } => region.clip(-inner_normal, -offset),
        Domain::Window(w) => region.intersect(w.body.as_polygon()),
    }
}

fn touches(poly: &Polygon, region: &Polygon, tol: f64) -> bool {
    let planes = region.halfplanes();
    poly.vertices().iter().any(|v| planes.iter().any(|(n, c)| c - n.dot(v) <= tol))
}

fn touches_artificial(u: &dyn ConvexPotential, poly: &Polygon, tol: f64) -> bool {
    match u.domain() {
        Domain::Window(w) => w.touches_artificial(poly, tol),
        _ => false,
    }
}

/// Largest `t` in `[0, t_max]` with `u(x0 + t·dir) < ℓ`, assuming the
/// sublevel set is convex and contains `x0`.
fn ray_extent(u: &dyn ConvexPotential, x0: Vec2, dir: Vec2, slope: Vec2, offset: f64, t_max: f64) -> f64 {
    let below = |t: f64| {
        let z = x0 + dir * t;
        u.value(z) < slope.dot(&z) + offset
    };
    if t_max <= 0.0 {
        return 0.0;
    }
    if below(t_max) {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..RAY_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `{z ∈ region : u(z) < p·z + offset}` for a region containing `x0`.
fn sublevel(
    u: &dyn ConvexPotential,
    x0: Vec2,
    slope: Vec2,
    offset: f64,
    region: &Polygon,
    rays: usize,
) -> Polygon {
    if let Some(poly) = u.sublevel_polygon(slope, offset, region) {
        return poly;
    }
    let verts = (0..rays)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / rays as f64;
            let dir = Vec2::new(theta.cos(), theta.sin());
            let t_max = region.ray_exit(x0, dir);
            x0 + dir * ray_extent(u, x0, dir, slope, offset, t_max)
        })
        .collect();
    Polygon::new(verts)
}

struct Extents {
    d: f64,
    l: f64,
    r: f64,
}

fn extents(u: &dyn ConvexPotential, x0: Vec2, normal: Vec2, slope: Vec2, offset: f64, region: &Polygon) -> Extents {
    let tau = Vec2::new(normal.y, -normal.x);
    let along = |dir: Vec2| ray_extent(u, x0, dir, slope, offset, region.ray_exit(x0, dir));
    Extents { d: along(normal), l: along(-tau), r: along(tau) }
}

fn initial_radius(u: &dyn ConvexPotential) -> f64 {
    match u.domain() {
        Domain::Window(w) => w.body.diameter(),
        _ => 1.0,
    }
}

fn classical_section(
    u: &dyn ConvexPotential,
    x0: Vec2,
    p: Vec2,
    h: f64,
    normal: Vec2,
    opts: &SectionOptions,
) -> Result<SectionStats> {
    let offset = u.value(x0) + h - p.dot(&x0);
    let (region, poly, truncated) = match &opts.bound {
        Some(bound) => {
            let region = clip_to_domain(u, bound);
            let poly = sublevel(u, x0, p, offset, &region, opts.rays);
            let tol = opts.touch_tol * bound.diameter();
            let t = touches(&poly, bound, tol) || touches_artificial(u, &poly, tol);
            (region, poly, t)
        }
        None => {
            let mut r = initial_radius(u);
            let mut found = None;
            for _ in 0..MAX_DOUBLINGS {
                let frame = square(x0, r);
                let region = clip_to_domain(u, &frame);
                let poly = sublevel(u, x0, p, offset, &region, opts.rays);
                let tol = opts.touch_tol * r;
                if !touches(&poly, &frame, tol) {
                    let t = touches_artificial(u, &poly, tol);
                    found = Some((region, poly, t));
                    break;
                }
                r *= 2.0;
            }
            found.ok_or_else(|| Error::Degenerate("section is unbounded".into()))?
        }
    };
    finish(u, x0, p, h, normal, offset, region, poly, truncated, false, 0)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    u: &dyn ConvexPotential,
    x0: Vec2,
    slope: Vec2,
    h: f64,
    normal: Vec2,
    offset: f64,
    region: Polygon,
    polygon: Polygon,
    truncated: bool,
    centered: bool,
    iterations: usize,
) -> Result<SectionStats> {
    let barycenter = polygon
        .centroid()
        .ok_or_else(|| Error::Degenerate(format!("section of height {h} at {x0:?} has no area")))?;
    let e = extents(u, x0, normal, slope, offset, &region);
    Ok(SectionStats {
        x0,
        h,
        d_h: e.d,
        l_h: e.l,
        r_h: e.r,
        w_h: e.l + e.r,
        centered,
        polygon,
        truncated,
        slope,
        barycenter,
        normal,
        iterations,
    })
}

/// Second moment matrix of a polygon about its centroid.
pub fn polygon_covariance(poly: &Polygon) -> Option<(Vec2, Mat2)> {
    let c = poly.centroid()?;
    let v = poly.vertices();
    let mut area = 0.0;
    let mut m = Mat2::zeros();
    for k in 1..v.len().saturating_sub(1) {
        let (a, b, d) = (v[0] - c, v[k] - c, v[k + 1] - c);
        let t = 0.5 * crate::geometry::cross(b - a, d - a);
        let s = a + b + d;
        m += (a * a.transpose() + b * b.transpose() + d * d.transpose() + s * s.transpose()) * (t / 12.0);
        area += t;
    }
    (area > 0.0).then(|| (c, m / area))
}

/// Centered section: the slope of `ℓ` is iterated, with `ℓ(x0) = u(x0) + h`
/// held fixed, until the barycenter reaches `x0`.
///
/// The update `p ← p + κ·J⁻¹(x0 − b)` is a damped quasi-Newton step on the
/// barycenter map `b(p)`. `J` starts from `(2/δ)·Σ`, with `Σ` the section
/// covariance and `δ = ℓ(b) − u(b)` its depth (exact for a quadratic), and
/// is refined by Broyden updates. `κ` grows after progress and shrinks
/// after a setback.
fn centered_section(
    u: &dyn ConvexPotential,
    x0: Vec2,
    p_init: Vec2,
    h: f64,
    normal: Vec2,
    opts: &SectionOptions,
) -> Result<SectionStats> {
    let u0 = u.value(x0);
    let start = classical_section(u, x0, p_init, h, normal, &SectionOptions { bound: opts.bound.clone(), ..opts.clone() });
    let mut r = match &start {
        Ok(s) => 2.0 * s.polygon.diameter().max(f64::MIN_POSITIVE),
        Err(_) => initial_radius(u),
    };
    let mut p = p_init;
    let mut kappa = opts.kappa;
    let mut prev: Option<(Vec2, Vec2, f64)> = None;
    let mut jac: Option<Mat2> = None;
    let mut history = Vec::new();
    for it in 0..opts.max_iter {
        let offset = u0 + h - p.dot(&x0);
        let frame = match &opts.bound {
            Some(b) => b.intersect(&square(x0, r)),
            None => square(x0, r),
        };
        let poly = sublevel(u, x0, p, offset, &frame, opts.rays);
        let Some((b, cov)) = polygon_covariance(&poly) else {
            return Err(Error::Degenerate(format!("centered section of height {h} at {x0:?} has no area")));
        };
        let diam = poly.diameter();
        let err = (b - x0).norm();
        history.push(err / diam);
        let tol = opts.touch_tol * r;
        let at_box = touches(&poly, &square(x0, r), tol);
        if !at_box && err <= opts.center_tol * diam {
            let bound_tol = opts.bound.as_ref().map(|b| opts.touch_tol * b.diameter()).unwrap_or(0.0);
            let truncated = opts.bound.as_ref().is_some_and(|b| touches(&poly, b, bound_tol))
                || touches_artificial(u, &poly, tol);
            return finish(u, x0, p, h, normal, offset, frame, poly, truncated, true, it);
        }
        let depth = (p.dot(&b) + offset - u.value(b)).max(h);
        let guess = cov * (2.0 / depth);
        let j = match (prev, jac) {
            (Some((pp, pb, perr)), Some(j)) if !at_box => {
                if err > perr {
                    kappa = (kappa * 0.5).max(opts.kappa / 64.0);
                } else {
                    kappa = (kappa * 1.5).min(1.0);
                }
                let dp = p - pp;
                let db = b - pb;
                let n2 = dp.norm_squared();
                if n2 > 0.0 {
                    j + (db - j * dp) * dp.transpose() / n2
                } else {
                    j
                }
            }
            _ => guess,
        };
        if at_box {
            r *= 2.0;
        }
        let step = j.try_inverse().or_else(|| guess.try_inverse()).ok_or_else(|| {
            Error::Degenerate("centered section covariance is singular".into())
        })? * (x0 - b);
        prev = Some((p, b, err));
        jac = Some(j);
        p += step * kappa;
    }
    Err(Error::NotConverged {
        what: "centered section",
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Dyadic heights `h_max·2^{−k}`, `k = 0..levels`.
pub fn dyadic_heights(h_max: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| h_max * 0.5f64.powi(k as i32)).collect()
}

/// Smallest height usable in fits on LP output with local cell width `spacing`.
pub fn lp_bias_floor(spacing: f64) -> f64 {
    25.0 * spacing * spacing
}

/// Smallest height usable in fits on entropic output at regularization `eps`.
pub fn entropic_bias_floor(eps: f64) -> f64 {
    100.0 * eps
}
