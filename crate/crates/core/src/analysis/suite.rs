use rayon::prelude::*;

use super::section::{extract_section, SectionOptions, SectionStats};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, john_ellipsoid_polygon, Polygon, Vec2};
use crate::transport2d::{ConvexPotential, Domain};

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    /// Candidates `z` for engulfing are drawn from `t_lo·S`.
    pub t_lo: f64,
    /// Engulfing target `t_hi·S`.
    pub t_hi: f64,
    /// Points of `t_lo·S` tried as `z`, besides the center.
    pub engulf_candidates: usize,
    /// Directions and radii of the polar sample grid inside a section.
    pub sample_rays: usize,
    pub sample_radii: usize,
    /// Containment slack relative to the outer set's diameter.
    pub contain_tol: f64,
    /// Search range `[1/ratio_range, ratio_range]` for inclusion constants.
    pub ratio_range: f64,
    pub bisections: usize,
    pub section: SectionOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            t_lo: 0.25,
            t_hi: 0.75,
            engulf_candidates: 8,
            sample_rays: 64,
            sample_radii: 48,
            contain_tol: 1e-4,
            ratio_range: 1e4,
            bisections: 30,
            section: SectionOptions { center_tol: 1e-4, ..SectionOptions::default() },
        }
    }
}

/// Measurements at one probe and height. `None` marks a measurement that
/// could not be made (search range exhausted or a section failed).
#[derive(Clone, Debug)]
pub struct ProbeRecord {
    pub x: Vec2,
    pub h: f64,
    /// Largest `t₀` with `S^c_{t₀h}(z) ⊂ t̄·S^c_h(x)` for all candidates `z`.
    pub engulfing_t0: Option<f64>,
    /// `sup |ũ|/d^{1/2}` on the normalized centered section.
    pub amp_constant: Option<f64>,
    /// `|S^c_h(x)|·|∇u(S^c_h(x))|/h²`.
    pub volume_product: Option<f64>,
    /// Largest `c` with `S_{ch}(v, ∇u(x)) ⊂ ∇u(S_h(u, x))`.
    pub dual_inner: Option<f64>,
    /// Smallest `C` with `∇u(S_h(u, x)) ⊂ S_{Ch}(v, ∇u(x))`.
    pub dual_outer: Option<f64>,
    /// Largest `c` with `S^c_{ch}(x) ∩ X̄ ⊂ S_h(x)`.
    pub centered_inner: Option<f64>,
    /// Smallest `C` with `S_h(x) ⊂ S^c_{Ch}(x) ∩ X̄`.
    pub centered_outer: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub records: Vec<ProbeRecord>,
    /// Probe/height pairs whose centered section was truncated or failed.
    pub skipped: usize,
}

impl SuiteReport {
    /// `(min, max)` of one measurement over the records that have it.
    pub fn range(&self, field: impl Fn(&ProbeRecord) -> Option<f64>) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self.records.iter().filter_map(field).collect();
        if vals.is_empty() {
            return None;
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }
}

/// Engulfing, the normalized-section modulus, volume products and the two
/// section inclusion constants, for each probe and height.
///
/// `v` is the conjugate of `u`; without it the duality constants are
/// skipped.
pub fn section_property_suite(
    u: &dyn ConvexPotential,
    v: Option<&dyn ConvexPotential>,
    probes: &[Vec2],
    heights: &[f64],
    opts: &SuiteOptions,
) -> Result<SuiteReport> {
    if !(0.0 <= opts.t_lo && opts.t_lo < opts.t_hi && opts.t_hi <= 1.0) {
        return Err(Error::invalid(format!(
            "need 0 ≤ t_lo < t_hi ≤ 1, got {} and {}",
            opts.t_lo, opts.t_hi
        )));
    }
    if !(opts.ratio_range > 1.0) {
        return Err(Error::invalid("ratio_range must exceed 1"));
    }
    let jobs: Vec<(Vec2, f64)> = probes.iter().flat_map(|x| heights.iter().map(move |h| (*x, *h))).collect();
    let out: Vec<Option<ProbeRecord>> = jobs.par_iter().map(|&(x, h)| probe(u, v, x, h, opts)).collect();
    let skipped = out.iter().filter(|r| r.is_none()).count();
    Ok(SuiteReport { records: out.into_iter().flatten().collect(), skipped })
}

fn centered(u: &dyn ConvexPotential, x: Vec2, p: Vec2, h: f64, opts: &SuiteOptions) -> Option<SectionStats> {
    extract_section(u, x, p, h, true, &opts.section).ok().filter(|s| !s.truncated)
}

fn classical(u: &dyn ConvexPotential, x: Vec2, p: Vec2, h: f64, opts: &SuiteOptions) -> Option<SectionStats> {
    extract_section(u, x, p, h, false, &opts.section).ok().filter(|s| !s.truncated)
}

fn probe(
    u: &dyn ConvexPotential,
    v: Option<&dyn ConvexPotential>,
    x: Vec2,
    h: f64,
    opts: &SuiteOptions,
) -> Option<ProbeRecord> {
    let grad = u.gradient(x);
    let s = centered(u, x, grad, h, opts)?;
    let samples = polar_samples(&s.polygon, x, opts.sample_rays, opts.sample_radii);
    Some(ProbeRecord {
        x,
        h,
        engulfing_t0: engulfing(u, &s, opts),
        amp_constant: amp_constant(u, &s, opts),
        volume_product: gradient_image(u, &s.polygon, &samples).map(|g| s.area() * g.area() / (h * h)),
        dual_inner: None,
        dual_outer: None,
        centered_inner: None,
        centered_outer: None,
    }
    .with_duality(u, v, x, h, opts)
    .with_centered_classical(u, &s, opts))
}

impl ProbeRecord {
    fn with_duality(
        mut self,
        u: &dyn ConvexPotential,
        v: Option<&dyn ConvexPotential>,
        x: Vec2,
        h: f64,
        opts: &SuiteOptions,
    ) -> Self {
        let Some(v) = v else { return self };
        let Some(s) = classical(u, x, u.gradient(x), h, opts) else { return self };
        let samples = polar_samples(&s.polygon, x, opts.sample_rays, opts.sample_radii);
        let Some(image) = gradient_image(u, &s.polygon, &samples) else { return self };
        let y = u.gradient(x);
        let back = v.gradient(y);
        let dual = |c: f64| classical(v, y, back, c * h, opts).map(|d| d.polygon);
        self.dual_inner = largest_inner(&image, dual, opts);
        self.dual_outer = smallest_outer(&image, dual, opts);
        self
    }

    fn with_centered_classical(mut self, u: &dyn ConvexPotential, sc: &SectionStats, opts: &SuiteOptions) -> Self {
        let x = sc.x0;
        let Some(s) = classical(u, x, u.gradient(x), sc.h, opts) else { return self };
        let slope = u.gradient(x);
        let domain = |p: Polygon| clip_to_closure(u, &p);
        let cent = |c: f64| centered(u, x, slope, c * sc.h, opts).map(|t| domain(t.polygon));
        self.centered_inner = largest_inner(&s.polygon, cent, opts);
        self.centered_outer = smallest_outer(&s.polygon, cent, opts);
        self
    }
}

fn clip_to_closure(u: &dyn ConvexPotential, p: &Polygon) -> Polygon {
    match u.domain() {
        Domain::Plane => p.clone(),
        Domain::HalfPlane { inner_normal, offset } => p.clip(-inner_normal, -offset),
        Domain::Window(w) => p.intersect(w.body.as_polygon()),
    }
}

fn in_closure(u: &dyn ConvexPotential, z: Vec2) -> bool {
    match u.domain() {
        Domain::Plane => true,
        Domain::HalfPlane { inner_normal, offset } => z.dot(&inner_normal) >= offset,
        Domain::Window(w) => w.body.as_polygon().contains(z, 0.0),
    }
}

fn contains(outer: &Polygon, inner: &Polygon, opts: &SuiteOptions) -> bool {
    outer.contains_polygon(inner, opts.contain_tol * outer.diameter())
}

/// `sup{c ≤ 1 : inner(c) ⊂ outer}` by bisection in `log c`.
fn largest_inner(outer: &Polygon, inner: impl Fn(f64) -> Option<Polygon>, opts: &SuiteOptions) -> Option<f64> {
    let fits = |c: f64| inner(c).is_some_and(|p| contains(outer, &p, opts));
    if fits(1.0) {
        return Some(1.0);
    }
    let (mut lo, mut hi) = (1.0 / opts.ratio_range, 1.0);
    if !fits(lo) {
        return None;
    }
    for _ in 0..opts.bisections {
        let mid = (lo * hi).sqrt();
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// `inf{C ≥ 1 : inner ⊂ outer(C)}` by bisection in `log C`.
fn smallest_outer(inner: &Polygon, outer: impl Fn(f64) -> Option<Polygon>, opts: &SuiteOptions) -> Option<f64> {
    let covers = |c: f64| outer(c).is_some_and(|p| contains(&p, inner, opts));
    if covers(1.0) {
        return Some(1.0);
    }
    let (mut lo, mut hi) = (1.0, opts.ratio_range);
    if !covers(hi) {
        return None;
    }
    for _ in 0..opts.bisections {
        let mid = (lo * hi).sqrt();
        if covers(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Polar grid `x + (j/m)·ρ(θ)·e_θ` reaching the boundary of `poly`.
fn polar_samples(poly: &Polygon, x: Vec2, rays: usize, radii: usize) -> Vec<Vec2> {
    let mut out = vec![x];
    for k in 0..rays {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / rays as f64;
        let dir = Vec2::new(theta.cos(), theta.sin());
        let reach = poly.ray_exit(x, dir);
        for j in 1..radii {
            out.push(x + dir * (reach * j as f64 / radii as f64));
        }
    }
    out
}

/// Convex hull of gradients at the vertices of `poly` and at `samples`.
fn gradient_image(u: &dyn ConvexPotential, poly: &Polygon, samples: &[Vec2]) -> Option<Polygon> {
    let grads: Vec<Vec2> = poly.vertices().iter().chain(samples).map(|z| u.gradient(*z)).collect();
    let hull = convex_hull(&grads);
    (!hull.is_empty()).then_some(hull)
}

fn engulfing(u: &dyn ConvexPotential, s: &SectionStats, opts: &SuiteOptions) -> Option<f64> {
    let x = s.x0;
    let target = s.polygon.scale_about(x, opts.t_hi);
    let verts = s.polygon.vertices();
    let k = opts.engulf_candidates.min(verts.len());
    let mut cands = vec![x];
    for i in 0..k {
        let z = x + (verts[i * verts.len() / k.max(1)] - x) * opts.t_lo;
        if in_closure(u, z) {
            cands.push(z);
        }
    }
    let fits = |t: f64| {
        cands.iter().all(|z| {
            centered(u, *z, u.gradient(*z), t * s.h, opts).is_some_and(|c| contains(&target, &c.polygon, opts))
        })
    };
    if fits(1.0) {
        return Some(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if !fits(1.0 / opts.ratio_range) {
        return None;
    }
    for _ in 0..opts.bisections {
        let mid = 0.5 * (lo + hi);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// `sup |ũ(y)| / d_{∂S̃}(y)^{1/2}` with `ũ = (u − ℓ)∘A⁻¹/h` and `A` the map
/// sending the John ellipse of `S` to the unit disk.
fn amp_constant(u: &dyn ConvexPotential, s: &SectionStats, opts: &SuiteOptions) -> Option<f64> {
    let john = john_ellipsoid_polygon(&s.polygon).ok()?;
    let (a, shift) = john.ellipsoid.normalizing_map();
    let to_norm = |z: Vec2| a * z + shift;
    let norm_poly = s.polygon.map(to_norm);
    let offset = s.plane_offset(u);
    let samples = polar_samples(&s.polygon, s.x0, opts.sample_rays, opts.sample_radii);
    samples
        .iter()
        .filter_map(|z| {
            let d = norm_poly.signed_distance(to_norm(*z));
            (d > 0.0).then(|| (u.value(*z) - s.slope.dot(z) - offset).abs() / s.h / d.sqrt())
        })
        .reduce(f64::max)
}
