//! Planar convex bodies, ellipsoids, John ellipsoids and convex polygon
//! operations.
//!
//! Smooth bodies (ellipses, superellipses) are polygonalized once at
//! construction. Every downstream quantity (areas, boundary distance,
//! clipping) is exact for that polygon; [`ConvexBody::hausdorff_error`]
//! reports how far the polygon is from the smooth body it stands for.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Vertex count used when a smooth body is polygonalized.
pub const DEFAULT_RESOLUTION: usize = 512;

/// Clip results whose area falls below this fraction of the input are empty.
pub const EMPTY_AREA_FRACTION: f64 = 1e-14;

#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A convex polygon with counterclockwise vertices.
///
/// This is the working type for clipped pieces and sections; it is not
/// validated beyond what the constructors guarantee.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    /// Wraps CCW vertices, dropping repeated and collinear points.
    pub fn new(vertices: Vec<Vec2>) -> Self {
        let mut p = Polygon { vertices };
        p.simplify();
        p
    }

    pub fn rect(lo: Vec2, hi: Vec2) -> Self {
        Polygon {
            vertices: vec![lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)],
        }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Area centroid; `None` for a polygon with no area.
    pub fn centroid(&self) -> Option<Vec2> {
        centroid(&self.vertices)
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Intersection with `{x : x·normal <= offset}`.
    pub fn clip(&self, normal: Vec2, offset: f64) -> Polygon {
        let n = self.vertices.len();
        if n == 0 {
            return Polygon::default();
        }
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let da = a.dot(&normal) - offset;
            let db = b.dot(&normal) - offset;
            if da <= 0.0 {
                out.push(a);
            }
            if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                let t = da / (da - db);
                out.push(a + (b - a) * t);
            }
        }
        Polygon::new(out)
    }

    pub fn clip_box(&self, lo: Vec2, hi: Vec2) -> Polygon {
        self.clip(Vec2::new(1.0, 0.0), hi.x)
            .clip(Vec2::new(-1.0, 0.0), -lo.x)
            .clip(Vec2::new(0.0, 1.0), hi.y)
            .clip(Vec2::new(0.0, -1.0), -lo.y)
    }

    /// Intersection of two convex polygons.
    pub fn intersect(&self, other: &Polygon) -> Polygon {
        let mut out = self.clone();
        for (normal, offset) in other.halfplanes() {
            if out.is_empty() {
                break;
            }
            out = out.clip(normal, offset);
        }
        out
    }

    /// Edges as `(unit outward normal, offset)` pairs, `x·n <= offset` inside.
    pub fn halfplanes(&self) -> Vec<(Vec2, f64)> {
        let n = self.vertices.len();
        (0..n)
            .filter_map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let e = b - a;
                let len = e.norm();
                (len > 0.0).then(|| {
                    let normal = Vec2::new(e.y, -e.x) / len;
                    (normal, normal.dot(&a))
                })
            })
            .collect()
    }

    /// Point membership with slack `tol` (positive tol enlarges the polygon).
    pub fn contains(&self, x: Vec2, tol: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            let len = e.norm();
            len == 0.0 || cross(e, x - a) / len >= -tol
        })
    }

    /// `true` when every vertex of `inner` lies in `self` up to `tol`.
    pub fn contains_polygon(&self, inner: &Polygon, tol: f64) -> bool {
        inner.vertices.iter().all(|v| self.contains(*v, tol))
    }

    /// Signed distance to the boundary: positive inside, negative outside.
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        if self.contains(x, 0.0) {
            self.halfplanes()
                .iter()
                .map(|(n, c)| c - n.dot(&x))
                .fold(f64::INFINITY, f64::min)
        } else {
            -self.distance_to_boundary(x)
        }
    }

    /// Unsigned Euclidean distance from `x` to the polygon's boundary curve.
    pub fn distance_to_boundary(&self, x: Vec2) -> f64 {
        let (p, _) = self.nearest_boundary_point(x);
        (p - x).norm()
    }

    /// Nearest point on the boundary and the index of the edge it lies on.
    pub fn nearest_boundary_point(&self, x: Vec2) -> (Vec2, usize) {
        let n = self.vertices.len();
        let mut best = (self.vertices[0], 0usize);
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            let l2 = e.norm_squared();
            let t = if l2 > 0.0 { ((x - a).dot(&e) / l2).clamp(0.0, 1.0) } else { 0.0 };
            let p = a + e * t;
            let d = (p - x).norm_squared();
            if d < best_d {
                best_d = d;
                best = (p, i);
            }
        }
        best
    }

    /// Homothety about `center` by factor `r`.
    pub fn scale_about(&self, center: Vec2, r: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|v| center + (v - center) * r).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(Vec2) -> Vec2) -> Polygon {
        Polygon::new(self.vertices.iter().map(|v| f(*v)).collect())
    }

    /// Largest `t >= 0` with `z + t·dir` in the polygon, for `z` inside.
    pub fn ray_exit(&self, z: Vec2, dir: Vec2) -> f64 {
        self.halfplanes()
            .iter()
            .filter_map(|(n, c)| {
                let rate = n.dot(&dir);
                (rate > 0.0).then(|| (c - n.dot(&z)) / rate)
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    fn simplify(&mut self) {
        let scale = self
            .vertices
            .iter()
            .map(|v| v.amax())
            .fold(0.0_f64, f64::max)
            .max(1e-300);
        let eps = 1e-14 * scale;
        let mut pts: Vec<Vec2> = Vec::with_capacity(self.vertices.len());
        for v in self.vertices.drain(..) {
            if pts.last().is_none_or(|l| (l - v).amax() > eps) {
                pts.push(v);
            }
        }
        while pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).amax() <= eps {
            pts.pop();
        }
        // drop collinear vertices
        let mut changed = true;
        while changed && pts.len() >= 3 {
            changed = false;
            let n = pts.len();
            for i in 0..n {
                let a = pts[(i + n - 1) % n];
                let b = pts[i];
                let c = pts[(i + 1) % n];
                let e1 = b - a;
                let e2 = c - b;
                if cross(e1, e2).abs() <= 1e-13 * e1.norm() * e2.norm() && e1.dot(&e2) >= 0.0 {
                    pts.remove(i);
                    changed = true;
                    break;
                }
            }
        }
        if pts.len() < 3 {
            pts.clear();
        }
        self.vertices = pts;
    }
}

pub fn signed_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let o = pts[0];
    let mut a = 0.0;
    for i in 1..n - 1 {
        a += cross(pts[i] - o, pts[i + 1] - o);
    }
    0.5 * a
}

pub fn centroid(pts: &[Vec2]) -> Option<Vec2> {
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let o = pts[0];
    let mut a = 0.0;
    let mut m = Vec2::zeros();
    for i in 1..n - 1 {
        let p = pts[i] - o;
        let q = pts[i + 1] - o;
        let w = cross(p, q);
        a += w;
        m += (p + q) * w;
    }
    (a.abs() > 0.0).then(|| o + m / (3.0 * a))
}

/// Convex hull (Andrew's monotone chain), CCW, collinear points removed.
pub fn convex_hull(points: &[Vec2]) -> Polygon {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Polygon::default();
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 1] - hull[hull.len() - 2], p - hull[hull.len() - 2]) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    Polygon::new(hull)
}

/// Literal description of a convex body, as written in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BodySpec {
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    /// `center + shape·B₁` with `shape` symmetric positive definite.
    Ellipse {
        center: [f64; 2],
        shape: [[f64; 2]; 2],
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    /// `|x'/a|^p + |y'/b|^p <= 1` in a frame rotated by `angle`.
    Superellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        exponent: f64,
        #[serde(default)]
        angle: f64,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
}

fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}

/// A bounded planar convex domain with nonempty interior.
#[derive(Clone, Debug)]
pub struct ConvexBody {
    spec: BodySpec,
    polygon: Polygon,
    hausdorff: f64,
}

impl ConvexBody {
    pub fn from_spec(spec: BodySpec) -> Result<Self> {
        let (polygon, hausdorff) = match &spec {
            BodySpec::Polygon { vertices } => {
                let pts: Vec<Vec2> = vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
                validate_strictly_convex(&pts)?;
                (Polygon { vertices: pts }, 0.0)
            }
            BodySpec::Ellipse { center, shape, resolution } => {
                let e = Ellipsoid::new(
                    Vec2::new(center[0], center[1]),
                    Mat2::new(shape[0][0], shape[0][1], shape[1][0], shape[1][1]),
                )?;
                check_resolution(*resolution)?;
                let poly = e.to_polygon(*resolution);
                // sagitta of the widest chord
                let (_, hi) = e.semi_axes();
                let h = hi * (1.0 - (PI / *resolution as f64).cos());
                (poly, h)
            }
            BodySpec::Superellipse { center, semi_axes, exponent, angle, resolution } => {
                if !(*exponent >= 2.0 && exponent.is_finite()) {
                    return Err(Error::invalid("superellipse exponent must be finite and >= 2"));
                }
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                    return Err(Error::invalid("superellipse semi-axes must be positive"));
                }
                check_resolution(*resolution)?;
                let (poly, h) = superellipse_polygon(
                    Vec2::new(center[0], center[1]),
                    Vec2::new(semi_axes[0], semi_axes[1]),
                    *exponent,
                    *angle,
                    *resolution,
                );
                (poly, h)
            }
        };
        if !polygon.vertices.iter().all(|v| v.x.is_finite() && v.y.is_finite()) {
            return Err(Error::invalid("body coordinates must be finite"));
        }
        if polygon.area() <= 0.0 {
            return Err(Error::Degenerate("body has no interior".into()));
        }
        Ok(ConvexBody { spec, polygon, hausdorff })
    }

    /// Strictly convex CCW polygon.
    pub fn polygon(vertices: &[Vec2]) -> Result<Self> {
        Self::from_spec(BodySpec::Polygon {
            vertices: vertices.iter().map(|v| [v.x, v.y]).collect(),
        })
    }

    pub fn rect(lo: Vec2, hi: Vec2) -> Result<Self> {
        Self::polygon(Polygon::rect(lo, hi).vertices())
    }

    pub fn square(half: f64) -> Result<Self> {
        Self::rect(Vec2::new(-half, -half), Vec2::new(half, half))
    }

    pub fn ellipse(center: Vec2, shape: Mat2, resolution: usize) -> Result<Self> {
        Self::from_spec(BodySpec::Ellipse {
            center: [center.x, center.y],
            shape: [[shape[(0, 0)], shape[(0, 1)]], [shape[(1, 0)], shape[(1, 1)]]],
            resolution,
        })
    }

    pub fn disk(center: Vec2, radius: f64, resolution: usize) -> Result<Self> {
        Self::ellipse(center, Mat2::identity() * radius, resolution)
    }

    /// Wraps an already-convex polygon (e.g. a clipped piece) as a body.
    pub fn from_polygon(polygon: Polygon) -> Result<Self> {
        Self::polygon(polygon.vertices())
    }

    pub fn spec(&self) -> &BodySpec {
        &self.spec
    }

    pub fn as_polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn vertices(&self) -> &[Vec2] {
        self.polygon.vertices()
    }

    /// Hausdorff distance between the polygon and the body it approximates.
    pub fn hausdorff_error(&self) -> f64 {
        self.hausdorff
    }

    pub fn area(&self) -> f64 {
        self.polygon.area()
    }

    pub fn diameter(&self) -> f64 {
        self.polygon.diameter()
    }

    pub fn perimeter(&self) -> f64 {
        let v = self.polygon.vertices();
        (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).norm()).sum()
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        self.polygon.bounding_box()
    }

    pub fn barycenter(&self) -> Result<Vec2> {
        barycenter(self)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.polygon.contains(x, 0.0)
    }

    pub fn boundary_distance(&self, x: Vec2) -> f64 {
        boundary_distance(self, x)
    }

    /// Nearest boundary point and the inner unit normal of the edge it lies on.
    pub fn boundary_projection(&self, x: Vec2) -> (Vec2, Vec2) {
        let (p, edge) = self.polygon.nearest_boundary_point(x);
        let v = self.polygon.vertices();
        let e = v[(edge + 1) % v.len()] - v[edge];
        let inner = Vec2::new(-e.y, e.x).normalize();
        (p, inner)
    }

    /// Inner unit normal at (or near) a boundary point. For polygonalized
    /// smooth bodies this is the normal of the smooth generator.
    pub fn inner_normal(&self, x: Vec2) -> Vec2 {
        match &self.spec {
            BodySpec::Ellipse { center, shape, .. } => {
                let e = Mat2::new(shape[0][0], shape[0][1], shape[1][0], shape[1][1]);
                let inv = e.try_inverse().unwrap_or_else(Mat2::identity);
                // level set |E^{-1}(x-c)|: gradient E^{-T}E^{-1}(x-c)
                let g = inv.transpose() * inv * (x - Vec2::new(center[0], center[1]));
                -g.normalize()
            }
            BodySpec::Superellipse { center, semi_axes, exponent, angle, .. } => {
                let (s, c) = angle.sin_cos();
                let d = x - Vec2::new(center[0], center[1]);
                let local = Vec2::new(c * d.x + s * d.y, -s * d.x + c * d.y);
                let p = *exponent;
                let g = Vec2::new(
                    local.x.signum() * (local.x.abs() / semi_axes[0]).powf(p - 1.0) / semi_axes[0],
                    local.y.signum() * (local.y.abs() / semi_axes[1]).powf(p - 1.0) / semi_axes[1],
                );
                let world = Vec2::new(c * g.x - s * g.y, s * g.x + c * g.y);
                -world.normalize()
            }
            BodySpec::Polygon { .. } => self.boundary_projection(x).1,
        }
    }

    /// Convex intersection with `{x·normal <= offset}`; `None` when empty.
    pub fn clip_halfplane(&self, normal: Vec2, offset: f64) -> Option<ConvexBody> {
        clip_halfplane(self, normal, offset)
    }

    /// Dilation `rS` about the barycenter.
    pub fn dilate(&self, r: f64) -> Result<ConvexBody> {
        let c = self.barycenter()?;
        ConvexBody::from_polygon(self.polygon.scale_about(c, r))
    }
}

fn check_resolution(n: usize) -> Result<()> {
    if n < 8 {
        return Err(Error::invalid("polygonalization resolution must be at least 8"));
    }
    Ok(())
}

fn validate_strictly_convex(pts: &[Vec2]) -> Result<()> {
    let n = pts.len();
    if n < 3 {
        return Err(Error::Degenerate(format!("polygon needs at least 3 vertices, got {n}")));
    }
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        if cross(b - a, c - b) <= 0.0 {
            return Err(Error::invalid(format!(
                "polygon is not strictly convex and counterclockwise at vertex {}",
                (i + 1) % n
            )));
        }
    }
    // a polygon that winds twice is locally convex but not simple
    let turning: f64 = (0..n)
        .map(|i| {
            let e1 = pts[(i + 1) % n] - pts[i];
            let e2 = pts[(i + 2) % n] - pts[(i + 1) % n];
            cross(e1, e2).atan2(e1.dot(&e2))
        })
        .sum();
    if (turning - 2.0 * PI).abs() > 1e-6 {
        return Err(Error::invalid("polygon winds more than once"));
    }
    Ok(())
}

fn superellipse_polygon(
    center: Vec2,
    semi: Vec2,
    p: f64,
    angle: f64,
    n: usize,
) -> (Polygon, f64) {
    let (s, c) = angle.sin_cos();
    let point = |t: f64| {
        let (st, ct) = t.sin_cos();
        let lx = semi.x * ct.signum() * ct.abs().powf(2.0 / p);
        let ly = semi.y * st.signum() * st.abs().powf(2.0 / p);
        center + Vec2::new(c * lx - s * ly, s * lx + c * ly)
    };
    let step = 2.0 * PI / n as f64;
    let pts: Vec<Vec2> = (0..n).map(|k| point(step * k as f64)).collect();
    // distance of the curve to each chord, sampled inside the parameter interval
    let mut gap: f64 = 0.0;
    for k in 0..n {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        let e = b - a;
        let len = e.norm();
        for j in 1..8 {
            let q = point(step * (k as f64 + j as f64 / 8.0));
            gap = gap.max(cross(e, q - a).abs() / len);
        }
    }
    (Polygon::new(pts), gap)
}

/// Area centroid of the body.
pub fn barycenter(body: &ConvexBody) -> Result<Vec2> {
    body.polygon
        .centroid()
        .ok_or_else(|| Error::Degenerate("zero-area body has no barycenter".into()))
}

/// Distance to `∂body` for interior points, `0` outside the closure.
pub fn boundary_distance(body: &ConvexBody, x: Vec2) -> f64 {
    let mut d = f64::INFINITY;
    for (n, c) in body.polygon.halfplanes() {
        let s = c - n.dot(&x);
        if s <= 0.0 {
            return 0.0;
        }
        d = d.min(s);
    }
    d
}

/// Intersection of `body` with `{x·normal <= offset}`.
pub fn clip_halfplane(body: &ConvexBody, normal: Vec2, offset: f64) -> Option<ConvexBody> {
    let area = body.area();
    let clipped = body.polygon.clip(normal, offset);
    if clipped.is_empty() || clipped.area() < EMPTY_AREA_FRACTION * area {
        return None;
    }
    if clipped.len() == body.polygon.len()
        && clipped.vertices.iter().zip(&body.polygon.vertices).all(|(a, b)| a == b)
    {
        return Some(body.clone());
    }
    ConvexBody::from_polygon(clipped).ok()
}

/// The ellipse `center + generator·B₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipsoid {
    pub center: Vec2,
    pub generator: Mat2,
}

impl Ellipsoid {
    pub fn new(center: Vec2, generator: Mat2) -> Result<Self> {
        let asym = (generator[(0, 1)] - generator[(1, 0)]).abs();
        if asym > 1e-12 * generator.amax().max(1e-300) {
            return Err(Error::invalid("ellipsoid generator must be symmetric"));
        }
        let g = (generator + generator.transpose()) * 0.5;
        let eig = SymmetricEigen::new(g);
        if eig.eigenvalues.min() <= 0.0 || !eig.eigenvalues.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("ellipsoid generator must be positive definite"));
        }
        Ok(Ellipsoid { center, generator: g })
    }

    pub fn ball(center: Vec2, radius: f64) -> Result<Self> {
        Self::new(center, Mat2::identity() * radius)
    }

    /// Semi-axes `(min, max)`.
    pub fn semi_axes(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.generator);
        (eig.eigenvalues.min(), eig.eigenvalues.max())
    }

    /// `rE`: same center, generator scaled by `r`.
    pub fn dilate(&self, r: f64) -> Ellipsoid {
        Ellipsoid { center: self.center, generator: self.generator * r }
    }

    pub fn area(&self) -> f64 {
        PI * self.generator.determinant()
    }

    /// `|E⁻¹(x − c)|`; the ellipse is the unit sublevel set.
    pub fn gauge(&self, x: Vec2) -> f64 {
        let inv = self.generator.try_inverse().expect("generator is positive definite");
        (inv * (x - self.center)).norm()
    }

    pub fn contains(&self, x: Vec2, tol: f64) -> bool {
        self.gauge(x) <= 1.0 + tol
    }

    /// Inscribed polygon with `n` vertices.
    pub fn to_polygon(&self, n: usize) -> Polygon {
        Polygon::new(
            (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    self.center + self.generator * Vec2::new(t.cos(), t.sin())
                })
                .collect(),
        )
    }

    /// Affine map sending this ellipse onto the unit disk.
    pub fn normalizing_map(&self) -> (Mat2, Vec2) {
        let inv = self.generator.try_inverse().expect("generator is positive definite");
        (inv, -(inv * self.center))
    }

    /// `true` when the ellipse lies in `{x·n <= c}` for every edge of `poly`.
    pub fn inside_polygon(&self, poly: &Polygon, tol: f64) -> bool {
        poly.halfplanes()
            .iter()
            .all(|(n, c)| n.dot(&self.center) + (self.generator * n).norm() <= c + tol)
    }
}

/// Outcome of the John ellipsoid optimization.
#[derive(Clone, Debug)]
pub struct JohnEllipsoid {
    pub ellipsoid: Ellipsoid,
    pub iterations: usize,
    /// Barrier duality gap in units of `log det`.
    pub gap: f64,
}

/// Maximum-area ellipse centered at the barycenter and inscribed in `body`.
pub fn john_ellipsoid(body: &ConvexBody) -> Result<JohnEllipsoid> {
    john_ellipsoid_polygon(body.as_polygon())
}

/// John ellipsoid of a convex polygon with the center fixed at the centroid.
///
/// With `P = E²` the containment constraints `|E a_k| <= r_k` become linear
/// in `P`, so the problem is `max log det P` over a polyhedron and is solved
/// by a log-barrier Newton method on the three entries of `P`.
pub fn john_ellipsoid_polygon(poly: &Polygon) -> Result<JohnEllipsoid> {
    let center = poly
        .centroid()
        .ok_or_else(|| Error::Degenerate("zero-area body has no John ellipsoid".into()))?;
    let planes = poly.halfplanes();
    let rows: Vec<(Vector3<f64>, f64)> = planes
        .iter()
        .map(|(a, c)| {
            let r = c - a.dot(&center);
            (Vector3::new(a.x * a.x, 2.0 * a.x * a.y, a.y * a.y), r * r)
        })
        .collect();
    let rmin = rows.iter().map(|(_, r2)| r2.sqrt()).fold(f64::INFINITY, f64::min);
    if !(rmin > 0.0) {
        return Err(Error::Degenerate("barycenter on the boundary".into()));
    }
    let scale = rmin * rmin;
    let m = rows.len() as f64;
    let to_mat = |p: &Vector3<f64>| Mat2::new(p[0], p[1], p[1], p[2]);
    let feasible = |p: &Vector3<f64>| {
        let pm = to_mat(p);
        pm[(0, 0)] > 0.0
            && pm.determinant() > 0.0
            && rows.iter().all(|(g, r2)| r2 - g.dot(p) > 0.0)
    };
    // objective: t·log det P + Σ log s_k, maximized
    let objective = |p: &Vector3<f64>, t: f64| -> f64 {
        let det = to_mat(p).determinant();
        t * det.ln() + rows.iter().map(|(g, r2)| (r2 - g.dot(p)).ln()).sum::<f64>()
    };

    let mut p = Vector3::new(0.25 * scale, 0.0, 0.25 * scale);
    let mut t = 1.0;
    let mut iterations = 0usize;
    const MAX_ITER: usize = 2000;
    let basis = [
        Mat2::new(1.0, 0.0, 0.0, 0.0),
        Mat2::new(0.0, 1.0, 1.0, 0.0),
        Mat2::new(0.0, 0.0, 0.0, 1.0),
    ];
    loop {
        // centering
        for _ in 0..100 {
            iterations += 1;
            let pm = to_mat(&p);
            let q = pm.try_inverse().ok_or_else(|| Error::Degenerate("singular iterate".into()))?;
            let mut grad = Vector3::new(q[(0, 0)], 2.0 * q[(0, 1)], q[(1, 1)]) * t;
            let mut hess = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    hess[(i, j)] = -t * (q * basis[i] * q * basis[j]).trace();
                }
            }
            for (g, r2) in &rows {
                let s = r2 - g.dot(&p);
                grad -= g / s;
                hess -= g * g.transpose() / (s * s);
            }
            let step = match hess.lu().solve(&(-grad)) {
                Some(s) => s,
                None => break,
            };
            // Newton decrement squared; positive for an ascent direction
            let decrement = grad.dot(&step);
            if !(decrement > 1e-14) {
                break;
            }
            let f0 = objective(&p, t);
            let mut alpha = 1.0;
            while alpha > 1e-12 {
                let cand = p + step * alpha;
                if feasible(&cand) && objective(&cand, t) >= f0 + 0.25 * alpha * decrement {
                    break;
                }
                alpha *= 0.5;
            }
            if alpha <= 1e-12 {
                break;
            }
            p += step * alpha;
            if 0.5 * decrement < 1e-12 {
                break;
            }
            if iterations >= MAX_ITER {
                break;
            }
        }
        let gap = m / t;
        let finish = |p: &Vector3<f64>| -> Result<Ellipsoid> {
            let eig = SymmetricEigen::new(to_mat(p));
            let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            let e = eig.eigenvectors * Mat2::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
            Ellipsoid::new(center, (e + e.transpose()) * 0.5)
        };
        if gap < 1e-11 {
            return Ok(JohnEllipsoid { ellipsoid: finish(&p)?, iterations, gap });
        }
        if iterations >= MAX_ITER {
            return Err(Error::NotConverged {
                what: "john ellipsoid",
                iterations,
                residual: gap,
                history: vec![p[0], p[1], p[2]],
            });
        }
        t *= 8.0;
    }
}

/// Chord ratio `l` with `z₂ = z + l(z − z₁)` for the chord of `poly`
/// through `z` in direction `dir`.
pub fn chord_ratio(poly: &Polygon, z: Vec2, dir: Vec2) -> f64 {
    let forward = poly.ray_exit(z, dir);
    let backward = poly.ray_exit(z, -dir);
    forward / backward
}

/// Random convex polygon: hull of `n` uniform points in an ellipse with the
/// given semi-axes, rotated by a random angle.
pub fn random_convex_polygon<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    center: Vec2,
    semi_axes: Vec2,
) -> Polygon {
    let theta: f64 = rng.random_range(0.0..PI);
    let (s, c) = theta.sin_cos();
    loop {
        let pts: Vec<Vec2> = (0..n.max(3))
            .map(|_| {
                let r = rng.random::<f64>().sqrt();
                let t: f64 = rng.random_range(0.0..2.0 * PI);
                let l = Vec2::new(semi_axes.x * r * t.cos(), semi_axes.y * r * t.sin());
                center + Vec2::new(c * l.x - s * l.y, s * l.x + c * l.y)
            })
            .collect();
        let hull = convex_hull(&pts);
        if hull.len() >= 3 && hull.area() > 1e-6 * semi_axes.x * semi_axes.y {
            return hull;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tri() -> ConvexBody {
        ConvexBody::polygon(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn barycenter_of_square_and_triangle() {
        let sq = ConvexBody::square(1.0).unwrap();
        assert!(sq.barycenter().unwrap().norm() < 1e-15);
        let c = tri().barycenter().unwrap();
        assert_relative_eq!(c.x, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(c.y, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn barycenter_of_random_heptagon_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let poly = loop {
            let p = random_convex_polygon(&mut rng, 40, Vec2::new(0.3, -0.2), Vec2::new(1.0, 0.6));
            if p.len() >= 7 {
                break Polygon::new(p.vertices()[..7].to_vec());
            }
        };
        let body = ConvexBody::from_polygon(poly).unwrap();
        let (lo, hi) = body.bounding_box();
        let mut sum = Vec2::zeros();
        let mut hits = 0usize;
        for _ in 0..1_000_000 {
            let x = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if body.contains(x) {
                sum += x;
                hits += 1;
            }
        }
        let mc = sum / hits as f64;
        let c = body.barycenter().unwrap();
        assert!((mc - c).norm() < 2e-3 * body.diameter(), "{mc} vs {c}");
    }

    #[test]
    fn zero_area_polygon_is_rejected() {
        let r = ConvexBody::polygon(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0)]);
        assert!(r.is_err());
        assert!(Polygon::new(vec![Vec2::zeros(), Vec2::new(1.0, 1.0)]).centroid().is_none());
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        let r = ConvexBody::polygon(&[Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn boundary_distance_examples() {
        let disk = ConvexBody::disk(Vec2::zeros(), 1.0, 4096).unwrap();
        assert_relative_eq!(disk.boundary_distance(Vec2::zeros()), 1.0, epsilon = 1e-6);
        assert_eq!(disk.boundary_distance(Vec2::new(2.0, 0.0)), 0.0);
        let sq = ConvexBody::rect(Vec2::zeros(), Vec2::new(1.0, 1.0)).unwrap();
        let x = Vec2::new(0.3, 0.4);
        let brute = [x.x, 1.0 - x.x, x.y, 1.0 - x.y].into_iter().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(sq.boundary_distance(x), brute, epsilon = 1e-15);
    }

    #[test]
    fn clip_examples() {
        let sq = ConvexBody::square(1.0).unwrap();
        let left = sq.clip_halfplane(Vec2::new(1.0, 0.0), 0.0).unwrap();
        assert_relative_eq!(left.area(), 2.0, epsilon = 1e-14);
        let same = sq.clip_halfplane(Vec2::new(1.0, 0.0), 5.0).unwrap();
        assert_eq!(same.vertices(), sq.vertices());
        assert!(sq.clip_halfplane(Vec2::new(1.0, 0.0), -2.0).is_none());
        // sliver below the emptiness threshold
        assert!(sq.clip_halfplane(Vec2::new(1.0, 0.0), -1.0 + 1e-16).is_none());

        let n = 2048;
        let disk = ConvexBody::disk(Vec2::zeros(), 1.0, n).unwrap();
        let half = disk.clip_halfplane(Vec2::new(0.0, 1.0), 0.0).unwrap();
        // error of the inscribed polygon: area deficit ~ (2π³/3)/n² for the full disk
        let tol = disk.perimeter() / n as f64;
        assert!((half.area() - PI / 2.0).abs() < tol, "{}", half.area());
    }

    #[test]
    fn john_ellipsoid_of_square_is_unit_disk() {
        let sq = ConvexBody::square(1.0).unwrap();
        let j = john_ellipsoid(&sq).unwrap().ellipsoid;
        assert!((j.generator - Mat2::identity()).amax() < 1e-8, "{}", j.generator);
        assert!(j.center.norm() < 1e-15);
    }

    #[test]
    fn john_ellipsoid_of_ellipse_body_is_itself() {
        let shape = Mat2::new(2.0, 0.5, 0.5, 1.0);
        let body = ConvexBody::ellipse(Vec2::new(1.0, -1.0), shape, 1024).unwrap();
        let j = john_ellipsoid(&body).unwrap().ellipsoid;
        assert!((j.generator - shape).amax() < 2e-4, "{}", j.generator);
        assert!((j.center - Vec2::new(1.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn john_ellipsoid_of_equilateral_triangle_is_incircle() {
        let s3 = 3f64.sqrt();
        let body = ConvexBody::polygon(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, s3),
        ])
        .unwrap();
        let j = john_ellipsoid(&body).unwrap().ellipsoid;
        let inradius = s3 / 3.0;
        assert!((j.generator - Mat2::identity() * inradius).amax() < 1e-8);
        // circumradius / inradius = 2
        let factor = body
            .vertices()
            .iter()
            .map(|v| j.gauge(*v))
            .fold(0.0, f64::max);
        assert_relative_eq!(factor, 2.0, epsilon = 1e-7);
        assert!(factor <= 2.0 * 2f64.sqrt());
    }

    #[test]
    fn ellipsoid_validation() {
        assert!(Ellipsoid::new(Vec2::zeros(), Mat2::new(1.0, 0.2, 0.0, 1.0)).is_err());
        assert!(Ellipsoid::new(Vec2::zeros(), Mat2::new(1.0, 0.0, 0.0, -1.0)).is_err());
        let e = Ellipsoid::ball(Vec2::new(1.0, 2.0), 2.0).unwrap().dilate(0.5);
        assert_eq!(e.center, Vec2::new(1.0, 2.0));
        assert_relative_eq!(e.generator[(0, 0)], 1.0);
    }

    #[test]
    fn superellipse_polygonalization_is_close() {
        let spec = BodySpec::Superellipse {
            center: [0.0, 0.0],
            semi_axes: [1.0, 0.5],
            exponent: 4.0,
            angle: 0.3,
            resolution: 512,
        };
        let body = ConvexBody::from_spec(spec).unwrap();
        assert!(body.hausdorff_error() <= body.perimeter() / 512.0);
        let normal = body.inner_normal(body.vertices()[0]);
        assert_relative_eq!(normal.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dilation_nests_and_scales_area() {
        let body = tri();
        for r in [0.1, 0.5, 0.9, 1.0] {
            let small = body.dilate(r).unwrap();
            assert!(body.as_polygon().contains_polygon(small.as_polygon(), 1e-12));
            assert_relative_eq!(small.area(), r * r * body.area(), max_relative = 1e-12);
        }
    }

    #[test]
    fn hull_and_chord_ratio() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 0.2),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert_relative_eq!(hull.area(), 1.0);
        let l = chord_ratio(&hull, Vec2::new(0.25, 0.5), Vec2::new(1.0, 0.0));
        assert_relative_eq!(l, 3.0, epsilon = 1e-12);
    }
}
