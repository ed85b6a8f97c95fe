use rand::Rng;

use super::discrete::DiscreteMeasure;
use super::solution::TransportSolution;
use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, Mat2, Polygon, Vec2};

/// Where a potential is defined and which parts of the frame are genuine
/// boundary.
#[derive(Clone, Copy, Debug)]
pub enum Domain<'a> {
    /// Defined on the whole plane.
    Plane,
    /// The closed half-plane `{x : x·inner_normal ≥ offset}`, whose edge is
    /// genuine boundary.
    HalfPlane { inner_normal: Vec2, offset: f64 },
    /// A sampled body, some of whose edges are only a sampling frame.
    Window(&'a SampleWindow),
}

/// Sampling window with a flag per polygon edge: `true` for genuine
/// boundary of the problem's domain, `false` for an artificial cut.
#[derive(Clone, Debug)]
pub struct SampleWindow {
    pub body: ConvexBody,
    /// Edge `k` runs from vertex `k` to vertex `k + 1`.
    pub genuine: Vec<bool>,
}

impl SampleWindow {
    pub fn new(body: ConvexBody, genuine: Vec<bool>) -> Result<Self> {
        if genuine.len() != body.vertices().len() {
            return Err(Error::invalid(format!(
                "window has {} edges but {} genuine flags",
                body.vertices().len(),
                genuine.len()
            )));
        }
        Ok(SampleWindow { body, genuine })
    }

    /// Every edge is genuine boundary.
    pub fn closed(body: ConvexBody) -> Self {
        let n = body.vertices().len();
        SampleWindow { body, genuine: vec![true; n] }
    }

    /// Whether `poly` (inside the window) comes within `tol` of an
    /// artificial edge.
    pub fn touches_artificial(&self, poly: &Polygon, tol: f64) -> bool {
        let planes = self.body.as_polygon().halfplanes();
        planes
            .iter()
            .zip(&self.genuine)
            .filter(|(_, g)| !**g)
            .any(|((n, c), _)| poly.vertices().iter().any(|v| c - n.dot(v) <= tol))
    }

    /// Inner normal of the genuine edge closest to `x`, if any.
    pub fn genuine_normal(&self, x: Vec2) -> Option<Vec2> {
        let planes = self.body.as_polygon().halfplanes();
        planes
            .iter()
            .zip(&self.genuine)
            .filter(|(_, g)| **g)
            .map(|((n, c), _)| ((c - n.dot(&x)).abs(), -n))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, n)| n)
    }
}

/// A convex function on the plane (or part of it).
pub trait ConvexPotential: Sync {
    fn value(&self, x: Vec2) -> f64;
    /// A subgradient at `x`.
    fn gradient(&self, x: Vec2) -> Vec2;
    fn domain(&self) -> Domain<'_>;
    /// Exact `{x ∈ bound : u(x) < slope·x + offset}` when the potential is
    /// a finite maximum of affine functions.
    fn sublevel_polygon(&self, _slope: Vec2, _offset: f64, _bound: &Polygon) -> Option<Polygon> {
        None
    }
}

/// `½ xᵀ A x` for a symmetric positive definite `A`, on the whole plane.
#[derive(Clone, Copy, Debug)]
pub struct QuadraticPotential {
    pub matrix: Mat2,
}

impl QuadraticPotential {
    pub fn half_norm() -> Self {
        QuadraticPotential { matrix: Mat2::identity() }
    }
}

impl ConvexPotential for QuadraticPotential {
    fn value(&self, x: Vec2) -> f64 {
        0.5 * x.dot(&(self.matrix * x))
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        self.matrix * x
    }

    fn domain(&self) -> Domain<'_> {
        Domain::Plane
    }
}

/// A discrete convex potential: samples at nodes plus an envelope
/// `u(x) = max_j (s_j·x + b_j)` that extends them to the plane.
#[derive(Clone, Debug)]
pub struct PotentialField {
    nodes: Vec<Vec2>,
    values: Vec<f64>,
    grads: Vec<Vec2>,
    slopes: Vec<Vec2>,
    intercepts: Vec<f64>,
    window: Option<SampleWindow>,
}

impl PotentialField {
    /// Field from samples `(x_i, u_i, ∇u_i)`; the envelope is the maximum
    /// of the tangent planes.
    pub fn from_samples(nodes: Vec<Vec2>, values: Vec<f64>, grads: Vec<Vec2>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != values.len() || nodes.len() != grads.len() {
            return Err(Error::invalid("nodes, values and gradients must be nonempty and equally long"));
        }
        let intercepts = nodes.iter().zip(&values).zip(&grads).map(|((x, u), g)| u - g.dot(x)).collect();
        Ok(PotentialField { slopes: grads.clone(), intercepts, nodes, values, grads, window: None })
    }

    /// Field with an explicit envelope.
    pub fn with_envelope(
        nodes: Vec<Vec2>,
        values: Vec<f64>,
        grads: Vec<Vec2>,
        slopes: Vec<Vec2>,
        intercepts: Vec<f64>,
    ) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != values.len() || nodes.len() != grads.len() {
            return Err(Error::invalid("nodes, values and gradients must be nonempty and equally long"));
        }
        if slopes.is_empty() || slopes.len() != intercepts.len() {
            return Err(Error::invalid("envelope slopes and intercepts must be nonempty and equally long"));
        }
        Ok(PotentialField { nodes, values, grads, slopes, intercepts, window: None })
    }

    pub fn with_window(mut self, window: SampleWindow) -> Self {
        self.window = Some(window);
        self
    }

    pub fn window(&self) -> Option<&SampleWindow> {
        self.window.as_ref()
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Gradient samples `T(x_i)`.
    pub fn grads(&self) -> &[Vec2] {
        &self.grads
    }

    /// Slopes of the envelope planes (the target atoms for a Brenier field).
    pub fn slopes(&self) -> &[Vec2] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Envelope value and the index of a maximizing plane.
    pub fn envelope(&self, x: Vec2) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, (s, b)) in self.slopes.iter().zip(&self.intercepts).enumerate() {
            let v = s.dot(&x) + b;
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }

    /// `u − (c + p·x)`.
    pub fn subtract_affine(&self, c: f64, p: Vec2) -> PotentialField {
        PotentialField {
            nodes: self.nodes.clone(),
            values: self.nodes.iter().zip(&self.values).map(|(x, u)| u - c - p.dot(x)).collect(),
            grads: self.grads.iter().map(|g| g - p).collect(),
            slopes: self.slopes.iter().map(|s| s - p).collect(),
            intercepts: self.intercepts.iter().map(|b| b - c).collect(),
            window: self.window.clone(),
        }
    }

    /// Shift by an affine function so that `u(anchor) = 0` and the slope at
    /// the anchor becomes zero.
    pub fn normalized(&self, anchor: Vec2, slope: Vec2) -> PotentialField {
        let u0 = self.envelope(anchor).0;
        self.subtract_affine(u0 - slope.dot(&anchor), slope)
    }

    /// `x ↦ u(D x)/t` for `D = diag(d)` with positive entries.
    pub fn pullback_diag(&self, d: Vec2, t: f64) -> Result<PotentialField> {
        if !(d.x > 0.0 && d.y > 0.0 && t > 0.0) {
            return Err(Error::invalid("diagonal scaling and t must be positive"));
        }
        let inv = |x: &Vec2| Vec2::new(x.x / d.x, x.y / d.y);
        let fwd = |g: &Vec2| Vec2::new(g.x * d.x, g.y * d.y) / t;
        let window = match &self.window {
            Some(w) => {
                let poly = w.body.as_polygon().map(|v| inv(&v));
                Some(SampleWindow { body: ConvexBody::from_polygon(poly)?, genuine: w.genuine.clone() })
            }
            None => None,
        };
        Ok(PotentialField {
            nodes: self.nodes.iter().map(inv).collect(),
            values: self.values.iter().map(|u| u / t).collect(),
            grads: self.grads.iter().map(fwd).collect(),
            slopes: self.slopes.iter().map(fwd).collect(),
            intercepts: self.intercepts.iter().map(|b| b / t).collect(),
            window,
        })
    }

    /// Worst violation of `u_i ≥ u_k + ∇u_k·(x_i − x_k)` over random node
    /// pairs, relative to nothing (absolute units of `u`).
    pub fn convexity_defect<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> f64 {
        let n = self.nodes.len();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let i = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            let plane = self.values[k] + self.grads[k].dot(&(self.nodes[i] - self.nodes[k]));
            worst = worst.max(plane - self.values[i]);
        }
        worst
    }

    /// Largest gap between the node samples and the envelope.
    pub fn envelope_gap(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.values)
            .map(|(x, u)| (self.envelope(*x).0 - u).abs())
            .fold(0.0, f64::max)
    }
}

impl ConvexPotential for PotentialField {
    fn value(&self, x: Vec2) -> f64 {
        self.envelope(x).0
    }

    fn gradient(&self, x: Vec2) -> Vec2 {
        self.slopes[self.envelope(x).1]
    }

    fn domain(&self) -> Domain<'_> {
        match &self.window {
            Some(w) => Domain::Window(w),
            None => Domain::Plane,
        }
    }

    fn sublevel_polygon(&self, slope: Vec2, offset: f64, bound: &Polygon) -> Option<Polygon> {
        let mut poly = bound.clone();
        for (s, b) in self.slopes.iter().zip(&self.intercepts) {
            let n = s - slope;
            let c = offset - b;
            if n.norm_squared() == 0.0 {
                if c <= 0.0 {
                    return Some(Polygon::new(Vec::new()));
                }
                continue;
            }
            poly = poly.clip(n, c);
            if poly.is_empty() {
                break;
            }
        }
        Some(poly)
    }
}

/// Brenier potential `u_i = ½|x_i|² − φ_i` with barycentric gradient
/// samples and the envelope `max_j (x·y_j − ½|y_j|² + ψ_j)`.
///
/// Rows without coupling mass are left out.
pub fn brenier_potential(sol: &TransportSolution, mu: &DiscreteMeasure) -> Result<PotentialField> {
    if mu.points() != sol.source.points() {
        return Err(Error::invalid("measure does not match the solution's source atoms"));
    }
    let (phi, psi) = sol.half_squared_duals();
    let bary = sol.barycentric_map();
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    let mut grads = Vec::new();
    for (i, t) in bary.iter().enumerate() {
        if let Some(t) = t {
            let x = mu.points()[i];
            nodes.push(x);
            values.push(0.5 * x.norm_squared() - phi[i]);
            grads.push(*t);
        }
    }
    if nodes.is_empty() {
        return Err(Error::invalid("coupling carries no mass"));
    }
    let slopes: Vec<Vec2> = sol.target.points().to_vec();
    let intercepts = slopes.iter().zip(&psi).map(|(y, p)| p - 0.5 * y.norm_squared()).collect();
    PotentialField::with_envelope(nodes, values, grads, slopes, intercepts)
}

/// Discrete convex conjugate `v(y_j) = max_i (x_i·y_j − u_i)` at the
/// envelope slopes of `u`.
///
/// The envelope of the result uses the planes `y ↦ x_i·y − u_i`, and its
/// gradient samples are maximizing nodes.
pub fn legendre_transform(u: &PotentialField) -> PotentialField {
    let ys = u.slopes.clone();
    let mut values = Vec::with_capacity(ys.len());
    let mut grads = Vec::with_capacity(ys.len());
    for y in &ys {
        let mut best = (f64::NEG_INFINITY, Vec2::zeros());
        for (x, v) in u.nodes.iter().zip(&u.values) {
            let w = x.dot(y) - v;
            if w > best.0 {
                best = (w, *x);
            }
        }
        values.push(best.0);
        grads.push(best.1);
    }
    PotentialField {
        nodes: ys,
        values,
        grads,
        slopes: u.nodes.clone(),
        intercepts: u.values.iter().map(|v| -v).collect(),
        window: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport2d::solve_lp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<Vec2> {
        let mut p = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let s = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
                let t = lo + (hi - lo) * (j as f64 + 0.5) / n as f64;
                p.push(Vec2::new(s, t));
            }
        }
        p
    }

    #[test]
    fn identity_transport() {
        let mu = DiscreteMeasure::uniform(grid(6, 0.0, 1.0)).unwrap();
        let sol = solve_lp(&mu, &mu).unwrap();
        let u = brenier_potential(&sol, &mu).unwrap();
        let c = u.values()[0] - 0.5 * u.nodes()[0].norm_squared();
        for ((x, v), g) in u.nodes().iter().zip(u.values()).zip(u.grads()) {
            assert!((v - 0.5 * x.norm_squared() - c).abs() < 1e-12);
            assert!((g - x).norm() < 1e-15);
        }
        assert!(u.envelope_gap() < 1e-12);
    }

    #[test]
    fn translation_target() {
        let shift = Vec2::new(0.3, -0.2);
        let pts = grid(5, 0.0, 1.0);
        let mu = DiscreteMeasure::uniform(pts.clone()).unwrap();
        let nu = DiscreteMeasure::uniform(pts.iter().map(|p| p + shift).collect()).unwrap();
        let sol = solve_lp(&mu, &nu).unwrap();
        let u = brenier_potential(&sol, &mu).unwrap();
        let q = |x: &Vec2| 0.5 * x.norm_squared() + shift.dot(x);
        for (x, g) in u.nodes().iter().zip(u.grads()) {
            assert!((g - (x + shift)).norm() < 1e-12);
        }
        // duals of a permutation coupling are not unique; the cyclical
        // sandwich pins u − q to within ½|x_i − x_k|² between nodes
        let (xs, us) = (u.nodes(), u.values());
        for i in 0..xs.len() {
            for k in 0..xs.len() {
                let d = (us[i] - q(&xs[i])) - (us[k] - q(&xs[k]));
                assert!(d.abs() <= 0.5 * (xs[i] - xs[k]).norm_squared() + 1e-12);
            }
        }
    }

    #[test]
    fn fenchel_young_on_matched_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = |rng: &mut ChaCha8Rng| (0..40).map(|_| Vec2::new(rng.random(), rng.random())).collect();
        let mu = DiscreteMeasure::uniform(pts(&mut rng)).unwrap();
        let nu = DiscreteMeasure::uniform(pts(&mut rng)).unwrap();
        let sol = solve_lp(&mu, &nu).unwrap();
        let u = brenier_potential(&sol, &mu).unwrap();
        let v = legendre_transform(&u);
        for &(i, j, _) in &sol.coupling {
            let (x, y) = (mu.points()[i], nu.points()[j]);
            let gap = v.values()[j] + u.values()[i] - x.dot(&y);
            assert!(gap.abs() < 1e-6, "{gap}");
        }
        // biconjugate stays below u
        let w = legendre_transform(&v);
        for (a, b) in w.values().iter().zip(u.values()) {
            assert!(*a <= b + 1e-12);
        }
    }

    #[test]
    fn half_norm_is_self_dual() {
        let pts = grid(20, -1.0, 1.0);
        let vals = pts.iter().map(|p| 0.5 * p.norm_squared()).collect();
        let u = PotentialField::from_samples(pts.clone(), vals, pts.clone()).unwrap();
        let v = legendre_transform(&u);
        for (y, val) in v.nodes().iter().zip(v.values()) {
            assert!((val - 0.5 * y.norm_squared()).abs() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(u.convexity_defect(&mut rng, 1000) <= 1e-15);
    }

    #[test]
    fn pullback_and_affine_shift() {
        let pts = grid(10, 0.0, 1.0);
        let vals = pts.iter().map(|p| 0.5 * p.norm_squared()).collect();
        let u = PotentialField::from_samples(pts.clone(), vals, pts).unwrap();
        let ut = u.pullback_diag(Vec2::new(0.5, 0.5), 0.25).unwrap();
        // ½|x|² is invariant under x ↦ u(x/2)·4
        let x = Vec2::new(0.7, 1.3);
        assert!((ut.value(x) - u.value(x * 0.5) / 0.25).abs() < 1e-14);
        let n = u.normalized(Vec2::new(0.5, 0.5), Vec2::new(0.5, 0.5));
        assert!(n.value(Vec2::new(0.5, 0.5)).abs() < 1e-14);
    }

    #[test]
    fn sublevel_polygon_is_exact_for_envelopes() {
        let pts = grid(30, -1.0, 1.0);
        let vals = pts.iter().map(|p| 0.5 * p.norm_squared()).collect();
        let u = PotentialField::from_samples(pts.clone(), vals, pts).unwrap();
        let bound = Polygon::rect(Vec2::new(-2.0, -2.0), Vec2::new(2.0, 2.0));
        let s = u.sublevel_polygon(Vec2::zeros(), 0.2, &bound).unwrap();
        for v in s.vertices() {
            assert!((u.value(*v) - 0.2).abs() < 1e-12);
        }
        // tangent-plane envelope lies below ½|x|², so the set contains the disk
        assert!(s.area() >= std::f64::consts::PI * 0.4 - 1e-9);
    }
}
