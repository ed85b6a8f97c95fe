use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flatmodel::ModelProfile;
use crate::geometry::{ConvexBody, Vec2};
use crate::transport2d::ConvexPotential;

#[derive(Clone, Copy, Debug)]
pub struct ObliquenessSample {
    pub x: Vec2,
    pub image: Vec2,
    /// `ν_X(x)·ν_Y(T x)` with inner normals.
    pub theta: f64,
}

#[derive(Clone, Debug)]
pub struct ObliquenessReport {
    /// Minimum of `theta` over the kept samples.
    pub theta_min: f64,
    pub samples: Vec<ObliquenessSample>,
    /// Samples whose image was farther than `tol` from `∂Y`.
    pub skipped: usize,
}

/// Inner products of the inner normals of `∂X` at `x` and of `∂Y` at the
/// boundary point nearest to `T x = ∇u(x)`, for `count` points spaced
/// evenly by arc length along `∂X`.
pub fn obliqueness(
    u: &dyn ConvexPotential,
    x: &ConvexBody,
    y: &ConvexBody,
    count: usize,
    tol: f64,
) -> Result<ObliquenessReport> {
    if count == 0 {
        return Err(Error::invalid("need at least one boundary sample"));
    }
    let pts = arc_length_samples(x, count);
    let ypoly = y.as_polygon();
    let results: Vec<Option<ObliquenessSample>> = pts
        .par_iter()
        .map(|&p| {
            let image = u.gradient(p);
            if ypoly.distance_to_boundary(image) > tol {
                return None;
            }
            let (proj, _) = ypoly.nearest_boundary_point(image);
            let theta = x.inner_normal(p).dot(&y.inner_normal(proj));
            Some(ObliquenessSample { x: p, image, theta })
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let samples: Vec<ObliquenessSample> = results.into_iter().flatten().collect();
    if samples.is_empty() {
        return Err(Error::invalid(format!("all {count} boundary images are farther than {tol} from the target boundary")));
    }
    let theta_min = samples.iter().map(|s| s.theta).fold(f64::INFINITY, f64::min);
    Ok(ObliquenessReport { theta_min, samples, skipped })
}

fn arc_length_samples(body: &ConvexBody, count: usize) -> Vec<Vec2> {
    let v = body.vertices();
    let n = v.len();
    let total = body.perimeter();
    let mut out = Vec::with_capacity(count);
    let mut edge = 0;
    let mut start = 0.0;
    for k in 0..count {
        let s = total * k as f64 / count as f64;
        while edge < n - 1 && start + (v[(edge + 1) % n] - v[edge]).norm() < s {
            start += (v[(edge + 1) % n] - v[edge]).norm();
            edge += 1;
        }
        let a = v[edge];
        let b = v[(edge + 1) % n];
        let len = (b - a).norm();
        let t = if len > 0.0 { ((s - start) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(a + (b - a) * t);
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct NormalRatio {
    pub min: f64,
    pub max: f64,
}

impl NormalRatio {
    pub fn spread(&self) -> f64 {
        self.max / self.min
    }
}

/// Range of `u_n/x_n^γ` over probes in `{x_n > 0}`, with `u_n` from a
/// central difference of half-width `step_fraction·x_n`.
pub fn normal_ratio(
    u: &dyn ConvexPotential,
    profile: &ModelProfile,
    probes: &[Vec2],
    step_fraction: f64,
) -> Result<NormalRatio> {
    if probes.is_empty() {
        return Err(Error::invalid("no probes"));
    }
    if !(step_fraction > 0.0 && step_fraction < 1.0) {
        return Err(Error::invalid(format!("step fraction must lie in (0, 1), got {step_fraction}")));
    }
    let g = profile.gamma();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in probes {
        if !(x.y > 0.0) {
            return Err(Error::invalid(format!("probe {x:?} is not above the boundary")));
        }
        let d = step_fraction * x.y;
        let e = Vec2::new(0.0, d);
        let un = (u.value(x + e) - u.value(x - e)) / (2.0 * d);
        let r = un / x.y.powf(g);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(NormalRatio { min: lo, max: hi })
}
