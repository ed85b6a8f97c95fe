use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polygon, Vec2};
use crate::measures::{integrate_polygon, PowerDensity, DEFAULT_CELL_BUDGET};

/// Relative quadrature tolerance for each grid cell's mass and moment.
pub const CELL_TOL: f64 = 1e-6;

/// Finitely many weighted atoms with total weight one.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Vec2>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Atoms with positive weights summing to one within `1e-12`.
    pub fn new(points: Vec<Vec2>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Self::from_masses(points, weights)
    }

    /// Atoms with positive masses, renormalized to total weight one.
    pub fn from_masses(points: Vec<Vec2>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() {
            return Err(Error::invalid("points and weights differ in length"));
        }
        if points.is_empty() {
            return Err(Error::invalid("a discrete measure needs at least one atom"));
        }
        if let Some(w) = masses.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!("atom weights must be positive and finite, got {w}")));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::invalid("atom coordinates must be finite"));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|a, b| {
            let (p, q) = (points[*a], points[*b]);
            p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
        });
        if order.windows(2).any(|w| points[w[0]] == points[w[1]]) {
            return Err(Error::invalid("atoms must be pairwise distinct"));
        }
        let total: f64 = masses.iter().sum();
        let weights = masses.iter().map(|m| m / total).collect();
        Ok(DiscreteMeasure { points, weights })
    }

    /// Equal weights on the given points.
    pub fn uniform(points: Vec<Vec2>) -> Result<Self> {
        let n = points.len();
        Self::from_masses(points, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Vec2 {
        self.points.iter().zip(&self.weights).map(|(p, w)| p * *w).sum()
    }

    /// Mass of the atoms inside `set` (closed).
    pub fn mass_in(&self, set: &Polygon) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| set.contains(**p, 1e-12))
            .map(|(_, w)| *w)
            .sum()
    }

    /// Diameter of the atom cloud.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max((a - b).norm_squared());
            }
        }
        d.sqrt()
    }
}

/// Cell edges along one axis of a tensor-product grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Axis {
    Uniform { lo: f64, hi: f64, cells: usize },
    /// Geometric widths growing away from `lo`, the first one `first`.
    Graded { lo: f64, hi: f64, cells: usize, first: f64 },
    /// Geometric widths growing both ways from `center`; `cells` per side.
    Symmetric { center: f64, half_width: f64, cells: usize, first: f64 },
}

impl Axis {
    pub fn edges(&self) -> Result<Vec<f64>> {
        match *self {
            Axis::Uniform { lo, hi, cells } => {
                check_axis(lo, hi, cells)?;
                Ok((0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect())
            }
            Axis::Graded { lo, hi, cells, first } => {
                check_axis(lo, hi, cells)?;
                graded(lo, hi, cells, first)
            }
            Axis::Symmetric { center, half_width, cells, first } => {
                check_axis(center, center + half_width, cells)?;
                let right = graded(center, center + half_width, cells, first)?;
                let mut e: Vec<f64> = right.iter().rev().map(|x| 2.0 * center - x).collect();
                e.extend_from_slice(&right[1..]);
                Ok(e)
            }
        }
    }

    /// Smallest cell width.
    pub fn min_width(&self) -> Result<f64> {
        let e = self.edges()?;
        Ok(e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min))
    }

    /// Width of the cell containing `x` (clamped to the axis range).
    pub fn width_at(&self, x: f64) -> Result<f64> {
        let e = self.edges()?;
        let i = e.partition_point(|v| *v <= x).clamp(1, e.len() - 1);
        Ok(e[i] - e[i - 1])
    }

    pub fn cells(&self) -> usize {
        match *self {
            Axis::Uniform { cells, .. } | Axis::Graded { cells, .. } => cells,
            Axis::Symmetric { cells, .. } => 2 * cells,
        }
    }
}

fn check_axis(lo: f64, hi: f64, cells: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("axis range [{lo}, {hi}] is empty")));
    }
    if cells == 0 {
        return Err(Error::invalid("axis needs at least one cell"));
    }
    Ok(())
}

fn graded(lo: f64, hi: f64, n: usize, first: f64) -> Result<Vec<f64>> {
    let len = hi - lo;
    if !(first > 0.0 && first * n as f64 <= len * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!(
            "first width {first} must be positive and at most (hi - lo)/cells = {}",
            len / n as f64
        )));
    }
    // ratio q with first·(q^n − 1)/(q − 1) = len
    let total = |q: f64| {
        if (q - 1.0).abs() < 1e-12 {
            first * n as f64
        } else {
            first * (q.powi(n as i32) - 1.0) / (q - 1.0)
        }
    };
    let (mut a, mut b) = (1.0, 2.0);
    while total(b) < len {
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if total(m) < len {
            a = m;
        } else {
            b = m;
        }
    }
    let q = 0.5 * (a + b);
    let mut e = Vec::with_capacity(n + 1);
    let mut x = lo;
    let mut w = first;
    e.push(lo);
    for _ in 0..n {
        x += w;
        w *= q;
        e.push(x);
    }
    e[n] = hi;
    Ok(e)
}

/// One atom per nonempty cell of a roughly square `n_cells` grid over the
/// body's bounding box.
pub fn discretize(f: &PowerDensity, n_cells: usize) -> Result<DiscreteMeasure> {
    if n_cells < 4 {
        return Err(Error::invalid(format!("n_cells must be at least 4, got {n_cells}")));
    }
    let (lo, hi) = f.body().bounding_box();
    let size = hi - lo;
    let nx = ((n_cells as f64 * size.x / size.y).sqrt().round() as usize).max(1);
    let ny = ((n_cells as f64 / nx as f64).round() as usize).max(1);
    discretize_grid(
        f,
        &Axis::Uniform { lo: lo.x, hi: hi.x, cells: nx },
        &Axis::Uniform { lo: lo.y, hi: hi.y, cells: ny },
    )
}

/// Atoms at the `f`-weighted centroids of the grid cells clipped to the
/// body, weighted by the cells' `f`-mass.
pub fn discretize_grid(f: &PowerDensity, x: &Axis, y: &Axis) -> Result<DiscreteMeasure> {
    let xe = x.edges()?;
    let ye = y.edges()?;
    let body = f.body().as_polygon();
    let mut points = Vec::new();
    let mut masses = Vec::new();
    for j in 0..ye.len() - 1 {
        for i in 0..xe.len() - 1 {
            let cell = Polygon::rect(Vec2::new(xe[i], ye[j]), Vec2::new(xe[i + 1], ye[j + 1]));
            let piece = cell.intersect(body);
            if piece.is_empty() {
                continue;
            }
            let r = integrate_polygon(f, &piece, CELL_TOL, DEFAULT_CELL_BUDGET / 16)?;
            if r.value > 0.0 {
                points.push(r.moment / r.value);
                masses.push(r.value);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::invalid("no grid cell carries mass"));
    }
    DiscreteMeasure::from_masses(points, masses)
}
