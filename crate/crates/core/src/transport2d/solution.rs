use std::collections::HashMap;

use rand::Rng;

use super::discrete::DiscreteMeasure;
use crate::geometry::{Polygon, Vec2};

/// Transport cost the duals refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CostConvention {
    /// `½|x − y|²`, so that `u = ½|x|² − φ` has `∇u = T`.
    #[default]
    HalfSquared,
    /// `|x − y|²`; duals are twice the half-squared ones.
    Squared,
}

impl CostConvention {
    pub fn cost(self, x: Vec2, y: Vec2) -> f64 {
        let d = (x - y).norm_squared();
        match self {
            CostConvention::HalfSquared => 0.5 * d,
            CostConvention::Squared => d,
        }
    }

    /// Factor converting this convention's costs to `½|x − y|²` costs.
    pub fn to_half_squared(self) -> f64 {
        match self {
            CostConvention::HalfSquared => 1.0,
            CostConvention::Squared => 0.5,
        }
    }
}

/// Discrete coupling with dual potentials.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    /// Nonzero entries `(i, j, π_ij)`, sorted by `i` then `j`.
    pub coupling: Vec<(usize, usize, f64)>,
    /// Dual on source atoms.
    pub phi: Vec<f64>,
    /// Dual on target atoms.
    pub psi: Vec<f64>,
    pub convention: CostConvention,
    /// Entropic regularization; `0` for the LP.
    pub epsilon: f64,
    /// Total-variation marginal violation of the (unsparsified) coupling.
    pub marginal_violation: f64,
    /// Mass of coupling entries dropped when sparsifying.
    pub dropped_mass: f64,
    pub iterations: usize,
}

impl TransportSolution {
    pub fn cost_of(&self, i: usize, j: usize) -> f64 {
        self.convention.cost(self.source.points()[i], self.target.points()[j])
    }

    /// `Σ π_ij c(x_i, y_j)` in the solution's convention.
    pub fn transport_cost(&self) -> f64 {
        self.coupling.iter().map(|&(i, j, m)| m * self.cost_of(i, j)).sum()
    }

    /// `Σ a_i φ_i + Σ b_j ψ_j`.
    pub fn dual_objective(&self) -> f64 {
        let a: f64 = self.source.weights().iter().zip(&self.phi).map(|(w, p)| w * p).sum();
        let b: f64 = self.target.weights().iter().zip(&self.psi).map(|(w, p)| w * p).sum();
        a + b
    }

    pub fn duality_gap(&self) -> f64 {
        self.transport_cost() - self.dual_objective()
    }

    /// Largest `φ_i + ψ_j − c_ij` over all pairs (≤ 0 for feasible duals).
    pub fn dual_infeasibility(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, p) in self.phi.iter().enumerate() {
            for (j, q) in self.psi.iter().enumerate() {
                worst = worst.max(p + q - self.cost_of(i, j));
            }
        }
        worst
    }

    /// Duals for the `½|x − y|²` cost.
    pub fn half_squared_duals(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.convention.to_half_squared();
        (self.phi.iter().map(|v| v * k).collect(), self.psi.iter().map(|v| v * k).collect())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.source.len()];
        for &(i, _, m) in &self.coupling {
            r[i] += m;
        }
        r
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.target.len()];
        for &(_, j, m) in &self.coupling {
            c[j] += m;
        }
        c
    }

    /// Marginal error of the sparse coupling, in total variation.
    pub fn sparse_marginal_violation(&self) -> f64 {
        let r: f64 = self.row_sums().iter().zip(self.source.weights()).map(|(a, b)| (a - b).abs()).sum();
        let c: f64 = self.column_sums().iter().zip(self.target.weights()).map(|(a, b)| (a - b).abs()).sum();
        r + c
    }

    /// Barycentric projection `Σ_j π_ij y_j / Σ_j π_ij` for each source atom;
    /// `None` for rows without mass.
    pub fn barycentric_map(&self) -> Vec<Option<Vec2>> {
        let mut acc = vec![(Vec2::zeros(), 0.0); self.source.len()];
        for &(i, j, m) in &self.coupling {
            acc[i].0 += self.target.points()[j] * m;
            acc[i].1 += m;
        }
        acc.into_iter().map(|(s, m)| (m > 0.0).then(|| s / m)).collect()
    }

    /// Worst violation of `c(x_a, y_a) + c(x_b, y_b) ≤ c(x_a, y_b) + c(x_b, y_a)`
    /// over all pairs of support entries (positive means violated).
    pub fn two_cycle_defect(&self) -> f64 {
        let sup = &self.coupling;
        let mut worst = f64::NEG_INFINITY;
        for (k, &(a, ya, _)) in sup.iter().enumerate() {
            for &(b, yb, _) in &sup[k + 1..] {
                let lhs = self.cost_of(a, ya) + self.cost_of(b, yb);
                let rhs = self.cost_of(a, yb) + self.cost_of(b, ya);
                worst = worst.max(lhs - rhs);
            }
        }
        worst
    }

    /// Worst 3-cycle violation over `samples` random triples of support
    /// entries, both orientations.
    pub fn three_cycle_defect<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> f64 {
        let sup = &self.coupling;
        let n = sup.len();
        if n < 3 {
            return f64::NEG_INFINITY;
        }
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let a = sup[rng.random_range(0..n)];
            let b = sup[rng.random_range(0..n)];
            let c = sup[rng.random_range(0..n)];
            let base = self.cost_of(a.0, a.1) + self.cost_of(b.0, b.1) + self.cost_of(c.0, c.1);
            let fwd = self.cost_of(a.0, b.1) + self.cost_of(b.0, c.1) + self.cost_of(c.0, a.1);
            let rev = self.cost_of(a.0, c.1) + self.cost_of(b.0, a.1) + self.cost_of(c.0, b.1);
            worst = worst.max(base - fwd).max(base - rev);
        }
        worst
    }
}

/// Mass-balance check of a coupling on one test set `B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PushforwardEntry {
    /// `μ(B)`.
    pub source_mass: f64,
    /// `ν` of the targets receiving mass from `B`.
    pub image_mass: f64,
    /// `|μ(B) − ν(image of B)|`.
    pub discrepancy: f64,
    /// `ν` of the targets receiving mass from both `B` and its complement.
    pub granularity: f64,
}

/// Result of [`pushforward_check`].
#[derive(Clone, Debug)]
pub struct PushforwardReport {
    pub entries: Vec<PushforwardEntry>,
    pub worst_discrepancy: f64,
    /// Worst `discrepancy − granularity`; at most the marginal and
    /// sparsification error of the solution.
    pub worst_excess: f64,
    pub max_atom_weight: f64,
}

/// Compares `μ(B)` with the target mass of the image of `B` under the
/// coupling, for each test set.
///
/// Targets split between `B` and its complement make the two differ; their
/// total mass is the granularity of the discrete coupling for `B`.
pub fn pushforward_check(sol: &TransportSolution, test_sets: &[Polygon]) -> PushforwardReport {
    let mut entries = Vec::with_capacity(test_sets.len());
    for set in test_sets {
        let inside: Vec<bool> = sol.source.points().iter().map(|p| set.contains(*p, 1e-12)).collect();
        let source_mass: f64 = sol.source.weights().iter().zip(&inside).filter(|(_, b)| **b).map(|(w, _)| *w).sum();
        // per target: (comes from B, comes from outside B)
        let mut from: HashMap<usize, (bool, bool)> = HashMap::new();
        for &(i, j, _) in &sol.coupling {
            let e = from.entry(j).or_insert((false, false));
            if inside[i] {
                e.0 = true;
            } else {
                e.1 = true;
            }
        }
        let mut image_mass = 0.0;
        let mut granularity = 0.0;
        for (j, (a, b)) in from {
            let w = sol.target.weights()[j];
            if a {
                image_mass += w;
                if b {
                    granularity += w;
                }
            }
        }
        entries.push(PushforwardEntry {
            source_mass,
            image_mass,
            discrepancy: (source_mass - image_mass).abs(),
            granularity,
        });
    }
    let worst_discrepancy = entries.iter().map(|e| e.discrepancy).fold(0.0, f64::max);
    let worst_excess = entries.iter().map(|e| e.discrepancy - e.granularity).fold(f64::NEG_INFINITY, f64::max);
    PushforwardReport { entries, worst_discrepancy, worst_excess, max_atom_weight: sol.source.max_weight().max(sol.target.max_weight()) }
}
