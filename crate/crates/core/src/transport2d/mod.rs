//! Discrete optimal transport in the plane: an exact network-simplex LP,
//! an entropic solver, and recovery of Brenier potentials from the duals.
//!
//! All solvers minimize `½|x − y|²` internally, so the recovered potential
//! `u` satisfies `T = ∇u` without rescaling.

mod discrete;
mod entropic;
mod lp;
mod potential;
mod solution;

pub use discrete::{discretize, discretize_grid, Axis, DiscreteMeasure};
pub use entropic::{solve_entropic, solve_entropic_report, EntropicOptions, EntropicReport, MIN_EPS_FACTOR};
pub use lp::{solve_lp, solve_lp_with, LpOptions, DEFAULT_LP_CAP};
pub use potential::{
    brenier_potential, legendre_transform, ConvexPotential, Domain, PotentialField, QuadraticPotential, SampleWindow,
};
pub use solution::{pushforward_check, CostConvention, TransportSolution};
