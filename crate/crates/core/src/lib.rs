//! Optimal transport between densities that vanish like a power of the
//! distance to the boundary.
//!
//! Modules, from the bottom up: [`geometry`] (convex polygons, bodies,
//! ellipsoids), [`measures`] (power densities, integration, doubling),
//! [`transport1d`], [`transport2d`] (LP and entropic solvers, potentials),
//! [`flatmodel`] (the half-plane profile and its linearization),
//! [`analysis`] (sections and fits) and [`harness`] (configs and reports).

pub mod error;
pub mod analysis;
pub mod flatmodel;
pub mod geometry;
pub mod harness;
pub mod measures;
pub mod stats;
pub mod transport1d;
pub mod transport2d;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/one-dimensional.md")]
    pub struct OneDimensional;
    #[doc = include_str!("../../../book/src/densities.md")]
    pub struct Densities;
    #[doc = include_str!("../../../book/src/discrete-transport.md")]
    pub struct DiscreteTransport;
    #[doc = include_str!("../../../book/src/model-profile.md")]
    pub struct ModelProfile;
    #[doc = include_str!("../../../book/src/sections.md")]
    pub struct Sections;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
}
