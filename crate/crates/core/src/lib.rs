//! Discrete optimal-transport potentials and empirical regularity diagnostics.
//!
//! The pipeline: discretize densities into weighted point clouds, solve the exact
//! transport problem, turn the dual into a piecewise-affine convex potential, then
//! measure sections, mollified Laplacians and the constants of the regularity theory.

pub mod geom;
pub mod lab;
pub mod measures;
pub mod mollifier;
pub mod ot;
pub mod rng;
pub mod sections;

pub use geom::{ConvexPolytope, Ellipsoid, GeomError, Halfspace, Point2, RadiusPair};
