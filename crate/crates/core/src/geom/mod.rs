//! Convex bodies: polytopes in two and three dimensions, radii, polars and John ellipsoids.

mod ball;
pub mod cells;
mod hull3;
mod john;
pub mod lp;
pub mod polygon;
mod polytope;
pub mod quad;

pub use ball::{min_enclosing_ball, Ball};
pub use hull3::lower_hull;
pub use john::Ellipsoid;
pub use polytope::{ConvexPolytope, Halfspace, Polygon, RadiusPair};

use thiserror::Error;

pub type Point2 = nalgebra::Vector2<f64>;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("halfspace intersection is empty")]
    EmptyIntersection,
    #[error("halfspace intersection is unbounded")]
    Unbounded,
    #[error("polar body is unbounded: reference point is not interior")]
    PolarUnbounded,
    #[error("body has empty interior")]
    DegenerateBody,
    #[error("no halfspaces given")]
    NoHalfspaces,
    #[error("halfspace with zero or non-finite data")]
    InvalidHalfspace,
}

/// Volume of the unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 / 3.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {n}"),
    }
}
