//! Densities, δ-scale Voronoi discretization and empirical two-sided mass bounds.

mod certificate;
mod density;
mod discrete;
mod discretize;

pub use certificate::{
    verify_assumption1, verify_convex_equivalence, AssumptionCertificate, CertificateMode, MassOracle,
};
pub use density::{ellipse_inside, DensityKind, DensitySpec};
pub use discrete::DiscreteMeasure;
pub use discretize::{discretize, Seeding};

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("delta {0} is too large for the domain")]
    DeltaTooLarge(f64),
    #[error("no admissible balls: delta exceeds half the inner radius")]
    NoValidBalls,
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}
