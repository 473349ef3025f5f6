//! Measurements of the regularity machinery: contact sets and their fattening, critical
//! heights, reversed Chebyshev pairs, the `C^{1,α}` modulus, mollified Sobolev norms and
//! flat parts.

mod contact;
mod heights;
mod modulus;
mod sweep;

pub use contact::{
    contact_construction, fatten, sup_bound_check, ContactConstruction, ContactPoint, FattenedSets, FatteningChecks,
    SupBoundReport, SUP_BOUND_C2,
};
pub use heights::{
    critical_heights, reversed_chebyshev, section_mean, Branch, ChebyshevFit, ChebyshevMode, ChebyshevPair,
    CriticalHeightField, HeightEntry,
};
pub use modulus::{
    c1alpha_modulus, flat_part_diameters, power_law_exponent, FlatParts, ModulusBin, ModulusConfig, ModulusTable,
};
pub use sweep::{
    regularity_at, sobolev_sweep, solve_instance, ControlNorms, Instance, RegularityReport, SobolevSeries, SweepConfig,
};

use thiserror::Error;

use crate::geom::GeomError;
use crate::measures::MeasureError;
use crate::mollifier::MollifierError;
use crate::ot::OtError;
use crate::sections::SectionError;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LabError {
    #[error("lower convex envelope failed: {0}")]
    EnvelopeFailed(String),
    #[error("preconditions unmet: {0}")]
    PreconditionsUnmet(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error(transparent)]
    Mollifier(#[from] MollifierError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Ot(#[from] OtError),
}
