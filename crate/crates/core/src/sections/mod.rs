//! Sections of piecewise-affine potentials and the measured constants of their geometry.

mod checks;
mod scan;
mod section;
mod vitali;

pub use checks::{
    alexandrov_check, boundary_distance, contraction_gamma, doubling_height, engulfing_theta, gradient_hull,
    gradient_image, half_section_check, inner_radius_lower_bounds, polar_section_inclusions, stau_excess,
    AlexandrovReport, DiagramIndex, HalfSectionReport, InnerRadiusBounds, PolarInclusionReport, ALEXANDROV_C2,
};
pub use scan::{property_scan, rho_feasibility, RhoFeasibility, ScanConfig, ScanRow, SectionPropertyReport};
pub use section::{default_subgradient, section, Section};
pub use vitali::{vitali_constant, vitali_select, VitaliOutcome};

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SectionError {
    #[error("p0 is at distance {0} from the subdifferential")]
    NotASubgradient(f64),
    #[error("section reaches the trusted window")]
    UnboundedSection,
    #[error("invalid section height {0}")]
    InvalidHeight(f64),
    #[error("no positive height keeps sections inside the domain (first failure at {0:?})")]
    NoFeasibleRho([f64; 2]),
    #[error("height {t} exceeds the feasible height {rho}")]
    RhoInfeasible { t: f64, rho: f64 },
}
