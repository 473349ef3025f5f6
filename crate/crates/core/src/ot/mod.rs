//! Exact discrete transport with quadratic cost and the resulting convex potentials.

mod inequalities;
mod plan;
mod potential;
mod simplex;

pub use inequalities::{backward_masses, check_mass_inequalities, forward_masses, Ellipse, MassInequalityReport};
pub use plan::{solve_exact, solve_with_budget, Duals, TransportPlan, ARC_BUDGET};
pub use potential::{
    build_potential, legendre, trust_window, DiagramEdge, DiagramVertex, PiecewiseAffineConvex, SubdifferentialSet,
};

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OtError {
    #[error("marginal masses differ by {0}")]
    Infeasible(f64),
    #[error("arc budget exceeded ({0} arcs)")]
    BudgetExceeded(usize),
}
