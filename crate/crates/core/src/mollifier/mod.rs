//! Mollified Laplacian `Δ_rψ` of piecewise-affine convex potentials.

mod field;
mod kernel;
mod laplacian;

pub use field::{laplacian_field, stable_laplacian_field, LaplacianField};
pub use kernel::{kernel_presets, KernelKind, KernelSpec};
pub use laplacian::{delta_r, delta_r_smooth, delta_r_with_error, delta_r_with_subgradient};

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MollifierError {
    #[error("quadrature did not reach its tolerance at {x:?} (error estimate {estimate})")]
    QuadratureNotConverged { x: [f64; 2], estimate: f64 },
    #[error("kernel support around {0:?} leaves the trusted window")]
    OutsideTrustWindow([f64; 2]),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}
