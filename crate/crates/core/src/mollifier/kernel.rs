use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::MollifierError;

/// Radial profile of the kernel on the unit disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelKind {
    /// `K = χ_{B_1} / |B_1|`.
    BallIndicator,
    /// Normalized arc length on the unit circle.
    SphereSurface,
    /// `K(y) = c · Σ_i a_i |y|^i` on `B_1`, normalized to unit mass.
    CustomRadial { coefficients: Vec<f64> },
}

/// Kernel `K`, its radius `r` and `m₀ = 2 / ∫ y₁² K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub m0: f64,
    pub r: f64,
}

fn check_radius(r: f64) -> Result<(), MollifierError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(MollifierError::InvalidKernel(format!("radius {r}")))
    }
}

impl KernelSpec {
    pub fn ball(r: f64) -> Result<Self, MollifierError> {
        check_radius(r)?;
        // ∫_{B_1} y₁² dy / π = 1/4
        Ok(KernelSpec { kind: KernelKind::BallIndicator, m0: 8.0, r })
    }

    pub fn sphere(r: f64) -> Result<Self, MollifierError> {
        check_radius(r)?;
        // mean of cos² over the circle = 1/2
        Ok(KernelSpec { kind: KernelKind::SphereSurface, m0: 4.0, r })
    }

    /// Polynomial profile `Σ a_i s^i`, which must be nonnegative on `[0, 1]` with positive mass.
    pub fn custom(coefficients: Vec<f64>, r: f64) -> Result<Self, MollifierError> {
        check_radius(r)?;
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(MollifierError::InvalidKernel("empty or non-finite profile".into()));
        }
        let kind = KernelKind::CustomRadial { coefficients };
        let neg = (0..=1000).map(|i| profile(&kind, i as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
        if neg < 0.0 {
            return Err(MollifierError::InvalidKernel("profile takes negative values".into()));
        }
        let (mass, second) = radial_moments(&kind);
        if !(mass > 0.0) || !(second > 0.0) {
            return Err(MollifierError::InvalidKernel("profile has no mass".into()));
        }
        let m0 = 2.0 * mass / second;
        Ok(KernelSpec { kind, m0, r })
    }

    pub fn with_radius(&self, r: f64) -> Result<Self, MollifierError> {
        check_radius(r)?;
        Ok(KernelSpec { r, ..self.clone() })
    }

    /// Name used on the command line.
    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::BallIndicator => "ball",
            KernelKind::SphereSurface => "sphere",
            KernelKind::CustomRadial { .. } => "custom",
        }
    }

    /// `(∫K, ∫y₁²K)` of the unit kernel.
    pub fn moments(&self) -> (f64, f64) {
        match &self.kind {
            KernelKind::BallIndicator => (1.0, 0.25),
            KernelKind::SphereSurface => (1.0, 0.5),
            kind => {
                let (mass, second) = radial_moments(kind);
                (1.0, second / mass)
            }
        }
    }
}

/// Unnormalized profile value at radius `s`.
pub(crate) fn profile(kind: &KernelKind, s: f64) -> f64 {
    match kind {
        KernelKind::CustomRadial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * s + c),
        _ => 1.0,
    }
}

/// `(∫ k(|y|) dy, ∫ y₁² k(|y|) dy)` over the unit disk for a polynomial profile.
fn radial_moments(kind: &KernelKind) -> (f64, f64) {
    let KernelKind::CustomRadial { coefficients } = kind else {
        return (PI, PI / 4.0);
    };
    let mass: f64 = coefficients.iter().enumerate().map(|(i, a)| a / (i as f64 + 2.0)).sum::<f64>() * 2.0 * PI;
    let second: f64 = coefficients.iter().enumerate().map(|(i, a)| a / (i as f64 + 4.0)).sum::<f64>() * PI;
    (mass, second)
}

/// Normalization `c` with `∫ c·k(|y|) dy = 1`.
pub(crate) fn profile_scale(kind: &KernelKind) -> f64 {
    1.0 / radial_moments(kind).0
}

/// Ball indicator and circle measure at radius `r`.
pub fn kernel_presets(r: f64) -> Result<Vec<KernelSpec>, MollifierError> {
    Ok(vec![KernelSpec::ball(r)?, KernelSpec::sphere(r)?])
}
