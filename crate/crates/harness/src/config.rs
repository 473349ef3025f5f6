use std::path::Path;

use kantoreg::geom::Polygon;
use kantoreg::measures::{DensityKind, DensitySpec, Seeding};
use kantoreg::mollifier::KernelSpec;
use kantoreg::Point2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Diagnostics that can be enabled in a config.
pub const DIAGNOSTICS: [&str; 5] = ["sobolev", "contact", "heights", "chebyshev", "modulus"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
    Polygon(Vec<[f64; 2]>),
}

impl DomainConfig {
    pub fn polygon(&self) -> Result<Polygon, HarnessError> {
        match self {
            DomainConfig::Rectangle { lo, hi } => {
                if !(lo[0] < hi[0] && lo[1] < hi[1]) {
                    return Err(HarnessError::Config(format!("empty rectangle {lo:?}..{hi:?}")));
                }
                Ok(Polygon::rectangle(Point2::new(lo[0], lo[1]), Point2::new(hi[0], hi[1])))
            }
            DomainConfig::Polygon(pts) => {
                let pts: Vec<Point2> = pts.iter().map(|p| Point2::new(p[0], p[1])).collect();
                Polygon::from_points(&pts).map_err(|e| HarnessError::Config(format!("domain: {e}")))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub domain: DomainConfig,
    #[serde(default = "uniform")]
    pub density: DensityKind,
}

fn uniform() -> DensityKind {
    DensityKind::Uniform
}

impl DensityConfig {
    pub fn unit_square() -> Self {
        DensityConfig {
            domain: DomainConfig::Rectangle { lo: [0.0, 0.0], hi: [1.0, 1.0] },
            density: DensityKind::Uniform,
        }
    }

    pub fn spec(&self) -> Result<DensitySpec, HarnessError> {
        DensitySpec::new(self.domain.polygon()?, self.density.clone()).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedingKind {
    Grid,
    #[default]
    Jittered,
    Poisson,
}

impl SeedingKind {
    pub fn with_seed(self, seed: u64) -> Seeding {
        match self {
            SeedingKind::Grid => Seeding::Grid,
            SeedingKind::Jittered => Seeding::JitteredGrid { seed },
            SeedingKind::Poisson => Seeding::Poisson { seed },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSettings {
    /// Probe points per side of the grid over `Ω'`.
    pub points: usize,
    /// Heights `ρ 2^{-k}`, `k < heights`.
    pub heights: usize,
    pub engulf_probes: usize,
    pub rho_probes: usize,
    pub assumption_samples: usize,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings { points: 10, heights: 8, engulf_probes: 8, rho_probes: 6, assumption_samples: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolevSettings {
    pub p_list: Vec<f64>,
    /// Control radii `r = δ^e`.
    pub control_exponents: Vec<f64>,
}

impl Default for SobolevSettings {
    fn default() -> Self {
        SobolevSettings { p_list: vec![1.1], control_exponents: vec![0.25, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContactSettings {
    /// Section centres per side of a grid over `Ω'`.
    pub points: usize,
    /// Section heights as fractions of `ρ`.
    pub heights: Vec<f64>,
    pub boundary_samples: usize,
    pub probes: usize,
}

impl Default for ContactSettings {
    fn default() -> Self {
        ContactSettings { points: 2, heights: vec![0.5, 1.0], boundary_samples: 256, probes: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeightSettings {
    /// `α` as a multiple of the mean of `Δ_rψ` over `Ω'`.
    pub alpha_factor: f64,
    pub eps1: f64,
    pub t_samples: usize,
}

impl Default for HeightSettings {
    fn default() -> Self {
        HeightSettings { alpha_factor: 1.0, eps1: 0.5, t_samples: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChebyshevSettings {
    pub c: f64,
    pub levels: usize,
    /// First level as a multiple of the mean of `Δ_rψ` over `Ω'`.
    pub start_factor: f64,
    pub decades: f64,
    /// The inner region is `Ω'` scaled by this factor.
    pub inner_shrink: f64,
}

impl Default for ChebyshevSettings {
    fn default() -> Self {
        ChebyshevSettings { c: 0.5, levels: 8, start_factor: 0.25, decades: 1.0, inner_shrink: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulusSettings {
    /// Fixed `θ̂`; the largest scanned value of the series when absent.
    pub theta: Option<f64>,
    pub beta: Option<f64>,
    pub cutoff: f64,
    pub pairs: usize,
    pub bins: usize,
}

impl Default for ModulusSettings {
    fn default() -> Self {
        ModulusSettings { theta: None, beta: None, cutoff: 0.05, pairs: 2000, bins: 6 }
    }
}

fn default_kernel() -> String {
    "ball".into()
}

fn default_shrink() -> f64 {
    0.25
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_output() -> String {
    "kantoreg-out".into()
}

/// One experiment: densities, the `δ` series and the diagnostics to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: DensityConfig,
    pub target: DensityConfig,
    pub deltas: Vec<f64>,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    /// `Ω'` is `Ω` scaled about its centroid by this factor.
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub seeding: SeedingKind,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    #[serde(default = "default_output")]
    pub output_dir: String,
    #[serde(default)]
    pub scan: ScanSettings,
    #[serde(default)]
    pub sobolev: SobolevSettings,
    #[serde(default)]
    pub contact: ContactSettings,
    #[serde(default)]
    pub heights: HeightSettings,
    #[serde(default)]
    pub chebyshev: ChebyshevSettings,
    #[serde(default)]
    pub modulus: ModulusSettings,
}

impl ExperimentConfig {
    /// Identity densities on the unit square with no diagnostics.
    pub fn minimal(delta: f64) -> Self {
        serde_json::from_value(serde_json::json!({
            "source": DensityConfig::unit_square(),
            "target": DensityConfig::unit_square(),
            "deltas": [delta],
        }))
        .expect("valid minimal config")
    }

    pub fn from_json(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.deltas.is_empty() {
            return bad("delta list is empty".into());
        }
        if self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad(format!("deltas must be positive: {:?}", self.deltas));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!("deltas must be strictly decreasing: {:?}", self.deltas));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("shrink factor {} is not in (0, 1)", self.shrink));
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if let Some(d) = self.diagnostics.iter().find(|d| !DIAGNOSTICS.contains(&d.as_str())) {
            return bad(format!("unknown diagnostic {d:?}; known: {}", DIAGNOSTICS.join(", ")));
        }
        self.kernel_spec(1.0)?;
        self.source.spec()?;
        self.target.spec()?;
        Ok(())
    }

    pub fn kernel_spec(&self, r: f64) -> Result<KernelSpec, HarnessError> {
        match self.kernel.as_str() {
            "ball" => KernelSpec::ball(r),
            "sphere" => KernelSpec::sphere(r),
            k => return Err(HarnessError::Config(format!("unknown kernel {k:?}; expected ball or sphere"))),
        }
        .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn enabled(&self, diagnostic: &str) -> bool {
        self.diagnostics.iter().any(|d| d == diagnostic)
    }

    /// Config with every default written out.
    pub fn materialized_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable config")
    }

    /// SHA-256 of the materialized config, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir.clear();
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("serializable config")))
    }
}
