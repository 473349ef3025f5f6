use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modulus::flat_part_diameters;
use super::LabError;
use crate::geom::Polygon;
use crate::measures::{discretize, DensitySpec, DiscreteMeasure, Seeding};
use crate::mollifier::{laplacian_field, KernelSpec};
use crate::ot::{build_potential, solve_exact, Duals, PiecewiseAffineConvex, TransportPlan};

/// A solved discrete instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub delta: f64,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub plan: TransportPlan,
    pub duals: Duals,
    pub psi: PiecewiseAffineConvex,
    pub omega: Polygon,
}

fn shifted(seeding: Seeding, by: u64) -> Seeding {
    match seeding {
        Seeding::Grid => Seeding::Grid,
        Seeding::JitteredGrid { seed } => Seeding::JitteredGrid { seed: seed.wrapping_add(by) },
        Seeding::Poisson { seed } => Seeding::Poisson { seed: seed.wrapping_add(by) },
    }
}

/// Discretizes both densities at `delta`, solves exactly and builds `ψ` over the source domain.
pub fn solve_instance(
    source: &DensitySpec,
    target: &DensitySpec,
    delta: f64,
    seeding: Seeding,
) -> Result<Instance, LabError> {
    let mu = discretize(source, delta, seeding)?;
    let nu = discretize(target, delta, shifted(seeding, 1))?;
    let (plan, duals) = solve_exact(&mu, &nu)?;
    let omega = source.domain().clone();
    let psi = build_potential(&duals, &nu, &omega);
    Ok(Instance { delta, mu, nu, plan, duals, psi, omega })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlNorms {
    /// `r = δ^exponent`.
    pub exponent: f64,
    pub r: f64,
    pub llogl_norm: f64,
    pub lp_norms: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityReport {
    pub delta: f64,
    pub r: f64,
    pub step: f64,
    pub region_area: f64,
    pub l1_norm: f64,
    pub llogl_norm: f64,
    /// `(p, ∫ (Δ_rψ)^p)`.
    pub lp_norms: Vec<(f64, f64)>,
    pub max_value: f64,
    pub controls: Vec<ControlNorms>,
    /// `max L(C_j ∩ Ω)`.
    pub flat_part_diameter: f64,
}

/// Norms of `Δ_rψ` over `region` at `r = √δ`, and at `r = δ^e` for each control exponent.
pub fn regularity_at(
    psi: &PiecewiseAffineConvex,
    omega: &Polygon,
    region: &Polygon,
    delta: f64,
    kernel: &KernelSpec,
    p_list: &[f64],
    control_exponents: &[f64],
) -> Result<RegularityReport, LabError> {
    let field_at = |r: f64| -> Result<_, LabError> {
        let k = kernel.with_radius(r)?;
        Ok(laplacian_field(psi, region, &k, (r / 4.0).min(delta / 2.0))?)
    };
    let r = delta.sqrt();
    let field = field_at(r)?;
    let controls = control_exponents
        .iter()
        .map(|&e| {
            let rc = delta.powf(e);
            let f = field_at(rc)?;
            Ok(ControlNorms {
                exponent: e,
                r: rc,
                llogl_norm: f.llogl_norm(),
                lp_norms: p_list.iter().map(|&p| (p, f.lp_integral(p))).collect(),
            })
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    Ok(RegularityReport {
        delta,
        r,
        step: field.step,
        region_area: field.area(),
        l1_norm: field.l1_norm(),
        llogl_norm: field.llogl_norm(),
        lp_norms: p_list.iter().map(|&p| (p, field.lp_integral(p))).collect(),
        max_value: field.max(),
        controls,
        flat_part_diameter: flat_part_diameters(psi, omega).max_diameter,
    })
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub source: DensitySpec,
    pub target: DensitySpec,
    pub deltas: Vec<f64>,
    /// `Ω'` is `Ω` scaled by this factor about its centroid.
    pub shrink: f64,
    /// Profile of the kernel; its radius is replaced per level.
    pub kernel: KernelSpec,
    pub p_list: Vec<f64>,
    pub control_exponents: Vec<f64>,
    pub seeding: Seeding,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SobolevSeries {
    /// Sorted by decreasing `δ`.
    pub reports: Vec<RegularityReport>,
    pub failures: Vec<(f64, String)>,
    /// `max / min` of the `L log L` norm over the series.
    pub llogl_spread: f64,
    pub lp_spread: Vec<(f64, f64)>,
    /// `(exponent, L log L at the smallest δ / at the largest δ)` for each control.
    pub control_growth: Vec<(f64, f64)>,
}

fn spread(xs: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = xs.fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x), b.max(x)));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Solves and measures every level in parallel; failed levels are reported and skipped.
pub fn sobolev_sweep(cfg: &SweepConfig) -> SobolevSeries {
    let omega = cfg.source.domain().clone();
    let region = omega.dilate_about_center(cfg.shrink);
    let results: Vec<(f64, Result<RegularityReport, LabError>)> = cfg
        .deltas
        .par_iter()
        .map(|&delta| {
            let out = solve_instance(&cfg.source, &cfg.target, delta, cfg.seeding).and_then(|inst| {
                regularity_at(&inst.psi, &omega, &region, delta, &cfg.kernel, &cfg.p_list, &cfg.control_exponents)
            });
            (delta, out)
        })
        .collect();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (delta, r) in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => failures.push((delta, e.to_string())),
        }
    }
    reports.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let llogl_spread = spread(reports.iter().map(|r| r.llogl_norm));
    let lp_spread =
        cfg.p_list.iter().enumerate().map(|(k, &p)| (p, spread(reports.iter().map(|r| r.lp_norms[k].1)))).collect();
    let control_growth = cfg
        .control_exponents
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let growth = match (reports.first(), reports.last()) {
                (Some(a), Some(b)) if a.controls[k].llogl_norm > 0.0 => {
                    b.controls[k].llogl_norm / a.controls[k].llogl_norm
                }
                _ => f64::NAN,
            };
            (e, growth)
        })
        .collect();
    SobolevSeries { reports, failures, llogl_spread, lp_spread, control_growth }
}
