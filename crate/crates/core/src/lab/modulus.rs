use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::geom::{polygon, Point2, Polygon};
use crate::ot::PiecewiseAffineConvex;
use crate::rng::{seeded, uniform_in_polygon};
use crate::sections::{boundary_distance, default_subgradient};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusConfig {
    pub rho: f64,
    pub delta: f64,
    pub beta_hat: f64,
    pub theta_hat: f64,
    /// `C` in the cutoff `C δ^{1/β̂}`.
    pub cutoff_constant: f64,
    /// `L(∂ψ(Ω))`.
    pub grad_radius: f64,
    pub pairs: usize,
    pub bins: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusBin {
    pub s_lo: f64,
    pub s_hi: f64,
    pub count: usize,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusTable {
    pub cutoff: f64,
    /// `1 + 1/θ̂`.
    pub exponent: f64,
    pub above: Vec<ModulusBin>,
    /// Separations in `[cutoff/100, cutoff)`, where the discrete potential need not be `C^{1,α}`.
    pub below: Vec<ModulusBin>,
    /// `max [ψ(x) − ψ(y) − q·(x − y)] / |x − y|^{1+1/θ̂}` above the cutoff.
    pub modulus: f64,
    pub below_max: f64,
    pub ff_pairs: usize,
    /// Pairs with `D(x, y) > θ̂ D(y, x)`.
    pub ff_violations: usize,
    /// `max D(x, y) / (θ̂ D(y, x))`.
    pub ff_worst: f64,
}

/// `max_q [ψ(x) − ψ(y) − q·(x − y)]` over the vertices of `∂ψ(y)`.
fn gap(psi: &PiecewiseAffineConvex, x: &Point2, y: &Point2, fx: f64, fy: f64) -> f64 {
    psi.subdifferential(y, 1e-12).vertices().iter().map(|q| fx - fy - q.dot(&(x - y))).fold(f64::NEG_INFINITY, f64::max)
}

fn bin(samples: &[(f64, f64)], bins: usize) -> Vec<ModulusBin> {
    if samples.is_empty() {
        return Vec::new();
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let k = bins.max(1);
    let edge = |i: usize| lo * (hi / lo).powf(i as f64 / k as f64);
    (0..k)
        .map(|i| {
            let (a, b) = (edge(i), edge(i + 1));
            let inside: Vec<f64> =
                samples.iter().filter(|s| s.0 >= a && (s.0 < b || (i + 1 == k && s.0 <= b))).map(|s| s.1).collect();
            ModulusBin { s_lo: a, s_hi: b, count: inside.len(), max_ratio: inside.iter().copied().fold(0.0, f64::max) }
        })
        .collect()
}

/// Empirical `C^{1,1/θ̂}` modulus on `Ω''` above the cutoff `C δ^{1/β̂}`, with the engulfing inequality
/// `D(x, y) <= θ̂ D(y, x)` checked on the same pairs.
pub fn c1alpha_modulus(psi: &PiecewiseAffineConvex, omega_dp: &Polygon, cfg: &ModulusConfig) -> ModulusTable {
    let mut rng = seeded(cfg.seed, 61);
    let cutoff = cfg.cutoff_constant * cfg.delta.powf(1.0 / cfg.beta_hat);
    let exponent = 1.0 + 1.0 / cfg.theta_hat;
    let mut above = Vec::new();
    let mut below = Vec::new();
    let (mut ff_pairs, mut ff_violations, mut ff_worst) = (0, 0, 0.0f64);
    for _ in 0..cfg.pairs {
        let y = uniform_in_polygon(omega_dp, &mut rng);
        let s_max = boundary_distance(omega_dp, &y).min(cfg.rho / (2.0 * cfg.grad_radius));
        let th = rng.random::<f64>() * std::f64::consts::TAU;
        let dir = Point2::new(th.cos(), th.sin());
        let fy = psi.eval(&y);
        let u: f64 = rng.random();
        if s_max > cutoff {
            let s = cutoff * (s_max / cutoff).powf(u);
            let x = y + dir * s;
            let fx = psi.eval(&x);
            above.push((s, gap(psi, &x, &y, fx, fy) / s.powf(exponent)));
            let p = default_subgradient(psi, &x);
            let back = fy - fx - p.dot(&(y - x));
            for q in psi.subdifferential(&y, 1e-12).vertices() {
                let d = fx - fy - q.dot(&(x - y));
                ff_pairs += 1;
                let scale = 1e-12 * (1.0 + fx.abs() + fy.abs());
                if d > cfg.theta_hat * back + scale {
                    ff_violations += 1;
                }
                if d > scale {
                    ff_worst = ff_worst.max(if back > 0.0 { d / (cfg.theta_hat * back) } else { f64::INFINITY });
                }
            }
        }
        let top = s_max.min(cutoff);
        let bottom = cutoff * 1e-2;
        if top > bottom {
            let s = bottom * (top / bottom).powf(rng.random::<f64>());
            let x = y + dir * s;
            let fx = psi.eval(&x);
            below.push((s, gap(psi, &x, &y, fx, fy) / s.powf(exponent)));
        }
    }
    let above_bins = bin(&above, cfg.bins);
    let below_bins = bin(&below, cfg.bins);
    ModulusTable {
        cutoff,
        exponent,
        modulus: above.iter().map(|s| s.1).fold(0.0, f64::max),
        below_max: below.iter().map(|s| s.1).fold(0.0, f64::max),
        above: above_bins,
        below: below_bins,
        ff_pairs,
        ff_violations,
        ff_worst,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlatParts {
    /// `max L(C_j ∩ Ω)` over the cells.
    pub max_diameter: f64,
    pub mean_diameter: f64,
    pub count: usize,
}

/// Outer radii of the cells of `ψ` clipped to `Ω`.
pub fn flat_part_diameters(psi: &PiecewiseAffineConvex, omega: &Polygon) -> FlatParts {
    let radii: Vec<f64> = psi
        .cells()
        .iter()
        .filter(|c| c.poly.len() >= 3)
        .map(|c| polygon::intersection(&c.poly, omega.ring()))
        .filter(|p| p.len() >= 3 && polygon::area(p) > 0.0)
        .filter_map(|p| Polygon::from_points(&p).ok())
        .map(|p| p.outer_radius())
        .collect();
    FlatParts {
        max_diameter: radii.iter().copied().fold(0.0, f64::max),
        mean_diameter: if radii.is_empty() { 0.0 } else { radii.iter().sum::<f64>() / radii.len() as f64 },
        count: radii.len(),
    }
}

/// Least-squares slope of `log y` against `log x` over the positive pairs.
pub fn power_law_exponent(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
