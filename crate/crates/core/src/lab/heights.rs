use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::{Point2, Polygon};
use crate::mollifier::{delta_r, KernelSpec, LaplacianField, MollifierError};
use crate::ot::PiecewiseAffineConvex;
use crate::sections::{boundary_distance, default_subgradient, section};

/// `⨍_P Δ_rψ` by the midpoint rule on about `samples` points of `P`.
pub fn section_mean(
    psi: &PiecewiseAffineConvex,
    poly: &Polygon,
    kernel: &KernelSpec,
    samples: usize,
) -> Result<f64, MollifierError> {
    let v = poly.vertices();
    let (lo, hi) = v.iter().fold((v[0], v[0]), |(a, b), p| (a.inf(p), b.sup(p)));
    let area = poly.volume();
    let pts: Vec<Point2> = if area > 0.0 {
        let k = ((samples.max(1) as f64 * (hi.x - lo.x) * (hi.y - lo.y) / area).sqrt().ceil() as usize).max(1);
        let (dx, dy) = ((hi.x - lo.x) / k as f64, (hi.y - lo.y) / k as f64);
        (0..k * k)
            .map(|n| Point2::new(lo.x + dx * ((n % k) as f64 + 0.5), lo.y + dy * ((n / k) as f64 + 0.5)))
            .filter(|x| poly.contains_point(x, 0.0))
            .collect()
    } else {
        Vec::new()
    };
    let pts = if pts.is_empty() { vec![poly.center_of_mass()] } else { pts };
    let vals: Vec<f64> = pts.par_iter().map(|x| delta_r(psi, x, kernel)).collect::<Result<_, _>>()?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Which term reaches `α` at the critical height.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `t / ℓ(S_t)² >= α`.
    Width,
    /// `rα / dist(x, ∂S_{Mt}) >= α`.
    Boundary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeightEntry {
    pub x: [f64; 2],
    pub q: [f64; 2],
    pub value: f64,
    pub t: f64,
    /// `ℓ(S(x, q, t))`.
    pub ell: f64,
    /// `dist(x, ∂S(x, q, M t))`.
    pub dist: f64,
    pub branch: Branch,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalHeightField {
    pub alpha: f64,
    pub r: f64,
    pub m_hat: f64,
    pub rho: f64,
    pub entries: Vec<HeightEntry>,
    /// Points of `E_α` where no height in `(0, ρ]` qualified.
    pub skipped: usize,
    /// `min t / (ℓ² α)`.
    pub c_hat: Option<f64>,
    /// `max ⨍_{S(x, q, s)} Δ_rψ / α` over sampled `s ∈ [t(x), ε₁ρ]`.
    pub cap_hat: Option<f64>,
    /// `min t m₀ M / (α r²)` over the boundary branch.
    pub boundary_ratio: Option<f64>,
    /// `max t / ρ`.
    pub max_t_over_rho: Option<f64>,
}

fn reaches(
    psi: &PiecewiseAffineConvex,
    x: Point2,
    q: Point2,
    t: f64,
    alpha: f64,
    r: f64,
    m: f64,
) -> Option<(f64, f64, Branch)> {
    let s = section(psi, x, q, t).ok()?;
    let ell = s.body.inner_radius();
    let big = section(psi, x, q, m * t).ok()?;
    let dist = boundary_distance(&big.body, &x);
    let width = t / (ell * ell);
    let bd = if dist > 0.0 { r * alpha / dist } else { f64::INFINITY };
    if width >= alpha {
        Some((ell, dist, Branch::Width))
    } else if bd >= alpha {
        Some((ell, dist, Branch::Boundary))
    } else {
        None
    }
}

/// Critical heights `t(x)` on the points of `E_α = {Δ_rψ > α}` of a precomputed field.
///
/// `t(x)` is the largest `t <= ρ` whose section satisfies either stopping rule, found by halving
/// from `ρ` and then bisecting on a log scale.
#[allow(clippy::too_many_arguments)]
pub fn critical_heights(
    psi: &PiecewiseAffineConvex,
    field: &LaplacianField,
    kernel: &KernelSpec,
    alpha: f64,
    rho: f64,
    m_hat: f64,
    eps1: f64,
    t_samples: usize,
) -> Result<CriticalHeightField, MollifierError> {
    let r = kernel.r;
    let pts: Vec<(Point2, f64)> = field.samples().filter(|(_, v)| *v > alpha).collect();
    let found: Vec<Option<HeightEntry>> = pts
        .par_iter()
        .map(|&(x, value)| {
            let q = default_subgradient(psi, &x);
            let test = |t: f64| reaches(psi, x, q, t, alpha, r, m_hat);
            let mut hit = test(rho).map(|h| (rho, h));
            if hit.is_none() {
                let mut upper = rho;
                for _ in 0..60 {
                    let lower = upper * 0.5;
                    if test(lower).is_some() {
                        let (mut a, mut b) = (lower, upper);
                        for _ in 0..40 {
                            let mid = (a * b).sqrt();
                            if test(mid).is_some() {
                                a = mid;
                            } else {
                                b = mid;
                            }
                        }
                        hit = test(a).map(|h| (a, h));
                        break;
                    }
                    upper = lower;
                }
            }
            hit.map(|(t, (ell, dist, branch))| HeightEntry {
                x: [x.x, x.y],
                q: [q.x, q.y],
                value,
                t,
                ell,
                dist,
                branch,
            })
        })
        .collect();
    let skipped = found.iter().filter(|e| e.is_none()).count();
    let entries: Vec<HeightEntry> = found.into_iter().flatten().collect();

    let caps: Vec<f64> = entries
        .par_iter()
        .map(|e| {
            let (x, q) = (Point2::new(e.x[0], e.x[1]), Point2::new(e.q[0], e.q[1]));
            let top = (eps1 * rho).max(e.t);
            let n = t_samples.max(1);
            let mut best = 0.0f64;
            for k in 0..n {
                let s = if n == 1 { e.t } else { e.t * (top / e.t).powf(k as f64 / (n - 1) as f64) };
                if let Ok(sec) = section(psi, x, q, s) {
                    best = best.max(section_mean(psi, &sec.body, kernel, 48)? / alpha);
                }
            }
            Ok(best)
        })
        .collect::<Result<_, MollifierError>>()?;

    let fold = |it: &mut dyn Iterator<Item = f64>, f: fn(f64, f64) -> f64| it.reduce(f);
    Ok(CriticalHeightField {
        alpha,
        r,
        m_hat,
        rho,
        c_hat: fold(&mut entries.iter().map(|e| e.t / (e.ell * e.ell * alpha)), f64::min),
        cap_hat: fold(&mut caps.into_iter(), f64::max),
        boundary_ratio: fold(
            &mut entries
                .iter()
                .filter(|e| e.branch == Branch::Boundary)
                .map(|e| e.t * kernel.m0 * m_hat / (alpha * r * r)),
            f64::min,
        ),
        max_t_over_rho: fold(&mut entries.iter().map(|e| e.t / rho), f64::max),
        entries,
        skipped,
    })
}

/// Where the two sides of a reversed Chebyshev pair are measured.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ChebyshevMode {
    /// The inner and outer fields as given.
    Global,
    /// Inner side on `B_R(center)`, outer side on `B_{R + c α^{-1/β}}(center)`.
    Local { center: [f64; 2], radius: f64, c: f64, beta: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChebyshevPair {
    pub alpha: f64,
    /// `∫_{Δ_rψ >= α} Δ_rψ` over the inner region.
    pub lhs: f64,
    /// `α |{Δ_rψ >= ĉα}|` over the outer region.
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChebyshevFit {
    pub c_hat: f64,
    /// `max lhs / rhs`.
    pub cap_hat: f64,
    /// The same over the upper half of the levels.
    pub cap_hat_upper: f64,
    pub pairs: Vec<ChebyshevPair>,
    pub mode: ChebyshevMode,
}

/// Pairs `(∫_{E_α ∩ Ω'} Δ_rψ, α |E_{ĉα} ∩ Ω|)` over the levels, with the smallest admissible constant.
pub fn reversed_chebyshev(
    inner: &LaplacianField,
    outer: &LaplacianField,
    alphas: &[f64],
    c_hat: f64,
    mode: &ChebyshevMode,
) -> ChebyshevFit {
    let mut levels = alphas.to_vec();
    levels.sort_by(f64::total_cmp);
    let in_ball = |x: &Point2, c: &[f64; 2], rad: f64| (x - Point2::new(c[0], c[1])).norm() <= rad;
    let pairs: Vec<ChebyshevPair> = levels
        .iter()
        .map(|&alpha| {
            let (inner_r, outer_r) = match mode {
                ChebyshevMode::Global => (f64::INFINITY, f64::INFINITY),
                ChebyshevMode::Local { radius, c, beta, .. } => (*radius, radius + c * alpha.powf(-1.0 / beta)),
            };
            let centre = match mode {
                ChebyshevMode::Global => [0.0, 0.0],
                ChebyshevMode::Local { center, .. } => *center,
            };
            let lhs = inner
                .samples()
                .filter(|(x, v)| *v >= alpha && in_ball(x, &centre, inner_r))
                .map(|(_, v)| v)
                .sum::<f64>()
                * inner.step
                * inner.step;
            let count = outer.samples().filter(|(x, v)| *v >= c_hat * alpha && in_ball(x, &centre, outer_r)).count();
            ChebyshevPair { alpha, lhs, rhs: alpha * count as f64 * outer.step * outer.step }
        })
        .collect();
    let ratio = |p: &ChebyshevPair| {
        if p.lhs == 0.0 {
            0.0
        } else if p.rhs == 0.0 {
            f64::INFINITY
        } else {
            p.lhs / p.rhs
        }
    };
    let cap_hat = pairs.iter().map(ratio).fold(0.0, f64::max);
    let cap_hat_upper = pairs[pairs.len() / 2..].iter().map(ratio).fold(0.0, f64::max);
    ChebyshevFit { c_hat, cap_hat, cap_hat_upper, pairs, mode: mode.clone() }
}
