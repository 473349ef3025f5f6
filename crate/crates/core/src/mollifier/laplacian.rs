use std::f64::consts::PI;

use super::kernel::{profile, profile_scale, KernelKind, KernelSpec};
use super::MollifierError;
use crate::geom::{polygon, quad, Point2};
use crate::ot::PiecewiseAffineConvex;

/// Piece `j` restricted to its cell, written relative to `x`:
/// `g(x + w) = a·w + c` with `a = y_j − p`, `c = ψ_j(x) − ψ(x)`.
struct LocalPiece {
    poly: Vec<Point2>,
    a: Point2,
    c: f64,
}

fn local_pieces(psi: &PiecewiseAffineConvex, x: &Point2, p: &Point2, r: f64) -> Vec<LocalPiece> {
    let fx = psi.eval(x);
    let d = Point2::new(r, r);
    psi.pieces_near(&(x - d), &(x + d))
        .into_iter()
        .filter(|&j| !psi.cells()[j].poly.is_empty())
        .map(|j| LocalPiece {
            poly: psi.cells()[j].poly.iter().map(|v| v - x).collect(),
            a: psi.slopes()[j] - p,
            c: psi.piece(j, x) - fx,
        })
        .filter(|lp| polygon::distance_to(&lp.poly, &Point2::zeros()) <= r)
        .collect()
}

/// `∮ g(ρ e_θ) dθ` over the full circle of radius `ρ`.
fn circle_integral(pieces: &[LocalPiece], rho: f64) -> f64 {
    let o = Point2::zeros();
    pieces
        .iter()
        .map(|lp| {
            polygon::circle_arcs_inside(&lp.poly, &o, rho)
                .into_iter()
                .map(|(t0, t1)| {
                    let (s0, c0) = t0.sin_cos();
                    let (s1, c1) = t1.sin_cos();
                    rho * (lp.a.x * (s1 - s0) + lp.a.y * (c0 - c1)) + lp.c * (t1 - t0)
                })
                .sum::<f64>()
        })
        .sum()
}

/// `∫_{B_ρ} g` exactly from the cell moments.
fn disk_integral(pieces: &[LocalPiece], rho: f64) -> f64 {
    let o = Point2::zeros();
    pieces
        .iter()
        .map(|lp| {
            let (area, m) = polygon::disk_moments(&lp.poly, &o, rho);
            lp.a.dot(&m) + lp.c * area
        })
        .sum()
}

/// Radii in `(0, r)` where the arc structure changes: distances to cell vertices and to edge lines.
fn breakpoints(pieces: &[LocalPiece], r: f64) -> Vec<f64> {
    let mut b = vec![0.0, 1.0];
    for lp in pieces {
        let k = lp.poly.len();
        for i in 0..k {
            let (p, q) = (lp.poly[i], lp.poly[(i + 1) % k]);
            b.push(p.norm() / r);
            b.push(polygon::distance_to(&[p, q], &Point2::zeros()) / r);
        }
    }
    b.retain(|s| (0.0..=1.0).contains(s));
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-14);
    b
}

/// `∫_a^b f` by Gauss–Legendre with `n` and `2n` nodes, bisecting panels that disagree.
fn adaptive_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> Option<(f64, f64)> {
    let rule =
        |n: usize| quad::gauss_legendre01(n).into_iter().map(|(u, w)| w * f(a + (b - a) * u)).sum::<f64>() * (b - a);
    let (coarse, fine) = (rule(6), rule(12));
    let err = (fine - coarse).abs();
    if err <= tol {
        return Some((fine, err));
    }
    if depth == 0 {
        return None;
    }
    let m = 0.5 * (a + b);
    let (l, el) = adaptive_gl(f, a, m, 0.5 * tol, depth - 1)?;
    let (rr, er) = adaptive_gl(f, m, b, 0.5 * tol, depth - 1)?;
    Some((l + rr, el + er))
}

/// `Δ_rψ(x)` with `p` the default subgradient, plus a certified error bound.
pub fn delta_r_with_error(
    psi: &PiecewiseAffineConvex,
    x: &Point2,
    kernel: &KernelSpec,
) -> Result<(f64, f64), MollifierError> {
    let r = kernel.r;
    if psi.window().max_violation(x) > -r {
        return Err(MollifierError::OutsideTrustWindow([x.x, x.y]));
    }
    let p = psi.subdifferential(x, 1e-12).body.center_of_mass();
    let pieces = local_pieces(psi, x, &p, r);
    let pref = kernel.m0 / (r * r);
    match &kernel.kind {
        KernelKind::BallIndicator => Ok(((pref * disk_integral(&pieces, r) / (PI * r * r)).max(0.0), 0.0)),
        KernelKind::SphereSurface => Ok(((pref * circle_integral(&pieces, r) / (2.0 * PI)).max(0.0), 0.0)),
        kind @ KernelKind::CustomRadial { .. } => {
            let c = profile_scale(kind);
            let f = |s: f64| profile(kind, s) * s * circle_integral(&pieces, r * s);
            let knots = breakpoints(&pieces, r);
            let run = |tol_value: f64| -> Option<(f64, f64)> {
                let tol = tol_value / (pref * c);
                knots.windows(2).try_fold((0.0, 0.0), |(v, e), w| {
                    let (dv, de) = adaptive_gl(&f, w[0], w[1], tol * (w[1] - w[0]), 30)?;
                    Some((v + dv, e + de))
                })
            };
            let not_converged = |estimate: f64| MollifierError::QuadratureNotConverged { x: [x.x, x.y], estimate };
            // a coarse pass fixes the scale of the relative target
            let scale = pref * c * 2.0 * PI * r * pieces.iter().map(|lp| lp.a.norm()).fold(0.0, f64::max);
            let (rough, _) = run(1e-3 * (1.0 + scale)).ok_or_else(|| not_converged(f64::NAN))?;
            let (total, err) = run(5e-7 * (1.0 + (pref * c * rough).abs())).ok_or_else(|| not_converged(f64::NAN))?;
            let value = (pref * c * total).max(0.0);
            let err = pref * c * err;
            if err > 1e-6 * (1.0 + value) {
                return Err(not_converged(err));
            }
            Ok((value, err))
        }
    }
}

/// `Δ_rψ(x) = (m₀/r²) ∫ K_r(y) [ψ(x+y) − ψ(x) − p·y] dy`.
pub fn delta_r(psi: &PiecewiseAffineConvex, x: &Point2, kernel: &KernelSpec) -> Result<f64, MollifierError> {
    delta_r_with_error(psi, x, kernel).map(|v| v.0)
}

/// The same value computed with a given subgradient `p`, for the shift-invariance check.
pub fn delta_r_with_subgradient(
    psi: &PiecewiseAffineConvex,
    x: &Point2,
    p: &Point2,
    kernel: &KernelSpec,
) -> Result<f64, MollifierError> {
    let r = kernel.r;
    if psi.window().max_violation(x) > -r {
        return Err(MollifierError::OutsideTrustWindow([x.x, x.y]));
    }
    let pieces = local_pieces(psi, x, p, r);
    let pref = kernel.m0 / (r * r);
    match &kernel.kind {
        KernelKind::BallIndicator => Ok(pref * disk_integral(&pieces, r) / (PI * r * r)),
        KernelKind::SphereSurface => Ok(pref * circle_integral(&pieces, r) / (2.0 * PI)),
        KernelKind::CustomRadial { .. } => delta_r(psi, x, kernel),
    }
}

/// `Δ_r f(x)` for a closed-form function, by Gauss–Legendre in radius (24 nodes) and the
/// trapezoid rule in angle (64 nodes). Exact up to round-off on polynomials of moderate degree.
pub fn delta_r_smooth<F: Fn(&Point2) -> f64>(f: F, x: &Point2, kernel: &KernelSpec) -> f64 {
    const NT: usize = 64;
    let r = kernel.r;
    let fx = f(x);
    let ring = |rho: f64| {
        let dt = 2.0 * PI / NT as f64;
        (0..NT)
            .map(|k| {
                let t = k as f64 * dt;
                f(&(x + Point2::new(t.cos(), t.sin()) * rho)) - fx
            })
            .sum::<f64>()
            * dt
    };
    let pref = kernel.m0 / (r * r);
    match &kernel.kind {
        KernelKind::SphereSurface => pref * ring(r) / (2.0 * PI),
        kind => {
            let c = profile_scale(kind);
            let radial: f64 =
                quad::gauss_legendre01(24).into_iter().map(|(s, w)| w * profile(kind, s) * s * ring(r * s)).sum();
            pref * c * radial
        }
    }
}
