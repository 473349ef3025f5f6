use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PiecewiseAffineConvex;
use crate::geom::{polygon, Point2, Polygon};
use crate::measures::{ellipse_inside, DiscreteMeasure};
use crate::rng::seeded;

/// `{c + R(angle) diag(a, b) u : |u| <= 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Point2,
    pub a: f64,
    pub b: f64,
    pub angle: f64,
}

impl Ellipse {
    pub fn contains(&self, x: &Point2) -> bool {
        self.pull(x).norm_squared() <= 1.0
    }

    fn pull(&self, x: &Point2) -> Point2 {
        let (s, c) = self.angle.sin_cos();
        let d = x - self.center;
        Point2::new((c * d.x + s * d.y) / self.a, (-s * d.x + c * d.y) / self.b)
    }

    /// Whether a convex polygon (or segment, or point) meets the ellipse.
    pub fn meets(&self, poly: &[Point2], tol: f64) -> bool {
        let pulled: Vec<Point2> = poly.iter().map(|p| self.pull(p)).collect();
        polygon::distance_to(&pulled, &Point2::zeros()) <= 1.0 + tol
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MassInequalityReport {
    pub samples: usize,
    /// `max (μ(A) − ν(∂ψ(A)))` over sampled `A ⊂ Ω`.
    pub forward_violation: f64,
    /// `max (ν(B) − μ(∂ψ*(B)))` over sampled `B ⊂ 𝒪`.
    pub backward_violation: f64,
    pub worst_forward: Option<Ellipse>,
    pub worst_backward: Option<Ellipse>,
}

impl MassInequalityReport {
    pub fn max_violation(&self) -> f64 {
        self.forward_violation.max(self.backward_violation)
    }
}

/// `(μ(A), ν(∂ψ(A)))`, with `∂ψ(A)` the targets whose cells meet `A`.
pub fn forward_masses(
    psi: &PiecewiseAffineConvex,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    a: &Ellipse,
) -> (f64, f64) {
    let lhs = mu.mass_ellipse(&a.center, a.a, a.b, a.angle);
    let r = a.a.max(a.b);
    let near = psi.pieces_near(&(a.center - Point2::new(r, r)), &(a.center + Point2::new(r, r)));
    let rhs = near
        .iter()
        .filter(|&&j| !psi.cells()[j].poly.is_empty() && a.meets(&psi.cells()[j].poly, 1e-12))
        .map(|&j| nu.weights()[psi.origin()[j]])
        .sum();
    (lhs, rhs)
}

/// `(ν(B), μ(∂ψ*(B)))` given the subdifferentials of the source points.
pub fn backward_masses(
    subdiffs: &[Vec<Point2>],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    b: &Ellipse,
) -> (f64, f64) {
    let lhs = nu.mass_ellipse(&b.center, b.a, b.b, b.angle);
    let rhs = subdiffs.iter().zip(mu.weights()).filter(|(s, _)| b.meets(s, 1e-12)).map(|(_, w)| w).sum();
    (lhs, rhs)
}

fn sample_ellipses(domain: &Polygon, n: usize, seed: u64, stream: u64) -> Vec<Ellipse> {
    let mut rng = seeded(seed, stream);
    let ell = domain.inner_radius();
    let v = domain.vertices();
    let (lo, hi) = v.iter().fold((v[0], v[0]), |(p, q), w| (p.inf(w), q.sup(w)));
    let (l0, l1) = ((ell / 50.0).ln(), (ell / 2.0).ln());
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let b = (l0 + (l1 - l0) * rng.random::<f64>()).exp();
        let a = b * (1.0 + 3.0 * rng.random::<f64>());
        let angle = std::f64::consts::PI * rng.random::<f64>();
        let c = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if ellipse_inside(domain, &c, a, b, angle, 0.0) {
            out.push(Ellipse { center: c, a, b, angle });
        }
    }
    out
}

/// Samples ellipses `A ⊂ Ω`, `B ⊂ 𝒪` and reports the worst violation of
/// `μ(A) <= ν(∂ψ(A))` and `ν(B) <= μ(∂ψ*(B))`.
pub fn check_mass_inequalities(
    psi: &PiecewiseAffineConvex,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    omega: &Polygon,
    target: &Polygon,
    n_samples: usize,
    seed: u64,
) -> MassInequalityReport {
    let subdiffs: Vec<Vec<Point2>> =
        mu.points().par_iter().map(|x| psi.subdifferential(x, 1e-9).body.vertices().to_vec()).collect();
    let fwd: Vec<(f64, Ellipse)> = sample_ellipses(omega, n_samples, seed, 31)
        .into_par_iter()
        .map(|a| {
            let (l, r) = forward_masses(psi, mu, nu, &a);
            (l - r, a)
        })
        .collect();
    let bwd: Vec<(f64, Ellipse)> = sample_ellipses(target, n_samples, seed, 32)
        .into_par_iter()
        .map(|b| {
            let (l, r) = backward_masses(&subdiffs, mu, nu, &b);
            (l - r, b)
        })
        .collect();
    let worst = |v: &[(f64, Ellipse)]| {
        v.iter().fold((f64::NEG_INFINITY, None), |acc, (d, e)| if *d > acc.0 { (*d, Some(*e)) } else { acc })
    };
    let (fv, fe) = worst(&fwd);
    let (bv, be) = worst(&bwd);
    MassInequalityReport {
        samples: n_samples,
        forward_violation: fv,
        backward_violation: bv,
        worst_forward: fe,
        worst_backward: be,
    }
}
