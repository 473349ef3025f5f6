use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::MeasureError;
use crate::geom::{polygon, quad, Point2, Polygon};

/// Shape of an (unnormalized) density on a convex domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityKind {
    Uniform,
    /// `1 + g·(x − centroid)`; must stay positive on the domain.
    AffineTilt {
        gradient: [f64; 2],
    },
    /// `(λ+Λ)/2 + (Λ−λ)/2 · sin(2πk z₁) sin(2πk z₂)` with `z` measured from the domain centroid.
    BoundedOscillation {
        lambda: f64,
        big_lambda: f64,
        frequency: f64,
    },
}

/// Probability density on a convex polygon, normalized at construction.
#[derive(Clone, Debug)]
pub struct DensitySpec {
    domain: Polygon,
    kind: DensityKind,
    anchor: Point2,
    scale: f64,
}

impl DensitySpec {
    pub fn new(domain: Polygon, kind: DensityKind) -> Result<Self, MeasureError> {
        if domain.is_degenerate() {
            return Err(MeasureError::InvalidDensity("domain has empty interior".into()));
        }
        let anchor = domain.center_of_mass();
        let mut d = DensitySpec { domain, kind, anchor, scale: 1.0 };
        match &d.kind {
            DensityKind::Uniform => {}
            DensityKind::AffineTilt { .. } => {
                let min = d.domain.vertices().iter().map(|v| d.raw(v)).fold(f64::INFINITY, f64::min);
                if !(min > 0.0) {
                    return Err(MeasureError::InvalidDensity("affine tilt is not positive on the domain".into()));
                }
            }
            DensityKind::BoundedOscillation { lambda, big_lambda, frequency } => {
                if !(*lambda > 0.0 && big_lambda >= lambda && frequency.is_finite()) {
                    return Err(MeasureError::InvalidDensity("need 0 < λ <= Λ".into()));
                }
            }
        }
        let total = d.raw_mass_polygon(d.domain.ring());
        d.scale = 1.0 / total;
        Ok(d)
    }

    pub fn uniform(domain: Polygon) -> Self {
        Self::new(domain, DensityKind::Uniform).expect("uniform density")
    }

    pub fn unit_square_uniform() -> Self {
        Self::uniform(Polygon::rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)))
    }

    pub fn domain(&self) -> &Polygon {
        &self.domain
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    fn raw(&self, x: &Point2) -> f64 {
        match &self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::AffineTilt { gradient } => 1.0 + Point2::new(gradient[0], gradient[1]).dot(&(x - self.anchor)),
            DensityKind::BoundedOscillation { lambda, big_lambda, frequency } => {
                let w = 2.0 * PI * frequency;
                let z = x - self.anchor;
                0.5 * (lambda + big_lambda) + 0.5 * (big_lambda - lambda) * (w * z.x).sin() * (w * z.y).sin()
            }
        }
    }

    /// Density value; zero outside the domain.
    pub fn value(&self, x: &Point2) -> f64 {
        if self.domain.contains_point(x, 1e-12) {
            self.scale * self.raw(x)
        } else {
            0.0
        }
    }

    /// Normalized formula without the domain test.
    pub fn value_unchecked(&self, x: &Point2) -> f64 {
        self.scale * self.raw(x)
    }

    /// `(λ, Λ)` bounds of the normalized density on the domain.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            DensityKind::Uniform => (self.scale, self.scale),
            DensityKind::AffineTilt { .. } => {
                let vals: Vec<f64> = self.domain.vertices().iter().map(|v| self.scale * self.raw(v)).collect();
                (vals.iter().copied().fold(f64::INFINITY, f64::min), vals.iter().copied().fold(0.0, f64::max))
            }
            DensityKind::BoundedOscillation { lambda, big_lambda, .. } => {
                (self.scale * lambda, self.scale * big_lambda)
            }
        }
    }

    fn raw_mass_polygon(&self, poly: &[Point2]) -> f64 {
        match &self.kind {
            DensityKind::Uniform => polygon::area(poly),
            DensityKind::AffineTilt { gradient } => {
                let a = polygon::area(poly);
                if a == 0.0 {
                    return 0.0;
                }
                let c = polygon::centroid(poly);
                a * (1.0 + Point2::new(gradient[0], gradient[1]).dot(&(c - self.anchor)))
            }
            DensityKind::BoundedOscillation { big_lambda, .. } => {
                let a = polygon::area(poly);
                quad::polygon_adaptive(poly, &|x: &Point2| self.raw(x), 1e-11 * big_lambda * a.max(1e-300))
            }
        }
    }

    /// `μ(P ∩ Ω)` for a convex counter-clockwise polygon `P`.
    pub fn mass_polygon(&self, poly: &[Point2]) -> f64 {
        let clipped = polygon::intersection(poly, self.domain.ring());
        self.scale * self.raw_mass_polygon(&clipped)
    }

    /// `μ(B_r(c) ∩ Ω)`.
    pub fn mass_disk(&self, c: &Point2, r: f64) -> f64 {
        match &self.kind {
            DensityKind::Uniform => self.scale * polygon::disk_moments(self.domain.ring(), c, r).0,
            DensityKind::AffineTilt { gradient } => {
                let (a, m) = polygon::disk_moments(self.domain.ring(), c, r);
                let g = Point2::new(gradient[0], gradient[1]);
                self.scale * (a * (1.0 - g.dot(&self.anchor)) + g.dot(&m))
            }
            DensityKind::BoundedOscillation { .. } => quad::disk(c, r, &|x: &Point2| self.value(x), 48, 192),
        }
    }

    /// `μ(E)` for the ellipse `{c + R diag(a, b) u : |u| <= 1}` with rotation angle `angle`.
    pub fn mass_ellipse(&self, c: &Point2, a: f64, b: f64, angle: f64) -> f64 {
        let (s, co) = angle.sin_cos();
        let map = |u: &Point2| c + Point2::new(co * a * u.x - s * b * u.y, s * a * u.x + co * b * u.y);
        let gradient = match &self.kind {
            DensityKind::Uniform => Point2::zeros(),
            DensityKind::AffineTilt { gradient } => Point2::new(gradient[0], gradient[1]),
            DensityKind::BoundedOscillation { .. } => {
                return a * b * quad::disk(&Point2::zeros(), 1.0, &|u: &Point2| self.value(&map(u)), 48, 192);
            }
        };
        // pull the domain back to the unit disk, where the density stays affine
        let pulled: Vec<Point2> = self
            .domain
            .ring()
            .iter()
            .map(|x| {
                let d = x - c;
                Point2::new((co * d.x + s * d.y) / a, (-s * d.x + co * d.y) / b)
            })
            .collect();
        let (area, m) = polygon::disk_moments(&pulled, &Point2::zeros(), 1.0);
        let tm = map(&m) - c;
        a * b * self.scale * (area * self.raw(c) + gradient.dot(&tm))
    }

    pub fn translate(&self, v: &Point2) -> DensitySpec {
        DensitySpec {
            domain: self.domain.translate(v),
            kind: self.kind.clone(),
            anchor: self.anchor + v,
            scale: self.scale,
        }
    }
}

/// Whether the ellipse `{c + R diag(a, b) u}` lies in `domain` with margin `slack`.
pub fn ellipse_inside(domain: &Polygon, c: &Point2, a: f64, b: f64, angle: f64, slack: f64) -> bool {
    let (s, co) = angle.sin_cos();
    domain.halfspaces().iter().all(|h| {
        // support of the ellipse in direction n: n·c + |diag(a,b) Rᵀ n|
        let n = h.normal;
        let rn = Point2::new(co * n.x + s * n.y, -s * n.x + co * n.y);
        n.dot(c) + Point2::new(a * rn.x, b * rn.y).norm() <= h.offset + slack
    })
}
