use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{ellipse_inside, DensitySpec, DiscreteMeasure, MeasureError};
use crate::geom::{Halfspace, Point2, Polygon};
use crate::rng::{seeded, uniform_in_polygon};

/// Anything that can report its mass on disks, ellipses and convex polygons.
pub trait MassOracle: Sync {
    fn mass_disk(&self, c: &Point2, r: f64) -> f64;
    fn mass_ellipse(&self, c: &Point2, a: f64, b: f64, angle: f64) -> f64;
    fn mass_polygon(&self, poly: &[Point2]) -> f64;
}

impl MassOracle for DiscreteMeasure {
    fn mass_disk(&self, c: &Point2, r: f64) -> f64 {
        DiscreteMeasure::mass_disk(self, c, r)
    }
    fn mass_ellipse(&self, c: &Point2, a: f64, b: f64, angle: f64) -> f64 {
        DiscreteMeasure::mass_ellipse(self, c, a, b, angle)
    }
    fn mass_polygon(&self, poly: &[Point2]) -> f64 {
        DiscreteMeasure::mass_polygon(self, poly)
    }
}

impl MassOracle for DensitySpec {
    fn mass_disk(&self, c: &Point2, r: f64) -> f64 {
        DensitySpec::mass_disk(self, c, r)
    }
    fn mass_ellipse(&self, c: &Point2, a: f64, b: f64, angle: f64) -> f64 {
        DensitySpec::mass_ellipse(self, c, a, b, angle)
    }
    fn mass_polygon(&self, poly: &[Point2]) -> f64 {
        DensitySpec::mass_polygon(self, poly)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateMode {
    Balls,
    ConvexSets,
}

/// Sampled two-sided density bounds `λ̂ |K| <= m(K) <= Λ̂ |K|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionCertificate {
    pub lambda_hat: f64,
    #[serde(rename = "Lambda_hat")]
    pub big_lambda_hat: f64,
    pub delta: f64,
    pub n_samples: usize,
    /// Sample attaining `λ̂`: center and radius (the minor semi-axis in convex mode).
    pub worst_ball: ([f64; 2], f64),
    /// Sample attaining `Λ̂`.
    pub best_ball: ([f64; 2], f64),
    pub mode: CertificateMode,
    /// Only sets contained in the domain are sampled, so nothing is said within `δ` of the boundary.
    pub interior_only: bool,
    /// `(Λ̂/λ̂)` of this certificate divided by that of the ball-mode certificate, in convex mode.
    pub ratio_to_balls: Option<f64>,
}

impl AssumptionCertificate {
    pub fn ratio(&self) -> f64 {
        self.big_lambda_hat / self.lambda_hat
    }
}

/// `{x ∈ Ω : dist(x, ∂Ω) >= r}`.
fn shrink(domain: &Polygon, r: f64) -> Option<Polygon> {
    let hs: Vec<Halfspace<2>> =
        domain.halfspaces().iter().map(|h| Halfspace { normal: h.normal, offset: h.offset - r }).collect();
    Polygon::from_halfspaces(&hs).ok().or_else(|| {
        // the inner-radius limit collapses to a point or segment
        let c = domain.radii().inner_center;
        Polygon::from_points(&[c]).ok()
    })
}

#[derive(Clone, Copy)]
struct Sample {
    c: Point2,
    a: f64,
    b: f64,
    angle: f64,
}

fn summarize<M: MassOracle>(m: &M, samples: &[Sample], delta: f64, mode: CertificateMode) -> AssumptionCertificate {
    let ratios: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let mass = match mode {
                CertificateMode::Balls => m.mass_disk(&s.c, s.a),
                CertificateMode::ConvexSets => m.mass_ellipse(&s.c, s.a, s.b, s.angle),
            };
            mass / (PI * s.a * s.b)
        })
        .collect();
    let (mut lo, mut hi) = (0, 0);
    for (k, r) in ratios.iter().enumerate() {
        if *r < ratios[lo] {
            lo = k;
        }
        if *r > ratios[hi] {
            hi = k;
        }
    }
    let tag = |s: &Sample| ([s.c.x, s.c.y], s.a.min(s.b));
    AssumptionCertificate {
        lambda_hat: ratios[lo],
        big_lambda_hat: ratios[hi],
        delta,
        n_samples: samples.len(),
        worst_ball: tag(&samples[lo]),
        best_ball: tag(&samples[hi]),
        mode,
        interior_only: true,
        ratio_to_balls: None,
    }
}

/// Min and max of `m(B_r)/|B_r|` over balls `B_r ⊂ Ω`, `r` log-uniform in `[δ, ℓ(Ω)/2]`.
///
/// Samples are drawn sequentially from the seed, so a larger `n_samples` extends the same sample set.
pub fn verify_assumption1<M: MassOracle>(
    m: &M,
    domain: &Polygon,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<AssumptionCertificate, MeasureError> {
    let half = 0.5 * domain.inner_radius();
    if !(delta > 0.0) || delta > half || n_samples == 0 {
        return Err(MeasureError::NoValidBalls);
    }
    let mut rng = seeded(seed, 11);
    let (l0, l1) = (delta.ln(), half.ln());
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let r = (l0 + (l1 - l0) * rng.random::<f64>()).exp();
        let inner = shrink(domain, r).ok_or(MeasureError::NoValidBalls)?;
        let c = uniform_in_polygon(&inner, &mut rng);
        samples.push(Sample { c, a: r, b: r, angle: 0.0 });
    }
    Ok(summarize(m, &samples, delta, CertificateMode::Balls))
}

/// Same bounds over ellipses `E ⊂ Ω` with aspect ratio at most 8 and inner radius at least `βδ`.
pub fn verify_convex_equivalence<M: MassOracle>(
    m: &M,
    domain: &Polygon,
    delta: f64,
    beta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<AssumptionCertificate, MeasureError> {
    let half = 0.5 * domain.inner_radius();
    let floor = beta * delta;
    if !(floor > 0.0) || floor > half || n_samples == 0 {
        return Err(MeasureError::NoValidBalls);
    }
    let mut rng = seeded(seed, 12);
    let (l0, l1) = (floor.ln(), half.ln());
    let mut samples = Vec::with_capacity(n_samples);
    while samples.len() < n_samples {
        let b = (l0 + (l1 - l0) * rng.random::<f64>()).exp();
        let a = b * (1.0 + 7.0 * rng.random::<f64>());
        let angle = PI * rng.random::<f64>();
        let inner = shrink(domain, b).ok_or(MeasureError::NoValidBalls)?;
        for _ in 0..64 {
            let c = uniform_in_polygon(&inner, &mut rng);
            if ellipse_inside(domain, &c, a, b, angle, 0.0) {
                samples.push(Sample { c, a, b, angle });
                break;
            }
        }
    }
    let mut cert = summarize(m, &samples, delta, CertificateMode::ConvexSets);
    if let Ok(balls) = verify_assumption1(m, domain, delta, n_samples, seed) {
        cert.ratio_to_balls = Some(cert.ratio() / balls.ratio());
    }
    Ok(cert)
}
