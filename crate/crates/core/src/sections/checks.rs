use serde::{Deserialize, Serialize};

use super::section::{default_subgradient, Section};
use crate::geom::{polygon, Point2, Polygon};
use crate::ot::{DiagramEdge, PiecewiseAffineConvex};
use crate::rng::{seeded, uniform_in_polygon};

/// Constant of the two-dimensional Alexandrov estimate, fixed so that the polygonal
/// cone `max_j x·u_j` with many unit slopes attains ratio 1 at the apex.
pub const ALEXANDROV_C2: f64 = 1.0 / std::f64::consts::PI;

/// Diagram vertices with their subdifferential polygons, and diagram edges.
#[derive(Clone, Debug)]
pub struct DiagramIndex {
    pub points: Vec<Point2>,
    pub subdiffs: Vec<Vec<Point2>>,
    pub masses: Vec<f64>,
    pub edges: Vec<DiagramEdge>,
}

impl DiagramIndex {
    pub fn new(psi: &PiecewiseAffineConvex) -> Self {
        let verts = psi.diagram_vertices();
        let subdiffs: Vec<Vec<Point2>> = verts
            .iter()
            .map(|v| polygon::convex_hull(&v.pieces.iter().map(|&j| psi.slopes()[j]).collect::<Vec<_>>()))
            .collect();
        let masses = subdiffs.iter().map(|s| polygon::area(s)).collect();
        DiagramIndex { points: verts.iter().map(|v| v.point).collect(), subdiffs, masses, edges: psi.diagram_edges() }
    }

    fn inside<'a>(&'a self, region: &'a Polygon, slack: f64) -> impl Iterator<Item = usize> + 'a {
        (0..self.points.len()).filter(move |&i| region.contains_point(&self.points[i], slack))
    }

    /// `|∂ψ(region)|`: the Monge–Ampère mass of the diagram vertices in the closed region.
    pub fn mass_in(&self, region: &Polygon) -> f64 {
        let slack = 1e-12 * (1.0 + region.diameter_scale());
        self.inside(region, slack).map(|i| self.masses[i]).sum()
    }
}

fn slack_of(p: &Polygon) -> f64 {
    1e-9 * (1.0 + p.diameter_scale())
}

/// Pieces whose cells meet `region` (the extreme points of `∂ψ(region)`).
pub fn gradient_image(psi: &PiecewiseAffineConvex, region: &[Point2]) -> Vec<usize> {
    let (lo, hi) = region.iter().fold((region[0], region[0]), |(a, b), p| (a.inf(p), b.sup(p)));
    let tol = 1e-12 * (1.0 + lo.norm().max(hi.norm()));
    psi.pieces_near(&lo, &hi)
        .into_iter()
        .filter(|&j| !psi.cells()[j].poly.is_empty() && polygon::intersects(&psi.cells()[j].poly, region, tol))
        .collect()
}

/// Hull of the slopes of the pieces whose cells meet `region`.
pub fn gradient_hull(psi: &PiecewiseAffineConvex, region: &[Point2]) -> Polygon {
    let pts: Vec<Point2> = gradient_image(psi, region).iter().map(|&j| psi.slopes()[j]).collect();
    Polygon::from_points(&pts).expect("region meets some cell")
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InnerRadiusBounds {
    /// `ℓ(S)`.
    pub ell_section: f64,
    /// `t / L(∂ψ(Ω))`.
    pub section_bound: f64,
    /// `ℓ(∂ψ(S))`, with `∂ψ(S)` replaced by the hull of the active slopes.
    pub ell_image: f64,
    /// `t / L(Ω)`.
    pub image_bound: f64,
}

impl InnerRadiusBounds {
    pub fn holds(&self, rel: f64) -> bool {
        self.ell_section >= self.section_bound * (1.0 - rel) && self.ell_image >= self.image_bound * (1.0 - rel)
    }
}

/// `ℓ(S) >= t/L(∂ψ(Ω))` and `ℓ(∂ψ(S)) >= t/L(Ω)`.
pub fn inner_radius_lower_bounds(s: &Section, psi: &PiecewiseAffineConvex, omega: &Polygon) -> InnerRadiusBounds {
    let l_image = gradient_hull(psi, omega.ring()).outer_radius();
    let image = gradient_hull(psi, s.vertices());
    InnerRadiusBounds {
        ell_section: s.body.inner_radius(),
        section_bound: s.t / l_image,
        ell_image: image.inner_radius(),
        image_bound: s.t / omega.outer_radius(),
    }
}

/// Distance from an interior point to the boundary of a polygon.
pub fn boundary_distance(p: &Polygon, y: &Point2) -> f64 {
    (-p.max_violation(y)).max(0.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlexandrovReport {
    /// `max |ψ̄(y) − t|² / (c₂ L(S) dist(y, ∂S) |∂ψ(S)|)` over the probes.
    pub max_ratio: f64,
    pub worst: [f64; 2],
    pub probes: usize,
}

/// Alexandrov ratio at `x0` and at uniform probes of `S`.
pub fn alexandrov_check(
    s: &Section,
    psi: &PiecewiseAffineConvex,
    index: &DiagramIndex,
    probes: usize,
    seed: u64,
) -> AlexandrovReport {
    let big_l = s.body.outer_radius();
    let mass = index.mass_in(&s.body);
    let mut rng = seeded(seed, 41);
    let mut ys = vec![s.x0];
    ys.extend((0..probes).map(|_| uniform_in_polygon(&s.body, &mut rng)));
    let mut worst = (f64::NEG_INFINITY, s.x0);
    for y in &ys {
        let lhs = (s.height(psi, y) - s.t).powi(2);
        let rhs = ALEXANDROV_C2 * big_l * boundary_distance(&s.body, y) * mass;
        let r = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if r > worst.0 {
            worst = (r, *y);
        }
    }
    AlexandrovReport { max_ratio: worst.0, worst: [worst.1.x, worst.1.y], probes: ys.len() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolarInclusionReport {
    /// Area fraction of `p0 + t(S − x0)°` not covered by `∂ψ(S)`.
    pub first_uncovered: f64,
    /// A point of `∂ψ*(p0 + (t/2)(S − x0)°)` outside `S`, if any.
    pub second_witness: Option<[f64; 2]>,
    /// `max_z max_{x∈S} (z − p0)·(x − y0) / 2t` over `z ∈ ∂ψ(½(S + y0))` and sampled `y0`.
    pub third_ratio: f64,
    pub third_witness: Option<[f64; 2]>,
    /// `|∂ψ(S)||S| / (π² t² / 16)`.
    pub volume_product_ratio: f64,
}

impl PolarInclusionReport {
    pub fn first(&self) -> bool {
        self.first_uncovered <= 1e-8
    }

    pub fn second(&self) -> bool {
        self.second_witness.is_none()
    }

    pub fn third(&self) -> bool {
        self.third_ratio <= 1.0 + 1e-8
    }

    pub fn volume_product(&self) -> bool {
        self.volume_product_ratio >= 1.0 - 1e-8
    }

    pub fn all(&self) -> bool {
        self.first() && self.second() && self.third() && self.volume_product()
    }
}

/// `z + λ(S − x0)°` as a polygon.
fn scaled_polar(s: &Polygon, x0: &Point2, z: &Point2, lambda: f64) -> Option<Polygon> {
    let polar = s.polar_body(x0).ok()?;
    Some(polar.dilate(lambda, &Point2::zeros()).translate(z))
}

/// The polar-body inclusions for a bounded section with nonempty interior.
pub fn polar_section_inclusions(
    s: &Section,
    psi: &PiecewiseAffineConvex,
    index: &DiagramIndex,
    y0_samples: usize,
    seed: u64,
) -> PolarInclusionReport {
    let slack = slack_of(&s.body);
    let in_s = |x: &Point2| s.body.contains_point(x, slack);
    let near = |poly: &[Point2], q: &Polygon| polygon::intersects(poly, q.ring(), 1e-12 * (1.0 + q.diameter_scale()));

    let first_uncovered = match scaled_polar(&s.body, &s.x0, &s.p0, s.t) {
        Some(q) => {
            let pieces: Vec<Vec<Point2>> = index
                .inside(&s.body, 1e-12 * (1.0 + s.body.diameter_scale()))
                .map(|i| polygon::intersection(&index.subdiffs[i], q.ring()))
                .filter(|p| p.len() >= 3)
                .collect();
            ((q.volume() - polygon::union_area(&pieces)) / q.volume()).max(0.0)
        }
        None => 1.0,
    };

    let mut second_witness = None;
    if let Some(q) = scaled_polar(&s.body, &s.x0, &s.p0, 0.5 * s.t) {
        let qs = slack_of(&q);
        for (j, c) in psi.cells().iter().enumerate() {
            if c.poly.is_empty() || !q.contains_point(&psi.slopes()[j], qs) {
                continue;
            }
            if c.touches_window() {
                second_witness = Some(c.poly[0]);
            } else if let Some(v) = c.poly.iter().find(|v| !in_s(v)) {
                second_witness = Some(*v);
            }
            if second_witness.is_some() {
                break;
            }
        }
        if second_witness.is_none() {
            second_witness = index
                .edges
                .iter()
                .filter(|e| near(&[psi.slopes()[e.pieces.0], psi.slopes()[e.pieces.1]], &q))
                .find_map(|e| [e.a, e.b].into_iter().find(|v| !in_s(v)));
        }
        if second_witness.is_none() {
            second_witness = (0..index.points.len())
                .filter(|&i| near(&index.subdiffs[i], &q))
                .map(|i| index.points[i])
                .find(|v| !in_s(v));
        }
    } else {
        second_witness = Some(s.x0);
    }

    let mut rng = seeded(seed, 42);
    let mut third = (f64::NEG_INFINITY, None);
    let inner = s.body.dilate(0.99, &s.x0);
    let mut y0s = vec![s.x0];
    y0s.extend((0..y0_samples).map(|_| uniform_in_polygon(&inner, &mut rng)));
    for y0 in &y0s {
        let half = s.body.dilate(0.5, y0);
        for j in gradient_image(psi, half.ring()) {
            let z = psi.slopes()[j] - s.p0;
            let r = s.vertices().iter().map(|v| z.dot(&(v - y0))).fold(f64::NEG_INFINITY, f64::max) / (2.0 * s.t);
            if r > third.0 {
                third = (r, Some([y0.x, y0.y]));
            }
        }
    }

    let bound = std::f64::consts::PI.powi(2) * s.t * s.t / 16.0;
    PolarInclusionReport {
        first_uncovered,
        second_witness: second_witness.map(|p| [p.x, p.y]),
        third_ratio: third.0,
        third_witness: third.1,
        volume_product_ratio: index.mass_in(&s.body) * s.area() / bound,
    }
}

/// `max over vertices of x0 + τ(S − x0)` of `ψ̄ − τt`; nonpositive for every convex `ψ`.
pub fn stau_excess(s: &Section, psi: &PiecewiseAffineConvex, tau: f64) -> f64 {
    s.dilated(tau).vertices().iter().map(|v| s.height(psi, v) - tau * s.t).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HalfSectionReport {
    pub probes: usize,
    /// `max (x − x0)·(p − p0) / t`.
    pub max_pairing: f64,
    /// `max (ψ(x0) − ψ(x) − p·(x0 − x)) / t`, the height of `x0` in `S(x, p, t)`.
    pub max_return_height: f64,
}

impl HalfSectionReport {
    pub fn holds(&self, rel: f64) -> bool {
        self.max_pairing <= 1.0 + rel && self.max_return_height <= 1.0 + rel
    }
}

/// For `x` with `2x − x0 ∈ S` and each vertex `p` of `∂ψ(x)`: `(x − x0)·(p − p0) <= t`
/// and `x0 ∈ S(x, p, t)`.
pub fn half_section_check(s: &Section, psi: &PiecewiseAffineConvex, probes: usize, seed: u64) -> HalfSectionReport {
    let half = s.dilated(0.5);
    let mut rng = seeded(seed, 43);
    let mut xs: Vec<Point2> = half.vertices().to_vec();
    xs.extend((0..probes).map(|_| uniform_in_polygon(&half, &mut rng)));
    let (mut pairing, mut back) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let f0 = psi.eval(&s.x0);
    for x in &xs {
        let fx = psi.eval(x);
        for p in psi.subdifferential(x, 1e-12).vertices() {
            pairing = pairing.max((x - s.x0).dot(&(p - s.p0)) / s.t);
            back = back.max((f0 - fx - p.dot(&(s.x0 - x))) / s.t);
        }
    }
    HalfSectionReport { probes: xs.len(), max_pairing: pairing, max_return_height: back }
}

/// Smallest `θ` with `S(x0, p0, t) ⊂ S(y, q, θt)` over the given `y` with `q` the default subgradient.
pub fn engulfing_theta(s: &Section, psi: &PiecewiseAffineConvex, ys: &[Point2]) -> (f64, Point2) {
    ys.iter().map(|y| (s.height_in(psi, y, &default_subgradient(psi, y)) / s.t, *y)).fold((0.0, s.x0), |a, b| {
        if b.0 > a.0 {
            b
        } else {
            a
        }
    })
}

/// Smallest `M` with `x0 + 2(S − x0) ⊂ S(x0, p0, Mt)`.
pub fn doubling_height(s: &Section, psi: &PiecewiseAffineConvex) -> f64 {
    s.dilated(2.0).vertices().iter().map(|v| s.height(psi, v)).fold(0.0, f64::max) / s.t
}

/// Smallest `γ` with `S(x0, p0, τt) ⊂ x0 + γ(S(x0, p0, t) − x0)`.
pub fn contraction_gamma(small: &Section, large: &Section) -> f64 {
    let x0 = large.x0;
    small
        .vertices()
        .iter()
        .map(|v| {
            large
                .body
                .halfspaces()
                .iter()
                .map(|h| h.normal.dot(&(v - x0)) / (h.offset - h.normal.dot(&x0)))
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
