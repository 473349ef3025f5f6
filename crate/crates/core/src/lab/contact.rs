use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::heights::section_mean;
use super::LabError;
use crate::geom::{polygon, Ellipsoid, Point2, Polygon};
use crate::mollifier::{delta_r, KernelSpec};
use crate::ot::PiecewiseAffineConvex;
use crate::rng::{seeded, uniform_in_polygon};
use crate::sections::{gradient_hull, section, DiagramIndex, Section, SectionError};

const N: f64 = 2.0;

/// `C` of the planar sup bound: `(2/n²)(√2 n)^n = 4`.
pub const SUP_BOUND_C2: f64 = 4.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupBoundReport {
    /// `⨍_S Δ_rψ`.
    pub mean_delta_r: f64,
    pub trace_a: f64,
    /// `sup ψ̄` over `{|x|_A <= 3n}`, `ψ̄` normalized at `(x0, p0)`.
    pub sup: f64,
    pub ratio: f64,
    /// Whether `r <= ℓ(S)`.
    pub r_within_section: bool,
}

impl SupBoundReport {
    pub fn holds(&self) -> bool {
        self.ratio <= SUP_BOUND_C2
    }
}

/// `max ψ̄` over `{x : |x − c|_A <= R}`, exactly: each piece is affine, so its maximum over the
/// ellipse is the support value.
fn sup_over_ellipse(psi: &PiecewiseAffineConvex, s: &Section, e: &Ellipsoid, radius: f64) -> f64 {
    let b = e.half_axes();
    (0..psi.len())
        .map(|j| {
            let a = psi.slopes()[j] - s.p0;
            psi.piece(j, &e.center) - s.base - s.p0.dot(&(e.center - s.x0)) + radius * (b * a).norm()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Ratio `⨍_S Δ_rψ / (Tr(A) sup_{|x|_A <= 3n} ψ̄)`, to be compared with [`SUP_BOUND_C2`].
pub fn sup_bound_check(
    psi: &PiecewiseAffineConvex,
    s: &Section,
    kernel: &KernelSpec,
    samples: usize,
) -> Result<SupBoundReport, LabError> {
    let john = s.body.john_ellipsoid()?;
    let mean = section_mean(psi, &s.body, kernel, samples)?;
    let sup = sup_over_ellipse(psi, s, &john, 3.0 * N);
    let trace_a = john.trace();
    Ok(SupBoundReport {
        mean_delta_r: mean,
        trace_a,
        sup,
        ratio: if mean == 0.0 { 0.0 } else { mean / (trace_a * sup) },
        r_within_section: kernel.r <= s.body.inner_radius(),
    })
}

/// A point of the contact set with the slopes of `V` it carries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactPoint {
    pub y0: [f64; 2],
    /// `q0 + ∇p(y0)` over `q0 ∈ ∂w̄(y0)`, in the original slope coordinates.
    pub v_piece: Vec<[f64; 2]>,
}

impl ContactPoint {
    pub fn point(&self) -> Point2 {
        Point2::new(self.y0[0], self.y0[1])
    }

    pub fn slopes(&self) -> Vec<Point2> {
        self.v_piece.iter().map(|q| Point2::new(q[0], q[1])).collect()
    }
}

/// Contact set of the lower envelope of `w = ψ̄ − t − p` over `U = {|x|_A <= 2n}`.
#[derive(Clone, Debug)]
pub struct ContactConstruction {
    pub section: Section,
    pub john: Ellipsoid,
    /// `w̄` as a max of affine facets.
    pub w_bar: PiecewiseAffineConvex,
    pub sigma: Vec<ContactPoint>,
    /// `|V|`.
    pub v_area: f64,
    /// `|V| |S| / t²`.
    pub c_v: f64,
    /// Largest distance from a slope of `V` to `∂ψ(y0)`.
    pub dual_gap: f64,
    /// `min [ψ(y) − ψ(y0) − (t/8n²)|y − y0|²_A − q·(y − y0)] / t` over test points of `U`.
    pub psip_margin: f64,
    /// Whether every contact point lies in `S`.
    pub sigma_in_section: bool,
}

/// Builds `w̄`, `Σ` and `V` for a bounded section.
///
/// `w` is concave on each cell, so the contact set lies among the diagram vertices in `U`; the
/// constraint `w̄ <= 0` on `∂U` is imposed at `boundary_samples` points of the ellipse.
pub fn contact_construction(
    psi: &PiecewiseAffineConvex,
    s: &Section,
    boundary_samples: usize,
) -> Result<ContactConstruction, LabError> {
    let john = s.body.john_ellipsoid()?;
    let (c, a, b) = (john.center, john.shape, john.half_axes());
    let t = s.t;
    let u_radius = 2.0 * N;
    let p = |x: &Point2| 0.5 * t * (john.norm(x).powi(2) / (4.0 * N * N) - 1.0);
    let grad_p = |x: &Point2| (a * (x - c)) * (t / (4.0 * N * N));
    let w = |x: &Point2| s.height(psi, x) - t - p(x);

    let interior: Vec<Point2> = psi
        .diagram_vertices()
        .into_iter()
        .map(|v| v.point)
        .filter(|v| john.norm(v) < u_radius * (1.0 - 1e-9))
        .collect();
    if interior.is_empty() {
        return Err(LabError::EnvelopeFailed("no diagram vertex inside U".into()));
    }
    let m = boundary_samples.max(16);
    let ring: Vec<Point2> = (0..m)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            c + b * Point2::new(th.cos(), th.sin()) * u_radius
        })
        .collect();
    let wi: Vec<f64> = interior.iter().map(w).collect();
    let depth = wi.iter().fold(0.0f64, |acc, v| acc.max(-v)) + t;
    let gap = interior.iter().map(|v| u_radius - john.norm(v)).fold(f64::INFINITY, f64::min);
    let rq = 8.0 * depth * a.trace().sqrt() / gap + 1.0;

    // w̄* = max_i (q·v_i − w_i): its cells are the normal cones ∂w̄(v_i)
    let mut points = interior.clone();
    points.extend_from_slice(&ring);
    let mut icpt: Vec<f64> = wi.iter().map(|v| -v).collect();
    icpt.extend(std::iter::repeat_n(0.0, m));
    let dual = PiecewiseAffineConvex::new(points, icpt, Polygon::rectangle(Point2::new(-rq, -rq), Point2::new(rq, rq)));

    let tiny = 1e-14 * rq * rq;
    let mut sigma = Vec::new();
    let mut v_area = 0.0;
    for (i, y0) in interior.iter().enumerate() {
        let cell = &dual.cells()[i];
        if cell.poly.len() < 3 || cell.area() <= tiny {
            continue;
        }
        if cell.touches_window() {
            return Err(LabError::EnvelopeFailed("normal cone reaches the slope window".into()));
        }
        v_area += cell.area();
        let shift = grad_p(y0) + s.p0;
        sigma.push(ContactPoint {
            y0: [y0.x, y0.y],
            v_piece: cell.poly.iter().map(|q| q + shift).map(|q| [q.x, q.y]).collect(),
        });
    }
    if sigma.is_empty() {
        return Err(LabError::EnvelopeFailed("empty contact set".into()));
    }

    let facets: Vec<(Point2, f64)> = dual.diagram_vertices().iter().map(|v| (v.point, -dual.eval(&v.point))).collect();
    if facets.is_empty() {
        return Err(LabError::EnvelopeFailed("envelope has no facet".into()));
    }
    let lo = c - Point2::new(1.0, 1.0) * (u_radius * b.norm());
    let hi = c + Point2::new(1.0, 1.0) * (u_radius * b.norm());
    let w_bar = PiecewiseAffineConvex::new(
        facets.iter().map(|f| f.0).collect(),
        facets.iter().map(|f| f.1).collect(),
        Polygon::rectangle(lo, hi),
    );

    let slack = 1e-9 * (1.0 + s.body.diameter_scale());
    let sigma_in_section = sigma.iter().all(|cp| s.body.contains_point(&cp.point(), slack));
    let mut tests: Vec<Point2> = interior.clone();
    tests.extend_from_slice(&ring);
    let test_vals: Vec<f64> = tests.iter().map(|y| psi.eval(y)).collect();
    let (dual_gap, psip_margin) = sigma
        .par_iter()
        .map(|cp| {
            let y0 = cp.point();
            let sub = psi.subdifferential(&y0, 1e-9);
            let f0 = psi.eval(&y0);
            let mut g = 0.0f64;
            let mut margin = f64::INFINITY;
            for q in cp.slopes() {
                g = g.max(polygon::distance_to(sub.body.ring(), &q));
                for (y, fy) in tests.iter().zip(&test_vals) {
                    let d = y - y0;
                    let quad = t / (8.0 * N * N) * d.dot(&(a * d));
                    margin = margin.min((fy - f0 - quad - q.dot(&d)) / t);
                }
            }
            (g, margin)
        })
        .reduce(|| (0.0, f64::INFINITY), |x, y| (x.0.max(y.0), x.1.min(y.1)));

    Ok(ContactConstruction {
        section: s.clone(),
        john,
        w_bar,
        sigma,
        v_area,
        c_v: v_area * s.area() / (t * t),
        dual_gap,
        psip_margin,
        sigma_in_section,
    })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FatteningChecks {
    /// A point of `∂ψ*(W_h(q0))` outside `S(y0, q0, h)`, if any.
    pub preimage_witness: Option<[f64; 2]>,
    /// `min ℓ(S(y0, q0, h)) L(∂ψ(Ω)) / h`.
    pub section_radius_ratio: f64,
    /// `min ℓ(W_h(q0)) 4n L(Ω) / h`.
    pub polar_radius_ratio: f64,
    /// Smallest `γ` with `Σ_h ⊂ x0 + γ(S − x0)`.
    pub engulf_factor: f64,
    /// `max (x − y0)·(q − q0) / h` over sampled `x ∈ S(y0, q0, h)`, `q ∈ ∂ψ(x)`.
    pub pairing_constant: f64,
    /// `min Δ_rψ / ((t/8n²) Tr(A))` at sampled points of `Σ_h`.
    pub pointwise_ratio: f64,
    /// `min Δ_rψ ℓ(S)² / t` at the same points.
    pub pointwise_c: f64,
    pub samples: usize,
}

/// `Σ_h`, `V_h` and the measured constants of the fattening.
#[derive(Clone, Debug)]
pub struct FattenedSets {
    pub h: f64,
    /// `t r² Tr(A) / (8n² C m₀)` with the measured pairing constant as `C`.
    pub h0: f64,
    pub sections: Vec<Section>,
    pub w_h: Vec<Polygon>,
    pub sigma_h_area: f64,
    pub v_h_area: f64,
    /// `|Σ_h| / |S|`.
    pub area_ratio: f64,
    /// Sections that were unbounded or whose slope missed `∂ψ(y0)`.
    pub skipped: usize,
    pub checks: FatteningChecks,
}

fn gauge(body: &Polygon, x0: &Point2, v: &Point2) -> f64 {
    body.halfspaces().iter().map(|h| h.normal.dot(&(v - x0)) / (h.offset - h.normal.dot(x0))).fold(0.0, f64::max)
}

/// Whether every point of `∂ψ*(w)` lies in `s`, checked on cells, edges and vertices of the diagram.
fn preimage_outside(psi: &PiecewiseAffineConvex, index: &DiagramIndex, w: &Polygon, s: &Polygon) -> Option<Point2> {
    let slack = 1e-9 * (1.0 + s.diameter_scale());
    let wv = w.vertices();
    let (lo, hi) = wv.iter().fold((wv[0], wv[0]), |(a, b), p| (a.inf(p), b.sup(p)));
    let in_box = |q: &Point2| q.x >= lo.x - slack && q.x <= hi.x + slack && q.y >= lo.y - slack && q.y <= hi.y + slack;
    let tol = 1e-12 * (1.0 + w.diameter_scale());
    for (j, c) in psi.cells().iter().enumerate() {
        let y = psi.slopes()[j];
        if !c.poly.is_empty() && in_box(&y) && w.contains_point(&y, tol) {
            if let Some(v) = c.poly.iter().find(|v| !s.contains_point(v, slack)) {
                return Some(*v);
            }
        }
    }
    for e in &index.edges {
        let seg = [psi.slopes()[e.pieces.0], psi.slopes()[e.pieces.1]];
        let (a, b) = (seg[0].inf(&seg[1]), seg[0].sup(&seg[1]));
        if a.x > hi.x || b.x < lo.x || a.y > hi.y || b.y < lo.y {
            continue;
        }
        if polygon::intersects(&seg, w.ring(), tol) {
            if let Some(v) = [e.a, e.b].into_iter().find(|v| !s.contains_point(v, slack)) {
                return Some(v);
            }
        }
    }
    for (i, sub) in index.subdiffs.iter().enumerate() {
        if sub.iter().all(|q| q.x > hi.x)
            || sub.iter().all(|q| q.x < lo.x)
            || sub.iter().all(|q| q.y > hi.y)
            || sub.iter().all(|q| q.y < lo.y)
        {
            continue;
        }
        if polygon::intersects(sub, w.ring(), tol) && !s.contains_point(&index.points[i], slack) {
            return Some(index.points[i]);
        }
    }
    None
}

struct Pieces {
    sections: Vec<(Point2, Point2, Section)>,
    skipped: usize,
}

fn fattened_sections(psi: &PiecewiseAffineConvex, cc: &ContactConstruction, h: f64) -> Result<Pieces, LabError> {
    let jobs: Vec<(Point2, Point2)> = cc
        .sigma
        .iter()
        .flat_map(|cp| {
            let y0 = cp.point();
            let qs = cp.slopes();
            let centre = qs.iter().fold(Point2::zeros(), |acc, q| acc + q) / qs.len() as f64;
            let sub = psi.subdifferential(&y0, 1e-9).body.center_of_mass();
            std::iter::once(centre).chain(qs).map(move |q| (y0, q * (1.0 - 1e-6) + sub * 1e-6))
        })
        .collect();
    let out: Vec<Result<Option<(Point2, Point2, Section)>, LabError>> = jobs
        .par_iter()
        .map(|&(y0, q0)| match section(psi, y0, q0, h) {
            Ok(s) => Ok(Some((y0, q0, s))),
            Err(SectionError::UnboundedSection | SectionError::NotASubgradient(_)) => Ok(None),
            Err(e) => Err(e.into()),
        })
        .collect();
    let mut sections = Vec::new();
    let mut skipped = 0;
    for r in out {
        match r? {
            Some(x) => sections.push(x),
            None => skipped += 1,
        }
    }
    Ok(Pieces { sections, skipped })
}

fn pairing_constant(psi: &PiecewiseAffineConvex, pieces: &Pieces, h: f64, probes: usize, seed: u64) -> f64 {
    pieces
        .sections
        .par_iter()
        .enumerate()
        .map(|(k, (y0, q0, s))| {
            let mut rng = seeded(seed, 5000 + k as u64);
            let mut xs = s.vertices().to_vec();
            if s.area() > 0.0 {
                xs.extend((0..probes).map(|_| uniform_in_polygon(&s.body, &mut rng)));
            }
            xs.iter()
                .flat_map(|x| {
                    psi.subdifferential(x, 1e-12).vertices().iter().map(|q| (x - y0).dot(&(q - q0))).collect::<Vec<_>>()
                })
                .fold(0.0, f64::max)
                / h
        })
        .reduce(|| 0.0, f64::max)
}

/// `Σ_h` and `V_h` at `h` (or at `h0` when `h` is `None`) with the fattening checks.
///
/// `h0` uses the pairing constant measured at the provisional height `h0(C = 1)`.
#[allow(clippy::too_many_arguments)]
pub fn fatten(
    cc: &ContactConstruction,
    psi: &PiecewiseAffineConvex,
    omega: &Polygon,
    kernel: &KernelSpec,
    delta: f64,
    h: Option<f64>,
    probes: usize,
    seed: u64,
) -> Result<FattenedSets, LabError> {
    let s = &cc.section;
    let t = s.t;
    let r = kernel.r;
    let ell = s.body.inner_radius();
    let trace = cc.john.trace();
    let h0_of = |c: f64| t * r * r * trace / (8.0 * N * N * c * kernel.m0);
    let mut unmet = Vec::new();
    if r > ell {
        unmet.push(format!("r = {r} exceeds ℓ(S) = {ell}"));
    }
    if r < delta.sqrt() * (1.0 - 1e-12) {
        unmet.push(format!("r = {r} is below √δ = {}", delta.sqrt()));
    }
    if h.is_none() && !unmet.is_empty() {
        return Err(LabError::PreconditionsUnmet(unmet.join("; ")));
    }

    let provisional = h0_of(1.0);
    let c_iv = if provisional > 0.0 {
        let pieces = fattened_sections(psi, cc, provisional)?;
        pairing_constant(psi, &pieces, provisional, probes, seed).max(1e-3)
    } else {
        1.0
    };
    let h0 = h0_of(c_iv);
    let h = h.unwrap_or(h0);

    let pieces = fattened_sections(psi, cc, h)?;
    let index = DiagramIndex::new(psi);
    let l_grad = gradient_hull(psi, omega.ring()).outer_radius();
    let l_omega = omega.outer_radius();

    let mut checks = FatteningChecks {
        section_radius_ratio: f64::INFINITY,
        polar_radius_ratio: f64::INFINITY,
        pointwise_ratio: f64::INFINITY,
        pointwise_c: f64::INFINITY,
        ..Default::default()
    };
    let mut w_h = Vec::new();
    if h > 0.0 {
        for (y0, q0, sec) in &pieces.sections {
            let Ok(polar) = sec.body.polar_body(y0) else { continue };
            let w = polar.dilate(0.5 * h, &Point2::zeros()).translate(q0);
            if checks.preimage_witness.is_none() {
                checks.preimage_witness = preimage_outside(psi, &index, &w, &sec.body).map(|p| [p.x, p.y]);
            }
            checks.section_radius_ratio = checks.section_radius_ratio.min(sec.body.inner_radius() * l_grad / h);
            checks.polar_radius_ratio = checks.polar_radius_ratio.min(w.inner_radius() * 4.0 * N * l_omega / h);
            w_h.push(w);
        }
        checks.pairing_constant = pairing_constant(psi, &pieces, h, probes, seed);
    }
    checks.engulf_factor = pieces
        .sections
        .iter()
        .flat_map(|(_, _, sec)| sec.vertices().iter().map(|v| gauge(&s.body, &s.x0, v)).collect::<Vec<_>>())
        .fold(0.0, f64::max);

    let mut rng = seeded(seed, 51);
    let mut xs: Vec<Point2> = Vec::new();
    for (y0, _, sec) in &pieces.sections {
        xs.push(*y0);
        if sec.area() > 0.0 {
            xs.extend((0..probes).map(|_| uniform_in_polygon(&sec.body, &mut rng)));
        }
    }
    let values: Vec<f64> = xs.par_iter().map(|x| delta_r(psi, x, kernel)).collect::<Result<_, _>>()?;
    let floor = t * trace / (8.0 * N * N);
    for v in &values {
        checks.pointwise_ratio = checks.pointwise_ratio.min(v / floor);
        checks.pointwise_c = checks.pointwise_c.min(v * ell * ell / t);
    }
    checks.samples = values.len();

    let bodies: Vec<Vec<Point2>> =
        pieces.sections.iter().filter(|x| x.2.area() > 0.0).map(|x| x.2.vertices().to_vec()).collect();
    let sigma_h_area = if bodies.is_empty() { 0.0 } else { polygon::union_area(&bodies) };
    let v_h_area = if w_h.is_empty() {
        cc.v_area
    } else {
        polygon::union_area(&w_h.iter().map(|w| w.vertices().to_vec()).collect::<Vec<_>>())
    };
    Ok(FattenedSets {
        h,
        h0,
        sections: pieces.sections.into_iter().map(|x| x.2).collect(),
        w_h,
        sigma_h_area,
        v_h_area,
        area_ratio: sigma_h_area / s.area(),
        skipped: pieces.skipped,
        checks,
    })
}
