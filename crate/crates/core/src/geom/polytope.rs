use nalgebra::{SVector, Vector3};
use std::collections::VecDeque;

use super::ball::min_enclosing_ball;
use super::lp::{maximize, LpOutcome};
use super::polygon;
use super::{GeomError, Point2};

/// `normal·x <= offset`, stored with a unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Halfspace<const D: usize> {
    pub normal: SVector<f64, D>,
    pub offset: f64,
}

impl<const D: usize> Halfspace<D> {
    /// Normalizes the normal; fails on a zero normal.
    pub fn new(normal: SVector<f64, D>, offset: f64) -> Result<Self, GeomError> {
        let len = normal.norm();
        if !(len > 0.0) || !offset.is_finite() {
            return Err(GeomError::InvalidHalfspace);
        }
        Ok(Self { normal: normal / len, offset: offset / len })
    }

    pub fn violation(&self, x: &SVector<f64, D>) -> f64 {
        self.normal.dot(x) - self.offset
    }

    pub fn tolerance(&self) -> f64 {
        1e-9 * (1.0 + self.offset.abs())
    }
}

/// Bounded convex polytope carrying both its halfspace and vertex descriptions.
#[derive(Clone, Debug)]
pub struct ConvexPolytope<const D: usize = 2> {
    halfspaces: Vec<Halfspace<D>>,
    vertices: Vec<SVector<f64, D>>,
    center_of_mass: SVector<f64, D>,
    volume: f64,
}

pub type Polygon = ConvexPolytope<2>;

/// Inner and outer radii with witness centers.
#[derive(Clone, Copy, Debug)]
pub struct RadiusPair<const D: usize = 2> {
    pub inner: f64,
    pub outer: f64,
    pub inner_center: SVector<f64, D>,
    pub outer_center: SVector<f64, D>,
}

impl<const D: usize> ConvexPolytope<D> {
    pub fn dim(&self) -> usize {
        D
    }

    pub fn halfspaces(&self) -> &[Halfspace<D>] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[SVector<f64, D>] {
        &self.vertices
    }

    pub fn center_of_mass(&self) -> SVector<f64, D> {
        self.center_of_mass
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn is_degenerate(&self) -> bool {
        self.volume <= 0.0
    }

    pub fn contains_point(&self, x: &SVector<f64, D>, slack: f64) -> bool {
        self.halfspaces.iter().all(|h| h.violation(x) <= slack)
    }

    /// Largest halfspace violation of `x` (negative inside).
    pub fn max_violation(&self, x: &SVector<f64, D>) -> f64 {
        self.halfspaces.iter().map(|h| h.violation(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn diameter_scale(&self) -> f64 {
        let c = self.center_of_mass;
        self.vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
    }

    /// Every vertex of `inner` satisfies every halfspace of `self` with additive slack.
    pub fn contains(&self, inner: &ConvexPolytope<D>, slack: f64) -> bool {
        inner.vertices.iter().all(|v| self.contains_point(v, slack))
    }

    /// `{about + γ(x − about)}`.
    pub fn dilate(&self, gamma: f64, about: &SVector<f64, D>) -> ConvexPolytope<D> {
        assert!(gamma > 0.0, "dilation factor must be positive");
        let halfspaces = self
            .halfspaces
            .iter()
            .map(|h| Halfspace { normal: h.normal, offset: gamma * h.offset + (1.0 - gamma) * h.normal.dot(about) })
            .collect();
        let vertices = self.vertices.iter().map(|v| about + (v - about) * gamma).collect();
        ConvexPolytope {
            halfspaces,
            vertices,
            center_of_mass: about + (self.center_of_mass - about) * gamma,
            volume: self.volume * gamma.powi(D as i32),
        }
    }

    pub fn dilate_about_center(&self, gamma: f64) -> ConvexPolytope<D> {
        let c = self.center_of_mass;
        self.dilate(gamma, &c)
    }

    pub fn translate(&self, v: &SVector<f64, D>) -> ConvexPolytope<D> {
        ConvexPolytope {
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| Halfspace { normal: h.normal, offset: h.offset + h.normal.dot(v) })
                .collect(),
            vertices: self.vertices.iter().map(|p| p + v).collect(),
            center_of_mass: self.center_of_mass + v,
            volume: self.volume,
        }
    }

    /// Chebyshev center (largest inscribed ball) and minimum enclosing ball.
    pub fn radii(&self) -> RadiusPair<D> {
        let ball = min_enclosing_ball(&self.vertices);
        let (inner, inner_center) = self.chebyshev_ball();
        RadiusPair { inner, outer: ball.radius, inner_center, outer_center: ball.center }
    }

    pub fn inner_radius(&self) -> f64 {
        self.chebyshev_ball().0
    }

    pub fn outer_radius(&self) -> f64 {
        min_enclosing_ball(&self.vertices).radius
    }

    fn chebyshev_ball(&self) -> (f64, SVector<f64, D>) {
        if self.is_degenerate() {
            return (0.0, self.center_of_mass);
        }
        let g = self.center_of_mass;
        let a: Vec<Vec<f64>> = self
            .halfspaces
            .iter()
            .map(|h| {
                let mut row: Vec<f64> = h.normal.iter().copied().collect();
                row.push(1.0);
                row
            })
            .collect();
        let b: Vec<f64> = self.halfspaces.iter().map(|h| (h.offset - h.normal.dot(&g)).max(0.0)).collect();
        let mut c = vec![0.0; D];
        c.push(1.0);
        match maximize(&c, &a, &b) {
            LpOutcome::Optimal { x, .. } => {
                let mut center = g;
                for k in 0..D {
                    center[k] += x[k];
                }
                (x[D].max(0.0), center)
            }
            _ => (0.0, g),
        }
    }

    fn polar_halfspaces(&self, x0: &SVector<f64, D>) -> Result<Vec<Halfspace<D>>, GeomError> {
        let scale = 1.0 + self.diameter_scale();
        let depth = -self.max_violation(x0);
        if self.is_degenerate() || depth <= 1e-12 * scale {
            return Err(GeomError::PolarUnbounded);
        }
        self.vertices.iter().map(|v| Halfspace::new(v - x0, 1.0)).collect()
    }

    fn validate_vertices(&self) -> bool {
        self.vertices.iter().all(|v| self.halfspaces.iter().all(|h| h.violation(v) <= h.tolerance() * (1.0 + v.norm())))
    }
}

impl ConvexPolytope<2> {
    /// Halfplane intersection (angular sort and deque sweep); redundant halfplanes are pruned.
    pub fn from_halfspaces(hs: &[Halfspace<2>]) -> Result<Self, GeomError> {
        if hs.is_empty() {
            return Err(GeomError::NoHalfspaces);
        }
        let mut lines: Vec<(Halfspace<2>, bool)> = Vec::with_capacity(hs.len() + 4);
        let mut scale = 1.0_f64;
        for h in hs {
            let h = Halfspace::new(h.normal, h.offset)?;
            scale = scale.max(h.offset.abs());
            lines.push((h, false));
        }
        let big = 1e7 * scale;
        for n in [Point2::new(1.0, 0.0), Point2::new(0.0, 1.0), Point2::new(-1.0, 0.0), Point2::new(0.0, -1.0)] {
            lines.push((Halfspace { normal: n, offset: big }, true));
        }
        let tol = 1e-12 * scale;
        let angle = |h: &Halfspace<2>| (h.normal.y + 0.0).atan2(h.normal.x + 0.0);
        lines.sort_by(|a, b| angle(&a.0).total_cmp(&angle(&b.0)).then(a.0.offset.total_cmp(&b.0.offset)));
        // keep the tightest among equal directions
        let mut uniq: Vec<(Halfspace<2>, bool)> = Vec::with_capacity(lines.len());
        for l in lines {
            if let Some(last) = uniq.last() {
                if (angle(&last.0) - angle(&l.0)).abs() < 1e-15 || (last.0.normal - l.0.normal).norm() < 1e-15 {
                    continue;
                }
            }
            uniq.push(l);
        }
        let meet = |a: &Halfspace<2>, b: &Halfspace<2>| -> Option<Point2> {
            let det = polygon::cross(&a.normal, &b.normal);
            if det.abs() < 1e-14 {
                return None;
            }
            Some(Point2::new(
                (a.offset * b.normal.y - b.offset * a.normal.y) / det,
                (a.normal.x * b.offset - b.normal.x * a.offset) / det,
            ))
        };
        let outside = |h: &Halfspace<2>, p: &Point2| h.violation(p) > tol;
        let mut dq: VecDeque<(Halfspace<2>, bool)> = VecDeque::with_capacity(uniq.len());
        for l in uniq {
            while dq.len() >= 2 {
                let n = dq.len();
                match meet(&dq[n - 2].0, &dq[n - 1].0) {
                    Some(p) if !outside(&l.0, &p) => break,
                    _ => {
                        dq.pop_back();
                    }
                }
            }
            while dq.len() >= 2 {
                match meet(&dq[0].0, &dq[1].0) {
                    Some(p) if !outside(&l.0, &p) => break,
                    _ => {
                        dq.pop_front();
                    }
                }
            }
            if let Some(back) = dq.back() {
                if polygon::cross(&back.0.normal, &l.0.normal) <= 1e-14 {
                    return Err(GeomError::EmptyIntersection);
                }
            }
            dq.push_back(l);
        }
        while dq.len() >= 3 {
            let n = dq.len();
            match meet(&dq[n - 2].0, &dq[n - 1].0) {
                Some(p) if !outside(&dq[0].0, &p) => break,
                _ => {
                    dq.pop_back();
                }
            }
        }
        while dq.len() >= 3 {
            match meet(&dq[0].0, &dq[1].0) {
                Some(p) if !outside(&dq[dq.len() - 1].0, &p) => break,
                _ => {
                    dq.pop_front();
                }
            }
        }
        if dq.len() < 3 {
            return Err(GeomError::EmptyIntersection);
        }
        let n = dq.len();
        if polygon::cross(&dq[n - 1].0.normal, &dq[0].0.normal) <= 1e-14 {
            return Err(GeomError::EmptyIntersection);
        }
        let mut verts = Vec::with_capacity(n);
        for i in 0..n {
            match meet(&dq[i].0, &dq[(i + 1) % n].0) {
                Some(p) => verts.push(p),
                None => return Err(GeomError::EmptyIntersection),
            }
        }
        // vertex i is where line i ends and line i+1 begins; drop lines with zero-length edges
        let vscale = verts.iter().map(|p| p.norm()).fold(1.0, f64::max);
        let mut kept_lines = Vec::with_capacity(n);
        let mut kept_verts = Vec::with_capacity(n);
        for i in 0..n {
            let start = verts[(i + n - 1) % n];
            let end = verts[i];
            if (end - start).norm() > 1e-13 * vscale {
                kept_lines.push(dq[i]);
                kept_verts.push(end);
            }
        }
        if kept_lines.len() < 3 {
            return Err(GeomError::EmptyIntersection);
        }
        if kept_lines.iter().any(|l| l.1) {
            return Err(GeomError::Unbounded);
        }
        let area = polygon::signed_area(&kept_verts);
        if !(area > 1e-13 * vscale * vscale) {
            return Err(GeomError::EmptyIntersection);
        }
        let center_of_mass = polygon::centroid(&kept_verts);
        Ok(ConvexPolytope {
            halfspaces: kept_lines.into_iter().map(|l| l.0).collect(),
            vertices: kept_verts,
            center_of_mass,
            volume: area,
        })
    }

    /// Convex hull of points; collinear or repeated input gives a zero-area body.
    pub fn from_points(points: &[Point2]) -> Result<Self, GeomError> {
        if points.is_empty() {
            return Err(GeomError::EmptyIntersection);
        }
        let hull = polygon::convex_hull(points);
        let area = polygon::signed_area(&hull);
        let scale = hull.iter().map(|p| p.norm()).fold(1.0, f64::max);
        if hull.len() >= 3 && area > 1e-14 * scale * scale {
            let halfspaces =
                polygon::edges_halfplanes(&hull).into_iter().map(|(n, b)| Halfspace { normal: n, offset: b }).collect();
            let center_of_mass = polygon::centroid(&hull);
            return Ok(ConvexPolytope { halfspaces, vertices: hull, center_of_mass, volume: area });
        }
        Ok(Self::degenerate(points))
    }

    fn degenerate(points: &[Point2]) -> Self {
        // a point or a segment: extreme pair along the widest direction
        let mut a = points[0];
        let mut b = points[0];
        for p in points {
            if (p - a).norm() > (b - a).norm() {
                b = *p;
            }
        }
        for p in points {
            if (p - b).norm() > (a - b).norm() {
                a = *p;
            }
        }
        let d = b - a;
        if d.norm() == 0.0 {
            let hs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
                .map(|(x, y)| Point2::new(x, y))
                .into_iter()
                .map(|n| Halfspace { normal: n, offset: n.dot(&a) })
                .collect();
            return ConvexPolytope { halfspaces: hs, vertices: vec![a], center_of_mass: a, volume: 0.0 };
        }
        let u = d / d.norm();
        let n = Point2::new(-u.y, u.x);
        let hs = vec![
            Halfspace { normal: n, offset: n.dot(&a) },
            Halfspace { normal: -n, offset: -n.dot(&a) },
            Halfspace { normal: u, offset: u.dot(&b) },
            Halfspace { normal: -u, offset: -u.dot(&a) },
        ];
        ConvexPolytope { halfspaces: hs, vertices: vec![a, b], center_of_mass: 0.5 * (a + b), volume: 0.0 }
    }

    /// Axis-aligned rectangle.
    pub fn rectangle(lo: Point2, hi: Point2) -> Self {
        Self::from_points(&[lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)]).expect("nonempty rectangle")
    }

    /// Regular polygon with `k` vertices inscribed in the circle of radius `r`.
    pub fn regular(center: Point2, r: f64, k: usize) -> Self {
        let pts: Vec<Point2> = (0..k)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                center + Point2::new(a.cos(), a.sin()) * r
            })
            .collect();
        Self::from_points(&pts).expect("regular polygon")
    }

    /// `(K − x0)° = {z : z·(v − x0) <= 1 for all vertices v}`.
    pub fn polar_body(&self, x0: &Point2) -> Result<Self, GeomError> {
        let hs = self.polar_halfspaces(x0)?;
        Self::from_halfspaces(&hs)
    }

    /// Counter-clockwise vertex ring.
    pub fn ring(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let p = polygon::intersection(&self.vertices, &other.vertices);
        Self::from_points(&p).ok().filter(|_| !p.is_empty())
    }

    pub fn is_valid(&self) -> bool {
        self.validate_vertices()
    }
}

impl ConvexPolytope<3> {
    /// Vertex enumeration by triple intersections, after LP checks of feasibility and boundedness.
    pub fn from_halfspaces(hs: &[Halfspace<3>]) -> Result<Self, GeomError> {
        if hs.is_empty() {
            return Err(GeomError::NoHalfspaces);
        }
        let hs: Vec<Halfspace<3>> = hs.iter().map(|h| Halfspace::new(h.normal, h.offset)).collect::<Result<_, _>>()?;
        let a: Vec<Vec<f64>> = hs.iter().map(|h| h.normal.iter().copied().collect()).collect();
        let b: Vec<f64> = hs.iter().map(|h| h.offset).collect();
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut c = vec![0.0; 3];
                c[k] = s;
                match maximize(&c, &a, &b) {
                    LpOutcome::Infeasible => return Err(GeomError::EmptyIntersection),
                    LpOutcome::Unbounded => return Err(GeomError::Unbounded),
                    LpOutcome::Optimal { .. } => {}
                }
            }
        }
        let scale = b.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
        let tol = 1e-10 * scale;
        let m = hs.len();
        let mut verts: Vec<Vector3<f64>> = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    let mat = nalgebra::Matrix3::from_rows(&[
                        hs[i].normal.transpose(),
                        hs[j].normal.transpose(),
                        hs[k].normal.transpose(),
                    ]);
                    if mat.determinant().abs() < 1e-12 {
                        continue;
                    }
                    let Some(x) = mat.lu().solve(&Vector3::new(hs[i].offset, hs[j].offset, hs[k].offset)) else {
                        continue;
                    };
                    if hs.iter().all(|h| h.violation(&x) <= tol)
                        && !verts.iter().any(|v| (v - x).norm() <= 1e-9 * scale)
                    {
                        verts.push(x);
                    }
                }
            }
        }
        if verts.len() < 4 {
            return Err(GeomError::EmptyIntersection);
        }
        let interior = verts.iter().sum::<Vector3<f64>>() / verts.len() as f64;
        let mut volume = 0.0;
        let mut moment = Vector3::zeros();
        let mut kept = Vec::new();
        for h in &hs {
            let on: Vec<Vector3<f64>> =
                verts.iter().copied().filter(|v| h.violation(v).abs() <= 1e-9 * scale).collect();
            if on.len() < 3 {
                continue;
            }
            let fc = on.iter().sum::<Vector3<f64>>() / on.len() as f64;
            let e1 = (on
                .iter()
                .map(|v| v - fc)
                .fold(Vector3::zeros(), |a: Vector3<f64>, d| if d.norm() > a.norm() { d } else { a }))
            .normalize();
            let e2 = h.normal.cross(&e1);
            let mut ring = on.clone();
            ring.sort_by(|p, q| {
                let ap = (p - fc).dot(&e2).atan2((p - fc).dot(&e1));
                let aq = (q - fc).dot(&e2).atan2((q - fc).dot(&e1));
                ap.total_cmp(&aq)
            });
            let mut facet_area = 0.0;
            for t in 0..ring.len() {
                let p = ring[t];
                let q = ring[(t + 1) % ring.len()];
                let tri = 0.5 * (p - fc).cross(&(q - fc)).dot(&h.normal);
                facet_area += tri;
                // tetrahedron (interior, fc, p, q)
                let tv = (fc - interior).dot(&(p - interior).cross(&(q - interior))).abs() / 6.0;
                volume += tv;
                moment += tv * (interior + fc + p + q) / 4.0;
            }
            if facet_area > 1e-14 * scale * scale {
                kept.push(*h);
            }
        }
        if !(volume > 1e-14 * scale.powi(3)) {
            return Err(GeomError::EmptyIntersection);
        }
        Ok(ConvexPolytope { halfspaces: kept, vertices: verts, center_of_mass: moment / volume, volume })
    }

    pub fn polar_body(&self, x0: &Vector3<f64>) -> Result<Self, GeomError> {
        let hs = self.polar_halfspaces(x0)?;
        Self::from_halfspaces(&hs)
    }

    pub fn cube(h: f64) -> Self {
        let mut hs = Vec::new();
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut n = Vector3::zeros();
                n[k] = s;
                hs.push(Halfspace { normal: n, offset: h });
            }
        }
        Self::from_halfspaces(&hs).expect("cube")
    }
}
