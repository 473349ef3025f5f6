use serde::{Deserialize, Serialize};

use super::SectionError;
use crate::geom::cells::WINDOW_LABEL;
use crate::geom::{polygon, Point2, Polygon};
use crate::ot::PiecewiseAffineConvex;

/// `S(x0, p0, t) = {x : ψ(x) <= ψ(x0) + p0·(x − x0) + t}` as an explicit polygon.
#[derive(Clone, Debug)]
pub struct Section {
    pub x0: Point2,
    pub p0: Point2,
    pub t: f64,
    pub body: Polygon,
    /// `ψ(x0)`.
    pub base: f64,
    /// Fingerprint of the potential the section was cut from.
    pub psi_ref: u64,
}

#[derive(Serialize, Deserialize)]
struct SectionFile {
    x0: [f64; 2],
    p0: [f64; 2],
    t: f64,
    psi_ref: u64,
    vertices: Vec<[f64; 2]>,
}

impl Section {
    /// `ψ(x) − ψ(x0) − p0·(x − x0)`.
    pub fn height(&self, psi: &PiecewiseAffineConvex, x: &Point2) -> f64 {
        psi.eval(x) - self.base - self.p0.dot(&(x - self.x0))
    }

    pub fn area(&self) -> f64 {
        self.body.volume()
    }

    pub fn vertices(&self) -> &[Point2] {
        self.body.vertices()
    }

    /// `x0 + τ(S − x0)`.
    pub fn dilated(&self, tau: f64) -> Polygon {
        self.body.dilate(tau, &self.x0)
    }

    /// Smallest `s` with `S ⊂ S(x0, p0, s)`, read off the vertices.
    pub fn height_in(&self, psi: &PiecewiseAffineConvex, other_x: &Point2, other_p: &Point2) -> f64 {
        let base = psi.eval(other_x);
        self.vertices().iter().map(|v| psi.eval(v) - base - other_p.dot(&(v - other_x))).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SectionFile {
            x0: [self.x0.x, self.x0.y],
            p0: [self.p0.x, self.p0.y],
            t: self.t,
            psi_ref: self.psi_ref,
            vertices: self.vertices().iter().map(|v| [v.x, v.y]).collect(),
        })
        .expect("serializable")
    }
}

/// Vertex of `∂ψ(x)` nearest to its centroid.
pub fn default_subgradient(psi: &PiecewiseAffineConvex, x: &Point2) -> Point2 {
    let d = psi.subdifferential(x, 1e-12);
    let c = d.body.center_of_mass();
    *d.vertices().iter().min_by(|a, b| (*a - c).norm().total_cmp(&(*b - c).norm())).expect("nonempty")
}

fn level_tol(level: f64, p0: &Point2, v: &Point2) -> f64 {
    1e-11 * (1.0 + level.abs() + p0.norm() * v.norm())
}

/// Exact section by cutting planes: clip by the pieces that are maximal at violating vertices
/// until every vertex lies on or under the level.
pub fn section(psi: &PiecewiseAffineConvex, x0: Point2, p0: Point2, t: f64) -> Result<Section, SectionError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SectionError::InvalidHeight(t));
    }
    let sub = psi.subdifferential(&x0, 1e-12);
    let dist = polygon::distance_to(sub.vertices(), &p0);
    if dist > 1e-8 {
        return Err(SectionError::NotASubgradient(dist));
    }
    let base = psi.eval(&x0);
    let psi_ref = psi.fingerprint();
    if t == 0.0 {
        let pts = face(psi, &x0, &p0, &sub.pieces)?;
        let body = Polygon::from_points(&pts).expect("nonempty face");
        return Ok(Section { x0, p0, t, body, base, psi_ref });
    }
    let level = base - p0.dot(&x0) + t;
    let window = psi.window();
    let mut ring: Vec<Point2> = window.ring().to_vec();
    let mut used = vec![false; psi.len()];
    let cut = |ring: &mut Vec<Point2>, j: usize, used: &mut Vec<bool>| {
        if used[j] {
            return false;
        }
        used[j] = true;
        let n = psi.slopes()[j] - p0;
        if n.norm() == 0.0 {
            return false;
        }
        *ring = polygon::clip(ring, &n, level - psi.intercepts()[j]);
        true
    };
    for &j in &sub.pieces {
        cut(&mut ring, j, &mut used);
    }
    loop {
        let mut changed = false;
        let snapshot = ring.clone();
        for v in &snapshot {
            let (val, j) = psi.argmax(v);
            if val - p0.dot(v) > level + level_tol(level, &p0, v) {
                changed |= cut(&mut ring, j, &mut used);
            }
        }
        if !changed {
            break;
        }
    }
    let scale = 1e-12 * (1.0 + window.diameter_scale());
    if ring.iter().any(|v| window.max_violation(v) > -scale) {
        return Err(SectionError::UnboundedSection);
    }
    let body = Polygon::from_points(&ring).map_err(|_| SectionError::UnboundedSection)?;
    Ok(Section { x0, p0, t, body, base, psi_ref })
}

/// The contact face `{x : p0 ∈ ∂ψ(x)}` through `x0`.
fn face(psi: &PiecewiseAffineConvex, x0: &Point2, p0: &Point2, active: &[usize]) -> Result<Vec<Point2>, SectionError> {
    let tol = 1e-9 * (1.0 + p0.norm());
    let slopes = psi.slopes();
    let cells = psi.cells();
    if let Some(&j) = active.iter().find(|&&j| (slopes[j] - p0).norm() <= tol) {
        let c = &cells[j];
        if c.poly.is_empty() {
            return Ok(vec![*x0]);
        }
        if c.touches_window() {
            return Err(SectionError::UnboundedSection);
        }
        return Ok(c.poly.clone());
    }
    let pts: Vec<Point2> = active.iter().map(|&j| slopes[j]).collect();
    let hull = polygon::convex_hull(&pts);
    let k = hull.len();
    let on_boundary = |a: &Point2, b: &Point2| polygon::distance_to(&[*a, *b], p0) <= tol;
    let edge = match k {
        2 => Some((hull[0], hull[1])),
        k if k >= 3 => (0..k).map(|i| (hull[i], hull[(i + 1) % k])).find(|(a, b)| on_boundary(a, b)),
        _ => None,
    };
    let Some((a, b)) = edge.filter(|(a, b)| on_boundary(a, b)) else {
        return Ok(vec![*x0]);
    };
    let piece_of = |y: &Point2| active.iter().copied().find(|&j| (slopes[j] - y).norm() <= tol);
    let (Some(ja), Some(jb)) = (piece_of(&a), piece_of(&b)) else {
        return Ok(vec![*x0]);
    };
    let c = &cells[ja];
    let n = c.poly.len();
    for i in 0..n {
        if c.labels[i] == jb {
            let (p, q) = (c.poly[i], c.poly[(i + 1) % n]);
            let touches = [(i + n - 1) % n, (i + 1) % n].iter().any(|&m| c.labels[m] >= WINDOW_LABEL);
            if touches {
                return Err(SectionError::UnboundedSection);
            }
            return Ok(vec![p, q]);
        }
    }
    Ok(vec![*x0])
}
