use serde::{Deserialize, Serialize};
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use super::Duals;
use crate::geom::cells::{max_affine_cells, Cell, WINDOW_LABEL};
use crate::geom::{polygon, Point2, Polygon};
use crate::measures::DiscreteMeasure;

/// Bucket grid listing, per bucket, the pieces whose cells meet it.
#[derive(Clone, Debug)]
struct Locator {
    lo: Point2,
    hi: Point2,
    step: Point2,
    nb: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn new(cells: &[Cell], lo: Point2, hi: Point2) -> Self {
        let live = cells.iter().filter(|c| !c.poly.is_empty()).count().max(1);
        let nb = ((live as f64).sqrt().ceil() as usize).clamp(1, 256);
        let step = (hi - lo) / nb as f64;
        let mut buckets = vec![Vec::new(); nb * nb];
        for (j, c) in cells.iter().enumerate() {
            if c.poly.is_empty() {
                continue;
            }
            let (clo, chi) = c.poly.iter().fold((c.poly[0], c.poly[0]), |(a, b), p| (a.inf(p), b.sup(p)));
            let (x0, y0) = Self::key_of(lo, step, nb, &clo);
            let (x1, y1) = Self::key_of(lo, step, nb, &chi);
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    buckets[by * nb + bx].push(j as u32);
                }
            }
        }
        Locator { lo, hi, step, nb, buckets }
    }

    fn key_of(lo: Point2, step: Point2, nb: usize, p: &Point2) -> (usize, usize) {
        let fx = ((p.x - lo.x) / step.x).floor().max(0.0) as usize;
        let fy = ((p.y - lo.y) / step.y).floor().max(0.0) as usize;
        (fx.min(nb - 1), fy.min(nb - 1))
    }

    fn candidates(&self, x: &Point2) -> Option<&[u32]> {
        if x.x < self.lo.x || x.y < self.lo.y || x.x > self.hi.x || x.y > self.hi.y {
            return None;
        }
        let (bx, by) = Self::key_of(self.lo, self.step, self.nb, x);
        Some(&self.buckets[by * self.nb + bx])
    }

    /// Pieces whose cells may meet the box `[a, b]`.
    fn candidates_in_box(&self, a: &Point2, b: &Point2) -> Vec<u32> {
        let (x0, y0) = Self::key_of(self.lo, self.step, self.nb, a);
        let (x1, y1) = Self::key_of(self.lo, self.step, self.nb, b);
        let mut out = Vec::new();
        for by in y0..=y1 {
            for bx in x0..=x1 {
                out.extend_from_slice(&self.buckets[by * self.nb + bx]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Vertex of the diagram where at least three pieces are simultaneously maximal.
#[derive(Clone, Debug)]
pub struct DiagramVertex {
    pub point: Point2,
    pub pieces: Vec<usize>,
}

/// Common edge of two cells.
#[derive(Clone, Debug)]
pub struct DiagramEdge {
    pub a: Point2,
    pub b: Point2,
    pub pieces: (usize, usize),
}

/// `ψ(x) = max_j (x·y_j + b_j)` with its cells over a trusted window.
#[derive(Clone, Debug)]
pub struct PiecewiseAffineConvex {
    slopes: Vec<Point2>,
    intercepts: Vec<f64>,
    /// Index of each piece in the list it was built from.
    origin: Vec<usize>,
    window: Polygon,
    cells: Vec<Cell>,
    locator: Locator,
}

#[derive(Serialize, Deserialize)]
struct PwacFile {
    slopes: Vec<[f64; 2]>,
    intercepts: Vec<f64>,
}

/// `conv` of the slopes of pieces active at a point.
#[derive(Clone, Debug)]
pub struct SubdifferentialSet {
    pub at: Point2,
    pub body: Polygon,
    /// Active pieces.
    pub pieces: Vec<usize>,
}

impl SubdifferentialSet {
    pub fn vertices(&self) -> &[Point2] {
        self.body.vertices()
    }

    pub fn is_singleton(&self) -> bool {
        self.body.vertices().len() == 1
    }
}

fn window_box(domain: &Polygon, margin: f64) -> Polygon {
    let v = domain.vertices();
    let (lo, hi) = v.iter().fold((v[0], v[0]), |(a, b), p| (a.inf(p), b.sup(p)));
    let m = Point2::new(margin, margin);
    Polygon::rectangle(lo - m, hi + m)
}

/// Default trusted window: the bounding box of `domain` enlarged by its diameter.
pub fn trust_window(domain: &Polygon) -> Polygon {
    window_box(domain, domain.diameter_scale())
}

impl PiecewiseAffineConvex {
    /// All pieces kept, including those with empty cells.
    pub fn new(slopes: Vec<Point2>, intercepts: Vec<f64>, window: Polygon) -> Self {
        assert_eq!(slopes.len(), intercepts.len());
        assert!(!slopes.is_empty());
        let origin = (0..slopes.len()).collect();
        Self::assemble(slopes, intercepts, origin, window)
    }

    fn assemble(slopes: Vec<Point2>, intercepts: Vec<f64>, origin: Vec<usize>, window: Polygon) -> Self {
        let phi: Vec<f64> = intercepts.iter().map(|b| -b).collect();
        let cells = max_affine_cells(&slopes, &phi, window.ring());
        let v = window.vertices();
        let (lo, hi) = v.iter().fold((v[0], v[0]), |(a, b), p| (a.inf(p), b.sup(p)));
        let locator = Locator::new(&cells, lo, hi);
        PiecewiseAffineConvex { slopes, intercepts, origin, window, cells, locator }
    }

    /// Drops pieces whose cell area is below `min_area`.
    pub fn pruned(&self, min_area: f64) -> Self {
        let keep: Vec<usize> =
            (0..self.len()).filter(|&j| self.cells[j].area() >= min_area && !self.cells[j].poly.is_empty()).collect();
        let keep = if keep.is_empty() { vec![self.argmax(&self.window.center_of_mass()).1] } else { keep };
        Self::assemble(
            keep.iter().map(|&j| self.slopes[j]).collect(),
            keep.iter().map(|&j| self.intercepts[j]).collect(),
            keep.iter().map(|&j| self.origin[j]).collect(),
            self.window.clone(),
        )
    }

    /// Kantorovich potential from cost duals: `ψ*(y_j) = (|y_j|² − φ_j)/2`.
    pub fn from_duals(phi: &[f64], targets: &[Point2], window: Polygon) -> Self {
        let intercepts = targets.iter().zip(phi).map(|(y, p)| -0.5 * (y.norm_squared() - p)).collect();
        Self::new(targets.to_vec(), intercepts, window)
    }

    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    pub fn slopes(&self) -> &[Point2] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn window(&self) -> &Polygon {
        &self.window
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn piece(&self, j: usize, x: &Point2) -> f64 {
        x.dot(&self.slopes[j]) + self.intercepts[j]
    }

    /// Value and a maximizing piece.
    pub fn argmax(&self, x: &Point2) -> (f64, usize) {
        let scan = |it: &mut dyn Iterator<Item = usize>| {
            let mut best = (f64::NEG_INFINITY, 0);
            for j in it {
                let v = self.piece(j, x);
                if v > best.0 {
                    best = (v, j);
                }
            }
            best
        };
        match self.locator.candidates(x) {
            Some(c) if !c.is_empty() => scan(&mut c.iter().map(|&j| j as usize)),
            _ => scan(&mut (0..self.len())),
        }
    }

    pub fn eval(&self, x: &Point2) -> f64 {
        self.argmax(x).0
    }

    /// Pieces whose cells may meet the box `[a, b]` (all pieces outside the window).
    pub fn pieces_near(&self, a: &Point2, b: &Point2) -> Vec<usize> {
        let v = self.window.vertices();
        let (lo, hi) = v.iter().fold((v[0], v[0]), |(p, q), w| (p.inf(w), q.sup(w)));
        if a.x < lo.x || a.y < lo.y || b.x > hi.x || b.y > hi.y {
            return (0..self.len()).collect();
        }
        self.locator.candidates_in_box(a, b).into_iter().map(|j| j as usize).collect()
    }

    /// Pieces within `tol` of the maximum at `x`.
    pub fn active(&self, x: &Point2, tol: f64) -> Vec<usize> {
        let v = self.eval(x);
        let tol = tol.max(1e-13 * (1.0 + v.abs()));
        (0..self.len()).filter(|&j| self.piece(j, x) >= v - tol).collect()
    }

    /// `∂ψ(x)` as the hull of the active slopes.
    pub fn subdifferential(&self, x: &Point2, tol: f64) -> SubdifferentialSet {
        let pieces = self.active(x, tol);
        let pts: Vec<Point2> = pieces.iter().map(|&j| self.slopes[j]).collect();
        let body = Polygon::from_points(&pts).expect("nonempty slope set");
        SubdifferentialSet { at: *x, body, pieces }
    }

    /// Hash of the pieces, stable within a build.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (y, b) in self.slopes.iter().zip(&self.intercepts) {
            y.x.to_bits().hash(&mut h);
            y.y.to_bits().hash(&mut h);
            b.to_bits().hash(&mut h);
        }
        h.finish()
    }

    /// Lipschitz constant `max_j |y_j|`.
    pub fn lipschitz(&self) -> f64 {
        self.slopes.iter().map(|y| y.norm()).fold(0.0, f64::max)
    }

    /// Interior diagram vertices (not on the window boundary).
    pub fn diagram_vertices(&self) -> Vec<DiagramVertex> {
        let scale = self.window.diameter_scale().max(1e-300);
        let key = |p: &Point2| ((p.x / (1e-9 * scale)).round() as i64, (p.y / (1e-9 * scale)).round() as i64);
        let mut map: HashMap<(i64, i64), usize> = HashMap::new();
        let mut out: Vec<DiagramVertex> = Vec::new();
        for (j, c) in self.cells.iter().enumerate() {
            let k = c.poly.len();
            for i in 0..k {
                let before = c.labels[(i + k - 1) % k];
                let after = c.labels[i];
                if before >= WINDOW_LABEL || after >= WINDOW_LABEL {
                    continue;
                }
                let p = c.poly[i];
                let slot = *map.entry(key(&p)).or_insert_with(|| {
                    out.push(DiagramVertex { point: p, pieces: Vec::new() });
                    out.len() - 1
                });
                for q in [j, before, after] {
                    if !out[slot].pieces.contains(&q) {
                        out[slot].pieces.push(q);
                    }
                }
            }
        }
        for v in &mut out {
            v.pieces.sort_unstable();
        }
        out
    }

    /// Interior diagram edges, each listed once.
    pub fn diagram_edges(&self) -> Vec<DiagramEdge> {
        let mut out = Vec::new();
        for (j, c) in self.cells.iter().enumerate() {
            let k = c.poly.len();
            for i in 0..k {
                let l = c.labels[i];
                if l < WINDOW_LABEL && l > j {
                    out.push(DiagramEdge { a: c.poly[i], b: c.poly[(i + 1) % k], pieces: (j, l) });
                }
            }
        }
        out
    }

    /// Distributional Laplacian mass inside `region`: `Σ_edges |y_j − y_k| · length(edge ∩ region)`.
    pub fn edge_jump_mass(&self, region: &Polygon) -> f64 {
        let hp = polygon::edges_halfplanes(region.ring());
        self.diagram_edges()
            .iter()
            .map(|e| {
                let (mut s0, mut s1) = (0.0_f64, 1.0_f64);
                let d = e.b - e.a;
                for (n, b) in &hp {
                    let fa = n.dot(&e.a) - b;
                    let fd = n.dot(&d);
                    if fd.abs() < 1e-300 {
                        if fa > 0.0 {
                            return 0.0;
                        }
                        continue;
                    }
                    let s = -fa / fd;
                    if fd > 0.0 {
                        s1 = s1.min(s);
                    } else {
                        s0 = s0.max(s);
                    }
                }
                let len = (s1 - s0).max(0.0) * d.norm();
                len * (self.slopes[e.pieces.0] - self.slopes[e.pieces.1]).norm()
            })
            .sum()
    }

    /// Vertices of the cells clipped to `domain`, deduplicated.
    pub fn clipped_vertices(&self, domain: &Polygon) -> Vec<Point2> {
        let scale = domain.diameter_scale().max(1e-300);
        let key = |p: &Point2| ((p.x / (1e-10 * scale)).round() as i64, (p.y / (1e-10 * scale)).round() as i64);
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for c in &self.cells {
            if c.poly.is_empty() {
                continue;
            }
            for p in polygon::intersection(&c.poly, domain.ring()) {
                if seen.insert(key(&p), ()).is_none() {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PwacFile {
            slopes: self.slopes.iter().map(|p| [p.x, p.y]).collect(),
            intercepts: self.intercepts.clone(),
        })
        .expect("serializable")
    }

    pub fn from_json(s: &str, window: Polygon) -> Result<Self, serde_json::Error> {
        let f: PwacFile = serde_json::from_str(s)?;
        Ok(Self::new(f.slopes.iter().map(|p| Point2::new(p[0], p[1])).collect(), f.intercepts, window))
    }
}

/// Potential from solver duals, pruned of pieces whose cells have area below `1e-12·|Ω|`.
pub fn build_potential(duals: &Duals, nu: &DiscreteMeasure, omega: &Polygon) -> PiecewiseAffineConvex {
    PiecewiseAffineConvex::from_duals(&duals.phi, nu.points(), trust_window(omega)).pruned(1e-12 * omega.volume())
}

/// `ψ*(z) = sup_{x ∈ domain} (x·z − ψ(x))`, one piece per vertex of the clipped cells.
pub fn legendre(psi: &PiecewiseAffineConvex, domain: &Polygon) -> PiecewiseAffineConvex {
    let verts = psi.clipped_vertices(domain);
    let intercepts: Vec<f64> = verts.iter().map(|v| -psi.eval(v)).collect();
    let hull = Polygon::from_points(psi.slopes()).expect("slopes");
    let margin = hull.diameter_scale().max(1.0);
    PiecewiseAffineConvex::new(verts, intercepts, window_box(&hull, margin))
}
