//! Incremental convex hull in three dimensions, used for lower convex envelopes.

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

struct Face {
    v: [usize; 3],
    n: Vector3<f64>,
    d: f64,
    alive: bool,
}

fn make_face(p: &[Vector3<f64>], v: [usize; 3]) -> Option<Face> {
    let n = (p[v[1]] - p[v[0]]).cross(&(p[v[2]] - p[v[0]]));
    let len = n.norm();
    if len == 0.0 {
        return None;
    }
    let n = n / len;
    Some(Face { v, n, d: n.dot(&p[v[0]]), alive: true })
}

/// Triangles of the convex hull with outward orientation, as index triples.
pub fn convex_hull_3d(points: &[Vector3<f64>]) -> Option<Vec<[usize; 3]>> {
    let np = points.len();
    if np < 4 {
        return None;
    }
    let scale = points.iter().map(|p| p.norm()).fold(1e-300, f64::max);
    let eps = 1e-12 * scale;
    let i0 = (0..np).min_by(|&a, &b| points[a].x.total_cmp(&points[b].x))?;
    let i1 = (0..np).max_by(|&a, &b| (points[a] - points[i0]).norm().total_cmp(&(points[b] - points[i0]).norm()))?;
    let dir = (points[i1] - points[i0]).normalize();
    let line_dist = |k: usize| {
        let w = points[k] - points[i0];
        (w - dir * w.dot(&dir)).norm()
    };
    let i2 = (0..np).max_by(|&a, &b| line_dist(a).total_cmp(&line_dist(b)))?;
    if line_dist(i2) <= eps {
        return None;
    }
    let nrm = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let plane_dist = |k: usize| (points[k] - points[i0]).dot(&nrm).abs();
    let i3 = (0..np).max_by(|&a, &b| plane_dist(a).total_cmp(&plane_dist(b)))?;
    if plane_dist(i3) <= eps {
        return None;
    }
    let centroid = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    let mut faces: Vec<Face> = Vec::new();
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    let add_face = |faces: &mut Vec<Face>, edges: &mut HashMap<(usize, usize), usize>, v: [usize; 3]| {
        let mut f = make_face(points, v)?;
        if f.n.dot(&centroid) - f.d > 0.0 {
            f = make_face(points, [v[0], v[2], v[1]])?;
        }
        let id = faces.len();
        let w = f.v;
        for k in 0..3 {
            edges.insert((w[k], w[(k + 1) % 3]), id);
        }
        faces.push(f);
        Some(())
    };
    for tri in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        add_face(&mut faces, &mut edges, tri)?;
    }
    let mut order: Vec<usize> = (0..np).filter(|k| ![i0, i1, i2, i3].contains(k)).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(7));
    for k in order {
        let p = points[k];
        let visible: Vec<usize> =
            (0..faces.len()).filter(|&f| faces[f].alive && faces[f].n.dot(&p) - faces[f].d > eps).collect();
        if visible.is_empty() {
            continue;
        }
        let mut horizon = Vec::new();
        for &f in &visible {
            let v = faces[f].v;
            for e in 0..3 {
                let (a, b) = (v[e], v[(e + 1) % 3]);
                match edges.get(&(b, a)) {
                    Some(&g) if faces[g].alive && !visible.contains(&g) => horizon.push((a, b)),
                    _ => {}
                }
            }
        }
        for &f in &visible {
            faces[f].alive = false;
            let v = faces[f].v;
            for e in 0..3 {
                edges.remove(&(v[e], v[(e + 1) % 3]));
            }
        }
        for (a, b) in horizon {
            let f = make_face(points, [a, b, k])?;
            let id = faces.len();
            for (x, y) in [(a, b), (b, k), (k, a)] {
                edges.insert((x, y), id);
            }
            faces.push(f);
        }
    }
    Some(faces.into_iter().filter(|f| f.alive).map(|f| f.v).collect())
}

/// Lower facets (outward normal pointing to negative `z`) of the hull of lifted points.
pub fn lower_hull(points: &[Vector3<f64>]) -> Option<Vec<[usize; 3]>> {
    let tris = convex_hull_3d(points)?;
    Some(
        tris.into_iter()
            .filter(|t| {
                let n = (points[t[1]] - points[t[0]]).cross(&(points[t[2]] - points[t[0]]));
                n.z < -1e-14 * n.norm()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_hull_has_twelve_triangles() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Vector3::new(x, y, z));
                }
            }
        }
        pts.push(Vector3::new(0.5, 0.5, 0.5));
        let h = convex_hull_3d(&pts).unwrap();
        assert_eq!(h.len(), 12);
        let low = lower_hull(&pts).unwrap();
        assert_eq!(low.len(), 2);
    }

    #[test]
    fn paraboloid_lower_hull_covers_all_points() {
        let mut pts = Vec::new();
        for i in 0..7 {
            for j in 0..7 {
                let x = i as f64 * 0.3 + 0.01 * j as f64;
                let y = j as f64 * 0.3;
                pts.push(Vector3::new(x, y, x * x + y * y));
            }
        }
        let low = lower_hull(&pts).unwrap();
        let mut used = vec![false; pts.len()];
        for t in &low {
            for &v in t {
                used[v] = true;
            }
        }
        assert!(used.iter().all(|u| *u));
        let area: f64 =
            low.iter().map(|t| 0.5 * (pts[t[1]] - pts[t[0]]).xy().perp(&(pts[t[2]] - pts[t[0]]).xy()).abs()).sum();
        let hull2: Vec<_> = pts.iter().map(|p| p.xy()).collect();
        let a2 = crate::geom::polygon::area(&crate::geom::polygon::convex_hull(&hull2));
        assert!((area - a2).abs() < 1e-12);
    }
}
