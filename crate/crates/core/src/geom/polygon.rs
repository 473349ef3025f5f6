//! Planar polygon kernels: clipping, hulls, areas, unions and disk moments.

use super::Point2;
use std::f64::consts::PI;

#[inline]
pub fn cross(a: &Point2, b: &Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let o = poly[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += cross(&(poly[i] - o), &(poly[i + 1] - o));
    }
    0.5 * s
}

pub fn area(poly: &[Point2]) -> f64 {
    signed_area(poly).abs()
}

/// Area centroid; falls back to the vertex mean for degenerate input.
pub fn centroid(poly: &[Point2]) -> Point2 {
    let n = poly.len();
    if n == 0 {
        return Point2::zeros();
    }
    let o = poly[0];
    let mut a = 0.0;
    let mut c = Point2::zeros();
    for i in 1..n.saturating_sub(1) {
        let p = poly[i] - o;
        let q = poly[i + 1] - o;
        let w = cross(&p, &q);
        a += w;
        c += (p + q) * w;
    }
    let scale = poly.iter().map(|p| (p - o).norm()).fold(0.0, f64::max);
    if a.abs() <= 1e-14 * scale * scale || a == 0.0 {
        return poly.iter().sum::<Point2>() / n as f64;
    }
    o + c / (3.0 * a)
}

/// Andrew's monotone chain; counter-clockwise, no repeated or collinear points.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() <= 1e-15 * (1.0 + a.norm()));
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let tol = 1e-14 * scale * scale;
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&(lower[lower.len() - 1] - lower[lower.len() - 2]), &(p - lower[lower.len() - 2])) <= tol
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&(upper[upper.len() - 1] - upper[upper.len() - 2]), &(p - upper[upper.len() - 2])) <= tol
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() == 2 && (lower[0] - lower[1]).norm() == 0.0 {
        lower.pop();
    }
    lower
}

/// Keeps the part of a convex polygon with `n·x <= b`.
pub fn clip(poly: &[Point2], n: &Point2, b: f64) -> Vec<Point2> {
    let k = poly.len();
    let mut out = Vec::with_capacity(k + 1);
    for i in 0..k {
        let p = poly[i];
        let q = poly[(i + 1) % k];
        let sp = n.dot(&p) - b;
        let sq = n.dot(&q) - b;
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let s = sp / (sp - sq);
            out.push(p + (q - p) * s);
        }
    }
    out
}

/// Clipping that carries a label per edge; `labels[i]` names the edge from vertex i to i+1.
pub fn clip_labeled(poly: &[Point2], labels: &[usize], n: &Point2, b: f64, label: usize) -> (Vec<Point2>, Vec<usize>) {
    let k = poly.len();
    let mut out = Vec::with_capacity(k + 1);
    let mut out_labels = Vec::with_capacity(k + 1);
    for i in 0..k {
        let p = poly[i];
        let q = poly[(i + 1) % k];
        let sp = n.dot(&p) - b;
        let sq = n.dot(&q) - b;
        if sp <= 0.0 {
            out.push(p);
            if sq <= 0.0 {
                out_labels.push(labels[i]);
            } else {
                let s = sp / (sp - sq);
                out.push(p + (q - p) * s);
                out_labels.push(labels[i]);
                out_labels.push(label);
            }
        } else if sq < 0.0 {
            let s = sp / (sp - sq);
            out.push(p + (q - p) * s);
            out_labels.push(labels[i]);
        }
    }
    // drop zero-length edges
    let m = out.len();
    if m >= 2 {
        let scale = out.iter().map(|p| p.norm()).fold(1.0, f64::max);
        let mut pts = Vec::with_capacity(m);
        let mut lab = Vec::with_capacity(m);
        for i in 0..m {
            let j = (i + 1) % m;
            if (out[j] - out[i]).norm() > 1e-15 * scale || m <= 2 {
                pts.push(out[i]);
                lab.push(out_labels[i]);
            }
        }
        return (pts, lab);
    }
    (out, out_labels)
}

/// Outward halfplanes `(n, b)` with unit normals of a counter-clockwise convex polygon.
pub fn edges_halfplanes(poly: &[Point2]) -> Vec<(Point2, f64)> {
    let k = poly.len();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let p = poly[i];
        let q = poly[(i + 1) % k];
        let d = q - p;
        let len = d.norm();
        if len == 0.0 {
            continue;
        }
        let n = Point2::new(d.y, -d.x) / len;
        out.push((n, n.dot(&p)));
    }
    out
}

pub fn contains_point(poly: &[Point2], x: &Point2, slack: f64) -> bool {
    edges_halfplanes(poly).iter().all(|(n, b)| n.dot(x) <= b + slack)
}

pub fn intersection(a: &[Point2], b: &[Point2]) -> Vec<Point2> {
    let mut out = a.to_vec();
    for (n, c) in edges_halfplanes(b) {
        if out.is_empty() {
            break;
        }
        out = clip(&out, &n, c);
    }
    out
}

pub fn intersection_area(a: &[Point2], b: &[Point2]) -> f64 {
    area(&intersection(a, b))
}

/// Separating-axis test for convex polygons; touching within `tol` counts as intersecting.
pub fn intersects(a: &[Point2], b: &[Point2], tol: f64) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    for (p, q) in [(a, b), (b, a)] {
        if p.len() == 1 {
            continue;
        }
        let axes: Vec<(Point2, f64)> = if p.len() == 2 {
            let d = (p[1] - p[0]).normalize();
            let n = Point2::new(d.y, -d.x);
            vec![(n, n.dot(&p[0])), (-n, -n.dot(&p[0])), (d, d.dot(&p[1])), (-d, -d.dot(&p[0]))]
        } else {
            edges_halfplanes(p)
        };
        for (n, c) in axes {
            let m = q.iter().map(|v| n.dot(v)).fold(f64::INFINITY, f64::min);
            if m > c + tol {
                return false;
            }
        }
    }
    if a.len() == 1 && b.len() == 1 {
        return (a[0] - b[0]).norm() <= tol;
    }
    if a.len() == 1 {
        return contains_point_any(b, &a[0], tol);
    }
    if b.len() == 1 {
        return contains_point_any(a, &b[0], tol);
    }
    true
}

fn contains_point_any(poly: &[Point2], x: &Point2, tol: f64) -> bool {
    match poly.len() {
        0 => false,
        1 => (poly[0] - x).norm() <= tol,
        2 => {
            let d = poly[1] - poly[0];
            let s = ((x - poly[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (poly[0] + d * s - x).norm() <= tol
        }
        _ => contains_point(poly, x, tol),
    }
}

/// Euclidean distance from `x` to a convex polygon, segment or point (zero inside).
pub fn distance_to(poly: &[Point2], x: &Point2) -> f64 {
    let seg = |a: &Point2, b: &Point2| {
        let d = b - a;
        let l = d.norm_squared();
        let s = if l > 0.0 { ((x - a).dot(&d) / l).clamp(0.0, 1.0) } else { 0.0 };
        (a + d * s - x).norm()
    };
    match poly.len() {
        0 => f64::INFINITY,
        1 => (poly[0] - x).norm(),
        2 => seg(&poly[0], &poly[1]),
        k => {
            if contains_point(poly, x, 0.0) {
                return 0.0;
            }
            (0..k).map(|i| seg(&poly[i], &poly[(i + 1) % k])).fold(f64::INFINITY, f64::min)
        }
    }
}

fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.retain(|(a, b)| b > a);
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        if let Some(last) = out.last_mut() {
            if a <= last.1 {
                last.1 = last.1.max(b);
                continue;
            }
        }
        out.push((a, b));
    }
    out
}

/// Exact area of a union of convex counter-clockwise polygons (boundary integration).
pub fn union_area(polys: &[Vec<Point2>]) -> f64 {
    let polys: Vec<&Vec<Point2>> = polys.iter().filter(|p| p.len() >= 3 && area(p) > 0.0).collect();
    let planes: Vec<Vec<(Point2, f64)>> = polys.iter().map(|p| edges_halfplanes(p)).collect();
    let bbox: Vec<(Point2, Point2)> = polys
        .iter()
        .map(|p| {
            let mut lo = p[0];
            let mut hi = p[0];
            for v in p.iter() {
                lo = lo.inf(v);
                hi = hi.sup(v);
            }
            (lo, hi)
        })
        .collect();
    let scale = bbox.iter().map(|(lo, hi)| lo.norm().max(hi.norm())).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let mut total = 0.0;
    for (i, poly) in polys.iter().enumerate() {
        let k = poly.len();
        for e in 0..k {
            let p = poly[e];
            let q = poly[(e + 1) % k];
            let d = q - p;
            if d.norm() == 0.0 {
                continue;
            }
            let out_n = Point2::new(d.y, -d.x);
            let elo = p.inf(&q);
            let ehi = p.sup(&q);
            let mut covered = Vec::new();
            for (j, hp) in planes.iter().enumerate() {
                if j == i {
                    continue;
                }
                let (blo, bhi) = bbox[j];
                if elo.x > bhi.x + tol || elo.y > bhi.y + tol || ehi.x < blo.x - tol || ehi.y < blo.y - tol {
                    continue;
                }
                let (mut s0, mut s1) = (0.0_f64, 1.0_f64);
                let mut empty = false;
                for (n, b) in hp {
                    let a0 = n.dot(&p) - b;
                    let da = n.dot(&d);
                    if da.abs() <= 1e-14 * d.norm() {
                        if a0 > tol {
                            empty = true;
                        } else if a0 >= -tol {
                            // collinear with an edge of j
                            let same_side = n.dot(&out_n) > 0.0;
                            if !(same_side && j < i) {
                                empty = true;
                            }
                        }
                    } else {
                        let s = -a0 / da;
                        if da > 0.0 {
                            s1 = s1.min(s);
                        } else {
                            s0 = s0.max(s);
                        }
                    }
                    if empty || s0 >= s1 {
                        empty = true;
                        break;
                    }
                }
                if !empty {
                    covered.push((s0, s1));
                }
            }
            let covered = merge_intervals(covered);
            let mut s = 0.0;
            let mut add = |a: f64, b: f64| {
                if b > a {
                    let u = p + d * a;
                    let v = p + d * b;
                    total += 0.5 * cross(&u, &v);
                }
            };
            for (a, b) in covered {
                add(s, a.max(s));
                s = s.max(b);
            }
            add(s, 1.0);
        }
    }
    total
}

/// Moments `(area, ∫x, ∫y)` of `poly ∩ disk(center, r)`, exact via Green's theorem.
pub fn disk_moments(poly: &[Point2], center: &Point2, r: f64) -> (f64, Point2) {
    let k = poly.len();
    if k < 3 || r <= 0.0 {
        return (0.0, Point2::zeros());
    }
    let rel: Vec<Point2> = poly.iter().map(|p| p - center).collect();
    let r2 = r * r;
    let mut a = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    let seg = |p: Point2, q: Point2, a: &mut f64, mx: &mut f64, my: &mut f64| {
        let d = q - p;
        *a += 0.5 * cross(&p, &q);
        *mx += 0.5 * d.y * (p.x * p.x + p.x * d.x + d.x * d.x / 3.0);
        *my -= 0.5 * d.x * (p.y * p.y + p.y * d.y + d.y * d.y / 3.0);
    };
    let arc = |t0: f64, t1: f64, a: &mut f64, mx: &mut f64, my: &mut f64| {
        let mut t1 = t1;
        while t1 < t0 {
            t1 += 2.0 * PI;
        }
        let r3 = r2 * r;
        *a += 0.5 * r2 * (t1 - t0);
        let fx = |t: f64| t.sin() - t.sin().powi(3) / 3.0;
        let fy = |t: f64| -t.cos() + t.cos().powi(3) / 3.0;
        *mx += 0.5 * r3 * (fx(t1) - fx(t0));
        *my += 0.5 * r3 * (fy(t1) - fy(t0));
    };
    // inside portions of the edges, in boundary order; gaps between them are arcs
    let mut pieces: Vec<(Point2, Point2)> = Vec::new();
    for i in 0..k {
        let p = rel[i];
        let q = rel[(i + 1) % k];
        let d = q - p;
        let aa = d.norm_squared();
        if aa == 0.0 {
            continue;
        }
        let bb = 2.0 * p.dot(&d);
        let cc = p.norm_squared() - r2;
        let disc = bb * bb - 4.0 * aa * cc;
        if disc <= 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        let lo = ((-bb - sq) / (2.0 * aa)).max(0.0);
        let hi = ((-bb + sq) / (2.0 * aa)).min(1.0);
        if lo < hi {
            pieces.push((p + d * lo, p + d * hi));
        }
    }
    for (u, v) in &pieces {
        seg(*u, *v, &mut a, &mut mx, &mut my);
    }
    if pieces.is_empty() {
        if contains_point(poly, center, 0.0) {
            a = PI * r2;
            mx = 0.0;
            my = 0.0;
        }
    } else {
        let m = pieces.len();
        let gap_tol = 1e-13 * r;
        for idx in 0..m {
            let v = pieces[idx].1;
            let u = pieces[(idx + 1) % m].0;
            if (v - u).norm() > gap_tol {
                arc(v.y.atan2(v.x), u.y.atan2(u.x), &mut a, &mut mx, &mut my);
            }
        }
    }
    if a < 0.0 {
        a = 0.0;
    }
    (a, Point2::new(mx, my) + center * a)
}

/// Angular intervals `[θ0, θ1]` of the circle `center + r(cos θ, sin θ)` lying inside `poly`.
pub fn circle_arcs_inside(poly: &[Point2], center: &Point2, r: f64) -> Vec<(f64, f64)> {
    let hp = edges_halfplanes(poly);
    let mut cuts: Vec<f64> = Vec::new();
    for (n, b) in &hp {
        // n·(c + r u) = b  ->  cos(θ - φ) = (b - n·c) / r
        let s = (b - n.dot(center)) / r;
        if s.abs() < 1.0 {
            let phi = n.y.atan2(n.x);
            let w = s.acos();
            cuts.push(phi - w);
            cuts.push(phi + w);
        }
    }
    let inside = |t: f64| {
        let x = center + Point2::new(t.cos(), t.sin()) * r;
        hp.iter().all(|(n, b)| n.dot(&x) <= *b)
    };
    if cuts.is_empty() {
        return if inside(0.0) { vec![(0.0, 2.0 * PI)] } else { vec![] };
    }
    let mut cuts: Vec<f64> = cuts.into_iter().map(|t| t.rem_euclid(2.0 * PI)).collect();
    cuts.sort_by(f64::total_cmp);
    let m = cuts.len();
    let mut out = Vec::new();
    for i in 0..m {
        let t0 = cuts[i];
        let t1 = if i + 1 < m { cuts[i + 1] } else { cuts[0] + 2.0 * PI };
        if t1 - t0 <= 0.0 {
            continue;
        }
        if inside(0.5 * (t0 + t1)) {
            out.push((t0, t1));
        }
    }
    out
}
