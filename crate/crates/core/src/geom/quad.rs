//! Quadrature over triangles and convex polygons.

use super::Point2;

// Dunavant degree-5 rule: (weight, barycentric a, b) with c = 1 − a − b.
const D5: [(f64, f64, f64); 7] = [
    (0.225, 1.0 / 3.0, 1.0 / 3.0),
    (0.132_394_152_788_506_2, 0.059_715_871_789_769_8, 0.470_142_064_105_115_1),
    (0.132_394_152_788_506_2, 0.470_142_064_105_115_1, 0.059_715_871_789_769_8),
    (0.132_394_152_788_506_2, 0.470_142_064_105_115_1, 0.470_142_064_105_115_1),
    (0.125_939_180_544_827_2, 0.797_426_985_353_087_3, 0.101_286_507_323_456_3),
    (0.125_939_180_544_827_2, 0.101_286_507_323_456_3, 0.797_426_985_353_087_3),
    (0.125_939_180_544_827_2, 0.101_286_507_323_456_3, 0.101_286_507_323_456_3),
];

/// Degree-5 exact rule on one triangle.
pub fn triangle<F: Fn(&Point2) -> f64>(a: &Point2, b: &Point2, c: &Point2, f: &F) -> f64 {
    let area = 0.5 * ((b - a).perp(&(c - a))).abs();
    let mut s = 0.0;
    for &(w, l1, l2) in &D5 {
        let p = a * l1 + b * l2 + c * (1.0 - l1 - l2);
        s += w * f(&p);
    }
    s * area
}

fn adaptive<F: Fn(&Point2) -> f64>(a: Point2, b: Point2, c: Point2, f: &F, coarse: f64, tol: f64, depth: u32) -> f64 {
    let ab = 0.5 * (a + b);
    let bc = 0.5 * (b + c);
    let ca = 0.5 * (c + a);
    let parts = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)];
    let vals: Vec<f64> = parts.iter().map(|(p, q, r)| triangle(p, q, r, f)).collect();
    let fine: f64 = vals.iter().sum();
    if depth == 0 || (fine - coarse).abs() <= tol {
        return fine;
    }
    parts.iter().zip(&vals).map(|((p, q, r), v)| adaptive(*p, *q, *r, f, *v, 0.25 * tol, depth - 1)).sum()
}

/// Adaptive integral over a convex polygon (fan triangulation) to absolute tolerance `tol`.
pub fn polygon_adaptive<F: Fn(&Point2) -> f64>(poly: &[Point2], f: &F, tol: f64) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let o = poly[0];
    let k = poly.len() - 2;
    (1..poly.len() - 1)
        .map(|i| {
            let coarse = triangle(&o, &poly[i], &poly[i + 1], f);
            adaptive(o, poly[i], poly[i + 1], f, coarse, tol / k as f64, 12)
        })
        .sum()
}

/// Fixed degree-5 rule over a polygon's fan triangulation.
pub fn polygon<F: Fn(&Point2) -> f64>(poly: &[Point2], f: &F) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let o = poly[0];
    (1..poly.len() - 1).map(|i| triangle(&o, &poly[i], &poly[i + 1], f)).sum()
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Integral over the disk `B_r(c)` by Gauss–Legendre in radius and the trapezoid rule in angle.
pub fn disk<F: Fn(&Point2) -> f64>(c: &Point2, r: f64, f: &F, nr: usize, nt: usize) -> f64 {
    let gl = gauss_legendre01(nr);
    let dt = 2.0 * std::f64::consts::PI / nt as f64;
    let mut s = 0.0;
    for &(u, w) in &gl {
        let rho = u * r;
        let mut ring = 0.0;
        for k in 0..nt {
            let t = k as f64 * dt;
            ring += f(&(c + Point2::new(t.cos(), t.sin()) * rho));
        }
        s += w * rho * ring * dt;
    }
    s * r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_quintics() {
        let sq = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)];
        let v = polygon(&sq, &|p: &Point2| p.x.powi(3) * p.y.powi(2));
        assert!((v - 1.0 / 12.0).abs() < 1e-14);
        let v = polygon_adaptive(&sq, &|p: &Point2| (6.0 * p.x).sin() * (5.0 * p.y).cos(), 1e-12);
        let exact = (1.0 - 6f64.cos()) / 6.0 * 5f64.sin() / 5.0;
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let gl = gauss_legendre01(5);
        let s: f64 = gl.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((s - 0.1).abs() < 1e-14);
        let v = disk(&Point2::new(0.3, 0.1), 2.0, &|p: &Point2| (p.x - 0.3).powi(2), 4, 8);
        assert!((v - std::f64::consts::PI * 4.0).abs() < 1e-12);
    }
}
