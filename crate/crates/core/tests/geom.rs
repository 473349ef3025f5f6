use kantoreg::geom::{unit_ball_volume, ConvexPolytope, Halfspace, Polygon};
use kantoreg::Point2;
use nalgebra::Vector3;
use proptest::prelude::*;
use std::f64::consts::PI;

fn square(h: f64) -> Polygon {
    ConvexPolytope::rectangle(Point2::new(-h, -h), Point2::new(h, h))
}

fn triangle() -> Polygon {
    Polygon::from_points(&[Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)]).unwrap()
}

fn cross_polytope() -> Polygon {
    let hs: Vec<Halfspace<2>> = [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)]
        .iter()
        .map(|&(a, b)| Halfspace::new(Point2::new(a, b), 1.0).unwrap())
        .collect();
    Polygon::from_halfspaces(&hs).unwrap()
}

/// Largest inscribed radius by brute force over a grid of candidate centers.
fn grid_inner_radius(k: &Polygon, n: usize) -> f64 {
    let (mut lo, mut hi) = (k.vertices()[0], k.vertices()[0]);
    for v in k.vertices() {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let c = Point2::new(
                lo.x + (hi.x - lo.x) * i as f64 / (n - 1) as f64,
                lo.y + (hi.y - lo.y) * j as f64 / (n - 1) as f64,
            );
            best = best.max(-k.max_violation(&c));
        }
    }
    best
}

#[test]
fn square_radii() {
    let r = square(1.0).radii();
    assert!((r.inner - 1.0).abs() < 1e-10);
    assert!((r.outer - 2f64.sqrt()).abs() < 1e-10);
}

#[test]
fn cross_polytope_inner_radius_matches_grid_oracle() {
    let k = cross_polytope();
    let r = k.radii().inner;
    assert!((r - 0.5f64.sqrt()).abs() < 1e-10);
    let oracle = grid_inner_radius(&k, 200);
    assert!((r - oracle).abs() < 1e-2, "{r} vs {oracle}");
    assert!(r >= oracle - 1e-12);
}

#[test]
fn triangle_inner_radius_is_incircle() {
    let k = triangle();
    let semiperimeter = (2.0 + 2f64.sqrt()) / 2.0;
    let incircle = 0.5 / semiperimeter;
    assert!((k.radii().inner - incircle).abs() < 1e-10);
    assert!((incircle - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-14);
}

#[test]
fn polar_of_square_is_cross_polytope() {
    let p = square(1.0).polar_body(&Point2::zeros()).unwrap();
    assert!((p.volume() - 2.0).abs() < 1e-12);
    for v in p.vertices() {
        assert!((v.x.abs() + v.y.abs() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn polar_of_inscribed_polygon_contains_reciprocal_ball() {
    let r = 0.37;
    let k = ConvexPolytope::regular(Point2::zeros(), r, 64);
    let p = k.polar_body(&Point2::zeros()).unwrap();
    assert!(p.radii().inner >= 1.0 / r - 1e-12);
}

#[test]
fn bidual_is_identity() {
    let k = Polygon::from_points(&[
        Point2::new(-1.0, -0.5),
        Point2::new(1.5, -0.7),
        Point2::new(2.0, 1.0),
        Point2::new(-0.3, 1.2),
        Point2::new(-1.2, 0.4),
    ])
    .unwrap();
    let back = k.polar_body(&Point2::zeros()).unwrap().polar_body(&Point2::zeros()).unwrap();
    assert_eq!(back.vertices().len(), k.vertices().len());
    for v in back.vertices() {
        let d = k.vertices().iter().map(|w| (w - v).norm()).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-9);
    }
}

#[test]
fn polar_requires_interior_point() {
    assert!(square(1.0).polar_body(&Point2::new(1.0, 0.0)).is_err());
    assert!(square(1.0).polar_body(&Point2::new(3.0, 0.0)).is_err());
}

#[test]
fn disk_polygon_area() {
    let k = ConvexPolytope::regular(Point2::zeros(), 1.0, 128);
    let analytic = 64.0 * (2.0 * PI / 128.0).sin();
    assert!((k.volume() - analytic).abs() < 1e-12);
    assert!((k.volume() - PI).abs() / PI < 2e-3);
}

#[test]
fn john_of_square_and_rectangle() {
    let e = square(1.0).john_ellipsoid().unwrap();
    assert!((e.shape - nalgebra::Matrix2::identity()).norm() < 1e-6);
    let e = ConvexPolytope::rectangle(Point2::new(-2.0, -1.0), Point2::new(2.0, 1.0)).john_ellipsoid().unwrap();
    assert!((e.shape - nalgebra::Matrix2::new(0.25, 0.0, 0.0, 1.0)).norm() < 1e-6);
}

/// Grid search over ellipses `{c + B u}` inscribed in the triangle.
fn grid_max_inscribed_area(k: &Polygon) -> f64 {
    let g = k.center_of_mass();
    let mut best = 0.0_f64;
    let n = 45;
    for ci in -3..=3 {
        for cj in -3..=3 {
            let c = g + Point2::new(ci as f64, cj as f64) * 0.01;
            for a in 1..=n {
                for b in 1..=n {
                    for o in -n..=n {
                        let (a, b, o) =
                            (a as f64 * 0.45 / n as f64, b as f64 * 0.45 / n as f64, o as f64 * 0.45 / n as f64);
                        let det = a * b - o * o;
                        if det <= 0.0 || PI * det <= best {
                            continue;
                        }
                        let ok = k.halfspaces().iter().all(|h| {
                            let bn = Point2::new(a * h.normal.x + o * h.normal.y, o * h.normal.x + b * h.normal.y);
                            h.normal.dot(&c) + bn.norm() <= h.offset
                        });
                        if ok {
                            best = PI * det;
                        }
                    }
                }
            }
        }
    }
    best
}

#[test]
fn john_of_triangle_has_steiner_ratio() {
    let k = triangle();
    let e = k.john_ellipsoid().unwrap();
    let ratio = PI / (3.0 * 3f64.sqrt());
    assert!((e.volume() / k.volume() - ratio).abs() / ratio < 1e-6);
    let oracle = grid_max_inscribed_area(&k);
    assert!(oracle <= e.volume() * (1.0 + 1e-9));
    assert!(oracle >= 0.97 * ratio * k.volume(), "grid oracle {oracle}");
    assert!(k.john_sandwich(&e, 1e-7));
}

#[test]
fn dilation_examples() {
    let k = square(1.0);
    let same = k.dilate(1.0, &k.center_of_mass());
    assert!(same.contains(&k, 0.0) && k.contains(&same, 0.0));
    let big = k.dilate(2.0, &Point2::zeros());
    assert!((big.volume() - 16.0).abs() < 1e-12);
    assert!(big.contains(&square(2.0), 1e-12) && square(2.0).contains(&big, 1e-12));
}

#[test]
fn containment_examples() {
    assert!(square(1.0).contains(&square(1.0), 0.0));
    assert!(square(2.0).contains(&square(1.0), 0.0));
    assert!(!square(1.0).contains(&square(2.0), 0.0));
}

#[test]
fn cube_and_octahedron() {
    let c = ConvexPolytope::<3>::cube(1.0);
    let r = c.radii();
    assert!((r.inner - 1.0).abs() < 1e-10);
    assert!((r.outer - 3f64.sqrt()).abs() < 1e-10);
    let e = c.john_ellipsoid().unwrap();
    assert!((e.shape - nalgebra::Matrix3::identity()).norm() < 1e-6);
    let p = c.polar_body(&Vector3::zeros()).unwrap();
    assert!(p.volume() * c.volume() >= unit_ball_volume(3).powi(2) / 216.0);
}

fn random_polygon() -> impl Strategy<Value = Polygon> {
    (3usize..14, prop::collection::vec((0.0f64..1.0, 0.2f64..3.0), 14), 0.2f64..1.0, -0.3f64..0.3).prop_filter_map(
        "nondegenerate",
        |(k, raw, stretch, shear)| {
            let pts: Vec<Point2> = raw[..k]
                .iter()
                .enumerate()
                .map(|(i, &(jit, rad))| {
                    let a = 2.0 * PI * (i as f64 + 0.8 * jit) / k as f64;
                    let p = Point2::new(a.cos(), a.sin()) * rad;
                    Point2::new(p.x + shear * p.y, stretch * p.y)
                })
                .collect();
            let poly = Polygon::from_points(&pts).ok()?;
            if poly.is_degenerate() || -poly.max_violation(&Point2::zeros()) < 1e-3 {
                return None;
            }
            Some(poly)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn volume_product_lower_bound(k in random_polygon()) {
        let p = k.polar_body(&Point2::zeros()).unwrap();
        prop_assert!(k.volume() * p.volume() >= PI * PI / 16.0 * (1.0 - 1e-12));
    }

    #[test]
    fn radii_duality(k in random_polygon()) {
        let p = k.polar_body(&Point2::zeros()).unwrap();
        let (rk, rp) = (k.radii(), p.radii());
        prop_assert!(rk.inner * rp.outer >= 0.25 * (1.0 - 1e-12));
        prop_assert!(rp.inner * rk.outer >= 0.25 * (1.0 - 1e-12));
        prop_assert!(rk.inner <= rk.outer);
    }

    #[test]
    fn hrep_and_vrep_agree(k in random_polygon()) {
        let again = Polygon::from_halfspaces(k.halfspaces()).unwrap();
        prop_assert!((again.volume() - k.volume()).abs() <= 1e-7 * k.volume());
        prop_assert!(k.is_valid());
    }

    #[test]
    fn dilation_scales_volume(k in random_polygon(), g in 0.1f64..5.0) {
        let d = k.dilate_about_center(g);
        prop_assert!((d.volume() - g * g * k.volume()).abs() <= 1e-9 * d.volume());
        let again = Polygon::from_halfspaces(d.halfspaces()).unwrap();
        prop_assert!((again.volume() - d.volume()).abs() <= 1e-9 * d.volume());
    }

    #[test]
    fn john_sandwich_and_trace_bounds(k in random_polygon()) {
        let e = k.john_ellipsoid().unwrap();
        prop_assert!(k.john_sandwich(&e, 1e-7));
        let l = k.radii().inner;
        let tr = e.trace();
        prop_assert!(tr >= 1.0 / (l * l) * (1.0 - 1e-6));
        prop_assert!(tr <= 8.0 / (l * l) * (1.0 + 1e-6));
    }

    #[test]
    fn polar_is_antitone(k in random_polygon(), g in 1.01f64..3.0) {
        let big = k.dilate(g, &Point2::zeros());
        let (pk, pb) = (k.polar_body(&Point2::zeros()).unwrap(), big.polar_body(&Point2::zeros()).unwrap());
        prop_assert!(pk.contains(&pb, 1e-9));
    }

    #[test]
    fn mahler_upper_bound_at_best_translate(k in random_polygon(), seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c = k.center_of_mass();
        let mut best = f64::INFINITY;
        for _ in 0..50 {
            let w: Vec<f64> = k.vertices().iter().map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            let x = k.vertices().iter().zip(&w).fold(Point2::zeros(), |a, (v, wi)| a + v * (wi / s));
            let x = c + (x - c) * 0.5;
            if let Ok(p) = k.polar_body(&x) {
                best = best.min(k.volume() * p.volume());
            }
        }
        if let Ok(p) = k.polar_body(&c) {
            best = best.min(k.volume() * p.volume());
        }
        prop_assert!(best <= 4.0 * PI * PI);
    }
}
