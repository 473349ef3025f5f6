use kantoreg::geom::{polygon, Polygon};
use kantoreg::measures::{discretize, DensitySpec, DiscreteMeasure, Seeding};
use kantoreg::ot::{build_potential, solve_exact, trust_window, PiecewiseAffineConvex};
use kantoreg::sections::{
    alexandrov_check, default_subgradient, doubling_height, half_section_check, inner_radius_lower_bounds,
    polar_section_inclusions, property_scan, rho_feasibility, section, stau_excess, vitali_constant, vitali_select,
    DiagramIndex, ScanConfig, Section, SectionError,
};
use kantoreg::Point2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn square(h: f64) -> Polygon {
    Polygon::rectangle(Point2::new(-h, -h), Point2::new(h, h))
}

fn abs_sum() -> PiecewiseAffineConvex {
    let slopes = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].map(|(a, b)| Point2::new(a, b)).to_vec();
    PiecewiseAffineConvex::new(slopes, vec![0.0; 4], trust_window(&square(1.0)))
}

/// `L · max_j x·u_j` with `k` equally spaced unit directions.
fn cone(l: f64, k: usize) -> PiecewiseAffineConvex {
    let slopes = (0..k)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / k as f64;
            Point2::new(a.cos(), a.sin()) * l
        })
        .collect();
    PiecewiseAffineConvex::new(slopes, vec![0.0; k], trust_window(&square(1.0)))
}

/// Max of random affine functions with slopes in `[-2, 2]²`.
fn random_pwac(seed: u64, k: usize) -> PiecewiseAffineConvex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slopes = (0..k).map(|_| Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
    let b = (0..k).map(|_| rng.random_range(-0.5..0.0)).collect();
    PiecewiseAffineConvex::new(slopes, b, trust_window(&square(1.0)))
}

/// Optimal potential from `μ` to itself on `[-1, 1]²`.
fn identity_potential(delta: f64) -> (DiscreteMeasure, PiecewiseAffineConvex) {
    let d = DensitySpec::uniform(square(1.0));
    let mu = discretize(&d, delta, Seeding::Grid).unwrap();
    let (_, duals) = solve_exact(&mu, &mu).unwrap();
    let psi = build_potential(&duals, &mu, &square(1.0));
    (mu, psi)
}

fn translated_potential(delta: f64, v: Point2) -> PiecewiseAffineConvex {
    let d = DensitySpec::uniform(square(1.0));
    let mu = discretize(&d, delta, Seeding::Grid).unwrap();
    let nu = mu.translate(&v);
    let (_, duals) = solve_exact(&mu, &nu).unwrap();
    build_potential(&duals, &nu, &square(1.0))
}

#[test]
fn cross_polytope_section() {
    let psi = abs_sum();
    let s = section(&psi, Point2::zeros(), Point2::zeros(), 1.0).unwrap();
    assert!((s.area() - 2.0).abs() < 1e-12);
    for v in s.vertices() {
        assert!((v.x.abs() + v.y.abs() - 1.0).abs() < 1e-12);
    }
    assert_eq!(s.vertices().len(), 4);
}

#[test]
fn not_a_subgradient_and_unbounded() {
    let psi = abs_sum();
    let e = section(&psi, Point2::new(0.5, 0.5), Point2::zeros(), 0.1).unwrap_err();
    assert!(matches!(e, SectionError::NotASubgradient(d) if (d - 2f64.sqrt()).abs() < 1e-12));
    let e = section(&psi, Point2::zeros(), Point2::new(1.0, 1.0), 0.1).unwrap_err();
    assert_eq!(e, SectionError::UnboundedSection);
    assert!(section(&psi, Point2::zeros(), Point2::zeros(), -1.0).is_err());
}

#[test]
fn section_matches_direct_evaluation() {
    for seed in 0..6 {
        let psi = random_pwac(seed, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for _ in 0..5 {
            let x0 = Point2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let p0 = default_subgradient(&psi, &x0);
            let t = rng.random_range(0.05..0.6);
            let Ok(s) = section(&psi, x0, p0, t) else { continue };
            let f0 = psi.eval(&x0);
            let bar = |x: &Point2| psi.eval(x) - f0 - p0.dot(&(x - x0));
            for v in s.vertices() {
                assert!((bar(v) - t).abs() < 1e-9, "vertex height {}", bar(v));
            }
            let (lo, hi) = (x0 - Point2::new(3.0, 3.0), x0 + Point2::new(3.0, 3.0));
            for i in 0..=120 {
                for j in 0..=120 {
                    let x = lo + (hi - lo).component_mul(&Point2::new(i as f64 / 120.0, j as f64 / 120.0));
                    let h = bar(&x);
                    if h < t - 1e-9 {
                        assert!(s.body.contains_point(&x, 1e-9));
                    } else if h > t + 1e-9 {
                        assert!(!s.body.contains_point(&x, -1e-9));
                    }
                }
            }
        }
    }
}

#[test]
fn zero_height_faces() {
    let (_, psi) = identity_potential(1.0 / 8.0);
    // interior point of a bounded cell with its own slope: the whole cell
    let j = (0..psi.len()).find(|&j| !psi.cells()[j].poly.is_empty() && !psi.cells()[j].touches_window()).unwrap();
    let cell = &psi.cells()[j].poly;
    let x0 = polygon::centroid(cell);
    let p0 = psi.slopes()[j];
    let s = section(&psi, x0, p0, 0.0).unwrap();
    assert!((s.area() - polygon::area(cell)).abs() < 1e-12);
    // grid oracle: the zero set of ψ − affine inside the bounding box is the cell
    let (lo, hi) = cell.iter().fold((cell[0], cell[0]), |(a, b), p| (a.inf(p), b.sup(p)));
    let f0 = psi.eval(&x0);
    for i in 0..=40 {
        for k in 0..=40 {
            let x = lo + (hi - lo).component_mul(&Point2::new(i as f64 / 40.0, k as f64 / 40.0));
            let h = psi.eval(&x) - f0 - p0.dot(&(x - x0));
            if h <= 1e-12 {
                assert!(s.body.contains_point(&x, 1e-9));
            }
            if s.body.contains_point(&x, -1e-9) {
                assert!(h <= 1e-12);
            }
        }
    }
    // diagram vertex with an interior subgradient: a single point
    let v = psi.diagram_vertices().into_iter().find(|v| v.pieces.len() >= 3).unwrap();
    let sub = psi.subdifferential(&v.point, 1e-12);
    let s = section(&psi, v.point, sub.body.center_of_mass(), 0.0).unwrap();
    assert_eq!(s.vertices().len(), 1);
    // edge with the midpoint of the slope segment: the common edge
    let e = psi.diagram_edges().into_iter().find(|e| {
        let c = &psi.cells()[e.pieces.0];
        !c.touches_window()
    });
    if let Some(e) = e {
        let mid = 0.5 * (e.a + e.b);
        let p = 0.5 * (psi.slopes()[e.pieces.0] + psi.slopes()[e.pieces.1]);
        let s = section(&psi, mid, p, 0.0).unwrap();
        assert_eq!(s.vertices().len(), 2);
        assert!((s.body.outer_radius() - 0.5 * (e.b - e.a).norm()).abs() < 1e-12);
    }
}

#[test]
fn identity_sections_are_near_balls() {
    let (_, psi) = identity_potential(1.0 / 32.0);
    let x0 = Point2::new(0.1, -0.05);
    let p0 = default_subgradient(&psi, &x0);
    let t = 0.08;
    let s = section(&psi, x0, p0, t).unwrap();
    let r = (2.0 * t).sqrt();
    let radii = s.body.radii();
    assert!((radii.inner - r).abs() < 0.1 * r && (radii.outer - r).abs() < 0.1 * r);
    for tau in [0.1, 0.5, 0.9] {
        assert!(stau_excess(&s, &psi, tau) <= 1e-12);
    }
}

#[test]
fn cone_inner_radius_is_extremal() {
    let l = 2.5;
    let psi = cone(l, 64);
    let omega = square(1.0);
    for t in [0.1, 0.5, 1.0] {
        let s = section(&psi, Point2::zeros(), Point2::zeros(), t).unwrap();
        let b = inner_radius_lower_bounds(&s, &psi, &omega);
        assert!((b.ell_section - t / l).abs() < 1e-9 * (1.0 + t), "{b:?}");
        assert!((b.section_bound - t / l).abs() < 1e-12);
        assert!(b.holds(1e-9));
    }
    let (_, id) = identity_potential(1.0 / 32.0);
    for t in [0.01, 0.04] {
        let x = Point2::new(0.05, 0.1);
        let s = section(&id, x, default_subgradient(&id, &x), t).unwrap();
        let b = inner_radius_lower_bounds(&s, &id, &omega);
        assert!(b.holds(1e-9));
        assert!(b.ell_section > 3.0 * b.section_bound);
        assert!((b.ell_section - s.body.radii().inner).abs() < 1e-12);
    }
    let s = section(&psi, Point2::zeros(), Point2::new(0.0, 0.0), 0.0).unwrap();
    let b = inner_radius_lower_bounds(&s, &psi, &omega);
    assert_eq!(b.ell_section, 0.0);
    assert!(b.holds(0.0));
}

#[test]
fn alexandrov_cone_calibration() {
    let k = 256;
    let psi = cone(1.0, k);
    let index = DiagramIndex::new(&psi);
    let t = 0.5;
    let s = section(&psi, Point2::zeros(), Point2::zeros(), t).unwrap();
    let rep = alexandrov_check(&s, &psi, &index, 500, 1);
    let kf = k as f64;
    // apex: (t)² / (c L(S) t |∂ψ(S)|) with L(S) = t / cos(π/k) and |∂ψ(S)| the inscribed k-gon
    let apex = PI * (PI / kf).cos() / (0.5 * kf * (2.0 * PI / kf).sin());
    assert!((rep.max_ratio - apex).abs() < 1e-9, "{} vs {apex}", rep.max_ratio);
    assert!((apex - 1.0).abs() < 1e-3);
}

#[test]
fn alexandrov_vanishes_toward_the_boundary() {
    let (_, psi) = identity_potential(1.0 / 16.0);
    let index = DiagramIndex::new(&psi);
    let x0 = Point2::new(0.0, 0.1);
    let s = section(&psi, x0, default_subgradient(&psi, &x0), 0.1).unwrap();
    let rep = alexandrov_check(&s, &psi, &index, 200, 2);
    assert!(rep.max_ratio.is_finite());
    let v = s.vertices()[0];
    let mut last = f64::INFINITY;
    for i in 1..=20 {
        let sgap = 1.0 - 0.5f64.powi(i);
        let y = x0 + (v - x0) * sgap;
        let lhs = (s.height(&psi, &y) - s.t).abs().powi(2);
        let dist = (-s.body.max_violation(&y)).max(1e-300);
        let per = lhs / dist;
        assert!(per <= 4.0 * last.min(1e3) + 1e-12);
        last = per;
    }
    assert!(last < 1e-3);
}

#[test]
fn polar_inclusions_on_cross_polytope() {
    let psi = abs_sum();
    let index = DiagramIndex::new(&psi);
    let s = section(&psi, Point2::zeros(), Point2::zeros(), 1.0).unwrap();
    let polar = s.body.polar_body(&Point2::zeros()).unwrap();
    assert!((polar.volume() - 4.0).abs() < 1e-12);
    for v in polar.vertices() {
        assert!((v.x.abs() - 1.0).abs() < 1e-12 && (v.y.abs() - 1.0).abs() < 1e-12);
    }
    let rep = polar_section_inclusions(&s, &psi, &index, 20, 3);
    assert!(rep.all(), "{rep:?}");
    assert!(rep.first_uncovered < 1e-12);
    assert!((rep.volume_product_ratio - 8.0 / (PI * PI / 16.0)).abs() < 1e-9);
    let s2 = section(&psi, Point2::zeros(), Point2::zeros(), 2.0).unwrap();
    let polar2 = s2.body.polar_body(&Point2::zeros()).unwrap();
    assert!((polar2.volume() - polar.volume() / 4.0).abs() < 1e-12);
}

#[test]
fn polar_inclusions_and_volume_product_on_random_sections() {
    let (_, psi) = identity_potential(1.0 / 16.0);
    let index = DiagramIndex::new(&psi);
    let omega = square(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    while checked < 200 {
        let x = Point2::new(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
        let t = (rng.random_range(0.002f64.ln()..0.15f64.ln())).exp();
        let Ok(s) = section(&psi, x, default_subgradient(&psi, &x), t) else { continue };
        if !omega.contains(&s.body, 1e-12) {
            continue;
        }
        let rep = polar_section_inclusions(&s, &psi, &index, 3, checked);
        assert!(rep.volume_product(), "{rep:?}");
        assert!(rep.first() && rep.second() && rep.third(), "{rep:?}");
        assert!(half_section_check(&s, &psi, 10, checked).holds(1e-9));
        checked += 1;
    }
}

#[test]
fn identity_scan_doubling_near_four() {
    let (_, psi) = identity_potential(1.0 / 32.0);
    let omega = square(1.0);
    let cfg = ScanConfig {
        delta: 1.0 / 32.0,
        rho: 0.1,
        t_grid: vec![0.0125, 0.025, 0.05, 0.1],
        points: (0..25).map(|i| [-0.3 + 0.15 * (i % 5) as f64, -0.3 + 0.15 * (i / 5) as f64]).collect(),
        engulf_probes: 8,
        vitali_sections: 0,
        seed: 5,
    };
    let rep = property_scan(&psi, &omega, &cfg).unwrap();
    assert!(rep.samples > 0);
    for r in rep.qualifying() {
        let m = doubling_height(&section(&psi, Point2::from(r.x), Point2::from(r.p), r.t).unwrap(), &psi);
        assert!(m <= 4.0 * 1.25, "M = {m} at t = {}", r.t);
        assert!(r.gamma_half.unwrap() < 1.0);
    }
    let (lo, hi) = rep.volume_ratio_range;
    assert!(hi / lo < 50.0);
    // paraboloid: |S|²/t² = (2π)²
    assert!(lo > 0.5 * 4.0 * PI * PI && hi < 2.0 * 4.0 * PI * PI);
    assert!(rep.to_csv().lines().next().unwrap().starts_with("delta,t,x,y,volume,ell,L,M_local,theta_local"));
    assert!(property_scan(&psi, &omega, &ScanConfig { rho: 0.01, ..cfg }).is_err());
}

#[test]
fn rho_for_identity_and_translation() {
    let omega = square(1.0);
    let inner = square(0.5);
    let (_, psi) = identity_potential(1.0 / 16.0);
    let rho = rho_feasibility(&psi, &omega, &inner, 6).unwrap();
    // paraboloid sections are balls of radius √(2ρ) and must fit in the margin 0.5
    assert!(rho.rho > 0.5 * 0.125 && rho.rho < 1.5 * 0.125, "{}", rho.rho);
    assert_eq!(rho.points.len(), rho.subgradients.len());
    let v = Point2::new(0.3, -0.2);
    let tilted = PiecewiseAffineConvex::new(
        psi.slopes().iter().map(|y| y + v).collect(),
        psi.intercepts().to_vec(),
        psi.window().clone(),
    );
    let rho2 = rho_feasibility(&tilted, &omega, &inner, 6).unwrap();
    assert!((rho2.rho - rho.rho).abs() <= 1e-9 * rho.rho, "{} vs {}", rho2.rho, rho.rho);
    // a solved translated instance may pick other optimal duals
    let moved = translated_potential(1.0 / 16.0, v);
    let rho3 = rho_feasibility(&moved, &omega, &inner, 6).unwrap();
    assert!((rho3.rho - rho.rho).abs() <= 0.3 * rho.rho, "{} vs {}", rho3.rho, rho.rho);
    assert!(matches!(rho_feasibility(&psi, &omega, &omega, 4), Err(SectionError::NoFeasibleRho(_))));
}

fn sample_sections(psi: &PiecewiseAffineConvex, n: usize, seed: u64) -> Vec<Section> {
    let omega = square(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let x = Point2::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6));
        let t = rng.random_range(0.01..0.05);
        if let Ok(s) = section(psi, x, default_subgradient(psi, &x), t) {
            if omega.contains(&s.body, 1e-12) {
                out.push(s);
            }
        }
    }
    out
}

#[test]
fn vitali_trivial_cases() {
    let psi = abs_sum();
    let a = section(&psi, Point2::zeros(), Point2::zeros(), 0.2).unwrap();
    let one = vitali_select(std::slice::from_ref(&a), 1.0);
    assert_eq!(one.selected, vec![0]);
    assert!(one.covered() && one.uncovered_area.abs() < 1e-15);
    let (_, id) = identity_potential(1.0 / 16.0);
    let x1 = Point2::new(-0.5, 0.0);
    let x2 = Point2::new(0.5, 0.0);
    let s1 = section(&id, x1, default_subgradient(&id, &x1), 0.02).unwrap();
    let s2 = section(&id, x2, default_subgradient(&id, &x2), 0.03).unwrap();
    let two = vitali_select(&[s1, s2], 1.0);
    assert_eq!(two.selected, vec![1, 0]);
    assert!(two.covered());
}

#[test]
fn vitali_constant_covers_by_point_test() {
    let mut cstars = Vec::new();
    for delta in [1.0 / 16.0, 1.0 / 32.0] {
        let (_, psi) = identity_potential(delta);
        let family = sample_sections(&psi, 100, 11);
        let out = vitali_constant(&family);
        assert!(out.covered());
        // independent check: grid points of the family lie in a dilated kept section
        let dil: Vec<Polygon> = out.selected.iter().map(|&k| family[k].dilated(out.cstar * (1.0 + 1e-9))).collect();
        for i in 0..=200 {
            for j in 0..=200 {
                let x = Point2::new(-1.0 + i as f64 / 100.0, -1.0 + j as f64 / 100.0);
                if family.iter().any(|s| s.body.contains_point(&x, -1e-12)) {
                    assert!(dil.iter().any(|d| d.contains_point(&x, 1e-12)));
                }
            }
        }
        let kept: Vec<&Section> = out.selected.iter().map(|&k| &family[k]).collect();
        for a in 0..kept.len() {
            for b in a + 1..kept.len() {
                assert!(polygon::intersection_area(kept[a].vertices(), kept[b].vertices()) < 1e-15);
            }
        }
        cstars.push(out.cstar);
    }
    assert!(cstars[0] < 5.0 && cstars[1] < 5.0, "{cstars:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dilation_into_lower_section(seed in 0u64..5000, tau in 0.05f64..0.95, t in 0.05f64..0.8) {
        let psi = random_pwac(seed, 25);
        let x0 = Point2::new(0.1, -0.2);
        let p0 = default_subgradient(&psi, &x0);
        if let Ok(s) = section(&psi, x0, p0, t) {
            prop_assert!(stau_excess(&s, &psi, tau) <= 1e-10);
        }
    }

    #[test]
    fn sections_increase_with_height(seed in 0u64..5000, t in 0.02f64..0.5, k in 1.0f64..3.0) {
        let psi = random_pwac(seed, 25);
        let x0 = Point2::new(-0.1, 0.15);
        let p0 = default_subgradient(&psi, &x0);
        if let (Ok(a), Ok(b)) = (section(&psi, x0, p0, t), section(&psi, x0, p0, k * t)) {
            prop_assert!(b.body.contains(&a.body, 1e-10));
            prop_assert!(a.body.contains_point(&x0, 1e-12));
        }
    }

    #[test]
    fn half_section_inclusion(seed in 0u64..5000, t in 0.05f64..0.5) {
        let psi = random_pwac(seed, 30);
        let x0 = Point2::new(0.0, 0.05);
        if let Ok(s) = section(&psi, x0, default_subgradient(&psi, &x0), t) {
            prop_assert!(half_section_check(&s, &psi, 20, seed).holds(1e-9));
        }
    }
}
