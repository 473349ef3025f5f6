use kantoreg::geom::{polygon, Polygon};
use kantoreg::lab::{
    c1alpha_modulus, contact_construction, critical_heights, fatten, flat_part_diameters, power_law_exponent,
    regularity_at, reversed_chebyshev, sobolev_sweep, solve_instance, sup_bound_check, Branch, ChebyshevMode, LabError,
    ModulusConfig, SweepConfig, SUP_BOUND_C2,
};
use kantoreg::measures::{DensitySpec, Seeding};
use kantoreg::mollifier::{laplacian_field, KernelSpec, LaplacianField};
use kantoreg::ot::{trust_window, PiecewiseAffineConvex};
use kantoreg::sections::section;
use kantoreg::Point2;
use proptest::prelude::*;
use std::f64::consts::PI;

fn square(h: f64) -> Polygon {
    Polygon::rectangle(Point2::new(-h, -h), Point2::new(h, h))
}

fn unit_square() -> Polygon {
    Polygon::rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))
}

fn cone(k: usize) -> PiecewiseAffineConvex {
    let slopes = (0..k)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / k as f64;
            Point2::new(a.cos(), a.sin())
        })
        .collect();
    PiecewiseAffineConvex::new(slopes, vec![0.0; k], trust_window(&square(1.0)))
}

/// Tangent planes of `|x|²/2` at the grid points of spacing `h` in `[-ext, ext]²`, per level.
fn tangent_grid(levels: &[(f64, f64)]) -> Vec<Point2> {
    let mut s = Vec::new();
    for &(ext, h) in levels {
        let n = (ext / h).round() as i64;
        for i in -n..=n {
            for j in -n..=n {
                s.push(Point2::new(i as f64 * h, j as f64 * h));
            }
        }
    }
    s
}

fn paraboloid(levels: &[(f64, f64)], window: f64) -> PiecewiseAffineConvex {
    let s = tangent_grid(levels);
    let b = s.iter().map(|g| -0.5 * g.norm_squared()).collect();
    PiecewiseAffineConvex::new(s, b, trust_window(&square(window)))
}

fn origin_section(psi: &PiecewiseAffineConvex, t: f64) -> kantoreg::sections::Section {
    section(psi, Point2::zeros(), Point2::zeros(), t).unwrap()
}

#[test]
fn cone_contact_set_is_the_apex() {
    let (k, t, m) = (8, 0.05, 512);
    let psi = cone(k);
    let cc = contact_construction(&psi, &origin_section(&psi, t), m).unwrap();
    assert_eq!(cc.sigma.len(), 1);
    assert!(cc.sigma[0].point().norm() < 1e-12);
    // ∂w̄(0) is the polygon {q·e_k <= 1/8} circumscribing the disk of radius 1/8
    let (m, k) = (m as f64, k as f64);
    let v = m * (PI / m).tan() / 64.0;
    assert!((cc.v_area - v).abs() < 1e-8 * v, "{} vs {v}", cc.v_area);
    let s_area = k * (PI / k).tan() * t * t;
    assert!((cc.c_v - v * s_area / (t * t)).abs() < 1e-8);
    assert!(cc.dual_gap < 1e-12);
    assert!(cc.psip_margin > -1e-12);
    assert!(cc.sigma_in_section);
}

#[test]
fn paraboloid_contact_set_matches_continuum() {
    let psi = paraboloid(&[(0.3, 0.01), (10.0, 0.25)], 10.0);
    let t = 2.0;
    let s = origin_section(&psi, t);
    let cc = contact_construction(&psi, &s, 512).unwrap();
    // for |x|²/2 the contact set is the disk |y| <= u√t with (31/64)u² − (31√2/8)u + 1/2 = 0
    let (a, b) = (31.0 / 64.0, 31.0 * 2f64.sqrt() / 8.0);
    let u = (b - (b * b - 2.0 * a).sqrt()) / (2.0 * a);
    let rad = u * t.sqrt();
    let far = cc.sigma.iter().map(|c| c.point().norm()).fold(0.0, f64::max);
    assert!(far <= rad + 0.01 * 2f64.sqrt(), "{far} vs {rad}");
    assert!(far >= rad - 0.01 * 2f64.sqrt(), "{far} vs {rad}");
    let v = PI * rad * rad;
    assert!((cc.v_area / v - 1.0).abs() < 0.15, "{} vs {v}", cc.v_area);
    assert!(cc.psip_margin > -1e-9);
    assert!(cc.dual_gap < 1e-9);
    assert!(cc.sigma_in_section);
}

/// `|V|` by assigning a grid of slopes to the maximizing lifted point of `q·v − w`.
#[test]
fn dual_cells_match_slope_grid_oracle() {
    let psi = paraboloid(&[(0.6, 0.05), (3.0, 0.3)], 3.0);
    let t = 0.5;
    let s = origin_section(&psi, t);
    let cc = contact_construction(&psi, &s, 256).unwrap();
    let john = s.body.john_ellipsoid().unwrap();
    let (c, a) = (john.center, john.shape);
    let p = |x: &Point2| 0.5 * t * (john.norm(x).powi(2) / 16.0 - 1.0);
    let w = |x: &Point2| s.height(&psi, x) - t - p(x);
    let interior: Vec<Point2> =
        psi.diagram_vertices().into_iter().map(|v| v.point).filter(|v| john.norm(v) < 4.0 * (1.0 - 1e-9)).collect();
    let b = john.half_axes();
    let ring: Vec<Point2> = (0..256)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / 256.0;
            c + b * Point2::new(th.cos(), th.sin()) * 4.0
        })
        .collect();
    let wi: Vec<f64> = interior.iter().map(w).collect();
    // slopes of V are ∂w̄ shifted by ∇p + p0; translation keeps area, so scan ∂w̄ around the origin
    let qmax = cc
        .sigma
        .iter()
        .flat_map(|cp| {
            let y = cp.point();
            let shift = (a * (y - c)) * (t / 16.0);
            cp.slopes().into_iter().map(move |q| (q - shift).norm())
        })
        .fold(0.0, f64::max)
        * 1.1;
    let n = 600;
    let dq = 2.0 * qmax / n as f64;
    let mut hits = 0usize;
    for i in 0..n {
        for j in 0..n {
            let q = Point2::new(-qmax + dq * (i as f64 + 0.5), -qmax + dq * (j as f64 + 0.5));
            let best_in = interior.iter().zip(&wi).map(|(v, w)| q.dot(v) - w).fold(f64::NEG_INFINITY, f64::max);
            let best_ring = ring.iter().map(|v| q.dot(v)).fold(f64::NEG_INFINITY, f64::max);
            if best_in > best_ring {
                hits += 1;
            }
        }
    }
    let oracle = hits as f64 * dq * dq;
    assert!((cc.v_area - oracle).abs() < 0.03 * oracle, "{} vs {oracle}", cc.v_area);
}

#[test]
fn sup_bound_on_cone_and_paraboloid() {
    let psi = cone(8);
    let t = 0.05;
    let s = origin_section(&psi, t);
    let rep = sup_bound_check(&psi, &s, &KernelSpec::ball(0.02).unwrap(), 400).unwrap();
    // the incircle of the octagon has radius t, so A = I/t² and the sup is 6t
    assert!((rep.sup - 6.0 * t).abs() < 1e-6 * t);
    assert!((rep.trace_a - 2.0 / (t * t)).abs() < 1e-5 / (t * t));
    assert!((rep.ratio - rep.mean_delta_r * t / 12.0).abs() < 1e-5 * rep.ratio);
    assert!(rep.holds() && rep.r_within_section);

    let psi = paraboloid(&[(3.0, 0.05)], 3.0);
    let t = 0.25;
    let s = origin_section(&psi, t);
    let rep = sup_bound_check(&psi, &s, &KernelSpec::ball(0.1).unwrap(), 400).unwrap();
    // S is the disk of radius √(2t): Tr(A) = 1/t, sup over radius 6√(2t) of |x|²/2 is 36t
    assert!((rep.sup / (36.0 * t) - 1.0).abs() < 0.01, "{}", rep.sup);
    assert!((rep.trace_a * t - 1.0).abs() < 0.02, "{}", rep.trace_a);
    assert!(rep.ratio < SUP_BOUND_C2);
}

#[test]
fn fattening_at_the_cone_apex() {
    let psi = cone(8);
    let t = 0.05;
    let cc = contact_construction(&psi, &origin_section(&psi, t), 64).unwrap();
    let kernel = KernelSpec::ball(0.02).unwrap();
    let f = fatten(&cc, &psi, &square(0.5), &kernel, 1e-4, None, 8, 1).unwrap();
    // ψ(x) − q0·x <= h on S(0, q0, h) with equality at its vertices
    assert!((f.checks.pairing_constant - 1.0).abs() < 1e-9);
    let h0 = t * 0.02f64.powi(2) * cc.john.trace() / (8.0 * 4.0 * kernel.m0);
    assert!((f.h - h0).abs() < 1e-9 * h0);
    assert!(f.checks.preimage_witness.is_none());
    assert!(f.checks.section_radius_ratio >= 1.0 - 1e-9);
    assert!(f.checks.polar_radius_ratio >= 1.0);
    assert!(f.checks.engulf_factor < 1.0);
    // W_h = q0/2 + ∂ψ(0)/2 stays inside ∂ψ(0)
    let p = 8.0 * (PI / 8.0).tan();
    assert!(f.v_h_area <= p + 1e-9 && f.v_h_area >= p / 4.0 - 1e-9);
    assert!(f.sigma_h_area > 0.0 && f.area_ratio < 1.0);
}

#[test]
fn zero_height_keeps_the_contact_set() {
    let psi = cone(8);
    let cc = contact_construction(&psi, &origin_section(&psi, 0.05), 64).unwrap();
    let f = fatten(&cc, &psi, &square(0.5), &KernelSpec::ball(0.02).unwrap(), 1e-4, Some(0.0), 4, 1).unwrap();
    assert_eq!(f.h, 0.0);
    assert_eq!(f.sigma_h_area, 0.0);
    assert_eq!(f.v_h_area, cc.v_area);
    assert!(f.w_h.is_empty());
}

#[test]
fn fattening_preconditions() {
    let psi = cone(8);
    let cc = contact_construction(&psi, &origin_section(&psi, 0.05), 64).unwrap();
    let wide = KernelSpec::ball(0.2).unwrap();
    assert!(matches!(fatten(&cc, &psi, &square(0.5), &wide, 1e-4, None, 4, 1), Err(LabError::PreconditionsUnmet(_))));
    let narrow = KernelSpec::ball(0.005).unwrap();
    assert!(matches!(fatten(&cc, &psi, &square(0.5), &narrow, 1e-4, None, 4, 1), Err(LabError::PreconditionsUnmet(_))));
}

#[test]
fn critical_heights_on_grid_paraboloid() {
    let h = 0.01;
    let psi = paraboloid(&[(0.5, h)], 0.5);
    let kernel = KernelSpec::ball(0.1).unwrap();
    // midpoints at the grid points, where the tangent plane touches
    let field = laplacian_field(&psi, &square(0.055), &kernel, h).unwrap();
    let (alpha, m) = (1.0, 2.0);
    let ch = critical_heights(&psi, &field, &kernel, alpha, 0.05, m, 0.5, 2).unwrap();
    assert!(!ch.entries.is_empty());
    assert_eq!(ch.skipped, 0);
    let grid = tangent_grid(&[(0.5, h)]);
    for e in &ch.entries {
        let x = Point2::new(e.x[0], e.x[1]);
        // dist(x, ∂S(x, x, Mt)) = min_g (Mt + |g − x|²/2) / |g − x|, so the boundary rule holds up to
        // t = max_g |g − x|(r − |g − x|/2) / M; the width rule never does since t/ℓ² <= 1/2
        let oracle = grid
            .iter()
            .map(|g| (g - x).norm())
            .filter(|d| *d > 1e-12)
            .map(|d| d * (kernel.r - d / 2.0) / m)
            .fold(0.0, f64::max);
        assert!((e.t - oracle).abs() < 1e-6 * oracle, "{} vs {oracle}", e.t);
        assert_eq!(e.branch, Branch::Boundary);
        assert!(e.t / (e.ell * e.ell) <= 0.5 + 1e-9);
    }
    assert!(ch.boundary_ratio.unwrap() >= 1.0);
    assert!(ch.cap_hat.unwrap() > 1.0);
}

#[test]
fn empty_superlevel_set() {
    let psi = cone(8);
    let kernel = KernelSpec::ball(0.05).unwrap();
    let field = laplacian_field(&psi, &square(0.2), &kernel, 0.02).unwrap();
    let ch = critical_heights(&psi, &field, &kernel, field.max() * 2.0, 0.1, 2.0, 0.5, 2).unwrap();
    assert!(ch.entries.is_empty());
    assert!(ch.c_hat.is_none() && ch.cap_hat.is_none() && ch.boundary_ratio.is_none());
}

fn constant_field(h: f64, value: f64, n: usize) -> LaplacianField {
    LaplacianField { lo: [0.0, 0.0], hi: [h * n as f64; 2], step: h, r: 0.1, nx: n, ny: n, values: vec![value; n * n] }
}

#[test]
fn chebyshev_pairs_of_constant_field() {
    // Δ_r of a quadratic is its trace everywhere
    let inner = constant_field(0.1, 2.0, 5);
    let outer = constant_field(0.1, 2.0, 10);
    let fit = reversed_chebyshev(&inner, &outer, &[0.5, 1.0, 1.5, 3.0], 1.0, &ChebyshevMode::Global);
    for p in &fit.pairs {
        if p.alpha <= 2.0 {
            assert!((p.lhs - 2.0 * 0.25).abs() < 1e-12);
            assert!((p.rhs - p.alpha * 1.0).abs() < 1e-12);
        } else {
            assert_eq!((p.lhs, p.rhs), (0.0, 0.0));
        }
    }
    assert!((fit.cap_hat - 0.5 / 0.5).abs() < 1e-12);
    assert!((fit.cap_hat_upper - 0.5 / 1.5).abs() < 1e-12);
}

#[test]
fn local_chebyshev_restricts_to_balls() {
    let inner = constant_field(0.01, 3.0, 100);
    let outer = inner.clone();
    let mode = ChebyshevMode::Local { center: [0.5, 0.5], radius: 0.2, c: 0.1, beta: 1.0 };
    let fit = reversed_chebyshev(&inner, &outer, &[1.0], 0.5, &mode);
    let p = &fit.pairs[0];
    assert!((p.lhs - 3.0 * PI * 0.04).abs() < 0.02 * p.lhs);
    assert!((p.rhs - PI * 0.09).abs() < 0.02 * p.rhs);
}

#[test]
fn affine_potential_has_zero_modulus() {
    let psi = PiecewiseAffineConvex::new(vec![Point2::new(0.3, -0.2)], vec![0.1], trust_window(&square(1.0)));
    let cfg = ModulusConfig {
        rho: 0.5,
        delta: 1e-4,
        beta_hat: 2.0,
        theta_hat: 1.0,
        cutoff_constant: 2.0,
        grad_radius: 1.0,
        pairs: 300,
        bins: 4,
        seed: 1,
    };
    let tab = c1alpha_modulus(&psi, &square(0.5), &cfg);
    // only rounding of ψ(x) − ψ(y) − q·(x − y) remains
    assert!(tab.modulus.abs() < 1e-9 && tab.below_max.abs() < 1e-6, "{} {}", tab.modulus, tab.below_max);
    assert_eq!(tab.ff_violations, 0);
}

#[test]
fn paraboloid_modulus_and_engulfing() {
    let h = 0.02;
    let psi = paraboloid(&[(1.5, h)], 1.5);
    let cfg = ModulusConfig {
        rho: 0.5,
        delta: 1e-4,
        beta_hat: 2.0,
        theta_hat: 1.0,
        cutoff_constant: 10.0,
        grad_radius: 1.5,
        pairs: 1500,
        bins: 5,
        seed: 3,
    };
    let tab = c1alpha_modulus(&psi, &square(0.5), &cfg);
    let cut = tab.cutoff;
    assert!((cut - 0.1).abs() < 1e-12);
    // gap <= |x − g_y|²/2 <= (s + h/√2)²/2 for the nearest grid point g_y of y
    let bound = (cut + h / 2f64.sqrt()).powi(2) / (2.0 * cut * cut);
    assert!(tab.modulus <= bound && tab.modulus > 0.4, "{}", tab.modulus);
    assert!(tab.below_max > tab.modulus);
    let tab2 = c1alpha_modulus(&psi, &square(0.5), &ModulusConfig { theta_hat: 2.0, ..cfg });
    assert!(tab2.ff_pairs > 0);
    assert_eq!(tab2.ff_violations, 0);
}

#[test]
fn crease_blows_up_at_small_separation() {
    let psi = PiecewiseAffineConvex::new(
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)],
        vec![0.0, 0.0],
        trust_window(&square(1.0)),
    );
    let cfg = ModulusConfig {
        rho: 1.0,
        delta: 1e-4,
        beta_hat: 2.0,
        theta_hat: 1.0,
        cutoff_constant: 1.0,
        grad_radius: 1.0,
        pairs: 4000,
        bins: 4,
        seed: 9,
    };
    let strip = Polygon::rectangle(Point2::new(-0.05, -0.5), Point2::new(0.05, 0.5));
    let tab = c1alpha_modulus(&psi, &strip, &cfg);
    // a pair straddling x₁ = 0 has gap ~ s, so the ratio grows like 1/s
    let last = tab.above.last().unwrap().max_ratio;
    assert!(tab.below_max > 10.0 * last, "{} vs {last}", tab.below_max);
    assert!(tab.modulus > last);
}

#[test]
fn flat_parts_of_one_and_two_targets() {
    let omega = unit_square();
    let one = PiecewiseAffineConvex::new(vec![Point2::new(0.5, 0.5)], vec![0.0], trust_window(&omega));
    let fp = flat_part_diameters(&one, &omega);
    assert_eq!(fp.count, 1);
    assert!((fp.max_diameter - 0.5 * 2f64.sqrt()).abs() < 1e-9);
    let two = PiecewiseAffineConvex::new(
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)],
        vec![0.0, -0.5],
        trust_window(&omega),
    );
    let fp = flat_part_diameters(&two, &omega);
    assert_eq!(fp.count, 2);
    assert!((fp.max_diameter - (0.25f64 + 0.0625).sqrt()).abs() < 1e-9);
}

#[test]
fn power_law_fit_is_exact_on_monomials() {
    let xs: Vec<f64> = (1..20).map(|k| 0.1 * k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.7)).collect();
    assert!((power_law_exponent(&xs, &ys) - 1.7).abs() < 1e-12);
    assert!(power_law_exponent(&[1.0], &[1.0]).is_nan());
}

#[test]
fn identity_instance_has_trace_two() {
    let spec = DensitySpec::uniform(unit_square());
    let inst = solve_instance(&spec, &spec, 1.0 / 16.0, Seeding::Grid).unwrap();
    let region = unit_square().dilate_about_center(0.5);
    let rep =
        regularity_at(&inst.psi, &inst.omega, &region, 1.0 / 16.0, &KernelSpec::ball(0.1).unwrap(), &[2.0], &[1.0])
            .unwrap();
    // ∫_{Ω'} Δψ is the flux of x through ∂Ω', i.e. 2|Ω'|
    assert!((rep.l1_norm / (2.0 * 0.25) - 1.0).abs() < 0.1, "{}", rep.l1_norm);
    assert!((rep.region_area - 0.25).abs() < 1e-9);
    assert_eq!(rep.controls.len(), 1);
    assert!(rep.flat_part_diameter <= 1.0 / 16.0 + 1e-9);
}

#[test]
fn sweep_orders_levels_and_reports_spreads() {
    let spec = DensitySpec::uniform(unit_square());
    let cfg = SweepConfig {
        source: spec.clone(),
        target: spec,
        deltas: vec![1.0 / 16.0, 1.0 / 8.0],
        shrink: 0.5,
        kernel: KernelSpec::ball(1.0).unwrap(),
        p_list: vec![1.5],
        control_exponents: vec![0.25],
        seeding: Seeding::Grid,
    };
    let series = sobolev_sweep(&cfg);
    assert!(series.failures.is_empty(), "{:?}", series.failures);
    assert_eq!(series.reports.len(), 2);
    assert!(series.reports[0].delta > series.reports[1].delta);
    assert!(series.llogl_spread >= 1.0 && series.llogl_spread.is_finite());
    assert_eq!(series.lp_spread.len(), 1);
    assert_eq!(series.control_growth.len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn contact_points_support_the_section(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k = 40;
        let slopes: Vec<Point2> = (0..k).map(|_| Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let b = slopes.iter().map(|y| -0.5 * y.norm_squared() - rng.random_range(0.0..0.05)).collect();
        let psi = PiecewiseAffineConvex::new(slopes, b, trust_window(&square(1.0)));
        let x0 = Point2::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
        let p0 = psi.subdifferential(&x0, 1e-12).body.center_of_mass();
        let Ok(s) = section(&psi, x0, p0, 0.02) else { return Ok(()) };
        match contact_construction(&psi, &s, 128) {
            Ok(cc) => {
                prop_assert!(cc.sigma_in_section);
                prop_assert!(cc.psip_margin > -1e-9);
                prop_assert!(cc.dual_gap < 1e-7);
                let areas: f64 = cc.sigma.iter().map(|c| polygon::area(&c.slopes())).sum();
                prop_assert!((areas - cc.v_area).abs() < 1e-9 * (1.0 + cc.v_area));
            }
            Err(LabError::EnvelopeFailed(_)) | Err(LabError::Geom(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
