use kantoreg::geom::Polygon;
use kantoreg::measures::{discretize, DensityKind, DensitySpec, DiscreteMeasure, Seeding};
use kantoreg::ot::{
    build_potential, check_mass_inequalities, legendre, solve_exact, solve_with_budget, trust_window, OtError,
    PiecewiseAffineConvex,
};
use kantoreg::Point2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_square() -> Polygon {
    Polygon::rectangle(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0))
}

fn square(h: f64) -> Polygon {
    Polygon::rectangle(Point2::new(-h, -h), Point2::new(h, h))
}

fn uniform_cloud(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
    let pts = (0..n).map(|_| Point2::new(rng.random::<f64>(), rng.random::<f64>())).collect();
    DiscreteMeasure::normalized(pts, vec![1.0; n], 0.0).unwrap()
}

fn weighted_cloud(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
    let pts = (0..n).map(|_| Point2::new(rng.random::<f64>(), rng.random::<f64>())).collect();
    let w = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    DiscreteMeasure::normalized(pts, w, 0.0).unwrap()
}

/// Minimum over all permutations of the assignment cost (Heap's algorithm).
fn brute_force(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let n = mu.len();
    let cost = |p: &[usize]| -> f64 {
        (0..n).map(|i| (mu.points()[i] - nu.points()[p[i]]).norm_squared()).sum::<f64>() / n as f64
    };
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    let mut best = cost(&p);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            best = best.min(cost(&p));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

#[test]
fn dirac_to_dirac() {
    let (plan, _) =
        solve_exact(&DiscreteMeasure::dirac(Point2::zeros()), &DiscreteMeasure::dirac(Point2::new(1.0, 0.0))).unwrap();
    assert_eq!(plan.entries, vec![(0, 0, 1.0)]);
    assert!((plan.cost - 1.0).abs() < 1e-15);
}

#[test]
fn matches_permutation_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for k in 0..50 {
        let n = 2 + k % 6;
        let mu = uniform_cloud(&mut rng, n);
        let nu = uniform_cloud(&mut rng, n);
        let (plan, duals) = solve_exact(&mu, &nu).unwrap();
        let oracle = brute_force(&mu, &nu);
        assert!((plan.cost - oracle).abs() < 1e-10, "{} vs {oracle}", plan.cost);
        assert!(plan.gap <= 1e-9 * (1.0 + plan.cost));
        assert!(plan.marginal_error(mu.weights(), nu.weights()) < 1e-10);
        assert_eq!(duals.phi.len(), n);
    }
}

#[test]
fn collinear_points_match_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in 2..=7 {
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>()).collect();
        let line = |v: &[f64]| v.iter().map(|&t| Point2::new(t, 0.5 * t)).collect::<Vec<_>>();
        let mu = DiscreteMeasure::normalized(line(&xs), vec![1.0; n], 0.0).unwrap();
        let nu = DiscreteMeasure::normalized(line(&ys), vec![1.0; n], 0.0).unwrap();
        let (plan, _) = solve_exact(&mu, &nu).unwrap();
        assert!((plan.cost - brute_force(&mu, &nu)).abs() < 1e-12);
        let mut sx: Vec<usize> = (0..n).collect();
        let mut sy: Vec<usize> = (0..n).collect();
        sx.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
        sy.sort_by(|a, b| ys[*a].total_cmp(&ys[*b]));
        for r in 0..n {
            assert!(plan
                .entries
                .iter()
                .any(|&(i, j, g)| i == sx[r] && j == sy[r] && (g - 1.0 / n as f64).abs() < 1e-12));
        }
    }
}

#[test]
fn gap_and_marginals_on_larger_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [50, 200] {
        let mu = weighted_cloud(&mut rng, n);
        let nu = weighted_cloud(&mut rng, n + 7);
        let (plan, duals) = solve_exact(&mu, &nu).unwrap();
        assert!(plan.gap <= 1e-9 * (1.0 + plan.cost), "gap {}", plan.gap);
        assert!(plan.marginal_error(mu.weights(), nu.weights()) < 1e-10);
        // dual feasibility
        for (i, x) in mu.points().iter().enumerate() {
            for (j, y) in nu.points().iter().enumerate() {
                assert!(duals.u[i] + duals.phi[j] <= (x - y).norm_squared() + 1e-12);
            }
        }
    }
}

#[test]
fn mass_mismatch_and_budget() {
    let mu = DiscreteMeasure::dirac(Point2::zeros());
    let nu = DiscreteMeasure::new(vec![Point2::zeros(), Point2::new(1.0, 0.0)], vec![0.5, 0.5], 0.0).unwrap();
    assert!(solve_exact(&mu, &nu).is_ok());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = uniform_cloud(&mut rng, 30);
    let b = uniform_cloud(&mut rng, 30);
    assert!(matches!(solve_with_budget(&a, &b, 20), Err(OtError::BudgetExceeded(_))));
}

#[test]
fn plan_json_has_expected_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (plan, duals) = solve_exact(&uniform_cloud(&mut rng, 6), &uniform_cloud(&mut rng, 6)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&plan.to_json(&duals)).unwrap();
    for k in ["cost", "gap", "entries", "phi", "u"] {
        assert!(v.get(k).is_some());
    }
    let (back, d2) = kantoreg::ot::TransportPlan::from_json(&plan.to_json(&duals)).unwrap();
    assert_eq!(back.entries, plan.entries);
    assert_eq!(d2.phi, duals.phi);
}

fn abs_sum() -> PiecewiseAffineConvex {
    let slopes = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].map(|(a, b)| Point2::new(a, b)).to_vec();
    PiecewiseAffineConvex::new(slopes, vec![0.0; 4], trust_window(&square(1.0)))
}

#[test]
fn abs_sum_potential() {
    let psi = abs_sum();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let x = Point2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        assert!((psi.eval(&x) - (x.x.abs() + x.y.abs())).abs() < 1e-14);
    }
    let s = psi.subdifferential(&Point2::zeros(), 0.0);
    assert!((s.body.volume() - 4.0).abs() < 1e-12);
    let s = psi.subdifferential(&Point2::new(0.5, 0.5), 0.0);
    assert!(s.is_singleton() && (s.vertices()[0] - Point2::new(1.0, 1.0)).norm() < 1e-15);
}

#[test]
fn edge_midpoint_subdifferential_is_segment() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let slopes: Vec<Point2> =
        (0..30).map(|_| Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let b: Vec<f64> = (0..30).map(|_| rng.random_range(-0.2..0.0)).collect();
    let psi = PiecewiseAffineConvex::new(slopes.clone(), b.clone(), trust_window(&square(1.0)));
    for e in psi.diagram_edges().iter().take(20) {
        let mid = (e.a + e.b) * 0.5;
        let s = psi.subdifferential(&mid, 1e-12);
        // direct enumeration of maximal pieces
        let vals: Vec<f64> = (0..30).map(|j| mid.dot(&slopes[j]) + b[j]).collect();
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut active: Vec<usize> = (0..30).filter(|&j| vals[j] >= top - 1e-12).collect();
        active.sort_unstable();
        assert_eq!(active, vec![e.pieces.0.min(e.pieces.1), e.pieces.0.max(e.pieces.1)]);
        assert_eq!(s.vertices().len(), 2);
        assert!(s.body.volume() == 0.0);
    }
}

#[test]
fn single_target_gives_affine_potential() {
    let nu = DiscreteMeasure::dirac(Point2::new(0.3, -0.2));
    let mu = discretize(&DensitySpec::unit_square_uniform(), 0.25, Seeding::Grid).unwrap();
    let (_, duals) = solve_exact(&mu, &nu).unwrap();
    let psi = build_potential(&duals, &nu, &unit_square());
    assert_eq!(psi.len(), 1);
    assert_eq!(psi.slopes()[0], Point2::new(0.3, -0.2));
}

#[test]
fn legendre_of_affine() {
    let a = Point2::new(0.4, -0.7);
    let psi = PiecewiseAffineConvex::new(vec![a], vec![0.25], trust_window(&square(1.0)));
    let star = legendre(&psi, &square(1.0));
    assert!((star.eval(&a) + 0.25).abs() < 1e-14);
    let z = Point2::new(1.3, 0.2);
    let by_vertices = square(1.0).vertices().iter().map(|v| v.dot(&z) - psi.eval(v)).fold(f64::NEG_INFINITY, f64::max);
    assert!((star.eval(&z) - by_vertices).abs() < 1e-14);
}

#[test]
fn legendre_of_abs_sum_vanishes_on_square() {
    let star = legendre(&abs_sum(), &square(1.0));
    let n = 401;
    let grid: Vec<Point2> = (0..n * n)
        .map(|k| {
            Point2::new(-1.0 + 2.0 * (k % n) as f64 / (n - 1) as f64, -1.0 + 2.0 * (k / n) as f64 / (n - 1) as f64)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..40 {
        let z = Point2::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let oracle = grid.iter().map(|x| x.dot(&z) - x.x.abs() - x.y.abs()).fold(f64::NEG_INFINITY, f64::max);
        assert!((star.eval(&z) - oracle).abs() < 1e-12, "{z:?}");
        if z.x.abs() <= 1.0 && z.y.abs() <= 1.0 {
            assert!(star.eval(&z).abs() < 1e-14);
        }
    }
}

#[test]
fn biduality_on_random_potentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let omega = square(1.0);
    for _ in 0..10 {
        let k = rng.random_range(2..40);
        let slopes: Vec<Point2> =
            (0..k).map(|_| Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..0.0)).collect();
        let psi = PiecewiseAffineConvex::new(slopes, b, trust_window(&omega));
        let star = legendre(&psi, &omega);
        let hull = Polygon::from_points(psi.slopes()).unwrap();
        let back = legendre(&star, &hull);
        for _ in 0..200 {
            let x = Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            assert!((back.eval(&x) - psi.eval(&x)).abs() <= 1e-9);
        }
    }
}

fn solved_instance(
    delta: f64,
    seed: u64,
) -> (DiscreteMeasure, DiscreteMeasure, PiecewiseAffineConvex, kantoreg::ot::TransportPlan, kantoreg::ot::Duals) {
    let src = DensitySpec::new(unit_square(), DensityKind::AffineTilt { gradient: [0.6, 0.0] }).unwrap();
    let dst = DensitySpec::new(
        Polygon::from_points(&[
            Point2::new(0.2, 0.0),
            Point2::new(1.3, 0.3),
            Point2::new(0.9, 1.2),
            Point2::new(-0.1, 0.8),
        ])
        .unwrap(),
        DensityKind::Uniform,
    )
    .unwrap();
    let mu = discretize(&src, delta, Seeding::JitteredGrid { seed }).unwrap();
    let nu = discretize(&dst, delta, Seeding::Poisson { seed }).unwrap();
    let (plan, duals) = solve_exact(&mu, &nu).unwrap();
    let psi = build_potential(&duals, &nu, &unit_square());
    (mu, nu, psi, plan, duals)
}

#[test]
fn support_lies_in_graph_of_subdifferential() {
    let (mu, nu, psi, plan, duals) = solved_instance(1.0 / 16.0, 1);
    let star = legendre(&psi, &unit_square());
    for &(i, j, _) in &plan.entries {
        let (x, y) = (mu.points()[i], nu.points()[j]);
        let conj = 0.5 * (y.norm_squared() - duals.phi[j]);
        assert!((psi.eval(&x) + conj - x.dot(&y)).abs() < 1e-8);
        assert!((psi.eval(&x) + star.eval(&y) - x.dot(&y)).abs() < 1e-8);
        let active = psi.active(&x, 1e-8);
        assert!(active.iter().any(|&k| psi.origin()[k] == j));
    }
    // slopes are target points and ψ is Lipschitz with their maximal norm
    let lip = nu.points().iter().map(|y| y.norm()).fold(0.0, f64::max);
    assert!(psi.lipschitz() <= lip);
    for c in psi.cells() {
        assert!(c.area() >= 1e-12);
    }
}

#[test]
fn mass_inequalities_hold_on_solved_instance() {
    let (mu, nu, psi, _, _) = solved_instance(1.0 / 16.0, 2);
    let target = nu.parent().unwrap().domain().clone();
    let rep = check_mass_inequalities(&psi, &mu, &nu, &unit_square(), &target, 500, 3);
    assert!(rep.max_violation() <= 1e-10, "{rep:?}");
    // A = Ω
    let whole = kantoreg::ot::Ellipse { center: Point2::new(0.5, 0.5), a: 0.8, b: 0.8, angle: 0.0 };
    let (l, r) = kantoreg::ot::forward_masses(&psi, &mu, &nu, &whole);
    assert!((l - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
}

#[test]
fn relabeling_and_translation() {
    let (mu, nu, psi, plan, _) = solved_instance(1.0 / 8.0, 5);
    let perm: Vec<usize> = (0..nu.len()).rev().collect();
    let (plan2, duals2) = solve_exact(&mu, &nu.permute(&perm)).unwrap();
    assert!((plan2.cost - plan.cost).abs() < 1e-12);
    let psi2 = build_potential(&duals2, &nu.permute(&perm), &unit_square());
    let v = Point2::new(0.7, -0.4);
    let (plan3, duals3) = solve_exact(&mu, &nu.translate(&v)).unwrap();
    let psi3 = build_potential(&duals3, &nu.translate(&v), &unit_square());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x0 = Point2::new(0.5, 0.5);
    let c3 = psi3.eval(&x0) - psi.eval(&x0) - v.dot(&x0);
    let c2 = psi2.eval(&x0) - psi.eval(&x0);
    for _ in 0..300 {
        let x = Point2::new(rng.random::<f64>(), rng.random::<f64>());
        assert!((psi2.eval(&x) - psi.eval(&x) - c2).abs() < 1e-9);
        assert!((psi3.eval(&x) - psi.eval(&x) - v.dot(&x) - c3).abs() < 1e-9);
    }
    assert_eq!(psi3.len(), psi.len());
    let _ = plan3;
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn complementary_slackness(seed in 0u64..10_000, n in 3usize..40, m in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = weighted_cloud(&mut rng, n);
        let nu = weighted_cloud(&mut rng, m);
        let (plan, duals) = solve_exact(&mu, &nu).unwrap();
        prop_assert!(plan.gap <= 1e-9 * (1.0 + plan.cost));
        prop_assert!(plan.marginal_error(mu.weights(), nu.weights()) < 1e-10);
        for &(i, j, g) in &plan.entries {
            prop_assert!(g > 0.0);
            let c = (mu.points()[i] - nu.points()[j]).norm_squared();
            prop_assert!((duals.u[i] + duals.phi[j] - c).abs() < 1e-9);
        }
    }

    #[test]
    fn subgradient_inequality(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..25);
        let slopes: Vec<Point2> = (0..k).map(|_| Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(-0.5..0.0)).collect();
        let psi = PiecewiseAffineConvex::new(slopes, b, trust_window(&square(1.0)));
        let x = Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let s = psi.subdifferential(&x, 1e-12);
        for _ in 0..100 {
            let z = Point2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            for q in s.vertices() {
                prop_assert!(psi.eval(&z) >= psi.eval(&x) + q.dot(&(z - x)) - 1e-12);
            }
        }
    }
}
