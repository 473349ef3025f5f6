use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simplex::NetworkSimplex;
use super::OtError;
use crate::geom::Point2;
use crate::measures::DiscreteMeasure;

/// Materialized-arc budget of the exact solver.
pub const ARC_BUDGET: usize = 10_000_000;

/// Sparse optimal coupling with its cost and duality gap.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransportPlan {
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub gap: f64,
}

/// Kantorovich duals with `u_i + φ_j <= |x_i − y_j|²`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Duals {
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    cost: f64,
    gap: f64,
    entries: Vec<(usize, usize, f64)>,
    phi: Vec<f64>,
    u: Vec<f64>,
}

impl TransportPlan {
    pub fn row_sums(&self, n: usize) -> Vec<f64> {
        let mut r = vec![0.0; n];
        for &(i, _, g) in &self.entries {
            r[i] += g;
        }
        r
    }

    pub fn col_sums(&self, m: usize) -> Vec<f64> {
        let mut c = vec![0.0; m];
        for &(_, j, g) in &self.entries {
            c[j] += g;
        }
        c
    }

    /// Largest deviation of the marginals from the given weights.
    pub fn marginal_error(&self, f: &[f64], g: &[f64]) -> f64 {
        let r = self.row_sums(f.len());
        let c = self.col_sums(g.len());
        let dr = r.iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dc = c.iter().zip(g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        dr.max(dc)
    }

    pub fn to_json(&self, duals: &Duals) -> String {
        serde_json::to_string(&PlanFile {
            cost: self.cost,
            gap: self.gap,
            entries: self.entries.clone(),
            phi: duals.phi.clone(),
            u: duals.u.clone(),
        })
        .expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<(TransportPlan, Duals), serde_json::Error> {
        let f: PlanFile = serde_json::from_str(s)?;
        Ok((TransportPlan { entries: f.entries, cost: f.cost, gap: f.gap }, Duals { u: f.u, phi: f.phi }))
    }
}

fn sq(a: &Point2, b: &Point2) -> f64 {
    (a - b).norm_squared()
}

/// Exact optimal plan for the cost `|x − y|²`, with duals normalized so that `φ` vanishes at the
/// heaviest target (lowest index among ties) and `u` is the c-transform of `φ`.
pub fn solve_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(TransportPlan, Duals), OtError> {
    solve_with_budget(mu, nu, ARC_BUDGET)
}

pub fn solve_with_budget(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    budget: usize,
) -> Result<(TransportPlan, Duals), OtError> {
    let (xs, f) = (mu.points(), mu.weights());
    let (ys, g) = (nu.points(), nu.weights());
    let (n, m) = (xs.len(), ys.len());
    let (sf, sg): (f64, f64) = (f.iter().sum(), g.iter().sum());
    if (sf - sg).abs() > 1e-10 {
        return Err(OtError::Infeasible(sf - sg));
    }
    // rescale ν so the balances agree exactly
    let g: Vec<f64> = if sf == sg { g.to_vec() } else { g.iter().map(|w| w * sf / sg).collect() };
    let max_cost = xs.par_iter().map(|x| ys.iter().map(|y| sq(x, y)).fold(0.0, f64::max)).reduce(|| 0.0, f64::max);
    let mut ns = NetworkSimplex::new(f, &g, max_cost);
    let k0 = 6.min(m);
    let initial: Vec<Vec<usize>> = xs
        .par_iter()
        .map(|x| {
            let mut idx: Vec<usize> = (0..m).collect();
            if k0 < m {
                idx.select_nth_unstable_by(k0, |&a, &b| sq(x, &ys[a]).total_cmp(&sq(x, &ys[b])));
            }
            idx.truncate(k0);
            idx
        })
        .collect();
    if n * k0 > budget {
        return Err(OtError::BudgetExceeded(n * k0));
    }
    let mut present: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for (i, row) in initial.iter().enumerate() {
        for &j in row {
            ns.add_arc(i, j, sq(&xs[i], &ys[j]));
            present.insert((i, j));
        }
    }
    let tol = 1e-13 * (1.0 + max_cost);
    loop {
        ns.optimize();
        // price every pair against the current potentials
        let ns_ref = &ns;
        let per_row = 8;
        let violators: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut v: Vec<(usize, f64)> = (0..m)
                    .filter_map(|j| {
                        let r = ns_ref.reduced_cost(i, j, sq(&xs[i], &ys[j]));
                        (r < -tol).then_some((j, r))
                    })
                    .collect();
                if v.len() > per_row {
                    v.select_nth_unstable_by(per_row, |a, b| a.1.total_cmp(&b.1));
                    v.truncate(per_row);
                }
                v
            })
            .collect();
        let mut added = 0;
        for (i, row) in violators.iter().enumerate() {
            for &(j, _) in row {
                if present.insert((i, j)) {
                    ns.add_arc(i, j, sq(&xs[i], &ys[j]));
                    added += 1;
                }
            }
        }
        if added == 0 {
            break;
        }
        if ns.arc_count() - ns.artificial_arcs() > budget {
            return Err(OtError::BudgetExceeded(ns.arc_count() - ns.artificial_arcs()));
        }
    }
    if ns.artificial_flow() > 1e-12 {
        return Err(OtError::Infeasible(ns.artificial_flow()));
    }
    let mut entries: Vec<(usize, usize, f64)> = ns.real_flows().collect();
    entries.sort_by_key(|a| (a.0, a.1));
    let cost: f64 = entries.iter().map(|&(i, j, x)| x * sq(&xs[i], &ys[j])).sum();
    // φ_j = π_j, normalized, then u = φ^c
    let heaviest = (0..m).fold(0, |best, j| if g[j] > g[best] { j } else { best });
    let p0 = ns.sink_potential(heaviest);
    let phi: Vec<f64> = (0..m).map(|j| ns.sink_potential(j) - p0).collect();
    let u: Vec<f64> =
        xs.par_iter().map(|x| ys.iter().zip(&phi).map(|(y, p)| sq(x, y) - p).fold(f64::INFINITY, f64::min)).collect();
    let dual: f64 =
        f.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() + g.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>();
    let gap = (cost - dual).abs();
    Ok((TransportPlan { entries, cost, gap }, Duals { u, phi }))
}
