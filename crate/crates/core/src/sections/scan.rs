use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checks::{contraction_gamma, doubling_height, engulfing_theta};
use super::section::{default_subgradient, section, Section};
use super::vitali::vitali_constant;
use super::SectionError;
use crate::geom::{Point2, Polygon};
use crate::ot::PiecewiseAffineConvex;
use crate::rng::{seeded, uniform_in_polygon};

/// Inputs of [`property_scan`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanConfig {
    pub delta: f64,
    pub rho: f64,
    pub t_grid: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Points `y ∈ S` probed for the engulfing constant, per section.
    pub engulf_probes: usize,
    /// Sections handed to the covering-constant search (0 skips it).
    pub vitali_sections: usize,
    pub seed: u64,
}

/// One measured section.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanRow {
    pub delta: f64,
    pub t: f64,
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub in_omega: bool,
    pub volume: f64,
    pub ell: f64,
    #[serde(rename = "L")]
    pub big_l: f64,
    /// `|S|² / t²`.
    pub ratio: f64,
    /// Doubling height, when `S(x, p, Mt) ⊂ Ω`.
    pub m_local: Option<f64>,
    /// Engulfing constant, when `S(x, p, 2t) ⊂ Ω`.
    pub theta_local: Option<f64>,
    /// Contraction of `S(t/2)` inside `S(t)` about `x`.
    pub gamma_half: Option<f64>,
}

#[derive(Serialize)]
struct CsvRow {
    delta: f64,
    t: f64,
    x: f64,
    y: f64,
    volume: f64,
    ell: f64,
    #[serde(rename = "L")]
    big_l: f64,
    #[serde(rename = "M_local")]
    m_local: Option<f64>,
    theta_local: Option<f64>,
}

/// Measured section constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionPropertyReport {
    #[serde(rename = "C0_hat")]
    pub c0_hat: f64,
    #[serde(rename = "M_hat")]
    pub m_hat: f64,
    pub theta_hat: f64,
    pub beta_hat: f64,
    #[serde(rename = "Cstar_hat")]
    pub cstar_hat: Option<f64>,
    pub volume_ratio_range: (f64, f64),
    pub samples: usize,
    pub delta: f64,
    pub rho: f64,
    /// Fraction of sections passing all predicates, per grid height.
    pub pass_rates: Vec<(f64, Option<f64>)>,
    pub discarded: usize,
    pub witness_ratio_min: Option<ScanRow>,
    pub witness_ratio_max: Option<ScanRow>,
    pub witness_m: Option<ScanRow>,
    pub witness_theta: Option<ScanRow>,
    pub rows: Vec<ScanRow>,
}

impl SectionPropertyReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(CsvRow {
                delta: r.delta,
                t: r.t,
                x: r.x[0],
                y: r.x[1],
                volume: r.volume,
                ell: r.ell,
                big_l: r.big_l,
                m_local: r.m_local,
                theta_local: r.theta_local,
            })
            .expect("serializable row");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }

    /// Summary without the per-section rows.
    pub fn summary_json(&self) -> String {
        let mut s = self.clone();
        s.rows.clear();
        serde_json::to_string_pretty(&s).expect("serializable")
    }

    /// Rows counted by the estimates (`S ⊂ Ω`, `t >= Ĉ₀δ`).
    pub fn qualifying(&self) -> impl Iterator<Item = &ScanRow> {
        let t0 = self.c0_hat * self.delta;
        self.rows.iter().filter(move |r| r.in_omega && r.t >= t0 * (1.0 - 1e-12))
    }
}

fn contained(omega: &Polygon, s: &Section) -> bool {
    omega.contains(&s.body, 1e-12 * (1.0 + omega.diameter_scale()))
}

fn measure(
    psi: &PiecewiseAffineConvex,
    omega: &Polygon,
    x: Point2,
    p: Point2,
    t: f64,
    cfg: &ScanConfig,
    stream: u64,
) -> Option<(ScanRow, Option<Section>)> {
    let s = section(psi, x, p, t).ok()?;
    let in_omega = contained(omega, &s);
    let radii = s.body.radii();
    let mut row = ScanRow {
        delta: cfg.delta,
        t,
        x: [x.x, x.y],
        p: [p.x, p.y],
        in_omega,
        volume: s.area(),
        ell: radii.inner,
        big_l: radii.outer,
        ratio: s.area().powi(2) / (t * t),
        m_local: None,
        theta_local: None,
        gamma_half: None,
    };
    if !in_omega {
        return Some((row, None));
    }
    let m = doubling_height(&s, psi);
    if section(psi, x, p, m * t).is_ok_and(|big| contained(omega, &big)) {
        row.m_local = Some(m);
    }
    if section(psi, x, p, 2.0 * t).is_ok_and(|big| contained(omega, &big)) {
        let mut rng = seeded(cfg.seed, stream);
        let mut ys: Vec<Point2> = s.vertices().to_vec();
        ys.extend((0..cfg.engulf_probes).map(|_| uniform_in_polygon(&s.body, &mut rng)));
        row.theta_local = Some(engulfing_theta(&s, psi, &ys).0);
    }
    if let Ok(small) = section(psi, x, p, 0.5 * t) {
        row.gamma_half = Some(contraction_gamma(&small, &s));
    }
    Some((row, Some(s)))
}

/// Section constants over `points × t_grid`, with `Ĉ₀` read off the pass rates.
///
/// Predicates are measured against the rows in the upper half of the grid: a section passes
/// when its volume ratio lies in their range and its doubling and engulfing constants do not
/// exceed theirs. `Ĉ₀δ` is the smallest grid height from which every pass rate is at least 95%.
pub fn property_scan(
    psi: &PiecewiseAffineConvex,
    omega: &Polygon,
    cfg: &ScanConfig,
) -> Result<SectionPropertyReport, SectionError> {
    if let Some(&t) = cfg.t_grid.iter().find(|&&t| t > cfg.rho) {
        return Err(SectionError::RhoInfeasible { t, rho: cfg.rho });
    }
    let mut grid = cfg.t_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let jobs: Vec<(usize, usize, Point2, Point2)> = cfg
        .points
        .iter()
        .enumerate()
        .flat_map(|(i, x)| {
            let x = Point2::new(x[0], x[1]);
            let ps: Vec<Point2> = {
                let d = psi.subdifferential(&x, 1e-12);
                if d.is_singleton() {
                    vec![default_subgradient(psi, &x)]
                } else {
                    d.vertices().to_vec()
                }
            };
            ps.into_iter().enumerate().map(move |(k, p)| (i, k, x, p))
        })
        .collect();
    let measured: Vec<(ScanRow, Option<Section>)> = jobs
        .par_iter()
        .flat_map_iter(|&(i, k, x, p)| {
            let grid = &grid;
            (0..grid.len()).filter_map(move |g| {
                let stream = 1000 + ((i * 8 + k) * grid.len() + g) as u64;
                measure(psi, omega, x, p, grid[g], cfg, stream)
            })
        })
        .collect();
    let discarded = measured.iter().filter(|(r, _)| !r.in_omega).count();
    let t_ref = grid.get(grid.len() / 2).copied().unwrap_or(0.0);
    let inside: Vec<&ScanRow> = measured.iter().map(|(r, _)| r).filter(|r| r.in_omega).collect();
    let reference: Vec<&&ScanRow> = inside.iter().filter(|r| r.t >= t_ref).collect();
    let fold = |it: &mut dyn Iterator<Item = f64>| {
        it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    };
    let (lo_ref, hi_ref) = fold(&mut reference.iter().map(|r| r.ratio));
    let m_ref = fold(&mut reference.iter().filter_map(|r| r.m_local)).1;
    let th_ref = fold(&mut reference.iter().filter_map(|r| r.theta_local)).1;
    let passes = |r: &ScanRow| {
        r.ratio >= lo_ref * (1.0 - 1e-9)
            && r.ratio <= hi_ref * (1.0 + 1e-9)
            && r.m_local.is_none_or(|m| m <= m_ref * (1.0 + 1e-9))
            && r.theta_local.is_none_or(|th| th <= th_ref * (1.0 + 1e-9))
    };
    let pass_rates: Vec<(f64, Option<f64>)> = grid
        .iter()
        .map(|&t| {
            let at: Vec<&&ScanRow> = inside.iter().filter(|r| r.t == t).collect();
            let rate = (!at.is_empty()).then(|| at.iter().filter(|r| passes(r)).count() as f64 / at.len() as f64);
            (t, rate)
        })
        .collect();
    let mut k0 = grid.len();
    for g in (0..grid.len()).rev() {
        match pass_rates[g].1 {
            Some(r) if r < 0.95 => break,
            _ => k0 = g,
        }
    }
    let t0 = grid.get(k0).copied().unwrap_or(f64::INFINITY);
    let c0_hat = t0 / cfg.delta;
    let qual: Vec<&ScanRow> = inside.iter().copied().filter(|r| r.t >= t0).collect();
    let arg = |key: &dyn Fn(&ScanRow) -> Option<f64>, max: bool| {
        qual.iter().filter_map(|r| key(r).map(|v| (v, *r))).fold(None::<(f64, &ScanRow)>, |acc, (v, r)| match acc {
            Some((a, _)) if (max && v <= a) || (!max && v >= a) => acc,
            _ => Some((v, r)),
        })
    };
    let rmin = arg(&|r| Some(r.ratio), false);
    let rmax = arg(&|r| Some(r.ratio), true);
    let mw = arg(&|r| r.m_local, true);
    let tw = arg(&|r| r.theta_local, true);
    let m_hat = mw.map_or(f64::NAN, |v| v.0);
    let cstar_hat = (cfg.vitali_sections > 0).then(|| {
        let chosen: Vec<Section> = measured
            .iter()
            .filter(|(r, s)| s.is_some() && r.t >= t0)
            .filter_map(|(_, s)| s.clone())
            .take(cfg.vitali_sections)
            .collect();
        (!chosen.is_empty()).then(|| vitali_constant(&chosen).cstar)
    });
    Ok(SectionPropertyReport {
        c0_hat,
        m_hat,
        theta_hat: tw.map_or(f64::NAN, |v| v.0),
        beta_hat: m_hat.ln() / 2f64.ln(),
        cstar_hat: cstar_hat.flatten(),
        volume_ratio_range: (rmin.map_or(f64::NAN, |v| v.0), rmax.map_or(f64::NAN, |v| v.0)),
        samples: qual.len(),
        delta: cfg.delta,
        rho: cfg.rho,
        pass_rates,
        discarded,
        witness_ratio_min: rmin.map(|v| v.1.clone()),
        witness_ratio_max: rmax.map(|v| v.1.clone()),
        witness_m: mw.map(|v| v.1.clone()),
        witness_theta: tw.map(|v| v.1.clone()),
        rows: measured.into_iter().map(|(r, _)| r).collect(),
    })
}

/// Feasible height with the subgradient chosen at each probe point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoFeasibility {
    pub rho: f64,
    pub points: Vec<[f64; 2]>,
    pub subgradients: Vec<[f64; 2]>,
}

/// `k × k` grid of the bounding box of `region`, kept where it lies in `region`.
fn probe_grid(region: &Polygon, k: usize) -> Vec<Point2> {
    let v = region.vertices();
    let (lo, hi) = v.iter().fold((v[0], v[0]), |(a, b), p| (a.inf(p), b.sup(p)));
    let slack = 1e-12 * (1.0 + region.diameter_scale());
    let mut out = Vec::new();
    for j in 0..k {
        for i in 0..k {
            let s = Point2::new(i as f64, j as f64) / (k.max(2) - 1) as f64;
            let p = lo + (hi - lo).component_mul(&s);
            if region.contains_point(&p, slack) {
                out.push(p);
            }
        }
    }
    out
}

/// Among the vertices of `∂ψ(x)` whose section of height `rho` stays in `Ω`, the one with
/// the smallest outer radius.
fn choose(psi: &PiecewiseAffineConvex, omega: &Polygon, x: &Point2, rho: f64) -> Option<Point2> {
    psi.subdifferential(x, 1e-12)
        .vertices()
        .iter()
        .filter_map(|p| {
            let s = section(psi, *x, *p, rho).ok()?;
            contained(omega, &s).then(|| (s.body.outer_radius(), *p))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, p)| p)
}

/// Largest `ρ` (relative precision 1e-3) such that every probe `x` of a `k × k` grid on `Ω'`
/// has a subgradient `p` with `S(x, p, ρ) ⊂ Ω`.
pub fn rho_feasibility(
    psi: &PiecewiseAffineConvex,
    omega: &Polygon,
    omega_prime: &Polygon,
    k: usize,
) -> Result<RhoFeasibility, SectionError> {
    let pts = probe_grid(omega_prime, k);
    let feasible = |rho: f64| -> Result<Vec<Point2>, Point2> {
        let r: Vec<Result<Point2, Point2>> = pts.par_iter().map(|x| choose(psi, omega, x, rho).ok_or(*x)).collect();
        r.into_iter().collect()
    };
    let image = super::checks::gradient_hull(psi, omega.ring());
    let mut hi = 1.01 * image.outer_radius().max(1e-300) * omega.inner_radius() * 2.0;
    let mut lo = hi;
    let mut first_failure = None;
    let mut found = None;
    for _ in 0..60 {
        match feasible(lo) {
            Ok(ps) => {
                found = Some(ps);
                break;
            }
            Err(x) => {
                first_failure.get_or_insert(x);
                hi = lo;
                lo *= 0.5;
            }
        }
    }
    let Some(mut best) = found else {
        let x = first_failure.unwrap_or_else(Point2::zeros);
        return Err(SectionError::NoFeasibleRho([x.x, x.y]));
    };
    if lo < hi {
        while hi - lo > 1e-3 * lo {
            let mid = 0.5 * (lo + hi);
            match feasible(mid) {
                Ok(ps) => {
                    lo = mid;
                    best = ps;
                }
                Err(_) => hi = mid,
            }
        }
    }
    Ok(RhoFeasibility {
        rho: lo,
        points: pts.iter().map(|p| [p.x, p.y]).collect(),
        subgradients: best.iter().map(|p| [p.x, p.y]).collect(),
    })
}
