use std::path::{Path, PathBuf};

use kantoreg::geom::Polygon;
use kantoreg::lab::{
    c1alpha_modulus, contact_construction, critical_heights, fatten, regularity_at, reversed_chebyshev, ChebyshevMode,
    CriticalHeightField, ModulusConfig, ModulusTable,
};
use kantoreg::measures::{discretize, verify_assumption1, AssumptionCertificate, DiscreteMeasure};
use kantoreg::mollifier::laplacian_field;
use kantoreg::ot::{build_potential, solve_exact, trust_window, Duals, PiecewiseAffineConvex, TransportPlan};
use kantoreg::sections::{
    default_subgradient, gradient_hull, property_scan, rho_feasibility, section, RhoFeasibility, ScanConfig,
    SectionPropertyReport,
};
use kantoreg::Point2;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::ledger::{now, stage_key, LedgerEntry, LedgerWriter, RunLedger, StageStatus};
use crate::report::write_report;
use crate::HarnessError;

/// How far `run` goes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Until {
    Discretize,
    Solve,
    /// Through the section scan, then one diagnostic (`"sections"` stops after the scan).
    Diagnose(String),
    /// Every stage and enabled diagnostic, then the report.
    Sweep,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Solver artifacts; `$KANTOREG_CACHE` or `<out>/cache` when absent.
    pub cache: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub until: Until,
}

impl RunOptions {
    pub fn sweep(out: impl Into<PathBuf>) -> Self {
        RunOptions { out: out.into(), cache: None, jobs: None, until: Until::Sweep }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache
            .clone()
            .or_else(|| std::env::var_os("KANTOREG_CACHE").map(PathBuf::from))
            .unwrap_or_else(|| self.out.join("cache"))
    }
}

/// Directory of the per-level reports.
pub fn level_dir(out: &Path, seed: u64, delta: f64) -> PathBuf {
    out.join(format!("seed-{seed}")).join(format!("delta-{delta}"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveSummary {
    pub n_source: usize,
    pub n_target: usize,
    pub cost: f64,
    pub gap: f64,
    pub pieces: usize,
    pub support: usize,
    /// `max |ψ(x_i) + ψ*(y_j) − x_i·y_j|` over the plan support.
    pub support_residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionPair {
    pub source: AssumptionCertificate,
    pub target: AssumptionCertificate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactRow {
    pub x: [f64; 2],
    pub t: f64,
    pub r: f64,
    pub qualifying: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub contact_points: usize,
    /// `|V| |S| / t²`.
    pub c_v: Option<f64>,
    /// `|Σ_h| / |S|`.
    pub area_ratio: Option<f64>,
    /// `min Δ_rψ ℓ(S)² / t` over the sampled points of `Σ_h`.
    pub pointwise_c: Option<f64>,
    pub pointwise_ratio: Option<f64>,
    pub h: Option<f64>,
    pub pairing_constant: Option<f64>,
    pub engulf_factor: Option<f64>,
    pub preimage_ok: Option<bool>,
    pub psip_margin: Option<f64>,
    pub dual_gap: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactSummary {
    pub rows: Vec<ContactRow>,
    pub qualifying: usize,
    pub c_v_min: Option<f64>,
    pub area_ratio_min: Option<f64>,
    pub pointwise_c_min: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChebyshevReport {
    pub r: f64,
    pub mean: f64,
    pub fit: kantoreg::lab::ChebyshevFit,
}

struct Job<'a> {
    cfg: &'a ExperimentConfig,
    hash: &'a str,
    seed: u64,
    delta: f64,
    dir: PathBuf,
    cache: PathBuf,
    ledger: &'a LedgerWriter,
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s.into_bytes()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Stage(format!("{}: {e}", path.display())))
}

fn write_files(files: &[(PathBuf, Vec<u8>)]) -> Result<(), HarnessError> {
    for (p, bytes) in files {
        if let Some(d) = p.parent() {
            std::fs::create_dir_all(d).map_err(|e| HarnessError::io(d, e))?;
        }
        std::fs::write(p, bytes).map_err(|e| HarnessError::io(p, e))?;
    }
    Ok(())
}

type Files = Vec<(PathBuf, Vec<u8>)>;

/// Runs or reuses one stage and records it.
#[allow(clippy::too_many_arguments)]
fn stage<T>(
    ledger: &LedgerWriter,
    hash: &str,
    name: &str,
    seed: Option<u64>,
    delta: Option<f64>,
    artifacts: &[PathBuf],
    compute: impl FnOnce() -> Result<(T, Files), HarnessError>,
    load: impl FnOnce() -> Result<T, HarnessError>,
) -> Option<T> {
    let key = stage_key(hash, name, seed, delta);
    let entry = |status, error, artifacts: Vec<String>| LedgerEntry {
        config_hash: hash.to_string(),
        stage: name.to_string(),
        seed,
        delta,
        key: key.clone(),
        status,
        error,
        artifacts,
        timestamp: now(),
    };
    if ledger.is_done(&key) && artifacts.iter().all(|p| p.exists()) {
        if let Ok(v) = load() {
            ledger.append(entry(StageStatus::Skipped, None, Vec::new())).ok();
            return Some(v);
        }
    }
    let out = compute().and_then(|(v, files)| write_files(&files).map(|_| v));
    match out {
        Ok(v) => {
            let paths = artifacts.iter().map(|p| p.display().to_string()).collect();
            ledger.append(entry(StageStatus::Completed, None, paths)).ok();
            Some(v)
        }
        Err(e) => {
            ledger.append(entry(StageStatus::Failed, Some(e.to_string()), Vec::new())).ok();
            None
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Stage(e.to_string())
}

/// State of one `(seed, δ)` level after the per-level stages.
struct Level {
    seed: u64,
    delta: f64,
    psi: PiecewiseAffineConvex,
    rho: RhoFeasibility,
    scan: SectionPropertyReport,
}

impl Job<'_> {
    fn omega(&self) -> Polygon {
        self.cfg.source.domain.polygon().expect("validated domain")
    }

    fn omega_prime(&self) -> Polygon {
        self.omega().dilate_about_center(self.cfg.shrink)
    }

    fn stage<T>(
        &self,
        name: &str,
        artifacts: &[PathBuf],
        compute: impl FnOnce() -> Result<(T, Files), HarnessError>,
        load: impl FnOnce() -> Result<T, HarnessError>,
    ) -> Option<T> {
        stage(self.ledger, self.hash, name, Some(self.seed), Some(self.delta), artifacts, compute, load)
    }

    fn run(&self, until: &Until) -> Option<Level> {
        let cfg = self.cfg;
        let (mu_p, nu_p) = (self.cache.join("source.json"), self.cache.join("target.json"));
        let (mu, nu) = self.stage(
            "discretize",
            &[mu_p.clone(), nu_p.clone()],
            || {
                let seeding = cfg.seeding.with_seed(self.seed);
                let target_seeding = cfg.seeding.with_seed(self.seed.wrapping_add(1));
                let mu = discretize(&cfg.source.spec()?, self.delta, seeding).map_err(err)?;
                let nu = discretize(&cfg.target.spec()?, self.delta, target_seeding).map_err(err)?;
                let files = vec![(mu_p.clone(), mu.to_json().into_bytes()), (nu_p.clone(), nu.to_json().into_bytes())];
                Ok(((mu, nu), files))
            },
            || {
                let load = |p: &Path| -> Result<DiscreteMeasure, HarnessError> {
                    let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
                    DiscreteMeasure::from_json(&text).map_err(err)
                };
                Ok((load(&mu_p)?, load(&nu_p)?))
            },
        )?;
        if *until == Until::Discretize {
            return None;
        }

        let a1 = self.dir.join("assumption1.json");
        self.stage(
            "verify_assumption1",
            std::slice::from_ref(&a1),
            || {
                let n = cfg.scan.assumption_samples;
                let source = verify_assumption1(&mu, &self.omega(), self.delta, n, self.seed).map_err(err)?;
                let tdom = cfg.target.domain.polygon()?;
                let target = verify_assumption1(&nu, &tdom, self.delta, n, self.seed).map_err(err)?;
                let pair = AssumptionPair { source, target };
                let bytes = to_json(&pair);
                Ok(((), vec![(a1.clone(), bytes)]))
            },
            || read_json::<AssumptionPair>(&a1).map(|_| ()),
        );

        let (plan_p, pot_p, sum_p) =
            (self.cache.join("plan.json"), self.cache.join("potential.json"), self.dir.join("solve.json"));
        let omega = self.omega();
        let psi = self.stage(
            "solve",
            &[plan_p.clone(), pot_p.clone(), sum_p.clone()],
            || {
                let (plan, duals) = solve_exact(&mu, &nu).map_err(err)?;
                let psi = build_potential(&duals, &nu, &omega);
                let summary = solve_summary(&plan, &duals, &mu, &nu, &psi);
                let files = vec![
                    (plan_p.clone(), plan.to_json(&duals).into_bytes()),
                    (pot_p.clone(), psi.to_json().into_bytes()),
                    (sum_p.clone(), to_json(&summary)),
                ];
                Ok((psi, files))
            },
            || {
                let text = std::fs::read_to_string(&pot_p).map_err(|e| HarnessError::io(&pot_p, e))?;
                PiecewiseAffineConvex::from_json(&text, trust_window(&omega)).map_err(err)
            },
        )?;
        if *until == Until::Solve {
            return None;
        }

        let rho_p = self.dir.join("rho.json");
        let rho = self.stage(
            "rho_feasibility",
            std::slice::from_ref(&rho_p),
            || {
                let rho = rho_feasibility(&psi, &omega, &self.omega_prime(), cfg.scan.rho_probes).map_err(err)?;
                let bytes = to_json(&rho);
                Ok((rho, vec![(rho_p.clone(), bytes)]))
            },
            || read_json(&rho_p),
        )?;

        let (scan_p, scan_csv) = (self.dir.join("sections.json"), self.dir.join("sections.csv"));
        let scan = self.stage(
            "property_scan",
            &[scan_p.clone(), scan_csv.clone()],
            || {
                let k = cfg.scan.points.max(1);
                let region = self.omega_prime();
                let v = region.vertices();
                let (lo, hi) = v.iter().fold((v[0], v[0]), |(a, b), p| (a.inf(p), b.sup(p)));
                let points = (0..k * k)
                    .map(|i| {
                        let (a, b) = ((i % k) as f64 + 0.5, (i / k) as f64 + 0.5);
                        [lo.x + (hi.x - lo.x) * a / k as f64, lo.y + (hi.y - lo.y) * b / k as f64]
                    })
                    .filter(|p| region.contains_point(&Point2::new(p[0], p[1]), 0.0))
                    .collect();
                let t_grid = (0..cfg.scan.heights.max(1)).rev().map(|i| rho.rho * 0.5f64.powi(i as i32)).collect();
                let sc = ScanConfig {
                    delta: self.delta,
                    rho: rho.rho,
                    t_grid,
                    points,
                    engulf_probes: cfg.scan.engulf_probes,
                    vitali_sections: 0,
                    seed: self.seed,
                };
                let rep = property_scan(&psi, &omega, &sc).map_err(err)?;
                let files = vec![(scan_p.clone(), to_json(&rep)), (scan_csv.clone(), rep.to_csv().into_bytes())];
                Ok((rep, files))
            },
            || read_json(&scan_p),
        )?;

        let level = Level { seed: self.seed, delta: self.delta, psi, rho, scan };
        let wanted = |d: &str| match until {
            Until::Diagnose(x) => x == d,
            _ => cfg.enabled(d),
        };
        if wanted("sobolev") {
            self.sobolev(&level);
        }
        if wanted("contact") {
            self.contact(&level);
        }
        if wanted("heights") {
            self.heights(&level);
        }
        if wanted("chebyshev") {
            self.chebyshev(&level);
        }
        Some(level)
    }

    fn sobolev(&self, lv: &Level) {
        let p = self.dir.join("sobolev.json");
        self.stage(
            "sobolev",
            std::slice::from_ref(&p),
            || {
                let kernel = self.cfg.kernel_spec(1.0)?;
                let rep = regularity_at(
                    &lv.psi,
                    &self.omega(),
                    &self.omega_prime(),
                    self.delta,
                    &kernel,
                    &self.cfg.sobolev.p_list,
                    &self.cfg.sobolev.control_exponents,
                )
                .map_err(err)?;
                let bytes = to_json(&rep);
                Ok(((), vec![(p.clone(), bytes)]))
            },
            || read_json::<kantoreg::lab::RegularityReport>(&p).map(|_| ()),
        );
    }

    fn contact(&self, lv: &Level) {
        let p = self.dir.join("contact.json");
        let c = &self.cfg.contact;
        self.stage(
            "contact",
            std::slice::from_ref(&p),
            || {
                let omega = self.omega();
                let region = self.omega_prime();
                let r = self.delta.sqrt();
                let kernel = self.cfg.kernel_spec(r)?;
                let v = region.vertices();
                let (lo, hi) = v.iter().fold((v[0], v[0]), |(a, b), p| (a.inf(p), b.sup(p)));
                let k = c.points.max(1);
                let mut jobs = Vec::new();
                for i in 0..k * k {
                    let (a, b) = ((i % k) as f64 + 0.5, (i / k) as f64 + 0.5);
                    let x = Point2::new(lo.x + (hi.x - lo.x) * a / k as f64, lo.y + (hi.y - lo.y) * b / k as f64);
                    for f in &c.heights {
                        jobs.push((x, f * lv.rho.rho));
                    }
                }
                let t_min = lv.scan.c0_hat * self.delta;
                let rows: Vec<ContactRow> = jobs
                    .iter()
                    .enumerate()
                    .map(|(i, &(x, t))| {
                        contact_row(
                            &lv.psi,
                            &omega,
                            &kernel,
                            self.delta,
                            x,
                            t,
                            t_min,
                            c.boundary_samples,
                            c.probes,
                            self.seed + i as u64,
                        )
                    })
                    .collect();
                let q: Vec<&ContactRow> = rows.iter().filter(|r| r.qualifying).collect();
                let min = |f: fn(&ContactRow) -> Option<f64>| q.iter().filter_map(|r| f(r)).reduce(f64::min);
                let summary = ContactSummary {
                    qualifying: q.len(),
                    c_v_min: min(|r| r.c_v),
                    area_ratio_min: min(|r| r.area_ratio),
                    pointwise_c_min: min(|r| r.pointwise_c),
                    rows,
                };
                let bytes = to_json(&summary);
                Ok(((), vec![(p.clone(), bytes)]))
            },
            || read_json::<ContactSummary>(&p).map(|_| ()),
        );
    }

    fn heights(&self, lv: &Level) {
        let p = self.dir.join("heights.json");
        self.stage(
            "heights",
            std::slice::from_ref(&p),
            || {
                let r = self.delta.sqrt();
                let kernel = self.cfg.kernel_spec(r)?;
                let field = laplacian_field(&lv.psi, &self.omega_prime(), &kernel, r / 2.0).map_err(err)?;
                let alpha = self.cfg.heights.alpha_factor * field.l1_norm() / field.area();
                let h = &self.cfg.heights;
                let rep =
                    critical_heights(&lv.psi, &field, &kernel, alpha, lv.rho.rho, lv.scan.m_hat, h.eps1, h.t_samples)
                        .map_err(err)?;
                let bytes = to_json(&rep);
                Ok(((), vec![(p.clone(), bytes)]))
            },
            || read_json::<CriticalHeightField>(&p).map(|_| ()),
        );
    }

    fn chebyshev(&self, lv: &Level) {
        let p = self.dir.join("chebyshev.json");
        let c = &self.cfg.chebyshev;
        self.stage(
            "chebyshev",
            std::slice::from_ref(&p),
            || {
                let r = self.delta.sqrt();
                let kernel = self.cfg.kernel_spec(r)?;
                let step = (r / 4.0).min(self.delta / 2.0);
                let outer_region = self.omega_prime();
                let inner_region = outer_region.dilate_about_center(c.inner_shrink);
                let outer = laplacian_field(&lv.psi, &outer_region, &kernel, step).map_err(err)?;
                let inner = laplacian_field(&lv.psi, &inner_region, &kernel, step).map_err(err)?;
                let mean = outer.l1_norm() / outer.area();
                let n = c.levels.max(2);
                let alphas: Vec<f64> =
                    (0..n).map(|k| c.start_factor * mean * 10f64.powf(c.decades * k as f64 / (n - 1) as f64)).collect();
                let fit = reversed_chebyshev(&inner, &outer, &alphas, c.c, &ChebyshevMode::Global);
                let bytes = to_json(&ChebyshevReport { r, mean, fit });
                Ok(((), vec![(p.clone(), bytes)]))
            },
            || read_json::<ChebyshevReport>(&p).map(|_| ()),
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn contact_row(
    psi: &PiecewiseAffineConvex,
    omega: &Polygon,
    kernel: &kantoreg::mollifier::KernelSpec,
    delta: f64,
    x: Point2,
    t: f64,
    t_min: f64,
    boundary_samples: usize,
    probes: usize,
    seed: u64,
) -> ContactRow {
    let mut row = ContactRow {
        x: [x.x, x.y],
        t,
        r: kernel.r,
        qualifying: false,
        reason: None,
        contact_points: 0,
        c_v: None,
        area_ratio: None,
        pointwise_c: None,
        pointwise_ratio: None,
        h: None,
        pairing_constant: None,
        engulf_factor: None,
        preimage_ok: None,
        psip_margin: None,
        dual_gap: None,
    };
    let p0 = default_subgradient(psi, &x);
    let s = match section(psi, x, p0, t) {
        Ok(s) => s,
        Err(e) => {
            row.reason = Some(e.to_string());
            return row;
        }
    };
    let slack = 1e-12 * (1.0 + omega.diameter_scale());
    let ell = s.body.inner_radius();
    row.reason = if t < t_min {
        Some(format!("t below Ĉ₀δ = {t_min}"))
    } else if !omega.contains(&s.body, slack) {
        Some("section leaves Ω".into())
    } else if kernel.r > ell {
        Some(format!("r exceeds ℓ(S) = {ell}"))
    } else {
        None
    };
    if row.reason.is_some() {
        return row;
    }
    let cc = match contact_construction(psi, &s, boundary_samples) {
        Ok(cc) => cc,
        Err(e) => {
            row.reason = Some(e.to_string());
            return row;
        }
    };
    row.contact_points = cc.sigma.len();
    row.c_v = Some(cc.c_v);
    row.psip_margin = Some(cc.psip_margin);
    row.dual_gap = Some(cc.dual_gap);
    match fatten(&cc, psi, omega, kernel, delta, None, probes, seed) {
        Ok(f) => {
            row.qualifying = true;
            row.area_ratio = Some(f.area_ratio);
            row.pointwise_c = Some(f.checks.pointwise_c);
            row.pointwise_ratio = Some(f.checks.pointwise_ratio);
            row.h = Some(f.h);
            row.pairing_constant = Some(f.checks.pairing_constant);
            row.engulf_factor = Some(f.checks.engulf_factor);
            row.preimage_ok = Some(f.checks.preimage_witness.is_none());
        }
        Err(e) => row.reason = Some(e.to_string()),
    }
    row
}

fn solve_summary(
    plan: &TransportPlan,
    duals: &Duals,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    psi: &PiecewiseAffineConvex,
) -> SolveSummary {
    let b: Vec<f64> = duals.phi.iter().zip(nu.points()).map(|(phi, y)| -(y.norm_squared() - phi) / 2.0).collect();
    let support_residual = plan
        .entries
        .iter()
        .filter(|e| e.2 > 0.0)
        .map(|&(i, j, _)| {
            let (x, y) = (mu.points()[i], nu.points()[j]);
            (psi.eval(&x) - b[j] - x.dot(&y)).abs()
        })
        .fold(0.0, f64::max);
    SolveSummary {
        n_source: mu.len(),
        n_target: nu.len(),
        cost: plan.cost,
        gap: plan.gap,
        pieces: psi.len(),
        support: plan.entries.iter().filter(|e| e.2 > 0.0).count(),
        support_residual,
    }
}

fn modulus_stage(job: &Job, lv: &Level, theta: f64, beta: f64) {
    let p = job.dir.join("modulus.json");
    let m = &job.cfg.modulus;
    job.stage(
        "modulus",
        std::slice::from_ref(&p),
        || {
            let omega = job.omega();
            let cfg = ModulusConfig {
                rho: lv.rho.rho,
                delta: lv.delta,
                beta_hat: beta,
                theta_hat: theta,
                cutoff_constant: m.cutoff,
                grad_radius: gradient_hull(&lv.psi, omega.ring()).outer_radius(),
                pairs: m.pairs,
                bins: m.bins,
                seed: lv.seed,
            };
            let tab = c1alpha_modulus(&lv.psi, &job.omega_prime(), &cfg);
            let bytes = to_json(&tab);
            Ok(((), vec![(p.clone(), bytes)]))
        },
        || read_json::<ModulusTable>(&p).map(|_| ()),
    );
}

/// Runs the configured stages for every `(seed, δ)`, recording each in `<out>/ledger.jsonl`.
///
/// Stages completed by an earlier run with the same config hash are reused.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunLedger, HarnessError> {
    cfg.validate()?;
    if let Until::Diagnose(d) = &opts.until {
        if d != "sections" && !crate::config::DIAGNOSTICS.contains(&d.as_str()) {
            return Err(HarnessError::Config(format!("unknown diagnostic {d:?}")));
        }
    }
    let out = &opts.out;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let hash = cfg.hash();
    let cache = opts.cache_dir().join(&hash[..16]);
    write_files(&[(out.join("config.json"), cfg.materialized_json().into_bytes())])?;
    let ledger = LedgerWriter::open(&out.join("ledger.jsonl"))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let jobs: Vec<Job> = cfg
        .seeds
        .iter()
        .flat_map(|&seed| cfg.deltas.iter().map(move |&delta| (seed, delta)))
        .map(|(seed, delta)| Job {
            cfg,
            hash: &hash,
            seed,
            delta,
            dir: level_dir(out, seed, delta),
            cache: cache.join(format!("seed-{seed}")).join(format!("delta-{delta}")),
            ledger: &ledger,
        })
        .collect();
    pool.install(|| {
        let levels: Vec<Option<Level>> = jobs.par_iter().map(|j| j.run(&opts.until)).collect();
        let modulus_wanted = match &opts.until {
            Until::Diagnose(d) => d == "modulus",
            Until::Sweep => cfg.enabled("modulus"),
            _ => false,
        };
        if modulus_wanted {
            let pairs: Vec<(&Job, &Level, f64, f64)> = jobs
                .iter()
                .zip(&levels)
                .filter_map(|(j, l)| l.as_ref().map(|l| (j, l)))
                .map(|(j, l)| {
                    let series = levels.iter().flatten().filter(|o| o.seed == l.seed);
                    let finite_max =
                        |f: fn(&Level) -> f64| series.clone().map(f).filter(|v| v.is_finite()).fold(1.0, f64::max);
                    let theta = cfg.modulus.theta.unwrap_or_else(|| finite_max(|o| o.scan.theta_hat));
                    let beta = cfg.modulus.beta.unwrap_or_else(|| finite_max(|o| o.scan.beta_hat));
                    (j, l, theta, beta)
                })
                .collect();
            pairs.par_iter().for_each(|(j, l, theta, beta)| modulus_stage(j, l, *theta, *beta));
        }
    });

    Ok(ledger.finish(&hash))
}

/// Writes `summary.json`, `summary.csv` and the plots from the per-level reports of a run,
/// recorded as the `report` stage.
pub fn report(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunLedger, HarnessError> {
    cfg.validate()?;
    let out = &opts.out;
    let hash = cfg.hash();
    let files = write_report(cfg, out)?;
    let paths: Vec<PathBuf> = files.iter().map(|f| f.0.clone()).collect();
    let ledger = LedgerWriter::open(&out.join("ledger.jsonl"))?;
    stage(&ledger, &hash, "report", None, None, &paths, || Ok(((), files)), || Ok(()));
    Ok(ledger.finish(&hash))
}
