use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kantoreg::lab::power_law_exponent;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::pipeline::level_dir;
use crate::HarnessError;

/// Scalars of one `(seed, δ)` level; absent when the stage did not run or failed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub seed: u64,
    pub delta: f64,
    pub n_source: Option<f64>,
    pub n_target: Option<f64>,
    pub cost: Option<f64>,
    pub gap: Option<f64>,
    pub support_residual: Option<f64>,
    pub lambda_hat: Option<f64>,
    #[serde(rename = "Lambda_hat")]
    pub big_lambda_hat: Option<f64>,
    pub rho: Option<f64>,
    #[serde(rename = "C0_hat")]
    pub c0_hat: Option<f64>,
    #[serde(rename = "M_hat")]
    pub m_hat: Option<f64>,
    pub theta_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub volume_ratio_lo: Option<f64>,
    pub volume_ratio_hi: Option<f64>,
    pub sections: Option<f64>,
    pub l1_norm: Option<f64>,
    pub llogl_norm: Option<f64>,
    /// `∫ (Δ_rψ)^p` for the first configured `p`.
    pub lp_norm: Option<f64>,
    /// `L log L` norm at the control radius `r = δ`.
    pub control_llogl: Option<f64>,
    pub flat_part_diameter: Option<f64>,
    pub contact_qualifying: Option<f64>,
    pub c_v_min: Option<f64>,
    pub area_ratio_min: Option<f64>,
    pub pointwise_c_min: Option<f64>,
    pub heights_c_hat: Option<f64>,
    pub heights_cap_hat: Option<f64>,
    pub chebyshev_cap_hat: Option<f64>,
    pub chebyshev_cap_upper: Option<f64>,
    pub modulus: Option<f64>,
    pub modulus_below_max: Option<f64>,
    pub modulus_cutoff: Option<f64>,
    pub ff_violations: Option<f64>,
}

/// Fitted exponent `k` of `norm ~ δ^k` over one seed's series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub seed: u64,
    pub series: String,
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    /// Sorted by seed, then by decreasing `δ`.
    pub levels: Vec<LevelSummary>,
    pub slopes: Vec<SlopeFit>,
}

fn load(path: &Path) -> Option<Value> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn num(v: &Value, path: &[&str]) -> Option<f64> {
    let mut cur = v;
    for k in path {
        cur = match k.parse::<usize>() {
            Ok(i) => cur.get(i)?,
            Err(_) => cur.get(*k)?,
        };
    }
    cur.as_f64()
}

fn level_summary(out: &Path, seed: u64, delta: f64) -> LevelSummary {
    let dir = level_dir(out, seed, delta);
    let mut s = LevelSummary { seed, delta, ..Default::default() };
    if let Some(v) = load(&dir.join("solve.json")) {
        s.n_source = num(&v, &["n_source"]);
        s.n_target = num(&v, &["n_target"]);
        s.cost = num(&v, &["cost"]);
        s.gap = num(&v, &["gap"]);
        s.support_residual = num(&v, &["support_residual"]);
    }
    if let Some(v) = load(&dir.join("assumption1.json")) {
        s.lambda_hat = num(&v, &["source", "lambda_hat"]);
        s.big_lambda_hat = num(&v, &["source", "Lambda_hat"]);
    }
    if let Some(v) = load(&dir.join("rho.json")) {
        s.rho = num(&v, &["rho"]);
    }
    if let Some(v) = load(&dir.join("sections.json")) {
        s.c0_hat = num(&v, &["C0_hat"]);
        s.m_hat = num(&v, &["M_hat"]);
        s.theta_hat = num(&v, &["theta_hat"]);
        s.beta_hat = num(&v, &["beta_hat"]);
        s.volume_ratio_lo = num(&v, &["volume_ratio_range", "0"]);
        s.volume_ratio_hi = num(&v, &["volume_ratio_range", "1"]);
        s.sections = num(&v, &["samples"]);
    }
    if let Some(v) = load(&dir.join("sobolev.json")) {
        s.l1_norm = num(&v, &["l1_norm"]);
        s.llogl_norm = num(&v, &["llogl_norm"]);
        s.lp_norm = num(&v, &["lp_norms", "0", "1"]);
        s.control_llogl = v["controls"]
            .as_array()
            .and_then(|cs| cs.iter().find(|c| c["exponent"].as_f64() == Some(1.0)))
            .and_then(|c| c["llogl_norm"].as_f64());
        s.flat_part_diameter = num(&v, &["flat_part_diameter"]);
    }
    if let Some(v) = load(&dir.join("contact.json")) {
        s.contact_qualifying = num(&v, &["qualifying"]);
        s.c_v_min = num(&v, &["c_v_min"]);
        s.area_ratio_min = num(&v, &["area_ratio_min"]);
        s.pointwise_c_min = num(&v, &["pointwise_c_min"]);
    }
    if let Some(v) = load(&dir.join("heights.json")) {
        s.heights_c_hat = num(&v, &["c_hat"]);
        s.heights_cap_hat = num(&v, &["cap_hat"]);
    }
    if let Some(v) = load(&dir.join("chebyshev.json")) {
        s.chebyshev_cap_hat = num(&v, &["fit", "cap_hat"]);
        s.chebyshev_cap_upper = num(&v, &["fit", "cap_hat_upper"]);
    }
    if let Some(v) = load(&dir.join("modulus.json")) {
        s.modulus = num(&v, &["modulus"]);
        s.modulus_below_max = num(&v, &["below_max"]);
        s.modulus_cutoff = num(&v, &["cutoff"]);
        s.ff_violations = num(&v, &["ff_violations"]);
    }
    s
}

fn slope(levels: &[&LevelSummary], f: fn(&LevelSummary) -> Option<f64>) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        levels.iter().filter_map(|l| f(l).filter(|v| *v > 0.0).map(|v| (l.delta, v))).unzip();
    let k = power_law_exponent(&xs, &ys);
    k.is_finite().then_some(k)
}

const SERIES: [(&str, fn(&LevelSummary) -> Option<f64>); 3] =
    [("llogl", |l| l.llogl_norm), ("lp", |l| l.lp_norm), ("control_llogl", |l| l.control_llogl)];

/// Collects the per-level reports of a run into a summary.
pub fn summarize(cfg: &ExperimentConfig, out: &Path) -> Result<Summary, HarnessError> {
    let mut levels = Vec::new();
    for &seed in &cfg.seeds {
        for &delta in &cfg.deltas {
            levels.push(level_summary(out, seed, delta));
        }
    }
    if levels.iter().all(|l| l.cost.is_none()) {
        return Err(HarnessError::MissingReport(format!("no solved level under {}", out.display())));
    }
    levels.sort_by(|a, b| a.seed.cmp(&b.seed).then(b.delta.total_cmp(&a.delta)));
    let mut slopes = Vec::new();
    for &seed in &cfg.seeds {
        let series: Vec<&LevelSummary> = levels.iter().filter(|l| l.seed == seed).collect();
        for (name, f) in SERIES {
            slopes.push(SlopeFit { seed, series: name.into(), slope: slope(&series, f) });
        }
    }
    Ok(Summary { config_hash: cfg.hash(), levels, slopes })
}

pub fn summary_csv(s: &Summary) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for l in &s.levels {
        w.serialize(l).expect("serializable row");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

/// `summary.json`, `summary.csv` and the plots, not yet written.
pub fn write_report(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, HarnessError> {
    let s = summarize(cfg, out)?;
    let mut json = serde_json::to_string_pretty(&s).expect("serializable summary");
    json.push('\n');
    let mut files =
        vec![(out.join("summary.json"), json.into_bytes()), (out.join("summary.csv"), summary_csv(&s).into_bytes())];
    files.extend(render_plots(&s, out));
    Ok(files)
}

/// Reads `summary.json` and writes the plots under `<out>/plots`.
pub fn emit_plots(out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let p = out.join("summary.json");
    let text =
        std::fs::read_to_string(&p).map_err(|_| HarnessError::MissingReport(format!("{} not found", p.display())))?;
    let s: Summary =
        serde_json::from_str(&text).map_err(|e| HarnessError::MissingReport(format!("{}: {e}", p.display())))?;
    if s.levels.is_empty() {
        return Err(HarnessError::MissingReport(format!("{} has no levels", p.display())));
    }
    let files = render_plots(&s, out);
    for (path, bytes) in &files {
        std::fs::create_dir_all(path.parent().expect("plot dir")).map_err(|e| HarnessError::io(path, e))?;
        std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}

fn render_plots(s: &Summary, out: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = out.join("plots");
    let mut norms = LogLogPlot::new("Norms of the mollified Laplacian", "delta", "norm");
    for fit in &s.slopes {
        let f = SERIES.iter().find(|(n, _)| *n == fit.series).map(|x| x.1).expect("known series");
        let pts = s.levels.iter().filter(|l| l.seed == fit.seed).filter_map(|l| f(l).map(|v| (l.delta, v))).collect();
        let label = match fit.slope {
            Some(k) => format!("{} seed {} (slope {k:.3})", fit.series, fit.seed),
            None => format!("{} seed {}", fit.series, fit.seed),
        };
        norms.series.push((label, pts));
    }
    let mut modulus = LogLogPlot::new("Modulus of continuity of the gradient", "scale", "max ratio");
    let mut cheb = LogLogPlot::new("Reversed Chebyshev", "alpha", "mass");
    for l in &s.levels {
        let d = level_dir(out, l.seed, l.delta);
        if let Some(v) = load(&d.join("modulus.json")) {
            let bins = |k: &str| -> Vec<(f64, f64)> {
                v[k].as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(|b| Some((b["s_hi"].as_f64()?, b["max_ratio"].as_f64()?)))
                    .collect()
            };
            let mut pts = bins("below");
            pts.extend(bins("above"));
            modulus.series.push((format!("delta {} seed {}", l.delta, l.seed), pts));
        }
        if let Some(v) = load(&d.join("chebyshev.json")) {
            let pairs = |k: &str| -> Vec<(f64, f64)> {
                v["fit"]["pairs"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .filter_map(|p| Some((p["alpha"].as_f64()?, p[k].as_f64()?)))
                    .collect()
            };
            cheb.series.push((format!("lhs delta {} seed {}", l.delta, l.seed), pairs("lhs")));
            cheb.series.push((format!("rhs delta {} seed {}", l.delta, l.seed), pairs("rhs")));
        }
    }
    [("norms.svg", norms), ("modulus.svg", modulus), ("chebyshev.svg", cheb)]
        .into_iter()
        .filter(|(_, p)| !p.series.is_empty())
        .map(|(name, p)| (dir.join(name), p.svg().into_bytes()))
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Minimal log-log line plot rendered as SVG text.
pub struct LogLogPlot {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

fn decade_range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (lo, hi) = (lo.log10().floor(), hi.log10().ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

impl LogLogPlot {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        LogLogPlot { title: title.into(), xlabel: xlabel.into(), ylabel: ylabel.into(), series: Vec::new() }
    }

    pub fn svg(&self) -> String {
        let (w, h, ml, mr, mt, mb) = (720.0, 460.0, 70.0, 250.0, 40.0, 50.0);
        let pos = |p: &&(f64, f64)| p.0 > 0.0 && p.1 > 0.0 && p.0.is_finite() && p.1.is_finite();
        let all = || self.series.iter().flat_map(|s| s.1.iter().filter(pos));
        let (x0, x1) = decade_range(all().map(|p| p.0));
        let (y0, y1) = decade_range(all().map(|p| p.1));
        let px = |x: f64| ml + (x.log10() - x0) / (x1 - x0) * (w - ml - mr);
        let py = |y: f64| h - mb - (y.log10() - y0) / (y1 - y0) * (h - mt - mb);
        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            (w - mr + ml) / 2.0,
            esc(&self.title)
        );
        let (bx, by, bw, bh) = (ml, mt, w - ml - mr, h - mt - mb);
        let _ = writeln!(o, r#"<rect x="{bx}" y="{by}" width="{bw}" height="{bh}" fill="none" stroke="black"/>"#);
        for e in (x0 as i32)..=(x1 as i32) {
            let x = px(10f64.powi(e));
            let _ = writeln!(o, r##"<line x1="{x:.2}" y1="{by}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##, by + bh);
            let _ = writeln!(o, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{e}</text>"#, by + bh + 16.0);
        }
        for e in (y0 as i32)..=(y1 as i32) {
            let y = py(10f64.powi(e));
            let _ = writeln!(o, r##"<line x1="{bx}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, bx + bw);
            let _ = writeln!(o, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, bx - 6.0, y + 4.0);
        }
        let _ = writeln!(
            o,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            bx + bw / 2.0,
            h - 12.0,
            esc(&self.xlabel)
        );
        let _ = writeln!(
            o,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            by + bh / 2.0,
            esc(&self.ylabel)
        );
        for (k, (name, pts)) in self.series.iter().enumerate() {
            let c = PALETTE[k % PALETTE.len()];
            let mut pts: Vec<(f64, f64)> = pts.iter().filter(pos).copied().collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
            let _ =
                writeln!(o, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#, line.join(" "));
            for p in &pts {
                let _ = writeln!(o, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, px(p.0), py(p.1));
            }
            let ly = mt + 16.0 * k as f64 + 8.0;
            let lx = w - mr + 12.0;
            let _ = writeln!(
                o,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#,
                lx + 18.0
            );
            let _ = writeln!(o, r#"<text x="{}" y="{}">{}</text>"#, lx + 24.0, ly + 4.0, esc(name));
        }
        o.push_str("</svg>\n");
        o
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
