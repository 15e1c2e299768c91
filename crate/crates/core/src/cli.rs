//! The `surfent` command line: flag and config-file handling, the five
//! subcommands, and report output.
//!
//! Flags may also be given in a flat `key = value` file passed with
//! `--config`; flags on the command line win. Every report embeds the
//! resolved configuration (minus the thread count and output directory, so
//! that runs differing only in those produce identical bytes).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cocycle::{integral_reports, log_norm_series, norm_series};
use crate::curve::{decompose_eps_bounded, piece_count, pieces_cover_unit_interval, Curve};
use crate::dynamics::{domain_grid, lambda_plus_series, Domain, Point2, SurfaceSystem, TangentPoint};
use crate::entropy::{greedy_spanning_set, katok_estimate, KatokCount, DEFAULT_SATURATION};
use crate::error::{Error, Result};
use crate::growth::GrowthSeries;
use crate::oscillator::{cos_integral_sweep, monotonicity_count_audit, restricted_growth_report, DEFAULT_CELL_BUDGET};
use crate::polyline::{clipped_curve_growth_series, curve_growth_series};
use crate::report::{fmt_f64, to_json, CsvTable};
use crate::sampling::SamplePlan;
use crate::selftest::run_selftest;
use crate::times::{convex_split_report, OrbitProfile, TimeConfig};
use crate::zoo::{parse_params, system_by_name};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "surfent", version, about = "Entropy estimates for smooth surface maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Growth-rate estimates: cocycle, curve, katok, lambda (comma list).
    Estimate(Flags),
    /// Geometric, expanded and trapping times along one orbit.
    DiagnoseTimes(Flags),
    /// The oscillating-curve example and its calculus audits.
    VerifyExample(Flags),
    /// Splits a curve into eps-bounded pieces.
    DecomposeCurve(Flags),
    /// Runs the invariant suite.
    Selftest(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Estimate(_) => "estimate",
            Command::DiagnoseTimes(_) => "diagnose-times",
            Command::VerifyExample(_) => "verify-example",
            Command::DecomposeCurve(_) => "decompose-curve",
            Command::Selftest(_) => "selftest",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Estimate(f)
            | Command::DiagnoseTimes(f)
            | Command::VerifyExample(f)
            | Command::DecomposeCurve(f)
            | Command::Selftest(f) => f,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// System name: cat, identity, shear, toral, diag, standard, perturbed-cat.
    #[arg(long)]
    pub system: Option<String>,
    /// System parameters, e.g. "k=6" or "a=1.2,r=3".
    #[arg(long)]
    pub params: Option<String>,
    /// Estimators for `estimate`, comma separated.
    #[arg(long)]
    pub method: Option<String>,
    /// Horizons as `start..end[:step]` (inclusive) or a single integer.
    #[arg(long)]
    pub n: Option<String>,
    /// Comma-separated scales.
    #[arg(long)]
    pub eps: Option<String>,
    /// Sample strata (or grid cells) per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory for CSV/JSON reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` file mirroring these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Values of `a` for `verify-example`, comma separated.
    #[arg(long)]
    pub a: Option<String>,
    /// Expansion threshold for geometric times.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Starting tangent point `u,v,angle` for `diagnose-times`.
    #[arg(long)]
    pub point: Option<String>,
    /// Curve: `hloop:v`, `vloop:u`, `segment:u0,v0,u1,v1`,
    /// `wave:u0,v0,du,dv,amplitude,omega,phase` or `oscillator`.
    #[arg(long)]
    pub curve: Option<String>,
}

const KEYS: &[&str] = &["system", "params", "method", "n", "eps", "grid", "seed", "tol", "out", "threads", "a", "tau", "point", "curve"];

impl Flags {
    fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("system", self.system.clone());
        put("params", self.params.clone());
        put("method", self.method.clone());
        put("n", self.n.clone());
        put("eps", self.eps.clone());
        put("grid", self.grid.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("tol", self.tol.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("threads", self.threads.map(|v| v.to_string()));
        put("a", self.a.clone());
        put("tau", self.tau.map(|v| v.to_string()));
        put("point", self.point.clone());
        put("curve", self.curve.clone());
        m
    }
}

/// Parses a flat `key = value` file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::param(format!("config line {}: expected key = value", i + 1)))?;
        let k = k.trim().replace('_', "-");
        let k = if k == "method" || k == "methods" { "method".to_string() } else { k };
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::param(format!("config line {}: unknown key `{k}`", i + 1)));
        }
        m.insert(k, v.trim().trim_matches('"').to_string());
    }
    Ok(m)
}

/// `start..end[:step]` (inclusive) or a single integer.
pub fn parse_n_range(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::param(format!("invalid horizon range `{text}`; expected start..end[:step]"));
    let text = text.trim();
    let (range, step) = match text.split_once(':') {
        Some((r, s)) => (r, s.trim().parse::<usize>().map_err(|_| bad())?),
        None => (text, 1),
    };
    let list: Vec<usize> = match range.split_once("..") {
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if step == 0 || a > b {
                return Err(bad());
            }
            (a..=b).step_by(step).collect()
        }
        None => vec![range.parse().map_err(|_| bad())?],
    };
    if list.is_empty() || list[0] == 0 {
        return Err(Error::param("horizons must be positive"));
    }
    Ok(list)
}

fn parse_f64_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::param(format!("invalid {what} value `{s}`"))))
        .collect()
}

/// Parses a `--curve` argument.
pub fn parse_curve(text: &str) -> Result<Curve> {
    let (kind, args) = text.split_once(':').unwrap_or((text, ""));
    let nums = if args.trim().is_empty() { Vec::new() } else { parse_f64_list(args, "curve")? };
    let need = |k: usize| {
        if nums.len() == k {
            Ok(())
        } else {
            Err(Error::param(format!("curve `{kind}` takes {k} numbers, got {}", nums.len())))
        }
    };
    match kind.trim() {
        "hloop" => {
            need(1)?;
            Ok(Curve::horizontal_loop(nums[0]))
        }
        "vloop" => {
            need(1)?;
            Ok(Curve::vertical_loop(nums[0]))
        }
        "segment" => {
            need(4)?;
            Ok(Curve::segment(Point2::new(nums[0], nums[1]), Point2::new(nums[2], nums[3])))
        }
        "wave" => {
            need(7)?;
            Curve::wave(Point2::new(nums[0], nums[1]), (nums[2], nums[3]), nums[4], nums[5], nums[6])
        }
        "oscillator" => {
            need(0)?;
            Ok(Curve::oscillator())
        }
        other => Err(Error::param(format!("unknown curve kind `{other}`"))),
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub system: String,
    pub params: String,
    pub methods: Vec<String>,
    pub n_list: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub grid: usize,
    pub seed: u64,
    pub tol: f64,
    pub tau: f64,
    pub a_list: Vec<f64>,
    pub point: (f64, f64, f64),
    pub curve: String,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

const ESTIMATORS: &[&str] = &["cocycle", "curve", "katok", "lambda"];
const DEFAULT_WAVE: &str = "wave:0.1,0.2,0.7,0.2,0.02,5,0";

impl RunConfig {
    /// Merges the config file (if any) with the flags and fills defaults.
    pub fn resolve(command: &Command) -> Result<Self> {
        let flags = command.flags();
        let mut map = match &flags.config {
            Some(path) => parse_config_text(
                &fs::read_to_string(path).map_err(|e| Error::param(format!("cannot read {}: {e}", path.display())))?,
            )?,
            None => BTreeMap::new(),
        };
        map.extend(flags.to_map());
        let get = |k: &str| map.get(k).map(|s| s.as_str());
        let name = command.name();
        let system = get("system").unwrap_or("cat").to_string();
        let params = parse_params(get("params").unwrap_or(""))?;
        let params_text = params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",");
        let methods: Vec<String> = get("method")
            .unwrap_or("cocycle")
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if name == "estimate" {
            if methods.is_empty() {
                return Err(Error::param("no estimator selected"));
            }
            if let Some(bad) = methods.iter().find(|m| !ESTIMATORS.contains(&m.as_str())) {
                return Err(Error::param(format!("unknown method `{bad}`; expected one of {ESTIMATORS:?}")));
            }
        }
        let default_n = match name {
            "diagnose-times" => "50",
            "verify-example" => "4..60:2",
            _ => "1..30",
        };
        let n_list = parse_n_range(get("n").unwrap_or(default_n))?;
        let default_eps = if name == "decompose-curve" { "0.01" } else { "0.2,0.1,0.05" };
        let eps_list = parse_f64_list(get("eps").unwrap_or(default_eps), "eps")?;
        if eps_list.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::param("eps values must be positive"));
        }
        let num = |k: &str, default: &str| -> Result<f64> {
            get(k).unwrap_or(default).parse::<f64>().map_err(|_| Error::param(format!("invalid value for --{k}")))
        };
        let int = |k: &str, default: &str| -> Result<u64> {
            get(k).unwrap_or(default).parse::<u64>().map_err(|_| Error::param(format!("invalid value for --{k}")))
        };
        let default_tol = if name == "verify-example" { "1e-8" } else { "1e-6" };
        let tol = num("tol", default_tol)?;
        if !(tol > 0.0) {
            return Err(Error::param("tol must be positive"));
        }
        let point_list = parse_f64_list(get("point").unwrap_or("0.1234,0.5678,0.3"), "point")?;
        if point_list.len() != 3 {
            return Err(Error::param("--point takes u,v,angle"));
        }
        let curve = match get("curve") {
            Some(c) => c.to_string(),
            None if name == "decompose-curve" => DEFAULT_WAVE.to_string(),
            None => String::new(),
        };
        if !curve.is_empty() {
            parse_curve(&curve)?;
        }
        let grid = int("grid", "200")? as usize;
        if grid == 0 {
            return Err(Error::param("grid must be positive"));
        }
        Ok(RunConfig {
            command: name.to_string(),
            system,
            params: params_text,
            methods,
            n_list,
            eps_list,
            grid,
            seed: int("seed", "1")?,
            tol,
            tau: num("tau", "1")?,
            a_list: parse_f64_list(get("a").unwrap_or("1.1,1.28,1.5"), "a")?,
            point: (point_list[0], point_list[1], point_list[2]),
            curve,
            threads: int("threads", "0")? as usize,
            out: get("out").map(PathBuf::from),
        })
    }

    fn build_system(&self) -> Result<SurfaceSystem> {
        system_by_name(&self.system, &parse_params(&self.params)?)
    }

    fn comments(&self) -> Vec<String> {
        let json = serde_json::to_value(self).expect("config serializes");
        let mut out = Vec::new();
        if let serde_json::Value::Object(map) = json {
            for (k, v) in map {
                out.push(format!("config {k}={v}"));
            }
        }
        out
    }

    /// The curve used by curve-based estimators: the given one, else a
    /// horizontal loop on the torus or the box diagonal on the plane.
    fn curve_for(&self, system: &SurfaceSystem) -> Result<Curve> {
        if !self.curve.is_empty() {
            return parse_curve(&self.curve);
        }
        Ok(match system.domain {
            Domain::Torus => Curve::horizontal_loop(0.0),
            Domain::PlaneBox(r) => {
                let (hu, hv) = (0.5 * r.width().min(2.0), 0.5 * r.height().min(2.0));
                let c = Point2::new(0.5 * (r.u_min + r.u_max), 0.5 * (r.v_min + r.v_max));
                Curve::segment(c.offset(-hu, -hv), c.offset(hu, hv))
            }
        })
    }
}

/// Files and console text produced by one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub files: Vec<(String, String)>,
    pub failed_checks: usize,
}

impl Outcome {
    fn file(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }
}

#[derive(Debug, Clone, Serialize)]
struct RateSummary {
    rate: f64,
    fit_intercept: Option<f64>,
    fit_slope: Option<f64>,
    cauchy_rate: Option<f64>,
    subadditive_min: f64,
    last_n: usize,
    last_value: f64,
}

impl From<&GrowthSeries> for RateSummary {
    fn from(s: &GrowthSeries) -> Self {
        RateSummary {
            rate: s.extrapolated_rate,
            fit_intercept: s.fit.map(|f| f.intercept),
            fit_slope: s.fit.map(|f| f.slope),
            cauchy_rate: s.cauchy_rate,
            subadditive_min: s.subadditive_min,
            last_n: s.last().n,
            last_value: s.last().value,
        }
    }
}

fn series_csv(cfg: &RunConfig, header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut t = CsvTable::new(header);
    t.comments = cfg.comments();
    for r in rows {
        t.push(r);
    }
    t.render()
}

/// Orbit comparisons the greedy cover may spend on one `(n, eps)` pair.
const SPANNING_PAIR_BUDGET: f64 = 3e7;

/// Spanning count for one row of the Katok table.
///
/// Greedy set cover compares every orbit with all candidates sharing
/// neighbouring `eps`-cells at times `0` and `n - 1`, roughly
/// `N²·(9eps²)²` comparisons (`N²·9eps²` when the two times coincide). Past
/// the budget the maximal separated set is reported instead; it spans the
/// cloud as well, so the column stays an upper bound on the minimal
/// spanning count. Saturated rows and clouds with escaping orbits get an
/// empty cell.
fn spanning_count(system: &SurfaceSystem, cloud: &[Point2], c: &KatokCount, eps: f64) -> Result<(String, &'static str)> {
    if c.saturated {
        return Ok((String::new(), "none"));
    }
    let cell_share = (9.0 * eps * eps).min(1.0);
    let share = if c.n == 1 { cell_share } else { cell_share * cell_share };
    if (cloud.len() as f64).powi(2) * share > SPANNING_PAIR_BUDGET {
        return Ok((c.count.to_string(), "separated"));
    }
    match greedy_spanning_set(system, cloud, c.n, eps) {
        Ok(s) => Ok((s.len().to_string(), "greedy")),
        Err(Error::CoverImpossible { .. }) => Ok((String::new(), "none")),
        Err(e) => Err(e),
    }
}

fn estimate(cfg: &RunConfig) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let mut out = Outcome::default();
    let mut estimates: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    let mut entropy_estimate: Option<f64> = None;
    let n_max = *cfg.n_list.last().expect("nonempty");
    let lambda = lambda_plus_series(&system, &domain_grid(&system, cfg.grid.min(128))?, n_max)?;
    for method in &cfg.methods {
        match method.as_str() {
            "cocycle" => {
                let plan = SamplePlan::stratified(cfg.grid, cfg.seed);
                let reports = integral_reports(&system, &plan, &cfg.n_list)?;
                let series = norm_series(&reports)?;
                let log_series = log_norm_series(&reports)?;
                let rows = reports
                    .iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            fmt_f64(r.log_of_mean),
                            fmt_f64(r.mean_of_log),
                            fmt_f64(r.log_of_mean / r.n as f64),
                            fmt_f64(r.mean_of_log / r.n as f64),
                            fmt_f64(r.jensen_gap),
                            r.samples.to_string(),
                            r.escapes.to_string(),
                            r.unreliable.to_string(),
                            r.quadrature_error.map_or("nan".to_string(), fmt_f64),
                        ]
                    })
                    .collect();
                out.file(
                    "cocycle.csv",
                    series_csv(
                        cfg,
                        &["n", "log_of_mean", "mean_of_log", "rate_of_mean", "rate_of_log", "jensen_gap", "samples", "escapes", "unreliable", "quadrature_error"],
                        rows,
                    ),
                );
                entropy_estimate.get_or_insert(series.extrapolated_rate);
                estimates.insert(
                    "cocycle".into(),
                    serde_json::json!({ "norm": RateSummary::from(&series), "log_norm": RateSummary::from(&log_series) }),
                );
            }
            "curve" => {
                let curve = cfg.curve_for(&system)?;
                let series = match system.domain {
                    Domain::Torus => curve_growth_series(&system, &curve, &cfg.n_list, cfg.tol)?,
                    Domain::PlaneBox(r) => clipped_curve_growth_series(&system, &curve, &cfg.n_list, &r, cfg.tol)?,
                };
                let rows = series
                    .entries
                    .iter()
                    .map(|e| vec![e.n.to_string(), fmt_f64((e.value * e.n as f64).exp()), fmt_f64(e.value)])
                    .collect();
                out.file("curve.csv", series_csv(cfg, &["n", "length", "rate"], rows));
                entropy_estimate.get_or_insert(series.extrapolated_rate);
                estimates.insert("curve".into(), serde_json::to_value(RateSummary::from(&series)).expect("serializes"));
            }
            "katok" => {
                let cloud = SamplePlan::stratified(cfg.grid, cfg.seed).shuffled_cloud(&system, cfg.seed)?;
                let mut eps_list = cfg.eps_list.clone();
                eps_list.sort_by(|a, b| b.total_cmp(a));
                eps_list.dedup();
                let series = katok_estimate(&system, &cloud, &cfg.n_list, &eps_list, DEFAULT_SATURATION)?;
                let mut rows = Vec::new();
                for s in &series {
                    for c in &s.counts {
                        let (spanning, source) = spanning_count(&system, &cloud, c, s.eps)?;
                        rows.push(vec![
                            fmt_f64(s.eps),
                            c.n.to_string(),
                            c.count.to_string(),
                            spanning,
                            source.to_string(),
                            s.slope.map_or(String::new(), fmt_f64),
                        ]);
                    }
                }
                out.file("katok.csv", series_csv(cfg, &["eps", "n", "separated_count", "spanning_count", "spanning_source", "katok_slope"], rows));
                let headline = series.iter().rev().find_map(|s| s.slope);
                if let Some(h) = headline {
                    entropy_estimate.get_or_insert(h);
                }
                estimates.insert(
                    "katok".into(),
                    serde_json::json!({
                        "rate": headline,
                        "per_eps": series.iter().map(|s| serde_json::json!({ "eps": s.eps, "slope": s.slope })).collect::<Vec<_>>(),
                    }),
                );
            }
            "lambda" => {
                let rows = lambda.entries.iter().map(|e| vec![e.n.to_string(), fmt_f64(e.value)]).collect();
                out.file("lambda.csv", series_csv(cfg, &["n", "max_log_norm_rate"], rows));
                estimates.insert("lambda".into(), serde_json::to_value(RateSummary::from(&lambda)).expect("serializes"));
            }
            _ => unreachable!("methods validated in resolve"),
        }
    }
    let lambda_est = lambda.extrapolated_rate;
    let threshold = system.yomdin_term(lambda_est);
    let h = entropy_estimate.unwrap_or(lambda_est);
    let summary = serde_json::json!({
        "config": cfg,
        "system": {
            "name": system.name,
            "smoothness": system.smoothness,
            "known_entropy": system.known_entropy,
            "known_lambda_plus": system.known_lambda_plus,
        },
        "estimates": estimates,
        "lambda_plus_estimate": lambda_est,
        "yomdin_threshold": threshold,
        "entropy_estimate": h,
        "entropy_exceeds_threshold": h >= threshold,
    });
    let text = to_json(&summary);
    out.file("summary.json", text.clone());
    out.stdout = text;
    Ok(out)
}

fn diagnose_times(cfg: &RunConfig) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let n = *cfg.n_list.last().expect("nonempty");
    let (u, v, angle) = cfg.point;
    let start = TangentPoint::new(system.canonicalize(Point2::new(u, v)), angle);
    let tcfg = TimeConfig { tau: cfg.tau, ..TimeConfig::default() };
    let profile = OrbitProfile::compute(&system, &start, n, &tcfg)?;
    let mut out = Outcome::default();
    let mut csv = profile.to_csv();
    csv.comments = cfg.comments();
    out.file("profile.csv", csv.render());
    let convex = match (system.known_entropy, system.known_lambda_plus) {
        (Some(h), Some(l)) => {
            let curve = cfg.curve_for(&system)?;
            let curve_n = n.min(20);
            Some(convex_split_report(&system, &curve, curve_n, &tcfg, h, l, cfg.tol)?)
        }
        _ => None,
    };
    let summary = serde_json::json!({
        "config": cfg,
        "n": n,
        "geometric_count": profile.geometric.len(),
        "expanded_count": profile.expanded.len(),
        "trapping_time": profile.trapping_time,
        "alpha": profile.alpha(),
        "gap_audit": profile.gap_audit(),
        "convex_split": convex,
    });
    let text = to_json(&summary);
    out.file("summary.json", text.clone());
    out.stdout = text;
    Ok(out)
}

fn verify_example(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let mut table = CsvTable::new(&["a", "n", "L_n", "rate", "theoretical", "residual"]);
    table.comments = cfg.comments();
    let mut per_a = Vec::new();
    for &a in &cfg.a_list {
        let report = restricted_growth_report(a, &cfg.n_list, cfg.tol, DEFAULT_CELL_BUDGET)?;
        table.rows.extend(report.to_csv().rows);
        per_a.push(serde_json::json!({
            "a": a,
            "fitted_rate": report.series.extrapolated_rate,
            "theoretical_rate": report.theoretical,
            "residual": report.series.extrapolated_rate - report.theoretical,
            "last_n": report.series.last().n,
            "truncated_at": report.truncated_at,
        }));
    }
    out.file("example.csv", table.render());
    let cos = cos_integral_sweep(cfg.tol)?;
    let cos_rows = cos
        .iter()
        .map(|r| vec![fmt_f64(r.a), fmt_f64(r.b), r.n.to_string(), fmt_f64(r.numeric), fmt_f64(r.bound), r.pass.to_string()])
        .collect();
    out.file("cos_integral.csv", series_csv(cfg, &["a", "b", "n", "numeric", "bound", "pass"], cos_rows));
    let mut mono = Vec::new();
    for a in [1.05, 1.1, 1.2] {
        for n in [5, 10, 15] {
            mono.push(monotonicity_count_audit(a, n)?);
        }
    }
    let mono_rows = mono
        .iter()
        .map(|r| vec![fmt_f64(r.a), r.n.to_string(), r.count.to_string(), fmt_f64(r.bound), r.pass.to_string()])
        .collect();
    out.file("monotonicity.csv", series_csv(cfg, &["a", "n", "count", "bound", "pass"], mono_rows));
    let summary = serde_json::json!({
        "config": cfg,
        "restricted_growth": per_a,
        "cos_integral_failures": cos.iter().filter(|r| !r.pass).count(),
        "monotonicity_failures": mono.iter().filter(|r| !r.pass).count(),
    });
    let text = to_json(&summary);
    out.file("summary.json", text.clone());
    out.stdout = text;
    Ok(out)
}

fn decompose_curve(cfg: &RunConfig) -> Result<Outcome> {
    let curve = parse_curve(&cfg.curve)?;
    let eps = cfg.eps_list[0];
    let pieces = decompose_eps_bounded(&curve, eps)?;
    let mut rows = Vec::with_capacity(pieces.len());
    let mut all_bounded = true;
    for p in &pieces {
        let b = p.curve.boundedness()?;
        let ok = b.bounded && b.first_sup <= eps;
        all_bounded &= ok;
        rows.push(vec![
            p.index.to_string(),
            fmt_f64(p.offset),
            fmt_f64(p.offset + p.scale),
            fmt_f64(b.first_sup),
            fmt_f64(b.higher_max),
            ok.to_string(),
        ]);
    }
    let mut out = Outcome::default();
    out.file("pieces.csv", series_csv(cfg, &["index", "t_start", "t_end", "first_sup", "higher_max", "eps_bounded"], rows));
    let summary = serde_json::json!({
        "config": cfg,
        "pieces": pieces.len(),
        "expected_pieces": piece_count(eps),
        "covers_unit_interval": pieces_cover_unit_interval(&pieces, 1e-12),
        "all_eps_bounded": all_bounded,
    });
    let text = to_json(&summary);
    out.file("summary.json", text.clone());
    out.stdout = text;
    Ok(out)
}

fn selftest(cfg: &RunConfig) -> Result<Outcome> {
    let checks = run_selftest(cfg.seed);
    let mut out = Outcome::default();
    for c in &checks {
        let _ = writeln!(out.stdout, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    out.failed_checks = checks.iter().filter(|c| !c.pass).count();
    let _ = writeln!(out.stdout, "{} checks, {} failed", checks.len(), out.failed_checks);
    out.file("selftest.json", to_json(&serde_json::json!({ "config": cfg, "checks": checks })));
    Ok(out)
}

/// Runs a resolved configuration inside a thread pool of the requested size.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::param(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cfg.command.as_str() {
        "estimate" => estimate(cfg),
        "diagnose-times" => diagnose_times(cfg),
        "verify-example" => verify_example(cfg),
        "decompose-curve" => decompose_curve(cfg),
        "selftest" => selftest(cfg),
        other => Err(Error::param(format!("unknown command `{other}`"))),
    })
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, content) in files {
        fs::write(dir.join(name), content)?;
    }
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match RunConfig::resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_USAGE };
        }
    };
    if let Some(dir) = &cfg.out {
        if let Err(e) = write_files(dir, &outcome.files) {
            eprintln!("error: cannot write reports to {}: {e}", dir.display());
            return EXIT_USAGE;
        }
    }
    print!("{}", outcome.stdout);
    if outcome.failed_checks > 0 {
        EXIT_SELFTEST
    } else {
        EXIT_OK
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_ranges() {
        assert_eq!(parse_n_range("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_n_range("4..10:3").unwrap(), vec![4, 7, 10]);
        assert_eq!(parse_n_range("50").unwrap(), vec![50]);
        assert!(parse_n_range("0..3").is_err());
        assert!(parse_n_range("5..3").is_err());
        assert!(parse_n_range("1..3:0").is_err());
        assert!(parse_n_range("x").is_err());
    }

    #[test]
    fn config_file_and_flag_precedence() {
        let m = parse_config_text("# comment\nsystem = standard\nparams = k=2\nn = 1..4\n").unwrap();
        assert_eq!(m["system"], "standard");
        assert_eq!(m["params"], "k=2");
        assert!(parse_config_text("bogus = 1").is_err());
        assert!(parse_config_text("no equals sign").is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "system = identity\nn = 1..4\nseed = 9\n").unwrap();
        let cmd = Command::Estimate(Flags { config: Some(path), n: Some("2..3".into()), ..Flags::default() });
        let cfg = RunConfig::resolve(&cmd).unwrap();
        assert_eq!(cfg.system, "identity");
        assert_eq!(cfg.n_list, vec![2, 3]);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_method_is_a_usage_error() {
        let cmd = Command::Estimate(Flags { method: Some("magic".into()), ..Flags::default() });
        assert!(RunConfig::resolve(&cmd).is_err());
    }

    #[test]
    fn curves_parse() {
        assert!(parse_curve("hloop:0.5").is_ok());
        assert!(parse_curve("segment:0,0,1,1").is_ok());
        assert!(parse_curve(DEFAULT_WAVE).unwrap().check_admissible().is_ok());
        assert!(parse_curve("oscillator").is_ok());
        assert!(parse_curve("segment:0,0").is_err());
        assert!(parse_curve("spiral:1").is_err());
    }

    #[test]
    fn identity_curve_rate_is_zero() {
        let cmd = Command::Estimate(Flags {
            system: Some("identity".into()),
            method: Some("curve".into()),
            n: Some("1..6".into()),
            ..Flags::default()
        });
        let out = execute(&RunConfig::resolve(&cmd).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
        assert!(v["estimates"]["curve"]["rate"].as_f64().unwrap().abs() < 1e-12);
    }

    #[test]
    fn decompose_manifest_has_one_row_per_piece() {
        let cmd = Command::DecomposeCurve(Flags { eps: Some("0.01".into()), ..Flags::default() });
        let out = execute(&RunConfig::resolve(&cmd).unwrap()).unwrap();
        let csv = &out.files.iter().find(|f| f.0 == "pieces.csv").unwrap().1;
        let data_rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
        assert_eq!(data_rows, 100);
        assert!(csv.lines().filter(|l| !l.starts_with('#')).skip(1).all(|l| l.ends_with(",true")));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["surfent", "--help"]), EXIT_OK);
        assert_eq!(run(["surfent", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["surfent", "estimate", "--system", "nowhere"]), EXIT_USAGE);
        assert_eq!(run(["surfent", "estimate", "--n", "3..1"]), EXIT_USAGE);
        // the diagonal map pushes every starting point out of its box
        assert_eq!(
            run(["surfent", "diagnose-times", "--system", "diag", "--point", "1.9,1.9,0.5", "--n", "10"]),
            EXIT_NUMERICAL
        );
    }
}
