//! Batch runs driven by a JSON config: analysis, amplitude sweeps and
//! cross-validation, with JSON, text and CSV output.
//!
//! Floating-point values in reports are decimal strings with 17 significant
//! digits. Everything except the `timings` object is a deterministic function
//! of the config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::kernel::KernelDim;
use crate::metric::{catalog, perturb, MetricField, Params, PerturbationSpec, Support};
use crate::obstruction::{analyze, trivial_vector, ObstructionReport, ObstructionSettings, ReconstructedField, DEFAULT_KAPPA};
use crate::oracles::{collocation_kernel_dim, conservation_residual_at, holonomy_kernel_dim_d1, CollocationOutcome, Holonomy};
use crate::sym_poly::SymPolySpace;

pub const SCHEMA_VERSION: &str = "1";
pub const THREADS_VAR: &str = "KILLING_PROBE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub name: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub ivp_tol: Option<f64>,
    pub bvp_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub gap_min: Option<f64>,
    pub cond_max: Option<f64>,
    pub noise_margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleToggles {
    pub collocation: bool,
    pub holonomy: bool,
    /// Position degree of the collocation ansatz; `d + 2` when absent.
    pub x_degree: Option<usize>,
    pub loop_count: usize,
}

impl Default for OracleToggles {
    fn default() -> Self {
        Self {
            collocation: true,
            holonomy: true,
            x_degree: None,
            loop_count: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_cutoff")]
    pub cutoff: u32,
    #[serde(default)]
    pub perturbation_seed: u64,
}

fn default_cutoff() -> u32 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossValidation {
    /// Query points per axis of the reconstruction grid.
    pub grid: usize,
    pub trials: usize,
    /// Reconstructions per audit geodesic.
    pub checkpoints: usize,
    pub drift_max: f64,
}

impl Default for CrossValidation {
    fn default() -> Self {
        Self {
            grid: 5,
            trials: 20,
            checkpoints: 9,
            drift_max: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricSpec,
    pub degrees: Vec<usize>,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub oracles: OracleToggles,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub crossvalidate: CrossValidation,
}

fn default_kappa() -> usize {
    DEFAULT_KAPPA
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degrees.is_empty() || self.degrees.contains(&0) {
            return Err(Error::Config("degrees must be a nonempty list of integers >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.kappa < 2 {
            return Err(Error::Config("kappa must be at least 2".into()));
        }
        if self.oracles.loop_count == 0 {
            return Err(Error::Config("loop_count must be positive".into()));
        }
        self.base_metric()?;
        Ok(())
    }

    /// Catalog metric with the optional perturbation applied.
    pub fn base_metric(&self) -> Result<MetricField> {
        let m = catalog(&self.metric.name, &self.metric.params)?;
        match &self.metric.perturbation {
            Some(spec) => perturb(&m, spec),
            None => Ok(m),
        }
    }

    pub fn settings(&self) -> ObstructionSettings {
        let mut s = ObstructionSettings {
            kappa: self.kappa,
            ..Default::default()
        };
        let t = &self.tolerances;
        let tol = &mut s.tolerances;
        tol.ivp_tol = t.ivp_tol.unwrap_or(tol.ivp_tol);
        tol.bvp_tol = t.bvp_tol.unwrap_or(tol.bvp_tol);
        tol.max_iter = t.max_iter.unwrap_or(tol.max_iter);
        s.gap_min = t.gap_min.unwrap_or(s.gap_min);
        s.cond_max = t.cond_max.unwrap_or(s.cond_max);
        s.noise_margin = t.noise_margin.unwrap_or(s.noise_margin);
        s
    }

    fn sweep_spec(&self) -> Result<&SweepSpec> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("sweep needs a `sweep` section with an amplitude grid".into()))?;
        let a = &sweep.amplitudes;
        if a.len() < 2 {
            return Err(Error::Config("amplitude grid needs at least two values".into()));
        }
        if a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || a.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("amplitudes must be non-negative and strictly ascending".into()));
        }
        Ok(sweep)
    }
}

/// Final classification of one degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    TrivialOnly,
    Dim(usize),
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::TrivialOnly => write!(f, "TRIVIAL_ONLY"),
            Verdict::Dim(k) => write!(f, "DIM={k}"),
            Verdict::Indeterminate => write!(f, "INDETERMINATE"),
        }
    }
}

/// Verdict from obstruction results `(raw, nontrivial)` of one or more seeds
/// and the enabled oracles. Oracles count all integrals (trivial included).
///
/// All seeds must agree on a determinate result. A nonzero count needs every
/// enabled oracle to report the same raw dimension. A zero count needs every
/// enabled oracle to be determinate and no larger than the raw dimension,
/// since collocation is a lower bound that may miss the trivial ray.
pub fn decide(cells: &[(KernelDim, KernelDim)], collocation: Option<KernelDim>, holonomy: Option<KernelDim>) -> (Verdict, String) {
    let Some(&(raw, nontrivial)) = cells.first() else {
        return (Verdict::Indeterminate, "no successful cells".into());
    };
    if cells.iter().any(|c| *c != (raw, nontrivial)) {
        return (Verdict::Indeterminate, "seeds disagree".into());
    }
    let (Some(raw), Some(k)) = (raw.value(), nontrivial.value()) else {
        return (Verdict::Indeterminate, "no clean spectral gap".into());
    };
    let mut notes = Vec::new();
    for (name, dim) in [("collocation", collocation), ("holonomy", holonomy)] {
        let Some(dim) = dim else { continue };
        let Some(v) = dim.value() else {
            return (Verdict::Indeterminate, format!("{name} indeterminate"));
        };
        let agrees = if k == 0 && name == "collocation" { v <= raw } else { v == raw };
        if !agrees {
            return (Verdict::Indeterminate, format!("obstruction raw {raw} vs {name} {v}"));
        }
        notes.push(format!("{name} {v}"));
    }
    let verdict = if k == 0 { Verdict::TrivialOnly } else { Verdict::Dim(k) };
    (verdict, notes.join(", "))
}

/// One `(d, seed)` obstruction analysis.
#[derive(Debug, Clone)]
pub struct Cell {
    pub d: usize,
    pub seed: u64,
    pub outcome: std::result::Result<ObstructionReport, Error>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct DegreeResult {
    pub d: usize,
    pub cells: Vec<Cell>,
    pub collocation: Option<std::result::Result<CollocationOutcome, Error>>,
    pub holonomy: Option<std::result::Result<Holonomy, Error>>,
    pub verdict: Verdict,
    pub reason: String,
    pub crossvalidation: Option<Vec<CrossValidated>>,
}

impl DegreeResult {
    fn oracle_dims(&self) -> (Option<KernelDim>, Option<KernelDim>) {
        let c = self.collocation.as_ref().map(|r| r.as_ref().map_or(KernelDim::Indeterminate, |c| c.dim()));
        let h = self
            .holonomy
            .as_ref()
            .map(|r| r.as_ref().map_or(KernelDim::Indeterminate, |h| h.analysis.dim));
        (c, h)
    }

    /// Verdict of a single cell against the shared oracles.
    pub fn cell_verdict(&self, cell: &Cell) -> Verdict {
        let (c, h) = self.oracle_dims();
        match &cell.outcome {
            Ok(r) => decide(&[(r.raw_kernel_dim, r.nontrivial_kernel_dim)], c, h).0,
            Err(_) => Verdict::Indeterminate,
        }
    }

    pub fn has_errors(&self) -> bool {
        self.cells.iter().any(|c| c.outcome.is_err())
            || matches!(self.collocation, Some(Err(_)))
            || matches!(self.holonomy, Some(Err(_)))
    }
}

/// Result of one analyze (or one sweep amplitude).
#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub metric: String,
    pub amplitude: Option<f64>,
    pub degrees: Vec<DegreeResult>,
    pub seconds: f64,
}

impl RunReport {
    pub fn has_errors(&self) -> bool {
        self.degrees.iter().any(|d| d.has_errors())
    }

    pub fn verdicts(&self) -> Vec<(usize, Verdict)> {
        self.degrees.iter().map(|d| (d.d, d.verdict)).collect()
    }
}

fn analyze_degrees(config: &RunConfig, m: &MetricField) -> Vec<DegreeResult> {
    let settings = config.settings();
    let jobs: Vec<(usize, u64)> = config
        .degrees
        .iter()
        .flat_map(|&d| config.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(d, seed)| {
            let start = Instant::now();
            let outcome = analyze(m, d, &settings, seed).map(|run| run.report);
            Cell {
                d,
                seed,
                outcome,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    let oracle_seed = config.seeds[0];
    config
        .degrees
        .iter()
        .map(|&d| {
            let mine: Vec<Cell> = cells.iter().filter(|c| c.d == d).cloned().collect();
            let space = SymPolySpace::new(m.dim(), d);
            let collocation = config.oracles.collocation.then(|| {
                let x_degree = config.oracles.x_degree.unwrap_or(d + 2);
                collocation_kernel_dim(m, &space, x_degree, oracle_seed, settings.gap_min)
            });
            let holonomy = (config.oracles.holonomy && d == 1)
                .then(|| holonomy_kernel_dim_d1(m, config.oracles.loop_count, oracle_seed, settings.gap_min));
            let mut out = DegreeResult {
                d,
                cells: mine,
                collocation,
                holonomy,
                verdict: Verdict::Indeterminate,
                reason: String::new(),
                crossvalidation: None,
            };
            let dims: Vec<(KernelDim, KernelDim)> = out
                .cells
                .iter()
                .map(|c| match &c.outcome {
                    Ok(r) => (r.raw_kernel_dim, r.nontrivial_kernel_dim),
                    Err(_) => (KernelDim::Indeterminate, KernelDim::Indeterminate),
                })
                .collect();
            let (c, h) = out.oracle_dims();
            let (verdict, reason) = if out.cells.iter().any(|c| c.outcome.is_err()) {
                (Verdict::Indeterminate, "analysis failed for some seeds".to_string())
            } else {
                decide(&dims, c, h)
            };
            out.verdict = verdict;
            out.reason = reason;
            out
        })
        .collect()
}

pub fn run_analyze(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let m = config.base_metric()?;
    let degrees = analyze_degrees(config, &m);
    Ok(RunReport {
        command: "analyze".into(),
        config: config.clone(),
        metric: m.label().to_string(),
        amplitude: None,
        degrees,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// One report per amplitude of the grid; the perturbation is added on top
/// of the configured metric.
pub fn run_sweep(config: &RunConfig) -> Result<Vec<RunReport>> {
    config.validate()?;
    let sweep = config.sweep_spec()?;
    let base = config.base_metric()?;
    let mut out = Vec::with_capacity(sweep.amplitudes.len());
    for &amplitude in &sweep.amplitudes {
        let start = Instant::now();
        let spec = PerturbationSpec {
            amplitude,
            frequency_cutoff: sweep.cutoff,
            seed: sweep.perturbation_seed,
            support: Support::Global,
        };
        let degrees = match perturb(&base, &spec) {
            Ok(m) => analyze_degrees(config, &m),
            Err(e) => config
                .degrees
                .iter()
                .map(|&d| DegreeResult {
                    d,
                    cells: config
                        .seeds
                        .iter()
                        .map(|&seed| Cell { d, seed, outcome: Err(e.clone()), seconds: 0.0 })
                        .collect(),
                    collocation: None,
                    holonomy: None,
                    verdict: Verdict::Indeterminate,
                    reason: "perturbation failed".into(),
                    crossvalidation: None,
                })
                .collect(),
        };
        out.push(RunReport {
            command: "sweep".into(),
            config: config.clone(),
            metric: format!("{}+perturbation(a={amplitude:e})", base.label()),
            amplitude: Some(amplitude),
            degrees,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Audit of one kernel basis vector.
#[derive(Debug, Clone)]
pub struct CrossValidated {
    pub seed: u64,
    pub index: usize,
    pub grid_points: usize,
    pub grid_failures: usize,
    /// `|⟨v, ĥ⟩|` with the unit trivial restriction (even `d`).
    pub trivial_overlap: Option<f64>,
    pub drift: std::result::Result<f64, Error>,
    pub certified: bool,
}

/// Reconstruct every raw kernel vector on a grid and audit its conservation.
/// Degrees whose nontrivial kernel is empty have nothing to certify.
pub fn run_crossvalidate(config: &RunConfig) -> Result<RunReport> {
    let mut report = run_analyze(config)?;
    report.command = "crossvalidate".into();
    let m = config.base_metric()?;
    let settings = config.settings();
    let cv = config.crossvalidate;
    let start = Instant::now();
    for degree in &mut report.degrees {
        let mut audits = Vec::new();
        for cell in &degree.cells {
            let Ok(r) = &cell.outcome else { continue };
            if r.nontrivial_kernel_dim.value().unwrap_or(0) == 0 {
                continue;
            }
            let run = analyze(&m, degree.d, &settings, cell.seed)?;
            let h = trivial_vector(&run.cfg);
            for (index, v) in r.kernel_basis.iter().enumerate() {
                let field = ReconstructedField {
                    vector: v.clone(),
                    cfg: &run.cfg,
                    metric: &m,
                    settings,
                };
                let grid = field.on_grid(cv.grid);
                let grid_failures = grid.iter().filter(|(_, r)| r.is_err()).count();
                let drift = conservation_residual_at(&m, &field, cv.trials, cell.seed, cv.checkpoints);
                let certified = grid_failures == 0 && matches!(drift, Ok(x) if x < cv.drift_max);
                audits.push(CrossValidated {
                    seed: cell.seed,
                    index,
                    grid_points: grid.len(),
                    grid_failures,
                    trivial_overlap: h.as_ref().map(|h: &DVector<f64>| h.dot(v).abs()),
                    drift,
                    certified,
                });
            }
        }
        degree.crossvalidation = Some(audits);
    }
    report.seconds += start.elapsed().as_secs_f64();
    Ok(report)
}

/// Number as a 17-significant-digit decimal string.
pub fn num(x: f64) -> Value {
    Value::String(format!("{x:.16e}"))
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

fn dim_json(d: KernelDim) -> Value {
    match d {
        KernelDim::Determinate(k) => json!(k),
        KernelDim::Indeterminate => json!("indeterminate"),
    }
}

fn error_json(e: &Error) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

fn obstruction_json(r: &ObstructionReport) -> Value {
    json!({
        "metric": r.metric,
        "n": r.n,
        "d": r.d,
        "kappa": r.kappa,
        "config_seed": r.config_seed,
        "attempts": r.attempts,
        "singular_values": nums(&r.singular_values),
        "system_singular_values": nums(&r.system_singular_values),
        "noise": num(r.noise),
        "threshold": num(r.threshold),
        "rank": r.rank,
        "raw_kernel_dim": dim_json(r.raw_kernel_dim),
        "nontrivial_kernel_dim": dim_json(r.nontrivial_kernel_dim),
        "gap_ratio": num(r.gap_ratio),
        "matrix_norm": num(r.matrix_norm),
        "trivial_residual": r.trivial_residual.map(num),
        "max_bvp_residual": num(r.max_bvp_residual),
        "max_condition": num(r.max_condition),
        "kernel_basis": r.kernel_basis.iter().map(|v| nums(v.as_slice())).collect::<Vec<_>>(),
        "nontrivial_basis": r.nontrivial_basis.iter().map(|v| nums(v.as_slice())).collect::<Vec<_>>(),
    })
}

fn analysis_json(a: &crate::kernel::KernelAnalysis) -> Value {
    json!({
        "dim": dim_json(a.dim),
        "gap_ratio": num(a.gap_ratio),
        "threshold": num(a.threshold),
        "singular_values": nums(&a.singular_values),
    })
}

fn degree_json(d: &DegreeResult) -> Value {
    let cells: Vec<Value> = d
        .cells
        .iter()
        .map(|c| match &c.outcome {
            Ok(r) => json!({ "seed": c.seed, "status": "ok", "verdict": d.cell_verdict(c).to_string(), "obstruction": obstruction_json(r) }),
            Err(e) => json!({ "seed": c.seed, "status": "error", "error": error_json(e) }),
        })
        .collect();
    let collocation = d.collocation.as_ref().map(|r| match r {
        Ok(c) => json!({
            "dim": dim_json(c.dim()),
            "x_degree": c.lower.x_degree,
            "unknowns": c.lower.unknowns,
            "samples": c.lower.samples,
            "lower": analysis_json(&c.lower.analysis),
            "upper": analysis_json(&c.upper.analysis),
        }),
        Err(e) => json!({ "error": error_json(e) }),
    });
    let holonomy = d.holonomy.as_ref().map(|r| match r {
        Ok(h) => json!({
            "dim": dim_json(h.analysis.dim),
            "loops": h.loops,
            "fibre_dim": h.fibre_dim,
            "max_deviation": num(h.max_deviation),
            "analysis": analysis_json(&h.analysis),
        }),
        Err(e) => json!({ "error": error_json(e) }),
    });
    let mut out = json!({
        "d": d.d,
        "verdict": d.verdict.to_string(),
        "reason": d.reason,
        "cells": cells,
        "oracles": { "collocation": collocation, "holonomy": holonomy },
    });
    if let Some(cv) = &d.crossvalidation {
        let entries: Vec<Value> = cv
            .iter()
            .map(|a| {
                json!({
                    "seed": a.seed,
                    "index": a.index,
                    "grid_points": a.grid_points,
                    "grid_failures": a.grid_failures,
                    "trivial_overlap": a.trivial_overlap.map(num),
                    "drift": match &a.drift { Ok(x) => num(*x), Err(e) => error_json(e) },
                    "certified": a.certified,
                })
            })
            .collect();
        out["crossvalidation"] = if entries.is_empty() { json!("nothing to certify") } else { Value::Array(entries) };
    }
    out
}

fn timings_json(r: &RunReport) -> Value {
    let cells: Vec<Value> = r
        .degrees
        .iter()
        .flat_map(|d| d.cells.iter().map(|c| json!({ "d": c.d, "seed": c.seed, "seconds": num(c.seconds) })))
        .collect();
    json!({ "total_seconds": num(r.seconds), "cells": cells })
}

fn report_body(r: &RunReport) -> Value {
    let mut v = json!({
        "metric": r.metric,
        "degrees": r.degrees.iter().map(degree_json).collect::<Vec<_>>(),
    });
    if let Some(a) = r.amplitude {
        v["amplitude"] = num(a);
    }
    v
}

/// Full JSON report of an analyze or crossvalidate run.
pub fn report_json(r: &RunReport) -> Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": r.command,
        "config": r.config,
    });
    let body = report_body(r);
    for (k, val) in body.as_object().expect("object") {
        v[k] = val.clone();
    }
    v["timings"] = timings_json(r);
    v
}

/// JSON report of a sweep: one entry per amplitude.
pub fn sweep_json(reports: &[RunReport]) -> Value {
    let config = reports.first().map(|r| json!(r.config)).unwrap_or(Value::Null);
    json!({
        "schema_version": SCHEMA_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": "sweep",
        "config": config,
        "reports": reports.iter().map(report_body).collect::<Vec<_>>(),
        "timings": reports.iter().map(timings_json).collect::<Vec<_>>(),
    })
}

/// `amplitude,d,seed,nontrivial_dim,gap_ratio`, one row per cell.
pub fn sweep_csv(reports: &[RunReport]) -> String {
    let mut out = String::from("amplitude,d,seed,nontrivial_dim,gap_ratio\n");
    for r in reports {
        for d in &r.degrees {
            for c in &d.cells {
                let (dim, gap) = match &c.outcome {
                    Ok(o) => (o.nontrivial_kernel_dim.to_string(), format!("{:.16e}", o.gap_ratio)),
                    Err(e) => (format!("error:{}", e.kind()), String::new()),
                };
                let _ = writeln!(out, "{:.16e},{},{},{},{}", r.amplitude.unwrap_or(0.0), d.d, c.seed, dim, gap);
            }
        }
    }
    out
}

fn short(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.1e}")
    }
}

fn cell_line(out: &mut String, d: &DegreeResult, c: &Cell) {
    match &c.outcome {
        Ok(r) => {
            let _ = writeln!(
                out,
                "{:>4} {:>6} {:>8} {:>11} {:>10} {:>10} {:>9.2}  {}",
                c.d,
                c.seed,
                r.raw_kernel_dim.to_string(),
                r.nontrivial_kernel_dim.to_string(),
                short(r.gap_ratio),
                short(r.noise),
                c.seconds,
                d.cell_verdict(c)
            );
        }
        Err(e) => {
            let _ = writeln!(out, "{:>4} {:>6}  error {}: {}", c.d, c.seed, e.kind(), e);
        }
    }
}

const HEADER: &str = "   d   seed      raw  nontrivial        gap      noise   seconds  verdict\n";

/// Fixed-width human summary.
pub fn summary_text(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "killing-probe {}  {}  metric {}", env!("CARGO_PKG_VERSION"), r.command, r.metric);
    out.push_str(HEADER);
    for d in &r.degrees {
        for c in &d.cells {
            cell_line(&mut out, d, c);
        }
    }
    out.push('\n');
    for d in &r.degrees {
        let (c, h) = d.oracle_dims();
        let fmt = |x: Option<KernelDim>| x.map_or("off".to_string(), |k| k.to_string());
        let _ = writeln!(
            out,
            "d = {}: {}  (collocation {}, holonomy {}{})",
            d.d,
            d.verdict,
            fmt(c),
            if d.d == 1 { fmt(h) } else { "n/a".into() },
            if d.verdict == Verdict::Indeterminate { format!("; {}", d.reason) } else { String::new() }
        );
        if let Some(cv) = &d.crossvalidation {
            if cv.is_empty() {
                let _ = writeln!(out, "        nothing to certify");
            }
            for a in cv {
                let drift = a.drift.as_ref().map_or_else(|e| e.kind().to_string(), |x| short(*x));
                let _ = writeln!(
                    out,
                    "        seed {} vector {}: drift {}  grid failures {}/{}  {}",
                    a.seed,
                    a.index,
                    drift,
                    a.grid_failures,
                    a.grid_points,
                    if a.certified { "certified" } else { "not certified" }
                );
            }
        }
    }
    out
}

/// Summary table of nontrivial dimension against amplitude.
pub fn sweep_summary(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else { return out };
    let _ = writeln!(out, "killing-probe {}  sweep  metric {}", env!("CARGO_PKG_VERSION"), first.config.metric.name);
    let _ = write!(out, "{:>12}", "amplitude");
    for d in &first.degrees {
        let _ = write!(out, " {:>16}", format!("d={}", d.d));
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:>12}", format!("{:.1e}", r.amplitude.unwrap_or(0.0)));
        for d in &r.degrees {
            let dims: Vec<String> = d
                .cells
                .iter()
                .map(|c| c.outcome.as_ref().map_or("err".to_string(), |o| o.nontrivial_kernel_dim.to_string()))
                .collect();
            let _ = write!(out, " {:>16}", dims.join("/"));
        }
        out.push('\n');
    }
    out.push('\n');
    for r in reports {
        for d in &r.degrees {
            let _ = writeln!(out, "a = {:.1e}, d = {}: {}", r.amplitude.unwrap_or(0.0), d.d, d.verdict);
        }
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Write `report.json`, `summary.txt` and optionally `sweep.csv` into `dir`.
pub fn write_outputs(dir: &Path, report: &Value, summary: &str, csv: Option<&str>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    write_file(&dir.join("report.json"), &(text + "\n"))?;
    write_file(&dir.join("summary.txt"), summary)?;
    if let Some(csv) = csv {
        write_file(&dir.join("sweep.csv"), csv)?;
    }
    Ok(())
}

/// Process exit code for an error: 2 for config errors, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        2
    } else {
        1
    }
}

/// Cap rayon's global pool from the environment. Returns the cap, if any.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(Some(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    const D0: KernelDim = KernelDim::Determinate(0);
    const D1: KernelDim = KernelDim::Determinate(1);
    const D3: KernelDim = KernelDim::Determinate(3);
    const IND: KernelDim = KernelDim::Indeterminate;

    #[test]
    fn verdict_rules() {
        assert_eq!(decide(&[(D3, D3)], Some(D3), Some(D3)).0, Verdict::Dim(3));
        assert_eq!(decide(&[(D3, D3)], Some(D1), None).0, Verdict::Indeterminate);
        assert_eq!(decide(&[(D3, D3), (D1, D1)], None, None).0, Verdict::Indeterminate);
        assert_eq!(decide(&[(D0, D0)], Some(D0), Some(D0)).0, Verdict::TrivialOnly);
        assert_eq!(decide(&[(D1, D0)], Some(D0), None).0, Verdict::TrivialOnly);
        assert_eq!(decide(&[(D1, D0)], Some(D1), None).0, Verdict::TrivialOnly);
        assert_eq!(decide(&[(D0, D0)], Some(D1), None).0, Verdict::Indeterminate);
        assert_eq!(decide(&[(D0, D0)], None, Some(D1)).0, Verdict::Indeterminate);
        assert_eq!(decide(&[(IND, IND)], None, None).0, Verdict::Indeterminate);
        assert_eq!(decide(&[(D0, D0)], Some(IND), None).0, Verdict::Indeterminate);
        assert_eq!(decide(&[], None, None).0, Verdict::Indeterminate);
    }

    #[test]
    fn config_validation() {
        let ok = r#"{"metric": {"name": "flat"}, "degrees": [1], "seeds": [1]}"#;
        let cfg = RunConfig::from_json(ok).unwrap();
        assert_eq!(cfg.kappa, 3);
        assert_eq!(cfg.output, PathBuf::from("out"));
        let unknown = r#"{"metric": {"name": "torus"}, "degrees": [1], "seeds": [1]}"#;
        let e = RunConfig::from_json(unknown).unwrap_err();
        assert_eq!(e.kind(), "UnknownMetric");
        assert_eq!(exit_code(&e), 2);
        for bad in [
            r#"{"metric": {"name": "flat"}, "degrees": [], "seeds": [1]}"#,
            r#"{"metric": {"name": "flat"}, "degrees": [0], "seeds": [1]}"#,
            r#"{"metric": {"name": "flat"}, "degrees": [1], "seeds": []}"#,
            r#"{"metric": {"name": "flat"}, "degrees": [1], "seeds": [1], "kappa": 1}"#,
            r#"{"metric": {"name": "flat"}, "degrees": [1], "seeds": [1], "colour": 1}"#,
        ] {
            assert_eq!(exit_code(&RunConfig::from_json(bad).unwrap_err()), 2, "{bad}");
        }
    }

    #[test]
    fn sweep_grid_validation() {
        let base = r#"{"metric": {"name": "flat"}, "degrees": [1], "seeds": [1]"#;
        for grid in ["[]", "[0.01]", "[0.01, 0.001]", "[0, 0]"] {
            let cfg = RunConfig::from_json(&format!(r#"{base}, "sweep": {{"amplitudes": {grid}}}}}"#)).unwrap();
            assert!(matches!(run_sweep(&cfg), Err(Error::Config(_))), "{grid}");
        }
        let cfg = RunConfig::from_json(&format!("{base}}}")).unwrap();
        assert!(matches!(run_sweep(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn settings_apply_overrides() {
        let cfg = RunConfig::from_json(
            r#"{"metric": {"name": "flat"}, "degrees": [1], "seeds": [1], "kappa": 4,
                "tolerances": {"ivp_tol": 1e-12, "gap_min": 1e7}}"#,
        )
        .unwrap();
        let s = cfg.settings();
        assert_eq!((s.kappa, s.tolerances.ivp_tol, s.gap_min), (4, 1e-12, 1e7));
        assert_eq!(s.tolerances.bvp_tol, 1e-8);
    }

    #[test]
    fn numbers_are_seventeen_digits() {
        assert_eq!(num(0.1), json!("1.0000000000000001e-1"));
        assert_eq!(num(f64::INFINITY), json!("inf"));
        let back: f64 = num(std::f64::consts::PI).as_str().unwrap().parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }
}
