//! Run configuration, orchestration of runs and studies, and file output.
//!
//! Configs are TOML. `scenario` is either a preset name or an inline table;
//! everything a preset implies can be overridden:
//!
//! ```toml
//! scenario = "smooth-I-table5"
//! M = 200
//! t_end = 10.0
//!
//! [solver]
//! tol = 1e-13
//!
//! [outputs]
//! snapshot_times = [0.0, 5.0, 10.0]
//! output_dir = "out"
//! format = "csv"
//! ```
//!
//! Numbers are written with 17 significant digits, so every value read back
//! is bit-identical to the one computed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::convergence::{run_scheme_ladder, Axis, ConvergenceStudy, Ladder, LadderError};
use crate::diagnostics::{ConservedRecord, ConvergenceRow, Drift, Summation};
use crate::error::SchemeError;
use crate::mesh::PeriodicGrid;
use crate::scenarios::{preset, ScenarioSpec};
use crate::scheme::{step_count, Integrator, SolverConfig, State, StepReport};

pub const SNAPSHOT_HEADER: &str = "x,u,rho,m";
pub const CONSERVED_HEADER: &str = "n,t,I1,I2,E,H,iters,res_m,res_rho,visc_nodes";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Preset(String),
    Inline(ScenarioSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub snapshot_times: Vec<f64>,
    /// Conserved quantities are recorded every this many steps (plus the
    /// first and last level).
    pub conserved_every: usize,
    pub output_dir: PathBuf,
    pub format: Format,
}

/// A validated configuration with every default applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioSource,
    /// Resolved scenario (the preset's, or the inline one).
    pub spec: ScenarioSpec,
    pub m: usize,
    pub n: usize,
    pub t_end: f64,
    pub solver: SolverConfig,
    pub outputs: Outputs,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<toml::Value>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    outputs: RawOutputs,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    viscosity: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_check: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshot_times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    conserved_every: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
}

/// Parses and validates a TOML config.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(raw)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// A config running `name` with its preset defaults.
pub fn preset_config(name: &str) -> Result<RunConfig, ConfigError> {
    resolve(RawConfig {
        scenario: Some(toml::Value::String(name.to_string())),
        ..RawConfig::default()
    })
}

fn resolve(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let scenario_value = raw.scenario.ok_or_else(|| invalid("scenario", "missing"))?;
    let (scenario, spec, base) = match scenario_value {
        toml::Value::String(name) => {
            let p = preset(&name).map_err(|e| invalid("scenario", e.to_string()))?;
            let spec = p.scenario.clone();
            (ScenarioSource::Preset(name), spec, Some(p))
        }
        toml::Value::Table(table) => {
            let spec: ScenarioSpec = toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| invalid("scenario", e.message().to_string()))?;
            (ScenarioSource::Inline(spec.clone()), spec, None)
        }
        other => {
            return Err(invalid(
                "scenario",
                format!("expected a preset name or a table, got {}", other.type_str()),
            ))
        }
    };
    spec.validate().map_err(|e| invalid("scenario", e.to_string()))?;

    let m = raw
        .m
        .or(base.as_ref().map(|p| p.grid_points))
        .ok_or_else(|| invalid("M", "required for an inline scenario"))?;
    spec.grid(m).map_err(|e| invalid("M", e.to_string()))?;
    let t_end = raw
        .t_end
        .or(base.as_ref().map(|p| p.t_end))
        .ok_or_else(|| invalid("t_end", "required for an inline scenario"))?;
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(invalid("t_end", format!("must be positive, got {t_end}")));
    }

    let (n, tau) = match (raw.n, raw.solver.tau) {
        (Some(n), Some(tau)) => {
            if n == 0 || ((n as f64) * tau - t_end).abs() > 1e-12 * t_end {
                return Err(invalid(
                    "N",
                    format!("N * tau = {} does not equal t_end = {t_end}", n as f64 * tau),
                ));
            }
            (n, tau)
        }
        (Some(0), None) => return Err(invalid("N", "must be at least 1")),
        (Some(n), None) => (n, t_end / n as f64),
        (None, tau) => {
            let tau = tau
                .or(base.as_ref().map(|p| p.tau))
                .ok_or_else(|| invalid("N", "give N or solver.tau for an inline scenario"))?;
            let n = step_count(0.0, t_end, tau).map_err(|e| invalid("solver.tau", e.to_string()))?;
            if n == 0 {
                return Err(invalid("solver.tau", "longer than t_end"));
            }
            (n, tau)
        }
    };

    let mut solver = SolverConfig::new(tau);
    if let Some(p) = &base {
        solver.viscosity = p.viscosity;
        solver.epsilon = p.epsilon;
    }
    let s = raw.solver;
    solver.tol = s.tol.unwrap_or(solver.tol);
    solver.max_iter = s.max_iter.unwrap_or(solver.max_iter);
    solver.viscosity = s.viscosity.unwrap_or(solver.viscosity);
    solver.epsilon = s.epsilon.unwrap_or(solver.epsilon);
    solver.residual_check = s.residual_check.unwrap_or(solver.residual_check);
    solver
        .validate()
        .map_err(|e| invalid("solver", e.to_string()))?;

    let o = raw.outputs;
    let snapshot_times = match o.snapshot_times {
        Some(times) => {
            for (i, &t) in times.iter().enumerate() {
                if !(0.0..=t_end * (1.0 + 1e-12)).contains(&t) {
                    return Err(invalid(
                        "outputs.snapshot_times",
                        format!("entry {i} = {t} lies outside [0, t_end = {t_end}]"),
                    ));
                }
                snapshot_level(t, tau, n).ok_or_else(|| {
                    invalid(
                        "outputs.snapshot_times",
                        format!("entry {i} = {t} is not a multiple of tau = {tau}"),
                    )
                })?;
            }
            times
        }
        None => {
            let mut times: Vec<f64> = base
                .as_ref()
                .map(|p| p.snapshot_times.clone())
                .unwrap_or_default()
                .into_iter()
                .filter(|&t| t <= t_end && snapshot_level(t, tau, n).is_some())
                .collect();
            if times.first() != Some(&0.0) {
                times.insert(0, 0.0);
            }
            if times.last().is_none_or(|&t| snapshot_level(t, tau, n) != Some(n)) {
                times.push(t_end);
            }
            times
        }
    };
    let conserved_every = o.conserved_every.unwrap_or(1);
    if conserved_every == 0 {
        return Err(invalid("outputs.conserved_every", "must be at least 1"));
    }

    Ok(RunConfig {
        scenario,
        spec,
        m,
        n,
        t_end,
        solver,
        outputs: Outputs {
            snapshot_times,
            conserved_every,
            output_dir: o.output_dir.unwrap_or_else(|| PathBuf::from("output")),
            format: o.format.unwrap_or_default(),
        },
    })
}

/// Level index of time `t`, if `t` is on the time grid to `1e-9` steps.
fn snapshot_level(t: f64, tau: f64, n: usize) -> Option<usize> {
    let k = (t / tau).round();
    ((t / tau - k).abs() <= 1e-9 && k >= 0.0 && k as usize <= n).then_some(k as usize)
}

/// TOML text that parses back to `config`, with every field explicit.
pub fn serialize_config(config: &RunConfig) -> Result<String, ConfigError> {
    let scenario = match &config.scenario {
        ScenarioSource::Preset(name) => toml::Value::String(name.clone()),
        ScenarioSource::Inline(spec) => {
            toml::Value::try_from(spec).map_err(|e| ConfigError::Parse(e.to_string()))?
        }
    };
    let s = &config.solver;
    let o = &config.outputs;
    let raw = RawConfig {
        scenario: Some(scenario),
        m: Some(config.m),
        n: Some(config.n),
        t_end: Some(config.t_end),
        solver: RawSolver {
            tau: Some(s.tau),
            tol: Some(s.tol),
            max_iter: Some(s.max_iter),
            viscosity: Some(s.viscosity),
            epsilon: Some(s.epsilon),
            residual_check: Some(s.residual_check),
        },
        outputs: RawOutputs {
            snapshot_times: Some(o.snapshot_times.clone()),
            conserved_every: Some(o.conserved_every),
            output_dir: Some(o.output_dir.clone()),
            format: Some(o.format),
        },
    };
    toml::to_string(&raw).map_err(|e| ConfigError::Parse(e.to_string()))
}

impl RunConfig {
    pub fn grid(&self) -> PeriodicGrid {
        self.spec.grid(self.m).expect("validated at parse time")
    }

    pub fn initial_state(&self) -> State {
        self.spec.initial_state(&self.grid())
    }

    pub fn integrator(&self) -> Result<Integrator, SchemeError> {
        Integrator::new(self.grid(), self.spec.params, self.solver)
    }

    fn snapshot_levels(&self) -> Vec<usize> {
        let mut levels: Vec<usize> = self
            .outputs
            .snapshot_times
            .iter()
            .filter_map(|&t| snapshot_level(t, self.solver.tau, self.n))
            .collect();
        levels.sort_unstable();
        levels.dedup();
        levels
    }
}

/// Failure of a CLI-level command; maps onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Solver(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 2,
            CommandError::Solver(_) => 3,
            CommandError::Io { .. } => 4,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CommandError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<SchemeError> for CommandError {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::InvalidConfig(msg) => invalid("solver", msg).into(),
            other => CommandError::Solver(other.to_string()),
        }
    }
}

/// One row of the conserved-series file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    #[serde(flatten)]
    pub record: ConservedRecord,
    pub iters: usize,
    pub res_m: f64,
    pub res_rho: f64,
    pub visc_nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub snapshots: Vec<PathBuf>,
    pub conserved: PathBuf,
    pub max_iterations: usize,
    pub final_state: State,
}

#[derive(Serialize)]
struct SnapshotJson<'a> {
    n: usize,
    t: f64,
    x: Vec<f64>,
    u: &'a [f64],
    rho: &'a [f64],
    m: &'a [f64],
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn snapshot_csv(s: &State) -> String {
    let mut out = String::with_capacity(80 * s.grid.len());
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for i in 0..s.grid.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(s.grid.x(i)),
            num(s.u[i]),
            num(s.rho[i]),
            num(s.m[i])
        );
    }
    out
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::from(CONSERVED_HEADER);
    out.push('\n');
    for r in rows {
        let c = &r.record;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.n,
            num(c.t),
            num(c.i1),
            num(c.i2),
            num(c.e),
            num(c.h),
            r.iters,
            num(r.res_m),
            num(r.res_rho),
            r.visc_nodes
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), CommandError> {
    fs::write(path, contents).map_err(|e| CommandError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CommandError> {
    fs::create_dir_all(dir).map_err(|e| CommandError::io(dir, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn snapshot_name(n: usize, format: Format) -> String {
    format!("snapshot_{n:08}.{}", format.extension())
}

/// Runs the configured simulation, writing snapshots and the conserved series.
pub fn cmd_run(config: &RunConfig) -> Result<RunSummary, CommandError> {
    let integrator = config.integrator()?;
    let params = config.spec.params;
    let out_dir = &config.outputs.output_dir;
    let format = config.outputs.format;
    ensure_dir(out_dir)?;

    let levels = config.snapshot_levels();
    let every = config.outputs.conserved_every;
    let last = config.n;
    let mut rows: Vec<SeriesRow> = Vec::new();
    let mut snapshots = Vec::new();
    let mut io_error: Option<CommandError> = None;
    let mut max_iterations = 0;

    let mut observe = |n: usize, s: &State, r: &StepReport| {
        max_iterations = max_iterations.max(r.iterations);
        if n.is_multiple_of(every) || n == last {
            rows.push(SeriesRow {
                record: ConservedRecord::of(n, s, &params, Summation::Sequential),
                iters: r.iterations,
                res_m: r.residual_m,
                res_rho: r.residual_rho,
                visc_nodes: r.viscosity_active_nodes,
            });
        }
        if io_error.is_none() && levels.binary_search(&n).is_ok() {
            let path = out_dir.join(snapshot_name(n, format));
            let body = match format {
                Format::Csv => snapshot_csv(s),
                Format::Json => to_json(&SnapshotJson {
                    n,
                    t: s.t,
                    x: s.grid.nodes(),
                    u: &s.u,
                    rho: &s.rho,
                    m: &s.m,
                }),
            };
            match write_file(&path, &body) {
                Ok(()) => snapshots.push(path),
                Err(e) => io_error = Some(e),
            }
        }
    };

    let result = integrator.run(&config.initial_state(), config.t_end, &|n| n == last, &mut [&mut observe]);

    // The series is written even when the run fails, so it can be inspected.
    let conserved = out_dir.join(format!("conserved.{}", format.extension()));
    let body = match format {
        Format::Csv => series_csv(&rows),
        Format::Json => to_json(&rows),
    };
    write_file(&conserved, &body)?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let traj = result.map_err(|e| CommandError::Solver(e.to_string()))?;
    Ok(RunSummary {
        steps: traj.steps(),
        snapshots,
        conserved,
        max_iterations,
        final_state: traj.last().cloned().expect("last level is kept"),
    })
}

/// Conserved quantities at the requested times plus the largest drift over
/// every level, the latter measured with compensated sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub rows: Vec<ConservedRecord>,
    pub drift_compensated: Drift,
    pub initial_compensated: ConservedRecord,
}

impl ConservationReport {
    /// Drift of `E` and `I1` relative to their initial magnitudes.
    pub fn relative_drift(&self) -> (f64, f64) {
        let rel = |d: f64, v: f64| if v == 0.0 { d } else { d / v.abs() };
        (
            rel(self.drift_compensated.e_abs, self.initial_compensated.e),
            rel(self.drift_compensated.i1_abs, self.initial_compensated.i1),
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>10}  {:>24}  {:>24}  {:>24}  {:>24}", "t", "E", "I1", "I2", "H");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>10.4}  {:>24.16e}  {:>24.16e}  {:>24.16e}  {:>24.16e}",
                r.t, r.e, r.i1, r.i2, r.h
            );
        }
        let d = &self.drift_compensated;
        let (re, ri) = self.relative_drift();
        let _ = writeln!(out, "max drift over all levels (compensated sums):");
        let _ = writeln!(out, "  E : {:.3e} abs, {:.3e} rel", d.e_abs, re);
        let _ = writeln!(out, "  I1: {:.3e} abs, {:.3e} rel", d.i1_abs, ri);
        let _ = writeln!(out, "  I2: {:.3e} abs", d.i2_abs);
        let _ = writeln!(out, "  H : {:.3e} abs (monitored, not conserved)", d.h_abs);
        out
    }
}

pub fn cmd_conservation(config: &RunConfig) -> Result<ConservationReport, CommandError> {
    let integrator = config.integrator()?;
    let params = config.spec.params;
    let levels = config.snapshot_levels();
    let mut rows = Vec::new();
    let mut audit = Vec::with_capacity(config.n + 1);
    let mut observe = |n: usize, s: &State, _: &StepReport| {
        if levels.binary_search(&n).is_ok() {
            rows.push(ConservedRecord::of(n, s, &params, Summation::Sequential));
        }
        audit.push(ConservedRecord::of(n, s, &params, Summation::Compensated));
    };
    integrator
        .run(&config.initial_state(), config.t_end, &|_| false, &mut [&mut observe])
        .map_err(|e| CommandError::Solver(e.to_string()))?;
    let report = ConservationReport {
        rows,
        drift_compensated: Drift::of(&audit),
        initial_compensated: audit[0],
    };

    let dir = &config.outputs.output_dir;
    ensure_dir(dir)?;
    let path = dir.join(format!("conservation.{}", config.outputs.format.extension()));
    let body = match config.outputs.format {
        Format::Csv => {
            let mut s = String::from("n,t,I1,I2,E,H\n");
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.n,
                    num(r.t),
                    num(r.i1),
                    num(r.i2),
                    num(r.e),
                    num(r.h)
                );
            }
            s
        }
        Format::Json => to_json(&report),
    };
    write_file(&path, &body)?;
    Ok(report)
}

/// Convergence table text: resolution,
/// error and order for `u`, then for `rho`.
pub fn convergence_table(study: &ConvergenceStudy) -> String {
    let (label, var) = match study.axis {
        Axis::Space => ("M", "h"),
        Axis::Time => ("N", "tau"),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{label:>6}  {:>12}  {:>8}  {:>12}  {:>8}",
        format!("|F_u({var})|"),
        "Ord",
        format!("|F_rho({var})|"),
        "Ord"
    );
    let order = |r: &ConvergenceRow| r.order.map_or("*".to_string(), |o| format!("{o:.4}"));
    for (u, r) in study.u.iter().zip(&study.rho) {
        let _ = writeln!(
            out,
            "{:>6}  {:>12.4e}  {:>8}  {:>12.4e}  {:>8}",
            u.resolution,
            u.error,
            order(u),
            r.error,
            order(r)
        );
    }
    out
}

pub fn convergence_csv(study: &ConvergenceStudy) -> String {
    let label = match study.axis {
        Axis::Space => "M",
        Axis::Time => "N",
    };
    let opt = |o: Option<f64>| o.map_or(String::new(), num);
    let mut out = format!("{label},err_u,ord_u,err_rho,ord_rho\n");
    for (u, r) in study.u.iter().zip(&study.rho) {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            u.resolution,
            num(u.error),
            opt(u.order),
            num(r.error),
            opt(r.order)
        );
    }
    out
}

/// Builds the ladder whose coarsest rung is the configured run.
pub fn ladder_for(config: &RunConfig, axis: Axis, rows: usize) -> Ladder {
    Ladder {
        axis,
        grid: config.grid(),
        tau: config.solver.tau,
        t_end: config.t_end,
        rows,
    }
}

pub fn cmd_convergence(
    config: &RunConfig,
    axis: Axis,
    rows: usize,
) -> Result<ConvergenceStudy, CommandError> {
    let ladder = ladder_for(config, axis, rows);
    let spec = config.spec.clone();
    let study = run_scheme_ladder(&ladder, spec.params, config.solver, &|g| spec.initial_state(g))
        .map_err(|e| match e {
            LadderError::TooFewRows(_) => CommandError::Config(invalid("levels", e.to_string())),
            LadderError::Setup(SchemeError::InvalidConfig(_)) => {
                CommandError::Config(invalid("solver", e.to_string()))
            }
            other => CommandError::Solver(other.to_string()),
        })?;

    let dir = &config.outputs.output_dir;
    ensure_dir(dir)?;
    let path = dir.join(format!("convergence_{axis}.{}", config.outputs.format.extension()));
    let body = match config.outputs.format {
        Format::Csv => convergence_csv(&study),
        Format::Json => to_json(&study),
    };
    write_file(&path, &body)?;
    Ok(study)
}
