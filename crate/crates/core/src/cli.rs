//! Job configuration and the commands behind the `proxmix` binary.
//!
//! A job is a JSON document with a `command` field and the inputs that command
//! needs. Functions use the catalog form
//! `{"atom": "<name>", "params": {...}, "transforms": [...]}`; targets wrap a
//! function or a spec as `{"kind": "<kind>", "spec": {...}}` where `kind` is
//! one of `function`, `composition`, `cocomposition`, `mixture`, `comixture`.
//!
//! ```json
//! {
//!   "command": "prox",
//!   "target": {"kind": "composition", "spec": {
//!     "L": {"rows": 1, "cols": 1, "entries": [[0.5]]},
//!     "g": {"atom": "l1_norm", "params": {"dim": 1}},
//!     "gamma": 1.0}},
//!   "points": [[4.0]]
//! }
//! ```
//!
//! Fields by command:
//!
//! * `eval`: `target`, `points`
//! * `prox`: `target`, `points`, and `gamma` for a plain function
//! * `envelope`: `target`, `points`, `rho`
//! * `sweep`: a composition or cocomposition `target`, `points`, increasing `gammas`
//! * `figure`: `preset` (`example1` or `example2`) or a composition-type
//!   `target` on a 2-D domain, `gammas`, optional `grid`
//! * `argmin`: a `function`, `cocomposition` or `comixture` target
//! * `verify`: `suites` (default `["all"]`), `scale`
//!
//! Every job also accepts `output`, `seed`, `solver` and `execution`.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::exec::Execution;
use crate::funcat::{ConvexFunction, ExtReal, ProxFunction};
use crate::linalg::{DenseMap, Vector};
use crate::mixture::{comixture_argmin, comixture_envelope, comixture_eval, comixture_prox, mixture_eval, mixture_prox, MixtureSpec};
use crate::moreau::{envelope, SolveReport, SolveStatus, SolverOpts};
use crate::proxcomp::{
    argmin_cocomposition, envelope_cocomposition, eval_cocomposition, eval_composition, gamma_sweep, global_infimum,
    prox_cocomposition, prox_composition, CompositionFn, CompositionSpec, SweepReport,
};
use crate::verify::{self, ReportBundle, Scale, INEQUALITY_SLACK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Eval,
    Prox,
    Envelope,
    Sweep,
    Figure,
    Argmin,
    Verify,
}

/// What a command operates on.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", content = "spec", rename_all = "lowercase")]
pub enum Target {
    Function(ConvexFunction),
    Composition(CompositionSpec),
    Cocomposition(CompositionSpec),
    Mixture(MixtureSpec),
    Comixture(MixtureSpec),
}

impl Target {
    fn kind(&self) -> &'static str {
        match self {
            Target::Function(_) => "function",
            Target::Composition(_) => "composition",
            Target::Cocomposition(_) => "cocomposition",
            Target::Mixture(_) => "mixture",
            Target::Comixture(_) => "comixture",
        }
    }

    fn dim(&self) -> usize {
        match self {
            Target::Function(f) => f.dim(),
            Target::Composition(s) | Target::Cocomposition(s) => s.dim(),
            Target::Mixture(m) | Target::Comixture(m) => m.dim(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Standard output when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// The built-in figure instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `L: R² → R⁵`, `g = ‖(η₁, η₂, η₃)‖₁ + ‖(η₄ − 1, η₅ + 2)‖`
    Example1,
    /// `L: R² → R³`, `g = d_B(0;2)`
    Example2,
}

impl Preset {
    pub fn operator(self) -> DenseMap {
        let rows: Vec<Vec<f64>> = match self {
            Preset::Example1 => vec![
                vec![0.0, 0.5],
                vec![-0.5, 0.0],
                vec![0.0, -0.5],
                vec![0.3, 0.4],
                vec![0.1, -0.3],
            ],
            Preset::Example2 => vec![vec![0.7, 0.1], vec![-0.3, 0.4], vec![0.5, -0.3]],
        };
        DenseMap::from_rows(&rows).expect("preset operator")
    }

    pub fn function(self) -> ConvexFunction {
        match self {
            Preset::Example1 => {
                let shifted = ConvexFunction::eucl_norm(2).translate(Vector::from(vec![1.0, -2.0])).expect("preset shift");
                ConvexFunction::direct_sum(vec![ConvexFunction::l1_norm(3), shifted]).expect("preset function")
            }
            Preset::Example2 => ConvexFunction::dist_ball(Vector::zeros(3), 2.0).expect("preset function"),
        }
    }
}

/// A uniform square grid `[lo, hi]²` with `steps` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { lo: -4.0, hi: 4.0, steps: 101 }
    }
}

impl GridSpec {
    pub fn point(&self, i: usize) -> f64 {
        if self.steps == 1 {
            return self.lo;
        }
        self.lo + (self.hi - self.lo) * i as f64 / (self.steps - 1) as f64
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vector>,
    /// Prox parameter for plain functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Envelope parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gammas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suites: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOpts,
    #[serde(default)]
    pub execution: Execution,
}

impl JobConfig {
    pub fn new(command: Command) -> Self {
        JobConfig {
            command,
            target: None,
            preset: None,
            points: Vec::new(),
            gamma: None,
            rho: None,
            gammas: Vec::new(),
            grid: None,
            suites: Vec::new(),
            scale: None,
            output: OutputSpec::default(),
            seed: 0,
            solver: SolverOpts::default(),
            execution: Execution::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("job configs serialize")
    }
}

/// A configuration problem, located when possible.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub message: String,
    /// Dotted path of the offending field.
    pub field: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError { message: message.into(), field: None, line: None, column: None }
    }

    pub fn at(field: &str, message: impl Into<String>) -> Self {
        ConfigError { field: Some(field.into()), ..ConfigError::new(message) }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " at line {l}, column {c}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " in `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// `2` for configuration and i/o problems, `3` for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NormNotConverged(_) => CliError::Numerical(e.to_string()),
            Error::Io(io) => CliError::Io(io),
            other => CliError::Config(ConfigError::new(other.to_string())),
        }
    }
}

/// Parses a job, reporting the line, column and field of the first problem.
pub fn parse_config(text: &str) -> Result<JobConfig, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: JobConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError {
            message: bare_message(&inner),
            field: (path != ".").then_some(path),
            line: Some(inner.line()),
            column: Some(inner.column()),
        }
    })?;
    de.end()
        .map_err(|e| ConfigError { line: Some(e.line()), column: Some(e.column()), ..ConfigError::new(bare_message(&e)) })?;
    validate(&cfg)?;
    Ok(cfg)
}

/// The serde_json message without its trailing position.
fn bare_message(e: &serde_json::Error) -> String {
    let text = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    text.strip_suffix(&suffix).map_or(text.clone(), str::to_string)
}

fn require<'a, T>(v: &'a Option<T>, field: &str, command: Command) -> Result<&'a T, ConfigError> {
    v.as_ref().ok_or_else(|| ConfigError::at(field, format!("required by the {command:?} command").to_lowercase()))
}

fn check_points(cfg: &JobConfig, dim: usize) -> Result<(), ConfigError> {
    if cfg.points.is_empty() {
        return Err(ConfigError::at("points", "at least one point is required"));
    }
    for (i, p) in cfg.points.iter().enumerate() {
        if p.dim() != dim {
            return Err(ConfigError::at(&format!("points[{i}]"), format!("expected dimension {dim}, got {}", p.dim())));
        }
    }
    Ok(())
}

fn check_positive(v: f64, field: &str) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::at(field, format!("must be positive and finite, got {v}")))
    }
}

/// Per-command checks that serde cannot express.
pub fn validate(cfg: &JobConfig) -> Result<(), ConfigError> {
    cfg.solver.validate().map_err(|e| ConfigError::at("solver", e.to_string()))?;
    let c = cfg.command;
    match c {
        Command::Eval | Command::Prox | Command::Envelope => {
            let t = require(&cfg.target, "target", c)?;
            check_points(cfg, t.dim())?;
            if c == Command::Prox && matches!(t, Target::Function(_)) {
                check_positive(*require(&cfg.gamma, "gamma", c)?, "gamma")?;
            }
            if c == Command::Envelope {
                check_positive(*require(&cfg.rho, "rho", c)?, "rho")?;
            }
        }
        Command::Sweep => {
            let t = require(&cfg.target, "target", c)?;
            if !matches!(t, Target::Composition(_) | Target::Cocomposition(_)) {
                return Err(ConfigError::at("target.kind", "sweep needs a composition or cocomposition"));
            }
            check_points(cfg, t.dim())?;
            check_gammas(&cfg.gammas, true)?;
        }
        Command::Figure => {
            match (&cfg.preset, &cfg.target) {
                (Some(_), Some(_)) => return Err(ConfigError::at("preset", "give either a preset or a target")),
                (None, None) => return Err(ConfigError::at("preset", "a preset or a target is required")),
                (None, Some(t)) if !matches!(t, Target::Composition(_) | Target::Cocomposition(_)) => {
                    return Err(ConfigError::at("target.kind", "figure needs a composition or cocomposition"))
                }
                _ => {}
            }
            check_gammas(&cfg.gammas, false)?;
            if let Some(g) = &cfg.grid {
                if !(g.lo < g.hi && g.lo.is_finite() && g.hi.is_finite()) || g.steps < 2 {
                    return Err(ConfigError::at("grid", "needs finite lo < hi and at least 2 steps"));
                }
            }
        }
        Command::Argmin => {
            let t = require(&cfg.target, "target", c)?;
            if !matches!(t, Target::Function(_) | Target::Cocomposition(_) | Target::Comixture(_)) {
                return Err(ConfigError::at("target.kind", "argmin supports function, cocomposition and comixture"));
            }
        }
        Command::Verify => {
            let known = verify::suite_ids();
            for (i, s) in cfg.suites.iter().enumerate() {
                if s != "all" && !known.contains(&s.as_str()) {
                    return Err(ConfigError::at(&format!("suites[{i}]"), format!("unknown suite `{s}`")));
                }
            }
        }
    }
    Ok(())
}

fn check_gammas(gammas: &[f64], increasing: bool) -> Result<(), ConfigError> {
    if gammas.is_empty() {
        return Err(ConfigError::at("gammas", "at least one gamma is required"));
    }
    for (i, g) in gammas.iter().enumerate() {
        check_positive(*g, &format!("gammas[{i}]"))?;
    }
    if increasing && gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError::at("gammas", "must be strictly increasing"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub x: Vector,
    pub value: ExtReal,
    pub status: SolveStatus,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Disagreement between the two evaluation paths of a mixture.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProxRow {
    pub x: Vector,
    pub prox: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub x: Vector,
    pub rho: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSweep {
    pub x: Vector,
    pub sweep: SweepReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FigureRow {
    pub x1: f64,
    pub x2: f64,
    pub gamma: f64,
    /// `g(Lx)`
    pub composition: ExtReal,
    pub cocomposition: ExtReal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FigureData {
    pub grid: GridSpec,
    pub gammas: Vec<f64>,
    /// Ordered by `γ`, then `x1`, then `x2`.
    pub rows: Vec<FigureRow>,
    /// `⊙ ≤ g∘L` at every grid point and `γ`.
    pub below_composition: bool,
    /// `⊙` non-increasing in `γ` at every grid point.
    pub monotone_in_gamma: bool,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum JobOutput {
    Eval { kind: String, rows: Vec<EvalRow> },
    Prox { kind: String, rows: Vec<ProxRow> },
    Envelope { kind: String, rows: Vec<EnvelopeRow> },
    Sweep { sweeps: Vec<PointSweep> },
    Figure(FigureData),
    Argmin { kind: String, report: SolveReport },
    Verify(ReportBundle),
}

impl JobOutput {
    /// `0`, `3` when a solve diverged, `4` when a suite failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            JobOutput::Eval { rows, .. } if rows.iter().any(|r| r.status == SolveStatus::Diverged) => 3,
            JobOutput::Argmin { report, .. } if report.status == SolveStatus::Diverged => 3,
            JobOutput::Verify(b) if !b.all_pass => 4,
            _ => 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outputs serialize")
    }

    /// One header line and one line per row, `\n`-terminated.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut line = |cells: Vec<String>| {
            out.push_str(&cells.join(","));
            out.push('\n');
        };
        match self {
            JobOutput::Eval { rows, .. } => {
                let n = rows.first().map_or(0, |r| r.x.dim());
                line([indexed("x", n), vec!["value".into(), "status".into(), "residual".into()]].concat());
                for r in rows {
                    let mut c = floats(r.x.as_slice());
                    c.extend([ext(r.value), format!("{:?}", r.status), num(r.residual)]);
                    line(c);
                }
            }
            JobOutput::Prox { rows, .. } => {
                let n = rows.first().map_or(0, |r| r.x.dim());
                line([indexed("x", n), indexed("p", n)].concat());
                for r in rows {
                    line([floats(r.x.as_slice()), floats(r.prox.as_slice())].concat());
                }
            }
            JobOutput::Envelope { rows, .. } => {
                let n = rows.first().map_or(0, |r| r.x.dim());
                line([indexed("x", n), vec!["rho".into(), "value".into()]].concat());
                for r in rows {
                    line([floats(r.x.as_slice()), vec![num(r.rho), num(r.value)]].concat());
                }
            }
            JobOutput::Sweep { sweeps } => {
                let n = sweeps.first().map_or(0, |s| s.x.dim());
                let flags = ["composition_monotone", "cocomposition_monotone"].map(String::from);
                line([indexed("x", n), vec!["gamma".into(), "composition".into(), "cocomposition".into()], flags.to_vec()].concat());
                for s in sweeps {
                    for r in &s.sweep.rows {
                        let mut c = floats(s.x.as_slice());
                        c.extend([num(r.gamma), ext(r.composition), ext(r.cocomposition)]);
                        c.extend([flag(s.sweep.composition_monotone), flag(s.sweep.cocomposition_monotone)]);
                        line(c);
                    }
                }
            }
            JobOutput::Figure(f) => {
                line(["x1", "x2", "gamma", "composition", "cocomposition"].map(String::from).to_vec());
                for r in &f.rows {
                    line(vec![num(r.x1), num(r.x2), num(r.gamma), ext(r.composition), ext(r.cocomposition)]);
                }
            }
            JobOutput::Argmin { report, .. } => {
                let n = report.argpoint.as_ref().map_or(0, Vector::dim);
                line([vec!["value".into()], indexed("x", n), vec!["status".into(), "iterations".into()]].concat());
                let mut c = vec![ext(report.value)];
                c.extend(report.argpoint.as_ref().map_or_else(Vec::new, |p| floats(p.as_slice())));
                c.extend([format!("{:?}", report.status), report.iterations.to_string()]);
                line(c);
            }
            JobOutput::Verify(b) => {
                line(["suite_id", "passed", "failed", "all_pass", "digest"].map(String::from).to_vec());
                for r in &b.reports {
                    line(vec![r.suite_id.clone(), r.passed.to_string(), r.failed.to_string(), flag(r.all_pass), r.digest.clone()]);
                }
            }
        }
        out
    }
}

fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Seventeen significant digits, dot decimal, independent of locale.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn ext(v: ExtReal) -> String {
    num(v.to_f64())
}

fn floats(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| num(*x)).collect()
}

fn flag(b: bool) -> String {
    if b { "OK" } else { "VIOLATED" }.into()
}

/// `g(Lx)` and `(L ⊙γ g)(x)` over a square grid for every `γ`.
///
/// Fails with [`Error::UnsupportedDimension`] unless the domain is 2-D.
pub fn figure_grid<G: ProxFunction>(
    l: &DenseMap,
    g: &G,
    gammas: &[f64],
    grid: GridSpec,
    opts: &SolverOpts,
    exec: Execution,
) -> crate::Result<FigureData> {
    if l.cols() != 2 {
        return Err(Error::UnsupportedDimension(l.cols()));
    }
    let specs = gammas.iter().map(|&gm| CompositionSpec::new(l.clone(), g, gm)).collect::<crate::Result<Vec<_>>>()?;
    let n = grid.steps;
    let cells = exec.try_map(n * n, |k| -> crate::Result<(Vec<ExtReal>, ExtReal, f64)> {
        let x = Vector::from(vec![grid.point(k / n), grid.point(k % n)]);
        let comp = g.eval(&l.apply(&x)?)?;
        let mut coco = Vec::with_capacity(specs.len());
        let mut gap = 0.0f64;
        for s in &specs {
            let r = eval_cocomposition(s, &x, opts)?;
            gap = gap.max(r.gap.unwrap_or(r.residual));
            coco.push(r.value);
        }
        Ok((coco, comp, gap))
    })?;
    let slack = INEQUALITY_SLACK + cells.iter().map(|c| c.2).fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..gammas.len()).collect();
    order.sort_by(|&a, &b| gammas[a].total_cmp(&gammas[b]));
    let below = cells.iter().all(|(coco, comp, _)| coco.iter().all(|v| v.to_f64() <= comp.to_f64() + slack));
    let monotone = cells.iter().all(|(coco, _, _)| {
        order.windows(2).all(|w| coco[w[1]].to_f64() <= coco[w[0]].to_f64() + slack)
    });
    let mut rows = Vec::with_capacity(gammas.len() * n * n);
    for (j, &gm) in gammas.iter().enumerate() {
        for (k, (coco, comp, _)) in cells.iter().enumerate() {
            rows.push(FigureRow { x1: grid.point(k / n), x2: grid.point(k % n), gamma: gm, composition: *comp, cocomposition: coco[j] });
        }
    }
    Ok(FigureData { grid, gammas: gammas.to_vec(), rows, below_composition: below, monotone_in_gamma: monotone, slack })
}

fn solve_row(x: &Vector, r: SolveReport, discrepancy: Option<f64>) -> EvalRow {
    EvalRow { x: x.clone(), value: r.value, status: r.status, residual: r.residual, gap: r.gap, discrepancy }
}

pub fn cmd_eval(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    validate(cfg)?;
    let t = cfg.target.as_ref().expect("validated");
    let o = &cfg.solver;
    let rows = cfg.execution.try_map(cfg.points.len(), |i| -> crate::Result<EvalRow> {
        let x = &cfg.points[i];
        Ok(match t {
            Target::Function(f) => solve_row(x, SolveReport::exact(f.eval(x)?, None), None),
            Target::Composition(s) => solve_row(x, eval_composition(s, x, o)?, None),
            Target::Cocomposition(s) => solve_row(x, eval_cocomposition(s, x, o)?, None),
            Target::Mixture(m) => {
                let r = mixture_eval(m, x, o)?;
                let d = r.discrepancy();
                solve_row(x, r.direct_sum, Some(d))
            }
            Target::Comixture(m) => {
                let r = comixture_eval(m, x, o)?;
                let d = r.discrepancy();
                solve_row(x, r.direct_sum, Some(d))
            }
        })
    })?;
    Ok(JobOutput::Eval { kind: t.kind().into(), rows })
}

pub fn cmd_prox(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    validate(cfg)?;
    let t = cfg.target.as_ref().expect("validated");
    let rows = cfg.execution.try_map(cfg.points.len(), |i| -> crate::Result<ProxRow> {
        let x = &cfg.points[i];
        let prox = match t {
            Target::Function(f) => f.prox(cfg.gamma.expect("validated"), x)?,
            Target::Composition(s) => prox_composition(s, x)?,
            Target::Cocomposition(s) => prox_cocomposition(s, x)?,
            Target::Mixture(m) => mixture_prox(m, x)?,
            Target::Comixture(m) => comixture_prox(m, x)?,
        };
        Ok(ProxRow { x: x.clone(), prox })
    })?;
    Ok(JobOutput::Prox { kind: t.kind().into(), rows })
}

fn same_parameter(rho: f64, gamma: f64) -> Result<(), ConfigError> {
    if (rho - gamma).abs() <= 1e-12 * gamma {
        Ok(())
    } else {
        Err(ConfigError::at("rho", format!("this target's envelope is available only at rho = gamma = {gamma}")))
    }
}

pub fn cmd_envelope(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    validate(cfg)?;
    let t = cfg.target.as_ref().expect("validated");
    let rho = cfg.rho.expect("validated");
    match t {
        Target::Composition(s) => same_parameter(rho, s.gamma())?,
        Target::Mixture(m) | Target::Comixture(m) => same_parameter(rho, m.gamma())?,
        _ => {}
    }
    let o = &cfg.solver;
    let rows = cfg.execution.try_map(cfg.points.len(), |i| -> crate::Result<EnvelopeRow> {
        let x = &cfg.points[i];
        let value = match t {
            Target::Function(f) => envelope(f, rho, x)?,
            Target::Composition(s) => envelope(&CompositionFn { spec: s.clone(), opts: *o }, rho, x)?,
            Target::Cocomposition(s) => envelope_cocomposition(s, rho, x, o)?,
            Target::Mixture(m) => {
                let e = m.embedded_spec()?;
                envelope(&CompositionFn { spec: e, opts: *o }, rho, x)?
            }
            Target::Comixture(m) => comixture_envelope(m, x)?,
        };
        Ok(EnvelopeRow { x: x.clone(), rho, value })
    })?;
    Ok(JobOutput::Envelope { kind: t.kind().into(), rows })
}

/// The slack of the sweep monotonicity flags.
pub const SWEEP_SLACK: f64 = 1e-7;

pub fn cmd_sweep(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    validate(cfg)?;
    let (Some(Target::Composition(s)) | Some(Target::Cocomposition(s))) = &cfg.target else { unreachable!("validated") };
    let sweeps = cfg
        .points
        .iter()
        .map(|x| -> crate::Result<PointSweep> {
            let sweep = gamma_sweep(s.l(), s.g(), x, &cfg.gammas, &cfg.solver, SWEEP_SLACK, cfg.execution)?;
            Ok(PointSweep { x: x.clone(), sweep })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(JobOutput::Sweep { sweeps })
}

pub fn cmd_figure(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    validate(cfg)?;
    let grid = cfg.grid.unwrap_or_default();
    let data = match (&cfg.preset, &cfg.target) {
        (Some(p), _) => figure_grid(&p.operator(), &p.function(), &cfg.gammas, grid, &cfg.solver, cfg.execution)?,
        (None, Some(Target::Composition(s) | Target::Cocomposition(s))) => {
            figure_grid(s.l(), s.g(), &cfg.gammas, grid, &cfg.solver, cfg.execution)?
        }
        _ => unreachable!("validated"),
    };
    Ok(JobOutput::Figure(data))
}

pub fn cmd_argmin(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    validate(cfg)?;
    let t = cfg.target.as_ref().expect("validated");
    let o = &cfg.solver;
    let report = match t {
        Target::Function(f) => {
            let r = global_infimum(f, o)?;
            let value = if r.value == f64::NEG_INFINITY {
                return Err(CliError::Numerical("the function is unbounded below".into()));
            } else {
                ExtReal::from_f64(r.value)?
            };
            SolveReport { value, argpoint: r.point, iterations: r.iterations, status: r.status, residual: 0.0, gap: None }
        }
        Target::Cocomposition(s) => argmin_cocomposition(s, o)?,
        Target::Comixture(m) => comixture_argmin(m, o)?,
        _ => unreachable!("validated"),
    };
    Ok(JobOutput::Argmin { kind: t.kind().into(), report })
}

pub fn cmd_verify(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    validate(cfg)?;
    let scale = cfg.scale.unwrap_or(Scale::Default).params();
    let bundle = if cfg.suites.is_empty() || cfg.suites.iter().any(|s| s == "all") {
        verify::run_all(cfg.seed, scale, cfg.execution)?
    } else {
        verify::run_suites(&cfg.suites, cfg.seed, scale, cfg.execution)?
    };
    Ok(JobOutput::Verify(bundle))
}

pub fn run(cfg: &JobConfig) -> Result<JobOutput, CliError> {
    match cfg.command {
        Command::Eval => cmd_eval(cfg),
        Command::Prox => cmd_prox(cfg),
        Command::Envelope => cmd_envelope(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Figure => cmd_figure(cfg),
        Command::Argmin => cmd_argmin(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

/// Writes the output where the job asks for it.
pub fn write_output(out: &JobOutput, spec: &OutputSpec) -> Result<(), CliError> {
    let text = match spec.format {
        Format::Csv => out.to_csv(),
        Format::Json => out.to_json() + "\n",
    };
    match &spec.path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// An example job for each command, as published in the README.
pub fn example_config(command: Command) -> JobConfig {
    let half_abs = || CompositionSpec::new(DenseMap::scalar(0.5), ConvexFunction::abs(), 1.0).expect("example spec");
    let mut cfg = JobConfig::new(command);
    match command {
        Command::Eval => {
            cfg.target = Some(Target::Cocomposition(half_abs()));
            cfg.points = vec![Vector::scalar(1.0)];
        }
        Command::Prox => {
            cfg.target = Some(Target::Composition(half_abs()));
            cfg.points = vec![Vector::scalar(4.0)];
        }
        Command::Envelope => {
            cfg.target = Some(Target::Function(ConvexFunction::eucl_norm(2)));
            cfg.points = vec![Vector::from(vec![3.0, 4.0])];
            cfg.rho = Some(1.0);
        }
        Command::Sweep => {
            cfg.target = Some(Target::Cocomposition(half_abs()));
            cfg.points = vec![Vector::scalar(1.0)];
            cfg.gammas = vec![0.25, 0.5, 1.0, 2.0, 4.0];
        }
        Command::Figure => {
            cfg.preset = Some(Preset::Example1);
            cfg.gammas = vec![0.5, 2.0, 8.0];
            cfg.grid = Some(GridSpec::default());
            cfg.output.format = Format::Csv;
        }
        Command::Argmin => {
            let g = ConvexFunction::eucl_norm(1).translate(Vector::scalar(1.0)).expect("example function");
            let spec = CompositionSpec::new(DenseMap::scalar(0.5), g, 1.0).expect("example spec");
            cfg.target = Some(Target::Cocomposition(spec));
        }
        Command::Verify => {
            cfg.suites = vec!["all".into()];
            cfg.scale = Some(Scale::Default);
            cfg.seed = 7;
        }
    }
    cfg
}
