//! Result-indexed property suites.
//!
//! Each suite turns one statement about compositions, cocompositions,
//! mixtures or expectations into a list of numerical cases. A case compares a
//! value computed by the library against an independently obtained one
//! (closed forms, line searches over fibres, grid scans, or a second
//! evaluation route) under an explicit relation and slack. Reports serialize
//! to JSON and are deterministic given `(suite id, seed, scale)`.
//!
//! Random operators are rescaled to `‖L‖ ≤ 0.95`; operators of norm one
//! (projectors, isometries, coisometries) are built explicitly.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::funcat::{ConvexFunction, ExtReal, ProxFunction};
use crate::linalg::{orthogonal_complement, orthonormalize, pseudo_inverse_small, DenseMap, Vector, DEFAULT_RANK_TOL};
use crate::mixture::{
    comixture_argmin, comixture_argmin_sequence, comixture_envelope, comixture_eval, comixture_prox,
    comixture_recession, embedded_proxes, mixture_eval, mixture_prox, pcm_estimate, proximal_average,
    sampled_expectation_prox, weighted_sum, ExpectationReport, MixtureSpec, MixtureTerm,
};
use crate::moreau::{
    conjugate_numeric, envelope, envelope_gradient, golden_section, grid_oracle, EnvelopeFn, Grid, GridOutcome,
    GridProblem, SolveReport, SolveStatus, SolverOpts,
};
use crate::proxcomp::{
    argmin_cocomposition, cocomposition_limit, envelope_cocomposition, eval_cocomposition, eval_composition,
    gamma_sweep, gradient_cocomposition, limit_small_gamma, minimizer_convergence, perspective_cocomposition,
    prox_cocomposition, prox_composition, recession_cocomposition, subgradient_witness_cocomposition,
    subgradient_witness_composition, CocompositionFn, CompositionFn, CompositionSpec, LargeGammaCase,
};

/// One-sided slack of inequality suites, on top of solver-reported errors.
pub const INEQUALITY_SLACK: f64 = 1e-6;

/// Named problem-size presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Small,
    Default,
    Large,
}

impl Scale {
    pub fn params(self) -> ScaleParams {
        match self {
            Scale::Small => ScaleParams { dims: 2, n_points: 20, grid_steps: 501 },
            Scale::Default => ScaleParams { dims: 2, n_points: 100, grid_steps: 2001 },
            Scale::Large => ScaleParams { dims: 2, n_points: 300, grid_steps: 2001 },
        }
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Scale::Small),
            "default" => Ok(Scale::Default),
            "large" => Ok(Scale::Large),
            other => Err(Error::Config(format!("unknown scale `{other}` (expected small, default or large)"))),
        }
    }
}

/// Problem sizes of a run: largest random dimension, cases per suite and
/// fine-grid resolution (cells per unit half-width).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleParams {
    pub dims: usize,
    pub n_points: usize,
    pub grid_steps: usize,
}

impl Default for ScaleParams {
    fn default() -> Self {
        Scale::Default.params()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|got − expected| ≤ slack`
    Equal,
    /// `got ≤ expected + slack`
    AtMost,
    /// `got ≥ expected − slack`
    AtLeast,
}

impl Relation {
    pub fn holds(self, expected: f64, got: f64, slack: f64) -> bool {
        match self {
            Relation::Equal => {
                if expected.is_infinite() || got.is_infinite() {
                    expected == got
                } else {
                    (got - expected).abs() <= slack
                }
            }
            Relation::AtMost => got <= expected + slack || (got.is_infinite() && got == expected),
            Relation::AtLeast => got >= expected - slack || (got.is_infinite() && got == expected),
        }
    }
}

fn ser_num<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("+inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseRecord {
    pub label: String,
    /// SHA-256 of the label and the JSON-encoded inputs
    pub digest: String,
    pub relation: Relation,
    #[serde(serialize_with = "ser_num")]
    pub expected: f64,
    #[serde(serialize_with = "ser_num")]
    pub got: f64,
    #[serde(serialize_with = "ser_num")]
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite_id: String,
    pub title: String,
    pub seed: u64,
    pub scale: ScaleParams,
    pub cases: Vec<CaseRecord>,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
    pub elapsed_ms: u128,
    /// SHA-256 over everything except the timing
    pub digest: String,
}

/// The reports of several suites.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportBundle {
    pub seed: u64,
    pub scale: ScaleParams,
    pub all_pass: bool,
    pub reports: Vec<SuiteReport>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

fn case(label: impl Into<String>, inputs: &Value, relation: Relation, expected: f64, got: f64, slack: f64) -> CaseRecord {
    let label = label.into();
    let digest = sha256_hex(format!("{label}\n{inputs}").as_bytes());
    let pass = relation.holds(expected, got, slack);
    CaseRecord { label, digest, relation, expected, got, slack, pass }
}

fn equal(label: impl Into<String>, inputs: &Value, expected: f64, got: f64, slack: f64) -> CaseRecord {
    case(label, inputs, Relation::Equal, expected, got, slack)
}

fn at_most(label: impl Into<String>, inputs: &Value, bound: f64, got: f64, slack: f64) -> CaseRecord {
    case(label, inputs, Relation::AtMost, bound, got, slack)
}

fn at_least(label: impl Into<String>, inputs: &Value, bound: f64, got: f64, slack: f64) -> CaseRecord {
    case(label, inputs, Relation::AtLeast, bound, got, slack)
}

fn holds(label: impl Into<String>, inputs: &Value, ok: bool) -> CaseRecord {
    equal(label, inputs, 1.0, if ok { 1.0 } else { 0.0 }, 0.0)
}

/// Value of a solve and the error to allow for it: the certified gap when
/// there is one, the final residual otherwise, NaN (failing every relation)
/// when the iteration budget ran out.
fn solved(r: &SolveReport) -> (f64, f64) {
    let err = match r.status {
        SolveStatus::Diverged => 0.0,
        SolveStatus::MaxIter => f64::NAN,
        SolveStatus::Converged => r.gap.unwrap_or(r.residual).max(0.0),
    };
    (r.to_f64(), err)
}

/// Execution context handed to each suite.
pub struct Ctx {
    pub id: &'static str,
    pub seed: u64,
    pub scale: ScaleParams,
    pub exec: Execution,
}

impl Ctx {
    fn n(&self) -> usize {
        self.scale.n_points.max(1)
    }

    fn max_dim(&self) -> usize {
        self.scale.dims.clamp(1, 2)
    }

    /// Independent stream for case `i`.
    fn rng(&self, i: usize) -> ChaCha8Rng {
        let h = Sha256::digest(format!("{}:{}:{}", self.seed, self.id, i).as_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&h);
        ChaCha8Rng::from_seed(seed)
    }

    /// Runs `n` cases under the context's execution strategy and merges the
    /// records in case order. A case that errors becomes a failing record.
    fn cases<F>(&self, n: usize, f: F) -> Vec<CaseRecord>
    where
        F: Fn(usize, &mut ChaCha8Rng) -> Result<Vec<CaseRecord>> + Sync + Send,
    {
        self.exec
            .map(n, |i| {
                let mut rng = self.rng(i);
                f(i, &mut rng).unwrap_or_else(|e| {
                    let inputs = json!({ "case": i });
                    vec![equal(format!("case {i} raised: {e}"), &inputs, 0.0, f64::NAN, 0.0)]
                })
            })
            .into_iter()
            .flatten()
            .collect()
    }
}

type SuiteFn = fn(&Ctx) -> Result<Vec<CaseRecord>>;

pub struct SuiteInfo {
    pub id: &'static str,
    pub title: &'static str,
    run: SuiteFn,
}

impl std::fmt::Debug for SuiteInfo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SuiteInfo").field("id", &self.id).field("title", &self.title).finish()
    }
}

pub fn registry() -> &'static [SuiteInfo] {
    REGISTRY
}

pub fn suite_ids() -> Vec<&'static str> {
    REGISTRY.iter().map(|s| s.id).collect()
}

pub fn run_suite(id: &str, seed: u64, scale: ScaleParams, exec: Execution) -> Result<SuiteReport> {
    let info = REGISTRY.iter().find(|s| s.id == id).ok_or_else(|| Error::Registry(id.to_string()))?;
    let ctx = Ctx { id: info.id, seed, scale, exec };
    let start = Instant::now();
    let cases = (info.run)(&ctx)?;
    let elapsed_ms = start.elapsed().as_millis();
    let passed = cases.iter().filter(|c| c.pass).count();
    let failed = cases.len() - passed;
    let digest = {
        let body = json!({ "suite_id": info.id, "seed": seed, "scale": scale, "cases": cases });
        sha256_hex(body.to_string().as_bytes())
    };
    Ok(SuiteReport {
        suite_id: info.id.to_string(),
        title: info.title.to_string(),
        seed,
        scale,
        passed,
        failed,
        all_pass: failed == 0 && passed > 0,
        cases,
        elapsed_ms,
        digest,
    })
}

/// Runs the given suites (`["all"]` or an empty list means every suite).
pub fn run_suites(ids: &[String], seed: u64, scale: ScaleParams, exec: Execution) -> Result<ReportBundle> {
    let selected: Vec<String> = if ids.is_empty() || ids.iter().any(|s| s == "all") {
        suite_ids().into_iter().map(String::from).collect()
    } else {
        ids.to_vec()
    };
    let reports = selected.iter().map(|id| run_suite(id, seed, scale, exec)).collect::<Result<Vec<_>>>()?;
    Ok(ReportBundle { seed, scale, all_pass: reports.iter().all(|r| r.all_pass), reports })
}

pub fn run_all(seed: u64, scale: ScaleParams, exec: Execution) -> Result<ReportBundle> {
    run_suites(&[], seed, scale, exec)
}

/// Plain-text summary, one line per suite.
pub fn summary_table(reports: &[SuiteReport]) -> String {
    let mut out = format!("{:<14} {:>7} {:>7} {:>10}  {}\n", "suite", "passed", "failed", "ms", "title");
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14} {:>7} {:>7} {:>10}  {}{}",
            r.suite_id,
            r.passed,
            r.failed,
            r.elapsed_ms,
            r.title,
            if r.all_pass { "" } else { "  [FAIL]" }
        );
    }
    out
}

// ---------------------------------------------------------------------------
// generators

fn sv(v: f64) -> Vector {
    Vector::scalar(v)
}

fn unif(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn rvec(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Vector {
    (0..dim).map(|_| rng.random_range(-r..r)).collect()
}

fn rdim(rng: &mut ChaCha8Rng, max: usize) -> usize {
    rng.random_range(1..=max)
}

/// Random `rows × cols` map `U diag(s) V` with spectral norm drawn from
/// `[lo, hi]` and the other singular values within a factor four of it.
fn rmap(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Result<DenseMap> {
    let k = rows.min(cols);
    let u = isometry(rng, rows, k)?;
    let v = coisometry(rng, k, cols)?;
    let top = if hi > lo { unif(rng, lo, hi) } else { lo };
    let s: Vec<f64> = (0..k).map(|i| if i == 0 { top } else { top * unif(rng, 0.25, 1.0) }).collect();
    u.compose(&DenseMap::diag(&s))?.compose(&v)
}

fn orthonormal_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<Vec<Vector>> {
    loop {
        let vs: Vec<Vector> = (0..rows).map(|_| rvec(rng, cols, 1.0)).collect();
        if let Ok(b) = orthonormalize(&vs) {
            return Ok(b);
        }
    }
}

/// `L` with `LL* = Id` (`rows ≤ cols`).
fn coisometry(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<DenseMap> {
    let b = orthonormal_rows(rng, rows, cols)?;
    DenseMap::from_rows(&b.iter().map(|v| v.as_slice().to_vec()).collect::<Vec<_>>())
}

/// `L` with `L*L = Id` (`rows ≥ cols`).
fn isometry(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<DenseMap> {
    Ok(coisometry(rng, cols, rows)?.transpose())
}

/// Orthogonal projector onto a random line of `R^dim`.
fn line_projector(rng: &mut ChaCha8Rng, dim: usize) -> Result<(DenseMap, Vec<Vector>)> {
    let b = orthonormal_rows(rng, 1, dim)?;
    Ok((DenseMap::projector(dim, &b), b))
}

fn lipschitz_atom(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> Result<ConvexFunction> {
    let c = rvec(rng, dim, 0.5);
    let r = unif(rng, 0.2, 1.0);
    Ok(match k {
        0 => ConvexFunction::eucl_norm(dim),
        1 => ConvexFunction::eucl_norm(dim).translate(c)?,
        2 => ConvexFunction::l1_norm(dim).translate(c)?,
        3 => ConvexFunction::dist_ball(c, r)?,
        4 => ConvexFunction::eucl_norm(dim).scale_val(unif(rng, 0.5, 1.5))?.translate(c)?,
        _ => ConvexFunction::support_ball(c, r)?,
    })
}

fn lipschitz_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    let k = rng.random_range(0..6);
    lipschitz_atom(rng, dim, k)
}

/// Lipschitz and nonnegative.
fn nonneg_lipschitz_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    let k = rng.random_range(0..5);
    lipschitz_atom(rng, dim, k)
}

/// `lipschitz_fn` rescaled to Lipschitz constant one.
fn unit_lipschitz_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    let f = lipschitz_fn(rng, dim)?;
    let beta = f.lipschitz_bound().expect("Lipschitz family");
    f.scale_val(1.0 / beta)
}

fn psd(rng: &mut ChaCha8Rng, dim: usize, floor: f64) -> Result<DenseMap> {
    let m = DenseMap::new(dim, dim, (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let a = m.compose(&m.transpose())?;
    let d = DenseMap::identity(dim).scale(floor);
    let data: Vec<f64> = (0..dim * dim).map(|k| a.get(k / dim, k % dim) + d.get(k / dim, k % dim)).collect();
    DenseMap::new(dim, dim, data)
}

fn smooth_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    let c = rvec(rng, dim, 0.5);
    Ok(match rng.random_range(0..4) {
        0 => ConvexFunction::quadratic(dim).translate(c)?,
        1 => ConvexFunction::quad_form(psd(rng, dim, 0.1)?)?.translate(c)?,
        2 => ConvexFunction::eucl_norm(dim).add_quad(unif(rng, 0.2, 1.5))?.translate(c)?,
        _ => ConvexFunction::affine(rvec(rng, dim, 1.0), unif(rng, -1.0, 1.0))?,
    })
}

fn full_domain_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    if rng.random_bool(0.6) {
        lipschitz_fn(rng, dim)
    } else {
        smooth_fn(rng, dim)
    }
}

/// Functions with a proper domain.
fn constrained_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    let c = rvec(rng, dim, 0.5);
    if dim == 2 && rng.random_bool(0.3) {
        return ConvexFunction::indicator_subspace(2, &[rvec(rng, 2, 1.0)]);
    }
    match rng.random_range(0..2) {
        0 => ConvexFunction::indicator_ball(c, unif(rng, 0.5, 1.5)),
        _ => ConvexFunction::indicator_ball(c, unif(rng, 0.5, 1.5))?.add_affine(rvec(rng, dim, 1.0), 0.0),
    }
}

fn any_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    if rng.random_bool(0.25) {
        constrained_fn(rng, dim)
    } else {
        full_domain_fn(rng, dim)
    }
}

/// Bounded below with nonempty minimizers and a small offset from the origin.
fn coercive_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    let c = rvec(rng, dim, 0.3);
    Ok(match rng.random_range(0..5) {
        0 => ConvexFunction::eucl_norm(dim).translate(c)?,
        1 => ConvexFunction::l1_norm(dim).translate(c)?,
        2 => ConvexFunction::quadratic(dim).translate(c)?,
        3 => ConvexFunction::quad_form(psd(rng, dim, 0.2)?)?.translate(c)?,
        _ => ConvexFunction::dist_ball(c, unif(rng, 0.1, 0.5))?,
    })
}

/// Full-domain functions whose conjugate is in the catalog.
fn conjugable_fn(rng: &mut ChaCha8Rng, dim: usize) -> Result<ConvexFunction> {
    for _ in 0..64 {
        let f = full_domain_fn(rng, dim)?;
        if f.conjugate_function().is_some() {
            return Ok(f);
        }
    }
    ConvexFunction::quadratic(dim).translate(rvec(rng, dim, 0.5))
}

fn gamma_draw(rng: &mut ChaCha8Rng, lo_exp: f64, hi_exp: f64) -> f64 {
    2f64.powf(unif(rng, lo_exp, hi_exp))
}

fn spec<G: ProxFunction>(l: &DenseMap, g: G, gamma: f64) -> Result<CompositionSpec<G>> {
    CompositionSpec::new(l.clone(), g, gamma)
}

fn opts() -> SolverOpts {
    SolverOpts::default()
}

fn tight() -> SolverOpts {
    SolverOpts::default().with_tol(1e-11).with_max_iter(400_000)
}

trait OptsExt {
    fn with_max_iter(self, n: usize) -> Self;
}

impl OptsExt for SolverOpts {
    fn with_max_iter(self, n: usize) -> Self {
        SolverOpts { max_iter: n, ..self }
    }
}

// ---------------------------------------------------------------------------
// independent oracles

/// `Φ(y) = (‖y‖² − ‖L*y‖²)/2`
fn phi(l: &DenseMap, y: &Vector) -> Result<f64> {
    Ok(0.5 * (y.norm_sq() - l.adjoint_apply(y)?.norm_sq()))
}

/// Scan-then-golden minimization of a convex extended-valued function of one
/// variable over `[lo, hi]`; returns `(t, value)`, value `+∞` when the scan
/// finds no finite point.
fn line_min(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, scan: usize) -> Result<(f64, f64)> {
    line_min_with(f, lo, hi, scan, None)
}

/// [`line_min`] that also tries `extra`, a point known to be feasible.
fn line_min_with(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, scan: usize, extra: Option<f64>) -> Result<(f64, f64)> {
    let h = (hi - lo) / scan as f64;
    let mut best: Option<(f64, f64)> = None;
    for t in (0..=scan).map(|k| lo + k as f64 * h).chain(extra) {
        let v = f(t)?;
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((t, v));
        }
    }
    let Some((t0, v0)) = best else {
        return Ok((f64::NAN, f64::INFINITY));
    };
    let (t, v) = golden_section(&f, t0 - h, t0 + h, 1e-11 * (1.0 + t0.abs()))?;
    Ok(if v <= v0 { (t, v) } else { (t0, v0) })
}

const FIBRE_HALF_WIDTH: f64 = 30.0;

/// `inf { h(y) : L*y = x }` for fibres of dimension at most one: direct
/// evaluation at the unique preimage, or a line search along the kernel of
/// `L*`. Returns the value and the minimizer.
fn fibre_min(l: &DenseMap, h: &dyn Fn(&Vector) -> Result<f64>, x: &Vector) -> Result<(f64, Option<Vector>)> {
    fibre_min_through(l, h, x, None)
}

/// [`fibre_min`] that also tries `anchor`, a point of the fibre.
fn fibre_min_through(
    l: &DenseMap,
    h: &dyn Fn(&Vector) -> Result<f64>,
    x: &Vector,
    anchor: Option<&Vector>,
) -> Result<(f64, Option<Vector>)> {
    let gram = pseudo_inverse_small(&l.gram(), DEFAULT_RANK_TOL)?;
    let y0 = l.apply(&gram.apply(x)?)?;
    if l.adjoint_apply(&y0)?.dist(x) > 1e-9 * (1.0 + x.norm()) {
        return Ok((f64::INFINITY, None));
    }
    let range = pseudo_inverse_small(&l.cogram(), DEFAULT_RANK_TOL)?.range_basis;
    let kernel = orthogonal_complement(l.rows(), &range);
    match kernel.as_slice() {
        [] => Ok((h(&y0)?, Some(y0))),
        [n] => {
            let extra = anchor.map(|a| n.dot(&(a - &y0)));
            let (t, v) = line_min_with(|t| h(&y0.axpy(t, n)), -FIBRE_HALF_WIDTH, FIBRE_HALF_WIDTH, 4000, extra)?;
            Ok((v, v.is_finite().then(|| y0.axpy(t, n))))
        }
        more => Err(Error::UnsupportedDimension(more.len())),
    }
}

/// `L ⊘γ g` at `x` as `inf { g(y) + Φ(y)/γ : L*y = x }`.
fn composition_oracle(l: &DenseMap, g: &ConvexFunction, gamma: f64, x: &Vector) -> Result<(f64, Option<Vector>)> {
    let h = |y: &Vector| -> Result<f64> { Ok(g.eval(y)?.to_f64() + phi(l, y)? / gamma) };
    fibre_min(l, &h, x)
}

/// `L*▷g` at `x`.
fn postcomposition_oracle(l: &DenseMap, g: &ConvexFunction, x: &Vector) -> Result<(f64, Option<Vector>)> {
    let h = |y: &Vector| -> Result<f64> { Ok(g.eval(y)?.to_f64()) };
    fibre_min(l, &h, x)
}

/// `L ⊙γ g` at `x` for single-row `L`: there `Φ = (1 − ‖L‖²)Q`, so the
/// cocomposition is `env_{γ(1−‖L‖²)} g(Lx)` (and `g(Lx)` when `‖L‖ = 1`).
fn cocomposition_row_oracle(l: &DenseMap, g: &ConvexFunction, gamma: f64, x: &Vector) -> Result<f64> {
    assert_eq!(l.rows(), 1);
    let lx = l.apply(x)?;
    let mu = gamma * (1.0 - l.row(0).iter().map(|v| v * v).sum::<f64>());
    if mu <= 1e-14 * gamma {
        return Ok(g.eval(&lx)?.to_f64());
    }
    envelope(g, mu, &lx)
}

/// `env_ρ F(x)` for a function of one variable, by line search.
fn envelope_1d(f: impl Fn(f64) -> Result<f64>, rho: f64, x: f64, half_width: f64) -> Result<f64> {
    let q = |y: f64| -> Result<f64> { Ok(f(y)? + (x - y).powi(2) / (2.0 * rho)) };
    Ok(line_min(q, x - half_width, x + half_width, 48)?.1)
}

/// Two-level grid search: a coarse pass over `[lo, hi]`, then `steps` cells
/// on `[c − 1, c + 1]` around the coarse optimum. Returns the fine outcome.
fn two_level(problem: impl Fn(&Grid) -> Result<GridOutcome>, lo: f64, hi: f64, steps: usize) -> Result<(GridOutcome, f64)> {
    let coarse = problem(&Grid::new(lo, hi, 2001)?)?;
    let c = coarse.point.as_ref().ok_or_else(|| Error::param("grid oracle found no feasible point"))?[0];
    let out = problem(&Grid::around(c, 1.0, steps)?)?;
    let p = out.point.as_ref().ok_or_else(|| Error::param("grid oracle found no feasible point"))?[0];
    Ok((out, p))
}

/// Local slope of a scalar function at `t` over one grid step, used as the
/// error bound of a grid optimum.
fn local_slope(f: impl Fn(f64) -> Result<f64>, t: f64, h: f64) -> Result<f64> {
    let v = f(t)?;
    let mut k = 0.0f64;
    for s in [t - h, t + h] {
        let w = f(s)?;
        if w.is_finite() && v.is_finite() {
            k = k.max((w - v).abs() / h);
        }
    }
    Ok(k)
}

/// Grid value of the scalar cocomposition as `sup_y ⟨lx, y⟩ − g*(y) − γΦ(y)`.
fn grid_cocomposition_1d(l: f64, g: &ConvexFunction, gamma: f64, x: f64, steps: usize) -> Result<(f64, f64)> {
    let f = |y: &Vector| -> Result<ExtReal> {
        Ok(g.conjugate_eval_closed(y)? + 0.5 * gamma * (1.0 - l * l) * y.norm_sq())
    };
    let xstar = sv(l * x);
    let (out, p) = two_level(|grid| grid_oracle(&GridProblem::Conjugate { f: &f, xstar: &xstar }, grid, None), -6.0, 6.0, steps)?;
    let obj = |t: f64| -> Result<f64> { Ok(l * x * t - f(&sv(t))?.to_f64()) };
    let bound = local_slope(obj, p, out.step)? * out.step + 1e-12;
    Ok((out.value.to_f64(), bound))
}

/// Grid value of the scalar composition through its defining conjugate form
/// `sup_z ⟨z, x⟩ − env_{1/γ}(g*)(lz) − x²/(2γ)`.
fn grid_composition_1d(l: f64, g: &ConvexFunction, gamma: f64, x: f64, steps: usize) -> Result<(f64, f64)> {
    let gs = g.conjugate_function().ok_or_else(|| Error::UnsupportedConjugate(g.describe()))?;
    let f = |z: &Vector| -> Result<ExtReal> { Ok(ExtReal::Finite(envelope(&gs, 1.0 / gamma, &sv(l * z[0]))?)) };
    let xv = sv(x);
    let (out, p) = two_level(|grid| grid_oracle(&GridProblem::Conjugate { f: &f, xstar: &xv }, grid, None), -8.0, 8.0, steps)?;
    let obj = |t: f64| -> Result<f64> { Ok(x * t - f(&sv(t))?.to_f64()) };
    let bound = local_slope(obj, p, out.step)? * out.step + 1e-12;
    Ok((out.value.to_f64() - x * x / (2.0 * gamma), bound))
}

/// Minimizer of `F(y) + (x − y)²/(2γ)` on a two-level grid of fine step
/// `2/steps`.
fn grid_prox_1d(f: &(dyn Fn(f64) -> Result<f64> + Sync), gamma: f64, x: f64, steps: usize) -> Result<(f64, f64)> {
    let fv = |y: &Vector| -> Result<ExtReal> {
        let v = f(y[0])?;
        Ok(if v.is_finite() { ExtReal::Finite(v) } else { ExtReal::PlusInfinity })
    };
    let xv = sv(x);
    let (out, p) = two_level(
        |grid| grid_oracle(&GridProblem::Prox { f: &fv, gamma, x: &xv }, grid, None),
        x - 8.0,
        x + 8.0,
        steps,
    )?;
    Ok((p, out.step))
}

/// `min_x F(x)` for a scalar function on nested grids.
fn grid_min_1d(f: &(dyn Fn(f64) -> Result<f64> + Sync), lo: f64, hi: f64, steps: usize) -> Result<(f64, f64, f64)> {
    let fv = |y: &Vector| -> Result<ExtReal> {
        let v = f(y[0])?;
        Ok(if v.is_finite() { ExtReal::Finite(v) } else { ExtReal::PlusInfinity })
    };
    let zero = sv(0.0);
    let problem = |grid: &Grid| grid_oracle(&GridProblem::Conjugate { f: &fv, xstar: &zero }, grid, None);
    let (mut out, mut p) = two_level(problem, lo, hi, steps)?;
    // nested passes around the optimum until the cell is tiny
    while out.step > 1e-7 {
        out = problem(&Grid::around(p, 2.0 * out.step, steps)?)?;
        p = out.point.as_ref().ok_or_else(|| Error::param("grid oracle found no feasible point"))?[0];
    }
    let bound = local_slope(f, p, out.step)? * out.step + 1e-12;
    Ok((-out.value.to_f64(), p, bound))
}

fn inputs_lg(l: &DenseMap, g: &ConvexFunction, gamma: f64, x: &Vector) -> Value {
    json!({ "L": l, "g": g, "gamma": gamma, "x": x })
}

/// `|g(tLx) − t·rec g(Lx)|`, the offset controlling the recession quotient.
fn recession_offset(g: &ConvexFunction, ltx: &Vector, t: f64, rec: f64) -> Result<f64> {
    Ok((g.eval(ltx)?.to_f64() - t * rec).abs())
}

fn val(f: &ConvexFunction, x: &Vector) -> Result<f64> {
    Ok(f.eval(x)?.to_f64())
}

/// `(L ⊙γ g)(x)` and its error.
fn coco<G: ProxFunction>(l: &DenseMap, g: G, gamma: f64, x: &Vector, o: &SolverOpts) -> Result<(f64, f64)> {
    Ok(solved(&eval_cocomposition(&spec(l, g, gamma)?, x, o)?))
}

/// `(L ⊘γ g)(x)` and its error.
fn comp<G: ProxFunction>(l: &DenseMap, g: G, gamma: f64, x: &Vector, o: &SolverOpts) -> Result<(f64, f64)> {
    Ok(solved(&eval_composition(&spec(l, g, gamma)?, x, o)?))
}

/// Slack of an equality between solver outputs.
fn eq_slack(errs: &[f64]) -> f64 {
    INEQUALITY_SLACK + errs.iter().sum::<f64>()
}

fn square_map(rng: &mut ChaCha8Rng, dim: usize) -> Result<DenseMap> {
    rmap(rng, dim, dim, 0.3, 0.95)
}

/// A map of norm one: a projector onto a line, an isometry, a coisometry or
/// an orthogonal matrix, with `cols` columns.
fn unit_map(rng: &mut ChaCha8Rng, cols: usize) -> Result<DenseMap> {
    match (cols, rng.random_range(0..4)) {
        (1, 0) => Ok(DenseMap::scalar(if rng.random_bool(0.5) { 1.0 } else { -1.0 })),
        (1, _) => isometry(rng, 2, 1),
        (_, 0) => Ok(line_projector(rng, cols)?.0),
        (_, 1) => coisometry(rng, 1, cols),
        (_, _) => isometry(rng, cols, cols),
    }
}

/// A point of `dom g`.
fn domain_point(g: &ConvexFunction, rng: &mut ChaCha8Rng) -> Result<Vector> {
    let z = rvec(rng, g.dim(), 2.0);
    g.prox(1.0, &z)
}

fn rshape(rng: &mut ChaCha8Rng, max: usize) -> (usize, usize) {
    (rdim(rng, max), rdim(rng, max))
}

mod calculus;
mod limits;
mod mixtures;

macro_rules! suite {
    ($id:literal, $title:literal, $run:path) => {
        SuiteInfo { id: $id, title: $title, run: $run }
    };
}

static REGISTRY: &[SuiteInfo] = &[
    suite!("def1", "worked values of the composition and cocomposition", calculus::def1),
    suite!("lemma2", "conjugates of scaled functions", calculus::lemma2),
    suite!("lemma3", "envelopes of scaled functions", calculus::lemma3),
    suite!("lemma8", "Moreau decomposition and envelope gradients", calculus::lemma8),
    suite!("lemma10", "conjugate of a degenerate quadratic", calculus::lemma10),
    suite!("prop1", "conjugation and scaling rules", calculus::prop1),
    suite!("prop4", "alternative forms, domains and the envelope bound", calculus::prop4),
    suite!("prop5", "perturbations and translations", calculus::prop5),
    suite!("prop6", "strong convexity transfer", calculus::prop6),
    suite!("prop7", "convexity and mutual conjugacy", calculus::prop7),
    suite!("prop9", "subdifferentials", calculus::prop9),
    suite!("prop10", "envelopes of cocompositions", calculus::prop10),
    suite!("cor-argmin", "minimizers through the envelope", calculus::cor_argmin),
    suite!("cor11", "nested operators", calculus::cor11),
    suite!("prop13", "recession function of the cocomposition", calculus::prop13),
    suite!("prop16", "perspective of the cocomposition", calculus::prop16),
    suite!("prop17", "proximity operators against grid minimizers", calculus::prop17),
    suite!("prop18", "gradient Lipschitz constants", calculus::prop18),
    suite!("cor19", "Lipschitz transfer", calculus::cor19),
    suite!("prop20", "orderings and collapses", limits::prop20),
    suite!("prop25", "gap at subgradient points", limits::prop25),
    suite!("prop30-i", "gap for unit Lipschitz functions", limits::prop30_i),
    suite!("prop30-ii", "conjugate composition sandwich", limits::prop30_ii),
    suite!("ex-comp", "compositions with scaled coisometries", limits::ex_comp),
    suite!("ex-proj", "projector onto a line with the norm", limits::ex_proj),
    suite!("ex-yama", "surjective maps with projector adjoint products", limits::ex_yama),
    suite!("thm45-i", "monotonicity in the parameter", limits::thm45_i),
    suite!("thm45-iv", "small parameter limit", limits::thm45_iv),
    suite!("thm45-vi", "large parameter limits", limits::thm45_vi),
    suite!("cor46", "isometry limits", limits::cor46),
    suite!("prop55", "convergence of infima", limits::prop55),
    suite!("prop60", "reduction of mixtures to a single operator", mixtures::prop60),
    suite!("thm65", "calculus of mixtures and comixtures", mixtures::thm65),
    suite!("thm70", "orderings of mixtures and comixtures", mixtures::thm70),
    suite!("ex12", "mixture limits in the parameter", mixtures::ex12),
    suite!("ex13", "convergence of comixture infima", mixtures::ex13),
    suite!("prop75", "averages of cocompositions", mixtures::prop75),
    suite!("prop79", "calculus of proximal averages", mixtures::prop79),
    suite!("prop80", "orderings and limits of proximal averages", mixtures::prop80),
    suite!("rem80", "proximal average through conjugate envelopes", mixtures::rem80),
    suite!("mc-expectation", "sampled proximal expectations", mixtures::mc_expectation),
];

/// Suite ids that must be registered, one or more per in-scope result.
pub const MANIFEST: &[&str] = &[
    "def1", "lemma2", "lemma3", "lemma8", "lemma10", "prop1", "prop4", "prop5", "prop6", "prop7", "prop9", "prop10",
    "cor-argmin", "cor11", "prop13", "prop16", "prop17", "prop18", "cor19", "prop20", "prop25", "prop30-i", "prop30-ii",
    "ex-comp", "ex-proj", "ex-yama", "thm45-i", "thm45-iv", "thm45-vi", "cor46", "prop55", "prop60", "thm65", "thm70",
    "ex12", "ex13", "prop75", "prop79", "prop80", "rem80", "mc-expectation",
];

/// Manifest ids without a registered suite.
pub fn missing_suites() -> Vec<&'static str> {
    MANIFEST.iter().copied().filter(|id| !REGISTRY.iter().any(|s| s.id == *id)).collect()
}
