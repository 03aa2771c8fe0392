//! Moreau envelopes, numerical conjugates and brute-force grid oracles.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::exec::Execution;
use crate::funcat::{check_gamma, ExtReal, ProxFunction};
use crate::linalg::{DenseMap, Vector};

/// Iteration controls shared by every solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOpts {
    pub tol: f64,
    pub max_iter: usize,
    pub divergence_radius: f64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts { tol: 1e-8, max_iter: 100_000, divergence_radius: 1e6 }
    }
}

impl SolverOpts {
    pub fn with_tol(self, tol: f64) -> Self {
        SolverOpts { tol, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.divergence_radius > 0.0) {
            return Err(Error::param("solver options need tol > 0, max_iter > 0, divergence_radius > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    /// The iterates escaped with a still-improving objective: the value is
    /// reported as `+∞`.
    Diverged,
    MaxIter,
}

/// Outcome of an iterative evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub value: ExtReal,
    /// The optimizer behind `value` (problem-specific; see each evaluator).
    pub argpoint: Option<Vector>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub residual: f64,
    /// Certified bound on the distance from `value` to the exact value, when
    /// the evaluator can produce one.
    pub gap: Option<f64>,
}

impl SolveReport {
    pub(crate) fn exact(value: ExtReal, argpoint: Option<Vector>) -> Self {
        SolveReport { value, argpoint, iterations: 0, status: SolveStatus::Converged, residual: 0.0, gap: Some(0.0) }
    }

    pub(crate) fn diverged(iterations: usize, residual: f64) -> Self {
        SolveReport {
            value: ExtReal::PlusInfinity,
            argpoint: None,
            iterations,
            status: SolveStatus::Diverged,
            residual,
            gap: None,
        }
    }

    /// The value as `f64` (`+∞` when diverged).
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

/// `env_γ f(x) = min_y f(y) + ‖x − y‖²/(2γ)`.
pub fn envelope<F: ProxFunction + ?Sized>(f: &F, gamma: f64, x: &Vector) -> Result<f64> {
    check_gamma(gamma)?;
    let (p, fp) = f.prox_with_value(gamma, x)?;
    match fp {
        ExtReal::Finite(v) => Ok(v + x.dist(&p).powi(2) / (2.0 * gamma)),
        ExtReal::PlusInfinity => Err(Error::param("proximal point outside the domain")),
    }
}

/// `∇ env_γ f(x) = (x − prox_{γf} x)/γ`.
pub fn envelope_gradient<F: ProxFunction + ?Sized>(f: &F, gamma: f64, x: &Vector) -> Result<Vector> {
    check_gamma(gamma)?;
    let p = f.prox(gamma, x)?;
    Ok((x - &p).scale(1.0 / gamma))
}

/// The envelope `env_ρ f` as a function object.
#[derive(Clone, Debug)]
pub struct EnvelopeFn<F> {
    pub inner: F,
    pub rho: f64,
}

impl<F: ProxFunction> EnvelopeFn<F> {
    pub fn new(inner: F, rho: f64) -> Result<Self> {
        check_gamma(rho)?;
        Ok(EnvelopeFn { inner, rho })
    }
}

impl<F: ProxFunction> ProxFunction for EnvelopeFn<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &Vector) -> Result<ExtReal> {
        envelope(&self.inner, self.rho, x).map(ExtReal::Finite)
    }

    /// `prox_{t env_ρ f}(x) = x + t/(ρ+t) (prox_{(ρ+t) f}(x) − x)`.
    fn prox(&self, t: f64, x: &Vector) -> Result<Vector> {
        check_gamma(t)?;
        let p = self.inner.prox(self.rho + t, x)?;
        Ok(x.axpy(t / (self.rho + t), &(&p - x)))
    }

    /// `(env_ρ f)* = f* + ρ‖·‖²/2`.
    fn conjugate(&self, s: &Vector) -> Result<ExtReal> {
        Ok(self.inner.conjugate(s)? + 0.5 * self.rho * s.norm_sq())
    }

    fn recession(&self, x: &Vector) -> Result<ExtReal> {
        self.inner.recession(x)
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        self.inner.lipschitz_bound()
    }

    fn full_domain(&self) -> bool {
        true
    }

    fn closed_form(&self) -> bool {
        self.inner.closed_form()
    }

    fn describe(&self) -> String {
        format!("envelope of {}", self.inner.describe())
    }
}

/// `f*(x*) = sup_x ⟨x, x*⟩ − f(x)` by proximal-point iteration on the concave
/// objective, with geometrically growing steps.
///
/// A sup over an unbounded ray is reported as `Diverged` with value `+∞`
/// once the iterates leave the divergence radius while still improving.
pub fn conjugate_numeric<F: ProxFunction + ?Sized>(f: &F, xstar: &Vector, opts: &SolverOpts) -> Result<SolveReport> {
    opts.validate()?;
    check_dim(f.dim(), xstar.dim())?;
    let objective = |x: &Vector| -> Result<f64> {
        Ok(x.dot(xstar) - f.eval(x)?.value().unwrap_or(f64::INFINITY))
    };
    let mut x = Vector::zeros(f.dim());
    let mut t = 1.0f64;
    let mut last_check: Option<f64> = None;
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let next = f.prox(t, &x.axpy(t, xstar))?;
        residual = next.dist(&x);
        x = next;
        if residual <= opts.tol * t.min(1.0 + x.norm()) {
            let (value, argpoint) = (objective(&x)?, x);
            return Ok(SolveReport {
                value: ExtReal::Finite(value),
                argpoint: Some(argpoint),
                iterations: k,
                status: SolveStatus::Converged,
                residual,
                gap: None,
            });
        }
        if x.norm() > opts.divergence_radius {
            let now = objective(&x)?;
            if matches!(last_check, Some(prev) if now > prev) {
                return Ok(SolveReport::diverged(k, residual));
            }
            last_check = Some(now);
        }
        t = (2.0 * t).min(1e8);
    }
    Ok(SolveReport {
        value: ExtReal::Finite(objective(&x)?),
        argpoint: Some(x),
        iterations: opts.max_iter,
        status: SolveStatus::MaxIter,
        residual,
        gap: None,
    })
}

/// A uniform cell-centred grid on `[lo, hi]` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

pub const GRID_MAX_STEPS: usize = 2001;

impl Grid {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(hi > lo) || steps == 0 || steps > GRID_MAX_STEPS {
            return Err(Error::param(format!("grid needs lo < hi and 1..={GRID_MAX_STEPS} steps")));
        }
        Ok(Grid { lo, hi, steps })
    }

    /// Grid centred at `c` with the given cell width.
    pub fn around(c: f64, half_width: f64, steps: usize) -> Result<Self> {
        Grid::new(c - half_width, c + half_width, steps)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.steps as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.step()
    }
}

/// Objective accepted by the grid oracle.
pub type GridFn<'a> = dyn Fn(&Vector) -> Result<ExtReal> + Sync + 'a;

/// What the grid oracle computes, by exhaustive search.
pub enum GridProblem<'a> {
    /// `sup_y ⟨y, x*⟩ − f(y)`
    Conjugate { f: &'a GridFn<'a>, xstar: &'a Vector },
    /// `min_y f(y) + ‖x − y‖²/(2γ)`
    Envelope { f: &'a GridFn<'a>, gamma: f64, x: &'a Vector },
    /// the argmin of the envelope problem
    Prox { f: &'a GridFn<'a>, gamma: f64, x: &'a Vector },
    /// `min f(y)` over grid points with `‖L*y − x‖ ≤ constraint_tol`
    ConstrainedMin { f: &'a GridFn<'a>, l: &'a DenseMap, x: &'a Vector, constraint_tol: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridOutcome {
    /// Best value (a maximum for `Conjugate`, a minimum otherwise);
    /// `+∞` when no grid point is feasible.
    pub value: ExtReal,
    pub point: Option<Vector>,
    pub step: f64,
    /// `Lipschitz × cell diagonal` when a Lipschitz constant was supplied.
    pub error_bound: Option<f64>,
}

/// Exhaustive search over a grid in dimension 1 or 2. Ties go to the
/// lexicographically first grid point.
pub fn grid_oracle(problem: &GridProblem<'_>, grid: &Grid, lipschitz: Option<f64>) -> Result<GridOutcome> {
    grid_oracle_with(problem, grid, lipschitz, Execution::default())
}

pub fn grid_oracle_with(
    problem: &GridProblem<'_>,
    grid: &Grid,
    lipschitz: Option<f64>,
    exec: Execution,
) -> Result<GridOutcome> {
    let dim = match problem {
        GridProblem::Conjugate { xstar, .. } => xstar.dim(),
        GridProblem::Envelope { x, .. } | GridProblem::Prox { x, .. } => x.dim(),
        GridProblem::ConstrainedMin { l, x, .. } => {
            check_dim(l.cols(), x.dim())?;
            l.rows()
        }
    };
    if dim > 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    Grid::new(grid.lo, grid.hi, grid.steps)?;
    // minimized score at a grid point; None when infeasible
    let score = |y: &Vector| -> Result<Option<f64>> {
        Ok(match problem {
            GridProblem::Conjugate { f, xstar } => f(y)?.value().map(|v| v - y.dot(xstar)),
            GridProblem::Envelope { f, gamma, x } | GridProblem::Prox { f, gamma, x } => {
                f(y)?.value().map(|v| v + x.dist(y).powi(2) / (2.0 * gamma))
            }
            GridProblem::ConstrainedMin { f, l, x, constraint_tol } => {
                if l.adjoint_unchecked(y).dist(x) <= *constraint_tol {
                    f(y)?.value()
                } else {
                    None
                }
            }
        })
    };
    let n = grid.steps;
    let outer = if dim == 1 { 1 } else { n };
    let rows: Vec<Option<(f64, usize)>> = exec.try_map(outer, |i| -> Result<Option<(f64, usize)>> {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            let y: Vector = if dim == 1 {
                Vector::scalar(grid.point(j))
            } else {
                Vector::from(vec![grid.point(i), grid.point(j)])
            };
            if let Some(s) = score(&y)? {
                if best.is_none_or(|(b, _)| s < b) {
                    best = Some((s, i * n + j));
                }
            }
        }
        Ok(best)
    })?;
    let best = rows.into_iter().flatten().fold(None, |acc: Option<(f64, usize)>, (s, idx)| match acc {
        Some((b, _)) if b <= s => acc,
        _ => Some((s, idx)),
    });
    let step = grid.step();
    let error_bound = lipschitz.map(|l| l * step * (dim as f64).sqrt());
    let Some((s, idx)) = best else {
        return Ok(GridOutcome { value: ExtReal::PlusInfinity, point: None, step, error_bound });
    };
    let point = if dim == 1 {
        Vector::scalar(grid.point(idx))
    } else {
        Vector::from(vec![grid.point(idx / n), grid.point(idx % n)])
    };
    let value = match problem {
        GridProblem::Conjugate { .. } => -s,
        _ => s,
    };
    Ok(GridOutcome { value: ExtReal::Finite(value), point: Some(point), step, error_bound })
}

/// Golden-section search for the minimizer of a convex function on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcat::ConvexFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(x: f64) -> Vector {
        Vector::scalar(x)
    }

    #[test]
    fn envelope_examples() {
        let e = ConvexFunction::eucl_norm(1);
        assert_eq!(envelope(&e, 1.0, &s(0.0)).unwrap(), 0.0);
        assert!((envelope(&e, 1.0, &s(2.0)).unwrap() - 1.5).abs() < 1e-15);
        assert!((envelope(&e, 1.0, &s(0.5)).unwrap() - 0.125).abs() < 1e-15);
        assert!(envelope(&e, -1.0, &s(0.5)).is_err());
        let q = ConvexFunction::quadratic(1);
        assert!((envelope_gradient(&q, 1.0, &s(2.0)).unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((envelope_gradient(&e, 1.0, &s(2.0)).unwrap()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_grid_oracle() {
        let e = ConvexFunction::eucl_norm(1);
        let f = |y: &Vector| e.eval(y);
        for (x, want) in [(2.0, 1.5), (0.5, 0.125)] {
            let xv = s(x);
            let out = grid_oracle(
                &GridProblem::Envelope { f: &f, gamma: 1.0, x: &xv },
                &Grid::new(-6.0, 6.0, 2001).unwrap(),
                Some(1.0),
            )
            .unwrap();
            assert!((out.value.to_f64() - want).abs() < 1e-3);
            assert!((envelope(&e, 1.0, &xv).unwrap() - out.value.to_f64()).abs() <= out.error_bound.unwrap());
        }
    }

    #[test]
    fn grid_examples() {
        let q = ConvexFunction::quadratic(1);
        let f = |y: &Vector| q.eval(y);
        let xs = s(3.0);
        let out = grid_oracle(
            &GridProblem::Conjugate { f: &f, xstar: &xs },
            &Grid::new(-10.0, 10.0, 2001).unwrap(),
            None,
        )
        .unwrap();
        assert!((out.value.to_f64() - 4.5).abs() < 1e-4);
        let d = ConvexFunction::dist_ball(Vector::zeros(1), 2.0).unwrap();
        let fd = |y: &Vector| d.eval(y);
        let x4 = s(4.0);
        let g = Grid::new(-6.0, 6.0, 2001).unwrap();
        let out = grid_oracle(&GridProblem::Prox { f: &fd, gamma: 1.0, x: &x4 }, &g, None).unwrap();
        assert!((out.point.unwrap()[0] - 3.0).abs() <= g.step());
        let x3 = Vector::zeros(3);
        assert!(matches!(
            grid_oracle(&GridProblem::Prox { f: &fd, gamma: 1.0, x: &x3 }, &g, None),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn constrained_grid_finds_unique_feasible_point() {
        // min |y| + (y² − (0.5 y)²)/2 over 0.5 y = 0.5  →  y = 1, value 1.375
        let l = DenseMap::scalar(0.5);
        let f = |y: &Vector| Ok(ExtReal::Finite(y[0].abs() + 0.5 * (y[0] * y[0] - 0.25 * y[0] * y[0])));
        let x = s(0.5);
        // cell centres −2 + 0.002 i hit y = 1 exactly
        let g = Grid::new(-2.001, 2.001, 2001).unwrap();
        let out = grid_oracle(&GridProblem::ConstrainedMin { f: &f, l: &l, x: &x, constraint_tol: 1e-6 }, &g, None)
            .unwrap();
        assert!((out.value.to_f64() - 1.375).abs() < 1e-9);
    }

    #[test]
    fn grid_ties_go_to_first_point() {
        let f = |_: &Vector| Ok(ExtReal::ZERO);
        let x = Vector::zeros(2);
        let l = DenseMap::zeros(2, 2);
        let out = grid_oracle(
            &GridProblem::ConstrainedMin { f: &f, l: &l, x: &x, constraint_tol: 1.0 },
            &Grid::new(0.0, 1.0, 4).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(out.point.unwrap(), Vector::from(vec![0.125, 0.125]));
    }

    #[test]
    fn conjugate_numeric_examples() {
        let opts = SolverOpts::default();
        let q = ConvexFunction::quadratic(1);
        let r = conjugate_numeric(&q, &s(3.0), &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.to_f64() - 4.5).abs() < 1e-6);
        let l1 = ConvexFunction::l1_norm(2);
        let r = conjugate_numeric(&l1, &Vector::from(vec![0.5, -0.9]), &opts).unwrap();
        assert!(r.to_f64().abs() < 1e-6);
        let r = conjugate_numeric(&l1, &Vector::from(vec![1.5, 0.0]), &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Diverged);
        assert_eq!(r.value, ExtReal::PlusInfinity);
    }

    #[test]
    fn conjugate_of_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fs = [
            ConvexFunction::eucl_norm(2),
            ConvexFunction::l1_norm(2),
            ConvexFunction::dist_ball(Vector::from(vec![0.5, 0.0]), 1.0).unwrap(),
        ];
        for f in fs {
            let gamma = 0.7;
            let env = EnvelopeFn::new(f.clone(), gamma).unwrap();
            for _ in 0..10 {
                let xs: Vector = (0..2).map(|_| rng.random_range(-0.6..0.6)).collect();
                let want = f.conjugate_eval_closed(&xs).unwrap().to_f64() + 0.5 * gamma * xs.norm_sq();
                let got = conjugate_numeric(&env, &xs, &SolverOpts::default()).unwrap();
                assert!((got.to_f64() - want).abs() < 1e-5, "{} vs {}", got.to_f64(), want);
                assert!((env.conjugate(&xs).unwrap().to_f64() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moreau_identity_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let fs = [
            ConvexFunction::eucl_norm(2),
            ConvexFunction::l1_norm(2),
            ConvexFunction::indicator_ball(Vector::from(vec![0.3, 0.1]), 1.2).unwrap(),
            ConvexFunction::support_ball(Vector::from(vec![0.3, 0.1]), 1.2).unwrap(),
        ];
        for f in fs {
            let fstar = f.conjugate_function().unwrap();
            for _ in 0..100 {
                let x: Vector = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
                let sum = envelope(&f, 1.0, &x).unwrap() + envelope(&fstar, 1.0, &x).unwrap();
                assert!((sum - 0.5 * x.norm_sq()).abs() < 1e-9);
                let (rho, gamma) = (rng.random_range(0.2..4.0), rng.random_range(0.2..4.0));
                let a = rho * envelope(&f, gamma, &x).unwrap();
                let b = envelope(&f.clone().scale_val(rho).unwrap(), gamma / rho, &x).unwrap();
                assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
                let a = envelope(&f, gamma, &x.scale(rho)).unwrap();
                let b = envelope(&f.clone().scale_arg(rho).unwrap(), gamma / (rho * rho), &x).unwrap();
                assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn envelope_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let fs = [
            ConvexFunction::eucl_norm(2),
            ConvexFunction::l1_norm(2),
            ConvexFunction::quad_form(DenseMap::diag(&[2.0, 0.5])).unwrap(),
            ConvexFunction::dist_ball(Vector::zeros(2), 1.0).unwrap(),
        ];
        let h = 1e-6;
        for f in fs {
            for _ in 0..50 {
                let x: Vector = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
                let g = envelope_gradient(&f, 1.0, &x).unwrap();
                for i in 0..2 {
                    let e = Vector::basis(2, i);
                    let fd = (envelope(&f, 1.0, &x.axpy(h, &e)).unwrap() - envelope(&f, 1.0, &x.axpy(-h, &e)).unwrap())
                        / (2.0 * h);
                    assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()));
                }
            }
        }
    }

    #[test]
    fn envelope_monotone_as_gamma_shrinks() {
        let f = ConvexFunction::l1_norm(2);
        let x = Vector::from(vec![1.0, -0.3]);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..20 {
            let e = envelope(&f, 2f64.powi(-k), &x).unwrap();
            assert!(e >= prev);
            prev = e;
        }
        assert!((prev - 1.3).abs() < 1e-5);
    }

    #[test]
    fn envelope_fn_prox_is_minimizer() {
        let env = EnvelopeFn::new(ConvexFunction::eucl_norm(1), 0.5).unwrap();
        let x = s(3.0);
        let p = env.prox(1.0, &x).unwrap();
        let (y, _) = golden_section(
            |y| Ok(env.eval(&s(y))?.to_f64() + 0.5 * (3.0 - y) * (3.0 - y)),
            -5.0,
            5.0,
            1e-10,
        )
        .unwrap();
        assert!((p[0] - y).abs() < 1e-7);
    }
}
