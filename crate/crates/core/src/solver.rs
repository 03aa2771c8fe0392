//! First-order iterations shared by the evaluators.

use crate::error::Result;
use crate::linalg::Vector;
use crate::moreau::{SolveStatus, SolverOpts};

const DIVERGENCE_WINDOW: usize = 100;

/// Result of an iterative solve.
#[derive(Clone, Debug)]
pub struct Iterate {
    pub point: Vector,
    pub iterations: usize,
    pub status: SolveStatus,
    pub residual: f64,
}

/// Tracks the escape test: iterate norm beyond the radius while the objective
/// keeps decreasing over a window of iterations.
struct EscapeMonitor {
    radius: f64,
    last: Option<f64>,
}

impl EscapeMonitor {
    fn new(radius: f64) -> Self {
        EscapeMonitor { radius, last: None }
    }

    fn check(&mut self, k: usize, y: &Vector, objective: impl FnOnce() -> Result<f64>) -> Result<bool> {
        if !k.is_multiple_of(DIVERGENCE_WINDOW) {
            return Ok(false);
        }
        if y.norm() <= self.radius {
            self.last = None;
            return Ok(false);
        }
        let now = objective()?;
        let escaped = matches!(self.last, Some(prev) if now < prev);
        self.last = Some(now);
        Ok(escaped)
    }
}

/// Accelerated proximal gradient for `min s(y) + r(y)` with `s` smooth.
///
/// `grad` is `∇s`, `prox` is `prox_{step·r}` and `objective` evaluates
/// `s + r` (only used by the divergence test). Momentum is reset whenever
/// the step direction turns against it.
pub fn fista(
    y0: Vector,
    step: f64,
    grad: impl Fn(&Vector) -> Result<Vector>,
    prox: impl Fn(&Vector) -> Result<Vector>,
    objective: impl Fn(&Vector) -> Result<f64>,
    opts: &SolverOpts,
) -> Result<Iterate> {
    let mut y = y0.clone();
    let mut v = y0;
    let mut theta = 1.0f64;
    let mut residual = f64::INFINITY;
    let mut monitor = EscapeMonitor::new(opts.divergence_radius);
    for k in 1..=opts.max_iter {
        let g = grad(&v)?;
        let y_new = prox(&v.axpy(-step, &g))?;
        residual = y_new.dist(&v) / step;
        if residual <= opts.tol {
            return Ok(Iterate { point: y_new, iterations: k, status: SolveStatus::Converged, residual });
        }
        let restart = (&v - &y_new).dot(&(&y_new - &y)) > 0.0;
        if restart {
            theta = 1.0;
            v = y_new.clone();
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            v = y_new.axpy((theta - 1.0) / next, &(&y_new - &y));
            theta = next;
        }
        y = y_new;
        if monitor.check(k, &y, || objective(&y))? {
            return Ok(Iterate { point: y, iterations: k, status: SolveStatus::Diverged, residual });
        }
    }
    Ok(Iterate { point: y, iterations: opts.max_iter, status: SolveStatus::MaxIter, residual })
}

/// Douglas–Rachford splitting for `min f(y)` over an affine set `A`.
///
/// `prox_f` is `prox_{t f}` for a fixed `t`, `project` the projector onto
/// `A`. The returned point is always `project(z)`, hence feasible.
pub fn douglas_rachford(
    z0: Vector,
    prox_f: impl Fn(&Vector) -> Result<Vector>,
    project: impl Fn(&Vector) -> Vector,
    objective: impl Fn(&Vector) -> Result<f64>,
    opts: &SolverOpts,
) -> Result<Iterate> {
    let mut z = z0;
    let mut monitor = EscapeMonitor::new(opts.divergence_radius);
    let mut residual = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let y = project(&z);
        let w = prox_f(&(&y.scale(2.0) - &z))?;
        let step = &w - &y;
        residual = step.norm();
        z = &z + &step;
        if residual <= opts.tol * (1.0 + y.norm()) {
            return Ok(Iterate { point: project(&z), iterations: k, status: SolveStatus::Converged, residual });
        }
        if monitor.check(k, &z, || objective(&y))? {
            return Ok(Iterate { point: project(&z), iterations: k, status: SolveStatus::Diverged, residual });
        }
    }
    Ok(Iterate { point: project(&z), iterations: opts.max_iter, status: SolveStatus::MaxIter, residual })
}

/// Accelerated gradient descent for a smooth convex `f` with `L`-Lipschitz
/// gradient.
pub fn gradient_descent(
    x0: Vector,
    lipschitz: f64,
    grad: impl Fn(&Vector) -> Result<Vector>,
    objective: impl Fn(&Vector) -> Result<f64>,
    opts: &SolverOpts,
) -> Result<Iterate> {
    let step = 1.0 / lipschitz;
    fista(x0, step, grad, |z| Ok(z.clone()), objective, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fista_solves_lasso_1d() {
        // min (y − 3)²/2 + |y|  →  y = 2
        let out = fista(
            Vector::scalar(0.0),
            1.0,
            |y| Ok(Vector::scalar(y[0] - 3.0)),
            |z| Ok(z.map(|v| v.signum() * (v.abs() - 1.0).max(0.0))),
            |y| Ok(0.5 * (y[0] - 3.0).powi(2) + y[0].abs()),
            &SolverOpts::default(),
        )
        .unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!((out.point[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn fista_detects_unbounded_descent() {
        let out = fista(
            Vector::scalar(0.0),
            1.0,
            |_| Ok(Vector::scalar(-1.0)),
            |z| Ok(z.clone()),
            |y| Ok(-y[0]),
            &SolverOpts::default(),
        )
        .unwrap();
        assert_eq!(out.status, SolveStatus::Diverged);
        assert!(out.iterations < 10_000);
    }

    #[test]
    fn douglas_rachford_on_a_line() {
        // min |y1| + |y2| subject to y1 + y2 = 1: any point of the segment
        let opts = SolverOpts::default();
        let project = |z: &Vector| {
            let c = (z[0] + z[1] - 1.0) / 2.0;
            Vector::from(vec![z[0] - c, z[1] - c])
        };
        let out = douglas_rachford(
            Vector::from(vec![3.0, -1.0]),
            |z| Ok(z.map(|v| v.signum() * (v.abs() - 1.0).max(0.0))),
            project,
            |y| Ok(y.norm1()),
            &opts,
        )
        .unwrap();
        assert_eq!(out.status, SolveStatus::Converged);
        assert!((out.point.norm1() - 1.0).abs() < 1e-7);
        assert!((out.point[0] + out.point[1] - 1.0).abs() < 1e-12);
    }
}
