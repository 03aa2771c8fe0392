//! Proximal compositions `L ⊘γ g` and cocompositions `L ⊙γ g`.
//!
//! With `Φ(y) = (‖y‖² − ‖L*y‖²)/2`:
//!
//! * `(L ⊙γ g)(x) = sup_y ⟨Lx, y⟩ − g*(y) − γΦ(y)`, solved by accelerated
//!   proximal-gradient ascent in `y` (step `1/γ`), which also yields a
//!   primal upper bound and therefore a certified gap;
//! * `(L ⊘γ g)(x) = h*(x) − ‖x‖²/(2γ)` with `h = env_{1/γ}(g*) ∘ L`, solved by
//!   accelerated gradient ascent on `z ↦ ⟨z, x⟩ − h(z)` (step `1/(γ‖L‖²)`);
//!   a feasible point of the fibre `{L*y = x}` gives the upper bound.
//!
//! Proximity operators, envelopes and recession functions are exact.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::exec::Execution;
use crate::funcat::{check_gamma, prox_conjugate_with_value, ConvexFunction, ExtReal, ProxFunction};
use crate::linalg::{pseudo_inverse_small, DenseMap, PseudoInverse, Vector, DEFAULT_RANK_TOL};
use crate::moreau::{envelope, EnvelopeFn, SolveReport, SolveStatus, SolverOpts};
use crate::solver::{douglas_rachford, fista, gradient_descent};

/// Slack on the admissibility gate `0 < ‖L‖ ≤ 1`.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;
/// Relative tolerance for range membership tests.
pub const RANGE_TOL: f64 = 1e-9;

/// Whether `0 < ‖L‖ ≤ 1` (with slack [`ADMISSIBILITY_TOL`]).
pub fn admissible(l: &DenseMap) -> bool {
    let n = l.norm();
    n > 0.0 && n <= 1.0 + ADMISSIBILITY_TOL
}

/// The triple `(L, g, γ)`.
#[derive(Clone, Debug)]
pub struct CompositionSpec<G = ConvexFunction> {
    l: DenseMap,
    g: G,
    gamma: f64,
    gram_pinv: OnceLock<Option<PseudoInverse>>,
}

impl<G: ProxFunction> CompositionSpec<G> {
    pub fn new(l: DenseMap, g: G, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        check_dim(l.rows(), g.dim())?;
        if !admissible(&l) {
            return Err(Error::Admissibility(format!("need 0 < ‖L‖ ≤ 1, got ‖L‖ = {}", l.norm())));
        }
        Ok(CompositionSpec { l, g, gamma, gram_pinv: OnceLock::new() })
    }

    pub fn l(&self) -> &DenseMap {
        &self.l
    }

    pub fn g(&self) -> &G {
        &self.g
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Dimension of the domain of `L`.
    pub fn dim(&self) -> usize {
        self.l.cols()
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self>
    where
        G: Clone,
    {
        check_gamma(gamma)?;
        Ok(CompositionSpec { l: self.l.clone(), g: self.g.clone(), gamma, gram_pinv: self.gram_pinv.clone() })
    }

    /// `(L*L)†`, available when the domain has at most 32 dimensions.
    pub fn gram_pinv(&self) -> Option<&PseudoInverse> {
        self.gram_pinv.get_or_init(|| pseudo_inverse_small(&self.l.gram(), DEFAULT_RANK_TOL).ok()).as_ref()
    }

    fn term(&self) -> Term<'_> {
        Term { alpha: 1.0, l: &self.l, g: &self.g }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositionSpecRepr {
    #[serde(rename = "L")]
    l: DenseMap,
    g: ConvexFunction,
    gamma: f64,
}

impl Serialize for CompositionSpec<ConvexFunction> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CompositionSpecRepr { l: self.l.clone(), g: self.g.clone(), gamma: self.gamma }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CompositionSpec<ConvexFunction> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = CompositionSpecRepr::deserialize(d)?;
        CompositionSpec::new(r.l, r.g, r.gamma).map_err(serde::de::Error::custom)
    }
}

/// One weighted term `(α, L, g)` of a composition-type object.
#[derive(Clone, Copy)]
pub(crate) struct Term<'a> {
    pub alpha: f64,
    pub l: &'a DenseMap,
    pub g: &'a dyn ProxFunction,
}

fn blocks(terms: &[Term<'_>], y: &Vector) -> Vec<Vector> {
    let mut out = Vec::with_capacity(terms.len());
    let mut start = 0;
    for t in terms {
        let end = start + t.l.rows();
        out.push(y.slice(start, end));
        start = end;
    }
    out
}

/// `Σ α_k L_k* y_k`
fn weighted_adjoint(terms: &[Term<'_>], ys: &[Vector], dim: usize) -> Vector {
    terms
        .iter()
        .zip(ys)
        .fold(Vector::zeros(dim), |acc, (t, y)| acc.axpy(t.alpha, &t.l.adjoint_unchecked(y)))
}

/// `sup_y Σ α_k (⟨L_k x, y_k⟩ − g_k*(y_k)) − γ(‖y‖²_α − ‖Σ α_k L_k* y_k‖²)/2`,
/// the cocomposition (one term) or comixture (several terms) at `x`.
///
/// The ascent runs in the `α`-weighted metric, where the smooth part has a
/// `γ`-Lipschitz gradient whenever `Σ α_k ‖L_k‖² ≤ 1`. `argpoint` is the
/// concatenated dual point.
pub(crate) fn cocomposition_dual(terms: &[Term<'_>], gamma: f64, x: &Vector, opts: &SolverOpts) -> Result<SolveReport> {
    opts.validate()?;
    check_gamma(gamma)?;
    let n = x.dim();
    let lx: Vec<Vector> = terms.iter().map(|t| t.l.apply(x)).collect::<Result<_>>()?;
    // A y, blockwise, with A = Id − 𝔏𝔏* in the weighted metric
    let a_apply = |ys: &[Vector]| -> Vec<Vector> {
        let u = weighted_adjoint(terms, ys, n);
        terms.iter().zip(ys).map(|(t, y)| y - &t.l.apply_unchecked(&u)).collect()
    };
    let grad = |y: &Vector| -> Result<Vector> {
        let ys = blocks(terms, y);
        let ay = a_apply(&ys);
        Ok(Vector::concat(ay.iter().zip(&lx).map(|(a, l)| a.scale(gamma).axpy(-1.0, l)).collect::<Vec<_>>().iter()))
    };
    let step = 1.0 / gamma;
    // forward-backward step from y; returns the new point with g_k* values
    let advance = |y: &Vector| -> Result<(Vec<Vector>, Vec<ExtReal>)> {
        let z = y.axpy(-step, &grad(y)?);
        let mut ps = Vec::with_capacity(terms.len());
        let mut vals = Vec::with_capacity(terms.len());
        for (t, zk) in terms.iter().zip(blocks(terms, &z)) {
            let (p, v) = prox_conjugate_with_value(t.g, step, &zk)?;
            ps.push(p);
            vals.push(v);
        }
        Ok((ps, vals))
    };
    let lower = |ps: &[Vector], vals: &[ExtReal]| -> f64 {
        let mut acc = 0.0;
        for ((t, p), (v, l)) in terms.iter().zip(ps).zip(vals.iter().zip(&lx)) {
            match v {
                ExtReal::Finite(v) => acc += t.alpha * (l.dot(p) - v),
                ExtReal::PlusInfinity => return f64::NEG_INFINITY,
            }
        }
        let u = weighted_adjoint(terms, ps, n);
        let sq: f64 = terms.iter().zip(ps).map(|(t, p)| t.alpha * p.norm_sq()).sum();
        acc - 0.5 * gamma * (sq - u.norm_sq())
    };
    let prox = |z: &Vector| -> Result<Vector> {
        let mut out = Vec::with_capacity(terms.len());
        for (t, zk) in terms.iter().zip(blocks(terms, z)) {
            let w = t.g.prox(gamma, &zk.scale(gamma))?;
            out.push(zk.axpy(-1.0 / gamma, &w));
        }
        Ok(Vector::concat(out.iter()))
    };
    let objective = |y: &Vector| -> Result<f64> {
        let (ps, vals) = advance(y)?;
        Ok(-lower(&ps, &vals))
    };
    let mut y0 = Vec::with_capacity(terms.len());
    for (t, l) in terms.iter().zip(&lx) {
        let p = t.g.prox(gamma, l)?;
        y0.push((l - &p).scale(1.0 / gamma));
    }
    let it = fista(Vector::concat(y0.iter()), step, grad, prox, objective, opts)?;
    if it.status == SolveStatus::Diverged {
        return Ok(SolveReport::diverged(it.iterations, it.residual));
    }
    let (ps, vals) = advance(&it.point)?;
    let value = lower(&ps, &vals);
    let gap = if terms.iter().all(|t| t.g.closed_form()) {
        let ay = a_apply(&ps);
        let mut upper = ExtReal::ZERO;
        for ((t, l), (a, p)) in terms.iter().zip(&lx).zip(ay.iter().zip(&ps)) {
            let w = l.axpy(-gamma, a);
            upper = upper + t.g.eval(&w)?.scale(t.alpha) + 0.5 * gamma * t.alpha * p.dot(a);
        }
        upper.value().map(|u| (u - value).max(0.0))
    } else {
        None
    };
    Ok(SolveReport {
        value: ExtReal::from_f64(value).unwrap_or(ExtReal::PlusInfinity),
        argpoint: Some(Vector::concat(ps.iter())),
        iterations: it.iterations,
        status: it.status,
        residual: it.residual,
        gap,
    })
}

/// `(Σ α_k env_{1/γ}(g_k*) ∘ L_k)*(x) − ‖x‖²/(2γ)`, the composition (one term)
/// or mixture (several terms) at `x`.
///
/// `argpoint` is the dual variable `z ∈ H`. When `fibre` is given (single
/// term only: the pseudo-inverse of `L*L`) a point of `{L*y = x}` built from
/// the final iterate provides the upper bound.
pub(crate) fn composition_conjugate(
    terms: &[Term<'_>],
    gamma: f64,
    x: &Vector,
    opts: &SolverOpts,
    gram_pinv: Option<&PseudoInverse>,
    fibre: bool,
) -> Result<SolveReport> {
    opts.validate()?;
    check_gamma(gamma)?;
    let n = x.dim();
    for t in terms {
        check_dim(t.l.cols(), n)?;
    }
    if let Some(pi) = gram_pinv {
        if terms.iter().all(|t| t.g.full_domain()) && !pi.in_range(x, RANGE_TOL) {
            // dom = Σ-range of the adjoints when every g_k has full domain
            return Ok(SolveReport::diverged(0, f64::INFINITY));
        }
    }
    let budget: f64 = terms.iter().map(|t| t.alpha * t.l.norm_bound().powi(2)).sum();
    // w_k(z) = prox(g_k, γ, γ L_k z) and the values g_k(w_k)
    let witness = |z: &Vector| -> Result<Vec<(Vector, Vector, ExtReal)>> {
        terms
            .iter()
            .map(|t| {
                let lz = t.l.apply_unchecked(z);
                let (w, gw) = t.g.prox_with_value(gamma, &lz.scale(gamma))?;
                Ok((lz, w, gw))
            })
            .collect()
    };
    // F(z) = Σ α_k e_k(L_k z) − ⟨z, x⟩ with e(v) = ⟨v, w⟩ − g(w) − ‖w‖²/(2γ)
    let objective = |z: &Vector| -> Result<f64> {
        let mut acc = -z.dot(x);
        for (t, (lz, w, gw)) in terms.iter().zip(witness(z)?) {
            acc += t.alpha * (lz.dot(&w) - gw.to_f64() - w.norm_sq() / (2.0 * gamma));
        }
        Ok(acc)
    };
    let grad = |z: &Vector| -> Result<Vector> {
        let mut g = -x;
        for (t, (_, w, _)) in terms.iter().zip(witness(z)?) {
            g = g.axpy(t.alpha, &t.l.adjoint_unchecked(&w));
        }
        Ok(g)
    };
    let step = 1.0 / (gamma * budget);
    let it = fista(x.scale(1.0 / gamma), step, grad, |z| Ok(z.clone()), objective, opts)?;
    if it.status == SolveStatus::Diverged {
        return Ok(SolveReport::diverged(it.iterations, it.residual));
    }
    let z = it.point;
    let q = x.norm_sq() / (2.0 * gamma);
    let value = -objective(&z)? - q;
    let mut gap = None;
    if fibre && terms.len() == 1 && terms[0].g.closed_form() {
        if let Some(pi) = gram_pinv.filter(|pi| pi.in_range(x, RANGE_TOL)) {
            let t = terms[0];
            let (_, w, _) = witness(&z)?.remove(0);
            let defect = x - &t.l.adjoint_unchecked(&w);
            let y = w.axpy(1.0, &t.l.apply_unchecked(&pi.pinv.apply_unchecked(&defect)));
            let phi = 0.5 * (y.norm_sq() - t.l.adjoint_unchecked(&y).norm_sq());
            gap = (t.g.eval(&y)? + phi / gamma).value().map(|u| (u - value).max(0.0));
        }
    }
    Ok(SolveReport {
        value: ExtReal::from_f64(value).unwrap_or(ExtReal::PlusInfinity),
        argpoint: Some(z),
        iterations: it.iterations,
        status: it.status,
        residual: it.residual,
        gap,
    })
}

/// `(L ⊙γ g)(x)`. `argpoint` is the maximizing dual point `y ∈ G`; when the
/// cocomposition is differentiable its gradient at `x` is `L* y`.
pub fn eval_cocomposition<G: ProxFunction>(spec: &CompositionSpec<G>, x: &Vector, opts: &SolverOpts) -> Result<SolveReport> {
    check_dim(spec.dim(), x.dim())?;
    cocomposition_dual(&[spec.term()], spec.gamma, x, opts)
}

/// `(L ⊘γ g)(x)`; `+∞` (status `Diverged`) outside `L*(dom g)`.
pub fn eval_composition<G: ProxFunction>(spec: &CompositionSpec<G>, x: &Vector, opts: &SolverOpts) -> Result<SolveReport> {
    check_dim(spec.dim(), x.dim())?;
    composition_conjugate(&[spec.term()], spec.gamma, x, opts, spec.gram_pinv(), true)
}

/// `prox_{γ (L ⊘γ g)}(x) = L* prox_{γg}(Lx)`.
pub fn prox_composition<G: ProxFunction>(spec: &CompositionSpec<G>, x: &Vector) -> Result<Vector> {
    let lx = spec.l.apply(x)?;
    Ok(spec.l.adjoint_unchecked(&spec.g.prox(spec.gamma, &lx)?))
}

/// `prox_{γ (L ⊙γ g)}(x) = x − L*(Lx − prox_{γg}(Lx))`.
pub fn prox_cocomposition<G: ProxFunction>(spec: &CompositionSpec<G>, x: &Vector) -> Result<Vector> {
    let lx = spec.l.apply(x)?;
    let p = spec.g.prox(spec.gamma, &lx)?;
    Ok(x - &spec.l.adjoint_unchecked(&(&lx - &p)))
}

/// `(p, (x − p)/γ)` with `p = prox_{γ (L ⊙γ g)}(x)`: a point and a subgradient
/// of the cocomposition at that point.
pub fn subgradient_witness_cocomposition<G: ProxFunction>(
    spec: &CompositionSpec<G>,
    x: &Vector,
) -> Result<(Vector, Vector)> {
    let p = prox_cocomposition(spec, x)?;
    let s = (x - &p).scale(1.0 / spec.gamma);
    Ok((p, s))
}

/// As [`subgradient_witness_cocomposition`], for the composition.
pub fn subgradient_witness_composition<G: ProxFunction>(spec: &CompositionSpec<G>, x: &Vector) -> Result<(Vector, Vector)> {
    let p = prox_composition(spec, x)?;
    let s = (x - &p).scale(1.0 / spec.gamma);
    Ok((p, s))
}

/// `env_ρ (L ⊙γ g)(x)`.
///
/// At `ρ = γ` this is `env_γ g(Lx)`. For `ρ < γ` it is the cocomposition of
/// `env_ρ g` with parameter `γ − ρ`; for `ρ > γ` it is
/// `min_y env_γ g(Ly) + ‖x − y‖²/(2(ρ − γ))`.
pub fn envelope_cocomposition<G: ProxFunction>(
    spec: &CompositionSpec<G>,
    rho: f64,
    x: &Vector,
    opts: &SolverOpts,
) -> Result<f64> {
    check_gamma(rho)?;
    check_dim(spec.dim(), x.dim())?;
    let gamma = spec.gamma;
    if (rho - gamma).abs() <= 1e-12 * gamma {
        return envelope(&spec.g, gamma, &spec.l.apply_unchecked(x));
    }
    if rho < gamma {
        let inner = EnvelopeFn::new(&spec.g, rho)?;
        let term = Term { alpha: 1.0, l: &spec.l, g: &inner };
        return Ok(cocomposition_dual(&[term], gamma - rho, x, opts)?.to_f64());
    }
    let mu = rho - gamma;
    let l = &spec.l;
    let f = |y: &Vector| -> Result<f64> { Ok(envelope(&spec.g, gamma, &l.apply_unchecked(y))? + x.dist(y).powi(2) / (2.0 * mu)) };
    let grad = |y: &Vector| -> Result<Vector> {
        let ly = l.apply_unchecked(y);
        let p = spec.g.prox(gamma, &ly)?;
        Ok(l.adjoint_unchecked(&(&ly - &p)).scale(1.0 / gamma).axpy(1.0 / mu, &(y - x)))
    };
    let lip = l.norm_bound().powi(2) / gamma + 1.0 / mu;
    let it = gradient_descent(x.clone(), lip, grad, f, opts)?;
    f(&it.point)
}

/// `(rec (L ⊙γ g))(x) = (rec g)(Lx)`.
pub fn recession_cocomposition<G: ProxFunction>(spec: &CompositionSpec<G>, x: &Vector) -> Result<ExtReal> {
    spec.g.recession(&spec.l.apply(x)?)
}

/// The perspective of the cocomposition at `(x, ξ)`: `ξ (L ⊙γ g)(x/ξ)` for
/// `ξ > 0`, `(rec g)(Lx)` for `ξ = 0`, `+∞` for `ξ < 0`.
pub fn perspective_cocomposition<G: ProxFunction>(
    spec: &CompositionSpec<G>,
    x: &Vector,
    xi: f64,
    opts: &SolverOpts,
) -> Result<ExtReal> {
    if xi > 0.0 {
        Ok(eval_cocomposition(spec, &x.scale(1.0 / xi), opts)?.value.scale(xi))
    } else if xi == 0.0 {
        recession_cocomposition(spec, x)
    } else {
        Ok(ExtReal::PlusInfinity)
    }
}

/// `∇(L ⊙γ g)(x) = L* y*`, meaningful when the cocomposition is
/// differentiable (for instance `‖L‖ < 1`).
pub fn gradient_cocomposition<G: ProxFunction>(spec: &CompositionSpec<G>, x: &Vector, opts: &SolverOpts) -> Result<Vector> {
    let r = eval_cocomposition(spec, x, opts)?;
    let y = r.argpoint.ok_or_else(|| Error::param("cocomposition is +inf at x"))?;
    Ok(spec.l.adjoint_unchecked(&y))
}

/// The cocomposition as a function object. Its prox is exact at the spec's
/// own parameter and unavailable at any other.
#[derive(Clone, Debug)]
pub struct CocompositionFn<G = ConvexFunction> {
    pub spec: CompositionSpec<G>,
    pub opts: SolverOpts,
}

/// The composition as a function object; prox exact at the spec's parameter.
#[derive(Clone, Debug)]
pub struct CompositionFn<G = ConvexFunction> {
    pub spec: CompositionSpec<G>,
    pub opts: SolverOpts,
}

fn same_gamma(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b
}

impl<G: ProxFunction> ProxFunction for CocompositionFn<G> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn eval(&self, x: &Vector) -> Result<ExtReal> {
        Ok(eval_cocomposition(&self.spec, x, &self.opts)?.value)
    }

    fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        if !same_gamma(gamma, self.spec.gamma) {
            return Err(Error::UnsupportedProx(format!(
                "cocomposition with parameter {} has no closed-form prox at {gamma}",
                self.spec.gamma
            )));
        }
        prox_cocomposition(&self.spec, x)
    }

    /// Uses `env_γ(L ⊙γ g) = env_γ g ∘ L` at the proximal point.
    fn prox_with_value(&self, gamma: f64, x: &Vector) -> Result<(Vector, ExtReal)> {
        let p = self.prox(gamma, x)?;
        let e = envelope(&self.spec.g, gamma, &self.spec.l.apply_unchecked(x))?;
        Ok((p.clone(), ExtReal::Finite(e - x.dist(&p).powi(2) / (2.0 * gamma))))
    }

    fn recession(&self, x: &Vector) -> Result<ExtReal> {
        recession_cocomposition(&self.spec, x)
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        self.spec.g.lipschitz_bound().map(|b| b * self.spec.l.norm_bound())
    }

    fn full_domain(&self) -> bool {
        self.spec.g.full_domain() || self.spec.l.norm() < 1.0 - ADMISSIBILITY_TOL
    }

    fn describe(&self) -> String {
        format!("cocomposition of {}", self.spec.g.describe())
    }
}

impl<G: ProxFunction> ProxFunction for CompositionFn<G> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn eval(&self, x: &Vector) -> Result<ExtReal> {
        Ok(eval_composition(&self.spec, x, &self.opts)?.value)
    }

    fn prox(&self, gamma: f64, x: &Vector) -> Result<Vector> {
        if !same_gamma(gamma, self.spec.gamma) {
            return Err(Error::UnsupportedProx(format!(
                "composition with parameter {} has no closed-form prox at {gamma}",
                self.spec.gamma
            )));
        }
        prox_composition(&self.spec, x)
    }

    /// Value at `p = prox(u)`:
    /// `env_γ g(Lu) + (‖u‖² − ‖Lu‖² − ‖u − p‖²)/(2γ)`.
    fn prox_with_value(&self, gamma: f64, u: &Vector) -> Result<(Vector, ExtReal)> {
        let p = self.prox(gamma, u)?;
        let lu = self.spec.l.apply_unchecked(u);
        let e = envelope(&self.spec.g, gamma, &lu)?;
        let v = e + (u.norm_sq() - lu.norm_sq() - u.dist(&p).powi(2)) / (2.0 * gamma);
        Ok((p, ExtReal::Finite(v)))
    }

    fn full_domain(&self) -> bool {
        self.spec.g.full_domain() && self.spec.gram_pinv().is_some_and(|pi| pi.rank() == self.spec.dim())
    }

    fn describe(&self) -> String {
        format!("composition of {}", self.spec.g.describe())
    }
}

/// Result of an infimum computation; `value` may be `±∞`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfimumReport {
    pub value: f64,
    pub point: Option<Vector>,
    pub status: SolveStatus,
    pub iterations: usize,
}

fn infimum_over_affine<G: ProxFunction + ?Sized>(
    g: &G,
    start: Vector,
    project: impl Fn(&Vector) -> Vector,
    opts: &SolverOpts,
) -> Result<InfimumReport> {
    let objective = |y: &Vector| Ok(g.eval(y)?.to_f64());
    let it = douglas_rachford(start, |z| g.prox(1.0, z), &project, objective, opts)?;
    if it.status == SolveStatus::Diverged {
        return Ok(InfimumReport { value: f64::NEG_INFINITY, point: None, status: it.status, iterations: it.iterations });
    }
    let value = g.eval(&it.point)?.to_f64();
    Ok(InfimumReport { value, point: Some(it.point), status: it.status, iterations: it.iterations })
}

/// `(L* ▷ g)(x) = inf { g(y) : L*y = x }`, by Douglas–Rachford between the
/// prox of `g` and the projector onto the fibre. Feasible returned points
/// make `value` an upper bound at any accuracy.
pub fn infimal_postcomposition<G: ProxFunction + ?Sized>(
    l: &DenseMap,
    g: &G,
    x: &Vector,
    opts: &SolverOpts,
) -> Result<InfimumReport> {
    check_dim(l.cols(), x.dim())?;
    check_dim(l.rows(), g.dim())?;
    let pi = pseudo_inverse_small(&l.gram(), DEFAULT_RANK_TOL)?;
    if !pi.in_range(x, RANGE_TOL) {
        return Ok(InfimumReport { value: f64::INFINITY, point: None, status: SolveStatus::Converged, iterations: 0 });
    }
    let project = |y: &Vector| -> Vector {
        let defect = &l.adjoint_unchecked(y) - x;
        y - &l.apply_unchecked(&pi.pinv.apply_unchecked(&defect))
    };
    let start = project(&Vector::zeros(l.rows()));
    infimum_over_affine(g, start, project, opts)
}

/// `inf { g(a + v) : v ∈ span(basis) }` for an orthonormal basis.
pub fn affine_infimum<G: ProxFunction + ?Sized>(g: &G, anchor: &Vector, basis: &[Vector], opts: &SolverOpts) -> Result<InfimumReport> {
    check_dim(g.dim(), anchor.dim())?;
    if basis.is_empty() {
        let value = g.eval(anchor)?.to_f64();
        return Ok(InfimumReport { value, point: Some(anchor.clone()), status: SolveStatus::Converged, iterations: 0 });
    }
    let project = |y: &Vector| -> Vector {
        let d = y - anchor;
        basis.iter().fold(anchor.clone(), |acc, b| acc.axpy(b.dot(&d), b))
    };
    infimum_over_affine(g, anchor.clone(), project, opts)
}

/// `inf g`, by proximal-point iteration with growing steps; `−∞` when the
/// iterates escape with decreasing values.
pub fn global_infimum<G: ProxFunction + ?Sized>(g: &G, opts: &SolverOpts) -> Result<InfimumReport> {
    let mut x = Vector::zeros(g.dim());
    let mut t = 1.0f64;
    let mut last: Option<f64> = None;
    for k in 1..=opts.max_iter {
        let next = g.prox(t, &x)?;
        let moved = next.dist(&x);
        x = next;
        if moved <= opts.tol * (1.0 + x.norm()) {
            let value = g.eval(&x)?.to_f64();
            return Ok(InfimumReport { value, point: Some(x), status: SolveStatus::Converged, iterations: k });
        }
        if x.norm() > opts.divergence_radius {
            let now = g.eval(&x)?.to_f64();
            if matches!(last, Some(prev) if now < prev) {
                return Ok(InfimumReport {
                    value: f64::NEG_INFINITY,
                    point: None,
                    status: SolveStatus::Diverged,
                    iterations: k,
                });
            }
            last = Some(now);
        }
        t = (2.0 * t).min(1e12);
    }
    let value = g.eval(&x)?.to_f64();
    Ok(InfimumReport { value, point: Some(x), status: SolveStatus::MaxIter, iterations: opts.max_iter })
}

/// One row of a γ-sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub composition: ExtReal,
    pub cocomposition: ExtReal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub composition_monotone: bool,
    pub cocomposition_monotone: bool,
    pub slack: f64,
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() {
        return Err(Error::param("empty gamma list"));
    }
    for g in gammas {
        check_gamma(*g)?;
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("gammas must be strictly increasing"));
    }
    Ok(())
}

/// Whether the sequence is non-increasing up to `slack`.
pub fn non_increasing(values: &[ExtReal], slack: f64) -> bool {
    values.windows(2).all(|w| match (w[0], w[1]) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => b <= a + slack,
        (ExtReal::PlusInfinity, _) => true,
        (ExtReal::Finite(_), ExtReal::PlusInfinity) => false,
    })
}

/// Both values at every `γ` (strictly increasing), with monotonicity flags.
pub fn gamma_sweep<G: ProxFunction>(
    l: &DenseMap,
    g: &G,
    x: &Vector,
    gammas: &[f64],
    opts: &SolverOpts,
    slack: f64,
    exec: Execution,
) -> Result<SweepReport> {
    check_gammas(gammas)?;
    let base = CompositionSpec::new(l.clone(), g, gammas[0])?;
    let rows = exec.try_map(gammas.len(), |i| -> Result<SweepRow> {
        let spec = CompositionSpec::new(base.l.clone(), &base.g, gammas[i])?;
        let _ = spec.gram_pinv.set(base.gram_pinv().cloned());
        Ok(SweepRow {
            gamma: gammas[i],
            composition: eval_composition(&spec, x, opts)?.value,
            cocomposition: eval_cocomposition(&spec, x, opts)?.value,
        })
    })?;
    let comp: Vec<ExtReal> = rows.iter().map(|r| r.composition).collect();
    let coco: Vec<ExtReal> = rows.iter().map(|r| r.cocomposition).collect();
    Ok(SweepReport {
        composition_monotone: non_increasing(&comp, slack),
        cocomposition_monotone: non_increasing(&coco, slack),
        rows,
        slack,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub gamma: f64,
    pub value: f64,
    /// `target − value`
    pub gap: f64,
    /// `γβ²/2 + tol` when `g` is `β`-Lipschitz
    pub bound: Option<f64>,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallGammaReport {
    /// `g(Lx)`
    pub target: f64,
    pub lipschitz: Option<f64>,
    pub rows: Vec<GapRow>,
    pub all_within: bool,
}

/// Gaps `g(Lx) − (L ⊙γ g)(x)` along a sequence of `γ`, checked against
/// `[−tol, γβ²/2 + tol]` when `g` is `β`-Lipschitz (`[−tol, ∞)` otherwise).
pub fn limit_small_gamma<G: ProxFunction>(
    l: &DenseMap,
    g: &G,
    x: &Vector,
    gammas: &[f64],
    opts: &SolverOpts,
    tol: f64,
) -> Result<SmallGammaReport> {
    let target = g.eval(&l.apply(x)?)?.to_f64();
    let beta = g.lipschitz_bound();
    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let spec = CompositionSpec::new(l.clone(), g, gamma)?;
        let value = eval_cocomposition(&spec, x, opts)?.to_f64();
        let gap = target - value;
        let bound = beta.map(|b| gamma * b * b / 2.0 + tol);
        let within = gap >= -tol && bound.is_none_or(|b| gap <= b);
        rows.push(GapRow { gamma, value, gap, bound, within });
    }
    let all_within = rows.iter().all(|r| r.within);
    Ok(SmallGammaReport { target, lipschitz: beta, rows, all_within })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LargeGammaCase {
    /// `‖L‖ < 1`: the cocomposition tends to `inf g`.
    Contraction,
    /// `‖L‖ = 1`: the cocomposition tends to `inf g` over `Lx − ran(Id − LL*)`.
    UnitNorm,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LargeGammaReport {
    pub case: LargeGammaCase,
    /// `(L* ▷ g)(x)`
    pub composition_target: f64,
    pub cocomposition_target: f64,
    pub rows: Vec<SweepRow>,
    /// last composition value minus its target
    pub composition_gap: f64,
    /// last cocomposition value minus its target
    pub cocomposition_gap: f64,
}

/// The `γ → ∞` targets of both objects and the tail of a sweep.
pub fn limit_large_gamma<G: ProxFunction>(
    l: &DenseMap,
    g: &G,
    x: &Vector,
    gammas: &[f64],
    opts: &SolverOpts,
    exec: Execution,
) -> Result<LargeGammaReport> {
    let composition_target = infimal_postcomposition(l, g, x, opts)?.value;
    let (case, cocomposition_target) = cocomposition_limit(l, g, x, opts)?;
    let sweep = gamma_sweep(l, g, x, gammas, opts, f64::INFINITY, exec)?;
    let last = sweep.rows.last().expect("nonempty");
    Ok(LargeGammaReport {
        case,
        composition_target,
        cocomposition_target,
        composition_gap: last.composition.to_f64() - composition_target,
        cocomposition_gap: last.cocomposition.to_f64() - cocomposition_target,
        rows: sweep.rows,
    })
}

/// `lim_{γ→∞} (L ⊙γ g)(x)` and which case applies.
pub fn cocomposition_limit<G: ProxFunction + ?Sized>(
    l: &DenseMap,
    g: &G,
    x: &Vector,
    opts: &SolverOpts,
) -> Result<(LargeGammaCase, f64)> {
    if l.norm() < 1.0 - ADMISSIBILITY_TOL {
        return Ok((LargeGammaCase::Contraction, global_infimum(g, opts)?.value));
    }
    let a = DenseMap::identity(l.rows()).sub(&l.cogram())?;
    let basis = pseudo_inverse_small(&a, 1e-9)?.range_basis;
    let value = affine_infimum(g, &l.apply(x)?, &basis, opts)?.value;
    Ok((LargeGammaCase::UnitNorm, value))
}

/// Minimizes the cocomposition through `x ↦ env_γ g(Lx)`, which has the same
/// minimizers and infimum. `value` is the infimum, `argpoint` a minimizer.
pub fn argmin_cocomposition<G: ProxFunction>(spec: &CompositionSpec<G>, opts: &SolverOpts) -> Result<SolveReport> {
    argmin_cocomposition_from(spec, &Vector::zeros(spec.dim()), opts)
}

pub fn argmin_cocomposition_from<G: ProxFunction>(
    spec: &CompositionSpec<G>,
    x0: &Vector,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    check_dim(spec.dim(), x0.dim())?;
    let (l, gamma) = (&spec.l, spec.gamma);
    let f = |x: &Vector| envelope(&spec.g, gamma, &l.apply_unchecked(x));
    let grad = |x: &Vector| -> Result<Vector> {
        let lx = l.apply_unchecked(x);
        let p = spec.g.prox(gamma, &lx)?;
        Ok(l.adjoint_unchecked(&(&lx - &p)).scale(1.0 / gamma))
    };
    let lip = l.norm_bound().powi(2) / gamma;
    let it = gradient_descent(x0.clone(), lip, grad, f, opts)?;
    if it.status == SolveStatus::Diverged {
        return Ok(SolveReport::diverged(it.iterations, it.residual));
    }
    Ok(SolveReport {
        value: ExtReal::Finite(f(&it.point)?),
        argpoint: Some(it.point),
        iterations: it.iterations,
        status: it.status,
        residual: it.residual,
        gap: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizerRow {
    pub gamma: f64,
    pub infimum: f64,
    pub argpoint: Option<Vector>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimizerReport {
    pub rows: Vec<MinimizerRow>,
    /// `min g∘L`, approximated by the infimum at `γ = 2⁻²⁰`
    pub reference: f64,
    /// infima nondecreasing as `γ` decreases (up to `slack`)
    pub nondecreasing: bool,
}

/// Infima of the cocomposition along a decreasing sequence of `γ`, each solve
/// warm-started at the previous minimizer.
pub fn minimizer_convergence<G: ProxFunction>(
    l: &DenseMap,
    g: &G,
    gammas: &[f64],
    opts: &SolverOpts,
    slack: f64,
) -> Result<MinimizerReport> {
    if gammas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("gammas must be strictly decreasing"));
    }
    let mut x0 = Vector::zeros(l.cols());
    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let spec = CompositionSpec::new(l.clone(), g, gamma)?;
        let r = argmin_cocomposition_from(&spec, &x0, opts)?;
        if let Some(p) = &r.argpoint {
            x0 = p.clone();
        }
        rows.push(MinimizerRow { gamma, infimum: r.to_f64(), argpoint: r.argpoint });
    }
    let spec = CompositionSpec::new(l.clone(), g, 2f64.powi(-20))?;
    let reference = argmin_cocomposition_from(&spec, &x0, opts)?.to_f64();
    let nondecreasing = rows.windows(2).all(|w| w[1].infimum >= w[0].infimum - slack);
    Ok(MinimizerReport { rows, reference, nondecreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moreau::{grid_oracle, Grid, GridProblem};

    fn s(v: f64) -> Vector {
        Vector::scalar(v)
    }

    fn half_abs() -> CompositionSpec {
        CompositionSpec::new(DenseMap::scalar(0.5), ConvexFunction::abs(), 1.0).unwrap()
    }

    fn opts() -> SolverOpts {
        SolverOpts::default()
    }

    #[test]
    fn admissibility() {
        assert!(admissible(&DenseMap::identity(2)));
        assert!(!admissible(&DenseMap::zeros(2, 2)));
        assert!(!admissible(&DenseMap::identity(2).scale(2.0)));
        assert!(matches!(
            CompositionSpec::new(DenseMap::scalar(2.0), ConvexFunction::abs(), 1.0),
            Err(Error::Admissibility(_))
        ));
    }

    #[test]
    fn worked_cocomposition_value() {
        // sup_{|y| ≤ 1} y/2 − 3y²/8 on a fine grid
        let f = |y: &Vector| {
            Ok(if y[0].abs() <= 1.0 { ExtReal::Finite(3.0 * y[0] * y[0] / 8.0) } else { ExtReal::PlusInfinity })
        };
        let xs = s(0.5);
        let grid = grid_oracle(&GridProblem::Conjugate { f: &f, xstar: &xs }, &Grid::new(-1.0, 1.0, 2001).unwrap(), None)
            .unwrap();
        assert!((grid.value.to_f64() - 1.0 / 6.0).abs() < 1e-6);
        let r = eval_cocomposition(&half_abs(), &s(1.0), &opts()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged);
        assert!((r.to_f64() - 1.0 / 6.0).abs() < 1e-9, "{}", r.to_f64());
        assert!(r.gap.unwrap() < 1e-8);
        assert!((r.argpoint.unwrap()[0] - 2.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn worked_composition_value() {
        let r = eval_composition(&half_abs(), &s(0.5), &opts()).unwrap();
        assert!((r.to_f64() - 1.375).abs() < 1e-7, "{:?}", r);
        assert!(r.gap.unwrap() < 1e-6);
    }

    #[test]
    fn composition_outside_domain() {
        let proj = DenseMap::diag(&[1.0, 0.0]);
        let spec = CompositionSpec::new(proj, ConvexFunction::eucl_norm(2), 1.0).unwrap();
        let r = eval_composition(&spec, &Vector::from(vec![3.0, 0.0]), &opts()).unwrap();
        assert!((r.to_f64() - 3.0).abs() < 1e-7);
        let r = eval_composition(&spec, &Vector::from(vec![3.0, 4.0]), &opts()).unwrap();
        assert_eq!(r.status, SolveStatus::Diverged);
        assert_eq!(r.value, ExtReal::PlusInfinity);
        // heuristic route: indicator g, x outside L*(dom g)
        let spec = CompositionSpec::new(
            DenseMap::scalar(0.5),
            ConvexFunction::indicator_ball(Vector::zeros(1), 1.0).unwrap(),
            1.0,
        )
        .unwrap();
        let r = eval_composition(&spec, &s(0.8), &opts()).unwrap();
        assert_eq!(r.value, ExtReal::PlusInfinity);
    }

    #[test]
    fn projection_example() {
        let proj = DenseMap::diag(&[1.0, 0.0]);
        for gamma in [0.3, 1.0, 5.0] {
            let spec = CompositionSpec::new(proj.clone(), ConvexFunction::eucl_norm(2), gamma).unwrap();
            let r = eval_cocomposition(&spec, &Vector::from(vec![3.0, 4.0]), &opts()).unwrap();
            assert!((r.to_f64() - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_cases() {
        let spec = CompositionSpec::new(DenseMap::identity(1), ConvexFunction::eucl_norm(1), 1.0).unwrap();
        assert!(eval_cocomposition(&spec, &s(0.0), &opts()).unwrap().to_f64().abs() < 1e-12);
        assert!((eval_composition(&spec, &s(2.0), &opts()).unwrap().to_f64() - 2.0).abs() < 1e-7);
        assert_eq!(prox_composition(&spec, &s(3.0)).unwrap(), s(2.0));
        assert_eq!(prox_cocomposition(&spec, &s(3.0)).unwrap(), s(2.0));
    }

    #[test]
    fn worked_prox_values() {
        let spec = half_abs();
        assert_eq!(prox_composition(&spec, &s(2.0)).unwrap(), s(0.0));
        assert_eq!(prox_composition(&spec, &s(4.0)).unwrap(), s(0.5));
        assert_eq!(prox_cocomposition(&spec, &s(2.0)).unwrap(), s(1.5));
        let (p, g) = subgradient_witness_cocomposition(&spec, &s(2.0)).unwrap();
        assert_eq!((p, g), (s(1.5), s(0.5)));
    }

    #[test]
    fn worked_envelope_and_perspective() {
        let spec = half_abs();
        assert!((envelope_cocomposition(&spec, 1.0, &s(2.0), &opts()).unwrap() - 0.5).abs() < 1e-15);
        let p = perspective_cocomposition(&spec, &s(2.0), 2.0, &opts()).unwrap().to_f64();
        assert!((p - 1.0 / 3.0).abs() < 1e-8);
        let spec = CompositionSpec::new(DenseMap::scalar(0.5), ConvexFunction::eucl_norm(1), 1.0).unwrap();
        assert_eq!(perspective_cocomposition(&spec, &s(2.0), 0.0, &opts()).unwrap(), ExtReal::Finite(1.0));
        assert_eq!(perspective_cocomposition(&spec, &s(2.0), -1.0, &opts()).unwrap(), ExtReal::PlusInfinity);
        assert_eq!(recession_cocomposition(&spec, &s(2.0)).unwrap(), ExtReal::Finite(1.0));
    }

    #[test]
    fn envelope_off_parameter_matches_direct_moreau_infimum() {
        let spec = half_abs();
        let x = s(1.7);
        for rho in [0.4, 2.5] {
            let direct = crate::moreau::golden_section(
                |y| Ok(eval_cocomposition(&spec, &s(y), &opts())?.to_f64() + (1.7 - y).powi(2) / (2.0 * rho)),
                -3.0,
                4.0,
                1e-9,
            )
            .unwrap()
            .1;
            let got = envelope_cocomposition(&spec, rho, &x, &opts()).unwrap();
            assert!((got - direct).abs() < 1e-7, "rho {rho}: {got} vs {direct}");
        }
    }

    #[test]
    fn wrappers_value_at_prox_points() {
        let spec = CompositionSpec::new(
            DenseMap::from_rows(&[vec![0.6, 0.2], vec![-0.1, 0.5]]).unwrap(),
            ConvexFunction::l1_norm(2),
            0.8,
        )
        .unwrap();
        let u = Vector::from(vec![1.3, -0.7]);
        let coco = CocompositionFn { spec: spec.clone(), opts: opts() };
        let (p, v) = coco.prox_with_value(0.8, &u).unwrap();
        assert!((v.to_f64() - coco.eval(&p).unwrap().to_f64()).abs() < 1e-8);
        let comp = CompositionFn { spec, opts: opts() };
        let (p, v) = comp.prox_with_value(0.8, &u).unwrap();
        assert!((v.to_f64() - comp.eval(&p).unwrap().to_f64()).abs() < 1e-7);
        assert!(matches!(comp.prox(0.5, &u), Err(Error::UnsupportedProx(_))));
    }

    #[test]
    fn sweep_is_monotone() {
        let r = gamma_sweep(
            &DenseMap::scalar(0.5),
            &ConvexFunction::abs(),
            &s(1.0),
            &[0.25, 1.0, 4.0],
            &opts(),
            1e-7,
            Execution::default(),
        )
        .unwrap();
        assert!(r.composition_monotone && r.cocomposition_monotone);
        let c: Vec<f64> = r.rows.iter().map(|r| r.cocomposition.to_f64()).collect();
        assert!(c[0] > c[1] && c[1] > c[2]);
        assert!(gamma_sweep(&DenseMap::scalar(0.5), &ConvexFunction::abs(), &s(1.0), &[1.0, 0.5], &opts(), 0.0, Execution::default())
            .is_err());
    }

    #[test]
    fn small_and_large_gamma() {
        let r = limit_small_gamma(&DenseMap::scalar(0.5), &ConvexFunction::abs(), &s(1.0), &[1.0, 1e-3], &opts(), 1e-8)
            .unwrap();
        assert!(r.all_within);
        assert!((r.rows[0].gap - 1.0 / 3.0).abs() < 1e-8);
        let r = limit_large_gamma(&DenseMap::scalar(0.5), &ConvexFunction::abs(), &s(0.5), &[64.0, 1024.0], &opts(), Execution::default())
            .unwrap();
        assert_eq!(r.case, LargeGammaCase::Contraction);
        assert!((r.composition_target - 1.0).abs() < 1e-8);
        assert!(r.cocomposition_target.abs() < 1e-12);
        assert!(r.cocomposition_gap.abs() < 1e-3 && r.composition_gap.abs() < 1e-3);
    }

    #[test]
    fn argmin_of_shifted_huber() {
        let g = ConvexFunction::abs().translate(s(1.0)).unwrap();
        for gamma in [0.1, 1.0, 3.0] {
            let spec = CompositionSpec::new(DenseMap::scalar(0.5), g.clone(), gamma).unwrap();
            let r = argmin_cocomposition(&spec, &opts()).unwrap();
            assert!((r.argpoint.as_ref().unwrap()[0] - 2.0).abs() < 1e-6);
            assert!(r.to_f64().abs() < 1e-10);
        }
    }
}
