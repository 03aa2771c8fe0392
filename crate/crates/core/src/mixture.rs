//! Finite proximal mixtures `Rγ(Lₖ, gₖ)` and comixtures `R⊙γ(Lₖ, gₖ)`,
//! proximal averages and sampled proximal expectations.
//!
//! A family `(αₖ, Lₖ, gₖ)` is reduced to a single composition on the direct
//! sum `G₁ ⊕ … ⊕ G_p`: block `k` of the stacked operator is `√αₖ Lₖ` and block
//! `k` of the stacked function is `y ↦ αₖ gₖ(y/√αₖ)`, whose prox is
//! `y ↦ √αₖ prox_{γgₖ}(y/√αₖ)`. The rescaling turns the weighted inner
//! product `Σ αₖ⟨yₖ, zₖ⟩` into the standard one.

use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::exec::Execution;
use crate::funcat::{check_gamma, Block, ConvexFunction, ExtReal, ProxFunction};
use crate::linalg::{pseudo_inverse_small, DenseMap, PseudoInverse, Vector, DEFAULT_RANK_TOL};
use crate::moreau::{envelope, grid_oracle, Grid, GridProblem, SolveReport, SolveStatus, SolverOpts};
use crate::proxcomp::{
    cocomposition_dual, composition_conjugate, eval_cocomposition, eval_composition, infimal_postcomposition,
    non_increasing, prox_cocomposition, prox_composition, CompositionSpec, InfimumReport, Term, ADMISSIBILITY_TOL,
};
use crate::solver::gradient_descent;

/// One member `(α, L, g)` of a family.
#[derive(Clone, Debug)]
pub struct MixtureTerm<G = ConvexFunction> {
    pub alpha: f64,
    pub l: DenseMap,
    pub g: G,
}

/// A finite family `(αₖ, Lₖ, gₖ)` with parameter `γ`.
#[derive(Clone, Debug)]
pub struct MixtureSpec<G = ConvexFunction> {
    terms: Vec<MixtureTerm<G>>,
    gamma: f64,
    gram_pinv: OnceLock<Option<PseudoInverse>>,
}

impl<G: ProxFunction> MixtureSpec<G> {
    pub fn new(terms: Vec<MixtureTerm<G>>, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let first = terms.first().ok_or_else(|| Error::param("a mixture needs at least one term"))?;
        let n = first.l.cols();
        for (k, t) in terms.iter().enumerate() {
            if !(t.alpha > 0.0 && t.alpha.is_finite()) {
                return Err(Error::param(format!("term {k}: weight must be positive")));
            }
            check_dim(n, t.l.cols())?;
            check_dim(t.l.rows(), t.g.dim())?;
        }
        let budget: f64 = terms.iter().map(|t| t.alpha * t.l.norm().powi(2)).sum();
        if !(budget > 0.0 && budget <= 1.0 + ADMISSIBILITY_TOL) {
            return Err(Error::Admissibility(format!("need 0 < Σ αₖ‖Lₖ‖² ≤ 1, got {budget}")));
        }
        Ok(MixtureSpec { terms, gamma, gram_pinv: OnceLock::new() })
    }

    pub fn terms(&self) -> &[MixtureTerm<G>] {
        &self.terms
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Dimension of the common domain.
    pub fn dim(&self) -> usize {
        self.terms[0].l.cols()
    }

    /// `Σ αₖ ‖Lₖ‖²`
    pub fn budget(&self) -> f64 {
        self.terms.iter().map(|t| t.alpha * t.l.norm().powi(2)).sum()
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self>
    where
        G: Clone,
    {
        check_gamma(gamma)?;
        Ok(MixtureSpec { terms: self.terms.clone(), gamma, gram_pinv: self.gram_pinv.clone() })
    }

    /// `(Σ αₖ Lₖ*Lₖ)†`, available for domains of dimension at most 32.
    pub fn gram_pinv(&self) -> Option<&PseudoInverse> {
        self.gram_pinv
            .get_or_init(|| {
                let n = self.dim();
                let mut data = vec![0.0; n * n];
                for t in &self.terms {
                    let g = t.l.gram();
                    for i in 0..n {
                        for j in 0..n {
                            data[i * n + j] += t.alpha * g.get(i, j);
                        }
                    }
                }
                DenseMap::new(n, n, data).ok().and_then(|a| pseudo_inverse_small(&a, DEFAULT_RANK_TOL).ok())
            })
            .as_ref()
    }

    fn engine_terms(&self) -> Vec<Term<'_>> {
        self.terms.iter().map(|t| Term { alpha: t.alpha, l: &t.l, g: &t.g }).collect()
    }

    /// The stacked operator and function of the direct-sum reduction.
    pub fn embed(&self) -> Result<DirectSumEmbedding<&G>> {
        let maps: Vec<DenseMap> = self.terms.iter().map(|t| t.l.scale(t.alpha.sqrt())).collect();
        let stacked_map = DenseMap::vstack(&maps)?;
        let mut start = 0;
        let blocks = self
            .terms
            .iter()
            .map(|t| {
                let end = start + t.l.rows();
                let b = StackedBlock { alpha: t.alpha, start, end, g: &t.g };
                start = end;
                b
            })
            .collect();
        Ok(DirectSumEmbedding { stacked_map, stacked_fun: StackedFunction { blocks, dim: start } })
    }

    /// The embedding as a composition spec with the family's parameter.
    pub fn embedded_spec(&self) -> Result<CompositionSpec<StackedFunction<&G>>> {
        let e = self.embed()?;
        CompositionSpec::new(e.stacked_map, e.stacked_fun, self.gamma)
    }
}

impl MixtureSpec<ConvexFunction> {
    /// The stacked function as a catalog separable sum with blocks
    /// `αₖ gₖ(·/√αₖ)`.
    pub fn stacked_convex(&self) -> Result<ConvexFunction> {
        let mut start = 0;
        let mut blocks = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let end = start + t.l.rows();
            let function = t.g.clone().scale_arg(1.0 / t.alpha.sqrt())?;
            blocks.push(Block { weight: t.alpha, start, end, function });
            start = end;
        }
        ConvexFunction::separable_sum(blocks)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    alpha: f64,
    #[serde(rename = "L")]
    l: DenseMap,
    g: ConvexFunction,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureSpecRepr {
    gamma: f64,
    terms: Vec<TermRepr>,
}

impl Serialize for MixtureSpec<ConvexFunction> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms =
            self.terms.iter().map(|t| TermRepr { alpha: t.alpha, l: t.l.clone(), g: t.g.clone() }).collect();
        MixtureSpecRepr { gamma: self.gamma, terms }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MixtureSpec<ConvexFunction> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MixtureSpecRepr::deserialize(d)?;
        let terms = r.terms.into_iter().map(|t| MixtureTerm { alpha: t.alpha, l: t.l, g: t.g }).collect();
        MixtureSpec::new(terms, r.gamma).map_err(serde::de::Error::custom)
    }
}

/// The family with identity operators: its mixture is the proximal average
/// of the `fₖ` (for probability weights).
pub fn proximal_average<G: ProxFunction>(family: Vec<(f64, G)>, gamma: f64) -> Result<MixtureSpec<G>> {
    let terms = family
        .into_iter()
        .map(|(alpha, g)| MixtureTerm { alpha, l: DenseMap::identity(g.dim()), g })
        .collect();
    MixtureSpec::new(terms, gamma)
}

#[derive(Clone, Debug)]
pub struct StackedBlock<G> {
    pub alpha: f64,
    pub start: usize,
    pub end: usize,
    pub g: G,
}

/// `ŷ ↦ Σ αₖ gₖ(ŷₖ/√αₖ)` on the direct sum.
#[derive(Clone, Debug)]
pub struct StackedFunction<G> {
    pub blocks: Vec<StackedBlock<G>>,
    dim: usize,
}

impl<G: ProxFunction> StackedFunction<G> {
    fn each<R>(&self, y: &Vector, f: impl Fn(&StackedBlock<G>, Vector) -> Result<R>) -> Result<Vec<R>> {
        check_dim(self.dim, y.dim())?;
        self.blocks.iter().map(|b| f(b, y.slice(b.start, b.end).scale(1.0 / b.alpha.sqrt()))).collect()
    }
}

impl<G: ProxFunction> ProxFunction for StackedFunction<G> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, y: &Vector) -> Result<ExtReal> {
        let vals = self.each(y, |b, v| Ok(b.g.eval(&v)?.scale(b.alpha)))?;
        Ok(vals.into_iter().fold(ExtReal::ZERO, |a, v| a + v))
    }

    fn prox(&self, gamma: f64, y: &Vector) -> Result<Vector> {
        let parts = self.each(y, |b, v| Ok(b.g.prox(gamma, &v)?.scale(b.alpha.sqrt())))?;
        Ok(Vector::concat(parts.iter()))
    }

    fn prox_with_value(&self, gamma: f64, y: &Vector) -> Result<(Vector, ExtReal)> {
        let parts = self.each(y, |b, v| {
            let (p, val) = b.g.prox_with_value(gamma, &v)?;
            Ok((p.scale(b.alpha.sqrt()), val.scale(b.alpha)))
        })?;
        let value = parts.iter().fold(ExtReal::ZERO, |a, (_, v)| a + *v);
        Ok((Vector::concat(parts.iter().map(|(p, _)| p)), value))
    }

    /// `Σ αₖ gₖ*(sₖ/√αₖ)`
    fn conjugate(&self, s: &Vector) -> Result<ExtReal> {
        let vals = self.each(s, |b, v| Ok(b.g.conjugate(&v)?.scale(b.alpha)))?;
        Ok(vals.into_iter().fold(ExtReal::ZERO, |a, v| a + v))
    }

    /// `Σ √αₖ (rec gₖ)(yₖ)`
    fn recession(&self, y: &Vector) -> Result<ExtReal> {
        check_dim(self.dim, y.dim())?;
        let mut acc = ExtReal::ZERO;
        for b in &self.blocks {
            acc = acc + b.g.recession(&y.slice(b.start, b.end))?.scale(b.alpha.sqrt());
        }
        Ok(acc)
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        let mut sq = 0.0;
        for b in &self.blocks {
            sq += b.alpha * b.g.lipschitz_bound()?.powi(2);
        }
        Some(sq.sqrt())
    }

    fn full_domain(&self) -> bool {
        self.blocks.iter().all(|b| b.g.full_domain())
    }

    fn closed_form(&self) -> bool {
        self.blocks.iter().all(|b| b.g.closed_form())
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.blocks.iter().map(|b| format!("{}·{}", b.alpha, b.g.describe())).collect();
        format!("stacked[{}]", parts.join(", "))
    }
}

/// Stacked operator and function of the direct-sum reduction.
#[derive(Clone, Debug)]
pub struct DirectSumEmbedding<G> {
    pub stacked_map: DenseMap,
    pub stacked_fun: StackedFunction<G>,
}

/// A value computed two ways: on the direct-sum embedding and from the
/// defining weighted sum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoPathReport {
    pub direct_sum: SolveReport,
    pub defining: SolveReport,
}

impl TwoPathReport {
    pub fn value(&self) -> ExtReal {
        self.direct_sum.value
    }

    pub fn to_f64(&self) -> f64 {
        self.direct_sum.to_f64()
    }

    /// `|direct_sum − defining|`, `0` when both are `+∞`.
    pub fn discrepancy(&self) -> f64 {
        match (self.direct_sum.value, self.defining.value) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs(),
            (ExtReal::PlusInfinity, ExtReal::PlusInfinity) => 0.0,
            _ => f64::INFINITY,
        }
    }
}

/// `Rγ(Lₖ, gₖ)(x)`, through the embedding and through the weighted sum
/// `(Σ αₖ env_{1/γ}(gₖ*) ∘ Lₖ)* − ‖·‖²/(2γ)`.
pub fn mixture_eval<G: ProxFunction>(spec: &MixtureSpec<G>, x: &Vector, opts: &SolverOpts) -> Result<TwoPathReport> {
    check_dim(spec.dim(), x.dim())?;
    let direct_sum = eval_composition(&spec.embedded_spec()?, x, opts)?;
    let defining = composition_conjugate(&spec.engine_terms(), spec.gamma, x, opts, spec.gram_pinv(), false)?;
    Ok(TwoPathReport { direct_sum, defining })
}

/// `R⊙γ(Lₖ, gₖ)(x)`, through the embedding and through weighted dual ascent
/// over `(yₖ)`.
pub fn comixture_eval<G: ProxFunction>(spec: &MixtureSpec<G>, x: &Vector, opts: &SolverOpts) -> Result<TwoPathReport> {
    check_dim(spec.dim(), x.dim())?;
    let direct_sum = eval_cocomposition(&spec.embedded_spec()?, x, opts)?;
    let defining = cocomposition_dual(&spec.engine_terms(), spec.gamma, x, opts)?;
    Ok(TwoPathReport { direct_sum, defining })
}

/// `Σ αₖ Lₖ* prox_{γgₖ}(Lₖx)`
pub fn mixture_prox<G: ProxFunction>(spec: &MixtureSpec<G>, x: &Vector) -> Result<Vector> {
    check_dim(spec.dim(), x.dim())?;
    let mut out = Vector::zeros(x.dim());
    for t in &spec.terms {
        let p = t.g.prox(spec.gamma, &t.l.apply_unchecked(x))?;
        out = out.axpy(t.alpha, &t.l.adjoint_unchecked(&p));
    }
    Ok(out)
}

/// `x − Σ αₖ Lₖ*(Lₖx − prox_{γgₖ}(Lₖx))`
pub fn comixture_prox<G: ProxFunction>(spec: &MixtureSpec<G>, x: &Vector) -> Result<Vector> {
    check_dim(spec.dim(), x.dim())?;
    let mut out = x.clone();
    for t in &spec.terms {
        let lx = t.l.apply_unchecked(x);
        let p = t.g.prox(spec.gamma, &lx)?;
        out = out.axpy(-t.alpha, &t.l.adjoint_unchecked(&(&lx - &p)));
    }
    Ok(out)
}

/// The two prox formulas applied to the embedding, for cross-checking.
pub fn embedded_proxes<G: ProxFunction>(spec: &MixtureSpec<G>, x: &Vector) -> Result<(Vector, Vector)> {
    let e = spec.embedded_spec()?;
    Ok((prox_composition(&e, x)?, prox_cocomposition(&e, x)?))
}

/// `env_γ R⊙γ(Lₖ, gₖ)(x) = Σ αₖ env_γ gₖ(Lₖx)`
pub fn comixture_envelope<G: ProxFunction>(spec: &MixtureSpec<G>, x: &Vector) -> Result<f64> {
    check_dim(spec.dim(), x.dim())?;
    let mut acc = 0.0;
    for t in &spec.terms {
        acc += t.alpha * envelope(&t.g, spec.gamma, &t.l.apply_unchecked(x))?;
    }
    Ok(acc)
}

/// `Σ αₖ gₖ(Lₖx)`
pub fn weighted_sum<G: ProxFunction>(spec: &MixtureSpec<G>, x: &Vector) -> Result<ExtReal> {
    check_dim(spec.dim(), x.dim())?;
    let mut acc = ExtReal::ZERO;
    for t in &spec.terms {
        acc = acc + t.g.eval(&t.l.apply_unchecked(x))?.scale(t.alpha);
    }
    Ok(acc)
}

/// `Σ αₖ (rec gₖ)(Lₖx)`
pub fn comixture_recession<G: ProxFunction>(spec: &MixtureSpec<G>, x: &Vector) -> Result<ExtReal> {
    check_dim(spec.dim(), x.dim())?;
    let mut acc = ExtReal::ZERO;
    for t in &spec.terms {
        acc = acc + t.g.recession(&t.l.apply_unchecked(x))?.scale(t.alpha);
    }
    Ok(acc)
}

/// Minimizes the comixture through `x ↦ Σ αₖ env_γ gₖ(Lₖx)`, which has the
/// same minimizers and infimum.
pub fn comixture_argmin<G: ProxFunction>(spec: &MixtureSpec<G>, opts: &SolverOpts) -> Result<SolveReport> {
    comixture_argmin_from(spec, &Vector::zeros(spec.dim()), opts)
}

pub fn comixture_argmin_from<G: ProxFunction>(
    spec: &MixtureSpec<G>,
    x0: &Vector,
    opts: &SolverOpts,
) -> Result<SolveReport> {
    let gamma = spec.gamma;
    let f = |x: &Vector| comixture_envelope(spec, x);
    let grad = |x: &Vector| -> Result<Vector> {
        let mut g = Vector::zeros(x.dim());
        for t in &spec.terms {
            let lx = t.l.apply_unchecked(x);
            let p = t.g.prox(gamma, &lx)?;
            g = g.axpy(t.alpha / gamma, &t.l.adjoint_unchecked(&(&lx - &p)));
        }
        Ok(g)
    };
    let lip: f64 = spec.terms.iter().map(|t| t.alpha * t.l.norm_bound().powi(2)).sum::<f64>() / gamma;
    let it = gradient_descent(x0.clone(), lip, grad, f, opts)?;
    if it.status == SolveStatus::Diverged {
        return Ok(SolveReport {
            value: ExtReal::PlusInfinity,
            argpoint: None,
            iterations: it.iterations,
            status: it.status,
            residual: it.residual,
            gap: None,
        });
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
pub struct ArgminSequenceRow {
    pub gamma: f64,
    pub infimum: f64,
    pub argpoint: Option<Vector>,
}

/// Infima of the comixture along a strictly decreasing `γ` sequence, each
/// warm-started at the previous minimizer; they increase towards
/// `min Σ αₖ gₖ∘Lₖ`.
pub fn comixture_argmin_sequence<G: ProxFunction + Clone>(
    spec: &MixtureSpec<G>,
    gammas: &[f64],
    opts: &SolverOpts,
) -> Result<Vec<ArgminSequenceRow>> {
    if gammas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("gammas must be strictly decreasing"));
    }
    let mut x0 = Vector::zeros(spec.dim());
    let mut rows = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let r = comixture_argmin_from(&spec.with_gamma(gamma)?, &x0, opts)?;
        if let Some(p) = &r.argpoint {
            x0 = p.clone();
        }
        rows.push(ArgminSequenceRow { gamma, infimum: r.to_f64(), argpoint: r.argpoint });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PcmReport {
    /// `(γ, Rγ(x))` along the tail
    pub tail: Vec<(f64, f64)>,
    pub tail_monotone: bool,
    /// `inf { Σ αₖ gₖ(yₖ) : Σ αₖ Lₖ* yₖ = x }` by splitting on the embedding
    pub pcm: InfimumReport,
    /// the same infimum by exhaustive search, when the stacked space has
    /// dimension at most 2
    pub oracle: Option<f64>,
    /// last tail value minus `pcm`
    pub gap: f64,
}

/// The `γ → ∞` behaviour of the mixture at `x`.
pub fn pcm_estimate<G: ProxFunction + Clone>(
    spec: &MixtureSpec<G>,
    x: &Vector,
    gamma_tail: &[f64],
    opts: &SolverOpts,
    exec: Execution,
) -> Result<PcmReport> {
    if gamma_tail.is_empty() {
        return Err(Error::param("empty gamma tail"));
    }
    let e = spec.embed()?;
    let pcm = infimal_postcomposition(&e.stacked_map, &e.stacked_fun, x, opts)?;
    let values = exec.try_map(gamma_tail.len(), |i| -> Result<ExtReal> {
        Ok(mixture_eval(&spec.with_gamma(gamma_tail[i])?, x, opts)?.value())
    })?;
    let tail_monotone = non_increasing(&values, 10.0 * opts.tol);
    let tail: Vec<(f64, f64)> = gamma_tail.iter().zip(&values).map(|(g, v)| (*g, v.to_f64())).collect();
    let oracle = if e.stacked_map.rows() <= 2 {
        let f = |y: &Vector| e.stacked_fun.eval(y);
        let grid = Grid::new(-4.0, 4.0, 2001)?;
        let problem = GridProblem::ConstrainedMin { f: &f, l: &e.stacked_map, x, constraint_tol: e.stacked_map.norm() * grid.step() };
        Some(grid_oracle(&problem, &grid, None)?.value.to_f64())
    } else {
        None
    };
    let gap = tail.last().expect("nonempty").1 - pcm.value;
    Ok(PcmReport { tail, tail_monotone, pcm, oracle, gap })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpectationReport {
    pub mean: Vector,
    /// componentwise standard error of the mean
    pub std_error: Vector,
    pub samples: usize,
}

/// Monte Carlo estimate of `prox_{γ PE}(x) = E[prox_{γ f_ω}(x)]`.
///
/// Parameters are drawn sequentially from a ChaCha8 stream seeded with
/// `seed`; the proxes are evaluated under `exec` and reduced in draw order,
/// so the estimate does not depend on the execution strategy.
#[allow(clippy::too_many_arguments)]
pub fn sampled_expectation_prox<P, G, S, F>(
    sampler: S,
    family: F,
    seed: u64,
    n_samples: usize,
    gamma: f64,
    x: &Vector,
    exec: Execution,
) -> Result<ExpectationReport>
where
    P: Send + Sync,
    G: ProxFunction,
    S: Fn(&mut ChaCha8Rng) -> P,
    F: Fn(&P) -> Result<G> + Sync + Send,
{
    check_gamma(gamma)?;
    if n_samples < 2 {
        return Err(Error::param("need at least two samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<P> = (0..n_samples).map(|_| sampler(&mut rng)).collect();
    let proxes = exec.try_map(n_samples, |i| -> Result<Vector> {
        let f = family(&params[i])?;
        check_dim(x.dim(), f.dim())?;
        f.prox(gamma, x)
    })?;
    let n = n_samples as f64;
    let mean = proxes.iter().fold(Vector::zeros(x.dim()), |acc, p| acc.axpy(1.0 / n, p));
    let var = proxes
        .iter()
        .fold(Vector::zeros(x.dim()), |acc, p| &acc + &(p - &mean).map(|d| d * d))
        .scale(1.0 / (n - 1.0));
    let std_error = var.map(|v| (v / n).sqrt());
    Ok(ExpectationReport { mean, std_error, samples: n_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcat::prox_conjugate;
    use crate::moreau::GridProblem;
    use rand::Rng;

    fn s(v: f64) -> Vector {
        Vector::scalar(v)
    }

    fn opts() -> SolverOpts {
        SolverOpts::default()
    }

    fn abs_quad() -> MixtureSpec {
        proximal_average(vec![(0.5, ConvexFunction::abs()), (0.5, ConvexFunction::quadratic(1))], 1.0).unwrap()
    }

    fn two_scalar() -> MixtureSpec {
        MixtureSpec::new(
            vec![
                MixtureTerm { alpha: 0.5, l: DenseMap::scalar(0.8), g: ConvexFunction::abs() },
                MixtureTerm {
                    alpha: 0.5,
                    l: DenseMap::scalar(-0.6),
                    g: ConvexFunction::abs().translate(s(0.5)).unwrap(),
                },
            ],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn budget_is_enforced() {
        let t = |a| MixtureTerm { alpha: a, l: DenseMap::identity(1), g: ConvexFunction::abs() };
        assert!(matches!(MixtureSpec::new(vec![t(0.7), t(0.7)], 1.0), Err(Error::Admissibility(_))));
        assert!(MixtureSpec::new(vec![t(0.5), t(0.5)], 1.0).is_ok());
        assert!(MixtureSpec::<ConvexFunction>::new(vec![], 1.0).is_err());
    }

    #[test]
    fn embedding_layout() {
        let spec = abs_quad();
        let e = spec.embed().unwrap();
        let r = 0.5f64.sqrt();
        assert_eq!(e.stacked_map, DenseMap::from_rows(&[vec![r], vec![r]]).unwrap());
        assert!(e.stacked_map.norm().powi(2) <= spec.budget() + 1e-9);
        let catalog = spec.stacked_convex().unwrap();
        for y in [vec![0.3, -2.0], vec![1.7, 0.4]] {
            let y = Vector::from(y);
            // ½|√2 y₁| + ½ (√2 y₂)²/2
            let want = 0.5 * (2f64.sqrt() * y[0]).abs() + 0.5 * y[1] * y[1];
            assert!((e.stacked_fun.eval(&y).unwrap().to_f64() - want).abs() < 1e-12);
            assert!((catalog.eval(&y).unwrap().to_f64() - want).abs() < 1e-12);
            for gamma in [0.3, 1.0] {
                let a = e.stacked_fun.prox(gamma, &y).unwrap();
                let b = ProxFunction::prox(&catalog, gamma, &y).unwrap();
                assert!(a.dist(&b) < 1e-12);
                let s = y.scale(0.7);
                let (c, d) = (e.stacked_fun.conjugate(&s).unwrap(), catalog.conjugate(&s).unwrap());
                assert!(c == d || (c.to_f64() - d.to_f64()).abs() < 1e-12, "{c} vs {d}");
            }
        }
    }

    #[test]
    fn proximal_average_prox() {
        let spec = abs_quad();
        assert_eq!(mixture_prox(&spec, &s(2.0)).unwrap(), s(1.0));
        assert_eq!(comixture_prox(&spec, &s(2.0)).unwrap(), s(1.0));
        let (a, b) = embedded_proxes(&spec, &s(2.0)).unwrap();
        assert!(a.dist(&s(1.0)) < 1e-12 && b.dist(&s(1.0)) < 1e-12);
    }

    #[test]
    fn proximal_average_mixture_equals_comixture() {
        let spec = abs_quad();
        for x in [-1.5, 0.2, 2.0] {
            let m = mixture_eval(&spec, &s(x), &opts()).unwrap();
            let c = comixture_eval(&spec, &s(x), &opts()).unwrap();
            assert!(m.discrepancy() < 2e-8 && c.discrepancy() < 2e-8, "{m:?} {c:?}");
            assert!((m.to_f64() - c.to_f64()).abs() < 1e-7);
        }
    }

    #[test]
    fn single_identity_term_is_g() {
        let spec = proximal_average(vec![(1.0, ConvexFunction::l1_norm(2))], 0.7).unwrap();
        let x = Vector::from(vec![0.4, -1.1]);
        assert!((mixture_eval(&spec, &x, &opts()).unwrap().to_f64() - 1.5).abs() < 1e-7);
        assert!((comixture_eval(&spec, &x, &opts()).unwrap().to_f64() - 1.5).abs() < 1e-9);
        assert_eq!(mixture_prox(&spec, &x).unwrap(), ConvexFunction::l1_norm(2).prox(0.7, &x).unwrap());
    }

    #[test]
    fn two_scalar_terms_against_constrained_grid() {
        let spec = two_scalar();
        let x = s(0.3);
        let m = mixture_eval(&spec, &x, &opts()).unwrap();
        assert!(m.discrepancy() < 2e-8);
        // minimize Σ α g(y) + γ⁻¹Φ(y) over the fibre {Σ αₖ Lₖ yₖ = x} in the embedded space
        let e = spec.embed().unwrap();
        let f = |y: &Vector| -> Result<ExtReal> {
            let phi = 0.5 * (y.norm_sq() - e.stacked_map.adjoint_unchecked(y).norm_sq());
            Ok(e.stacked_fun.eval(y)? + phi)
        };
        let grid = Grid::new(-3.0, 3.0, 2001).unwrap();
        let g = grid_oracle(
            &GridProblem::ConstrainedMin { f: &f, l: &e.stacked_map, x: &x, constraint_tol: grid.step() },
            &grid,
            None,
        )
        .unwrap();
        assert!((g.value.to_f64() - m.to_f64()).abs() < 1e-2, "{} vs {}", g.value, m.to_f64());
        assert!(g.value.to_f64() >= m.to_f64() - 1e-2);
    }

    #[test]
    fn sandwich_and_ordering() {
        let spec = two_scalar();
        for x in [-2.0, 0.0, 0.3, 1.4] {
            let x = s(x);
            let c = comixture_eval(&spec, &x, &opts()).unwrap();
            assert!(c.discrepancy() < 2e-8);
            let m = mixture_eval(&spec, &x, &opts()).unwrap();
            let env = comixture_envelope(&spec, &x).unwrap();
            let top = weighted_sum(&spec, &x).unwrap().to_f64();
            assert!(env - 1e-8 <= c.to_f64() && c.to_f64() <= top + 1e-8);
            assert!(c.to_f64() <= m.to_f64() + 1e-8);
        }
    }

    #[test]
    fn comixture_prox_against_grid() {
        let spec = two_scalar();
        let x = s(0.9);
        let f = |y: &Vector| Ok(comixture_eval(&spec, y, &opts())?.value());
        let grid = Grid::new(-0.5, 2.0, 501).unwrap();
        let g = grid_oracle(&GridProblem::Prox { f: &f, gamma: 1.0, x: &x }, &grid, None).unwrap();
        let p = comixture_prox(&spec, &x).unwrap();
        assert!(p.dist(g.point.as_ref().unwrap()) <= 2.0 * grid.step());
    }

    #[test]
    fn recession_and_argmin() {
        let spec = two_scalar();
        assert_eq!(comixture_recession(&spec, &s(2.0)).unwrap(), ExtReal::Finite(0.5 * 1.6 + 0.5 * 1.2));
        let avg = proximal_average(
            vec![
                (0.5, ConvexFunction::abs().translate(s(1.0)).unwrap()),
                (0.5, ConvexFunction::abs().translate(s(-1.0)).unwrap()),
            ],
            1.0,
        )
        .unwrap();
        let r = comixture_argmin(&avg, &opts()).unwrap();
        let p = r.argpoint.unwrap()[0];
        assert!((-1.0..=1.0).contains(&p));
        // min Σ α env = env of |·−1| and |·+1| averaged: 1 − γ/2 at the origin
        assert!((r.value.to_f64() - 0.5).abs() < 1e-6);
        let rows = comixture_argmin_sequence(&avg, &[1.0, 0.25, 1.0 / 64.0], &opts()).unwrap();
        assert!(rows.windows(2).all(|w| w[1].infimum >= w[0].infimum - 1e-9));
        assert!((rows[2].infimum - 1.0).abs() < 1e-2);
    }

    #[test]
    fn pcm_single_invertible_term() {
        let spec = MixtureSpec::new(
            vec![MixtureTerm { alpha: 1.0, l: DenseMap::scalar(0.5), g: ConvexFunction::abs() }],
            1.0,
        )
        .unwrap();
        let r = pcm_estimate(&spec, &s(0.5), &[16.0, 256.0, 4096.0], &opts(), Execution::default()).unwrap();
        assert!((r.pcm.value - 1.0).abs() < 1e-8);
        assert!(r.tail_monotone);
        assert!(r.gap >= -1e-7 && r.gap < 1e-2, "{r:?}");
        assert!((r.oracle.unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn expectation_matches_enumeration() {
        let x = s(0.4);
        let atoms = [-1.0, 0.0, 1.0];
        let sampler = |rng: &mut ChaCha8Rng| atoms[rng.random_range(0..3)];
        let family = |w: &f64| ConvexFunction::abs().translate(s(*w));
        let r = sampled_expectation_prox(sampler, family, 7, 10_000, 1.0, &x, Execution::default()).unwrap();
        let spec = proximal_average(atoms.iter().map(|w| (1.0 / 3.0, family(w).unwrap())).collect(), 1.0).unwrap();
        let exact = mixture_prox(&spec, &x).unwrap();
        let enumerated =
            atoms.iter().fold(Vector::zeros(1), |acc, w| acc.axpy(1.0 / 3.0, &family(w).unwrap().prox(1.0, &x).unwrap()));
        assert!(exact.dist(&enumerated) < 1e-15);
        assert!((r.mean[0] - exact[0]).abs() <= 3.0 * r.std_error[0]);
        let seq = sampled_expectation_prox(sampler, family, 7, 10_000, 1.0, &x, Execution::Sequential).unwrap();
        assert_eq!(seq, r);
        let one = sampled_expectation_prox(|_| 0.0, family, 1, 5, 1.0, &x, Execution::Sequential).unwrap();
        assert_eq!(one.mean, s(0.0));
    }

    #[test]
    fn conjugate_pairing_at_prox_witness() {
        // p = prox of the mixture at x, s = (x − p)/γ: f(p) + f*(s) = ⟨p, s⟩
        let spec = abs_quad();
        let x = s(1.3);
        let p = mixture_prox(&spec, &x).unwrap();
        let sg = &x - &p;
        let fp = mixture_eval(&spec, &p, &opts()).unwrap().to_f64();
        // f* = comixture of the conjugates for the proximal average
        let conj = proximal_average(
            vec![
                (0.5, ConvexFunction::abs().conjugate_function().unwrap()),
                (0.5, ConvexFunction::quadratic(1).conjugate_function().unwrap()),
            ],
            1.0,
        )
        .unwrap();
        let fs = comixture_eval(&conj, &sg, &opts()).unwrap().to_f64();
        assert!((fp + fs - p.dot(&sg)).abs() < 1e-6);
        assert!(prox_conjugate(&ConvexFunction::abs(), 1.0, &s(3.0)).unwrap().dist(&s(1.0)) < 1e-15);
    }
}
