//! Suites on proximal mixtures, comixtures, proximal averages and sampled
//! proximal expectations.

use super::*;

type FnGen = fn(&mut ChaCha8Rng, usize) -> Result<ConvexFunction>;

/// A random family of one to three terms on `R^cols`, rescaled so that
/// `Σ αₖ‖Lₖ‖²` lands in `[0.3, 0.95]`; weights sum to one when `probability`.
fn rmixture(rng: &mut ChaCha8Rng, dims: usize, gen: FnGen, probability: bool, gamma: f64) -> Result<MixtureSpec> {
    let cols = rdim(rng, dims);
    let m = rng.random_range(1..=3);
    let mut alphas: Vec<f64> = (0..m).map(|_| unif(rng, 0.2, 1.0)).collect();
    if probability {
        let total: f64 = alphas.iter().sum();
        alphas.iter_mut().for_each(|a| *a /= total);
    }
    let mut maps = Vec::with_capacity(m);
    for _ in 0..m {
        let rows = rdim(rng, dims);
        maps.push(rmap(rng, rows, cols, 0.3, 1.0)?);
    }
    let budget: f64 = alphas.iter().zip(&maps).map(|(a, l)| a * l.norm().powi(2)).sum();
    let s = (unif(rng, 0.3, 0.95) / budget).sqrt();
    let mut terms = Vec::with_capacity(m);
    for (alpha, l) in alphas.into_iter().zip(maps) {
        let g = gen(rng, l.rows())?;
        terms.push(MixtureTerm { alpha, l: l.scale(s), g });
    }
    MixtureSpec::new(terms, gamma)
}

/// The same family with every `gₖ` replaced by its conjugate.
fn conjugate_family(spec: &MixtureSpec, gamma: f64) -> Result<MixtureSpec> {
    let terms = spec
        .terms()
        .iter()
        .map(|t| -> Result<MixtureTerm> {
            let g = t.g.conjugate_function().ok_or_else(|| Error::UnsupportedConjugate(t.g.describe()))?;
            Ok(MixtureTerm { alpha: t.alpha, l: t.l.clone(), g })
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureSpec::new(terms, gamma)
}

fn family_inputs(spec: &MixtureSpec, x: &Vector) -> Value {
    let terms: Vec<Value> = spec.terms().iter().map(|t| json!({ "alpha": t.alpha, "L": t.l, "g": t.g })).collect();
    json!({ "terms": terms, "gamma": spec.gamma(), "x": x })
}

fn mix(spec: &MixtureSpec, x: &Vector, o: &SolverOpts) -> Result<(f64, f64)> {
    Ok(solved(&mixture_eval(spec, x, o)?.direct_sum))
}

fn comix(spec: &MixtureSpec, x: &Vector, o: &SolverOpts) -> Result<(f64, f64)> {
    Ok(solved(&comixture_eval(spec, x, o)?.direct_sum))
}

/// `Σ αₖ βₖ²` over Lipschitz members.
fn weighted_lipschitz_sq(spec: &MixtureSpec) -> f64 {
    spec.terms().iter().map(|t| t.alpha * t.g.lipschitz_bound().expect("Lipschitz family").powi(2)).sum()
}

pub(super) fn prop60(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let spec = rmixture(rng, dims, full_domain_fn, false, gamma)?;
        let x = rvec(rng, spec.dim(), 2.0);
        let inputs = family_inputs(&spec, &x);
        let m = mixture_eval(&spec, &x, &o)?;
        let c = comixture_eval(&spec, &x, &o)?;
        Ok(vec![
            at_most("mixture through the embedding", &inputs, 0.0, m.discrepancy(), 2.0 * o.tol),
            at_most("comixture through the embedding", &inputs, 0.0, c.discrepancy(), 2.0 * o.tol),
        ])
    }))
}

pub(super) fn thm65(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let z = rvec(rng, dims, 2.0);
        if i % 3 == 0 {
            let spec = rmixture(rng, dims, conjugable_fn, false, gamma)?;
            let z = z.slice(0, spec.dim());
            let inputs = family_inputs(&spec, &z);
            let dual = conjugate_family(&spec, 1.0 / gamma)?;
            let p = comixture_prox(&spec, &z)?;
            let s = (&z - &p).scale(1.0 / gamma);
            let (cp, cpe) = comix(&spec, &p, &o)?;
            let (ds, dse) = mix(&dual, &s, &o)?;
            let q = mixture_prox(&spec, &z)?;
            let t = (&z - &q).scale(1.0 / gamma);
            let (mq, mqe) = mix(&spec, &q, &o)?;
            let (dt, dte) = comix(&dual, &t, &o)?;
            let (ep, ec) = embedded_proxes(&spec, &z)?;
            Ok(vec![
                equal("conjugate of the comixture at a witness", &inputs, p.dot(&s), cp + ds, 1e-5 + cpe + dse),
                equal("conjugate of the mixture at a witness", &inputs, q.dot(&t), mq + dt, 1e-5 + mqe + dte),
                equal("mixture prox through the embedding", &inputs, 0.0, q.dist(&ep), 1e-10),
                equal("comixture prox through the embedding", &inputs, 0.0, p.dist(&ec), 1e-10),
            ])
        } else if i % 3 == 1 {
            let spec = rmixture(rng, dims, coercive_fn, false, gamma)?;
            let x = z.slice(0, spec.dim());
            let inputs = family_inputs(&spec, &x);
            let p = comixture_prox(&spec, &x)?;
            let (cp, cpe) = comix(&spec, &p, &o)?;
            let env = cp + x.dist(&p).powi(2) / (2.0 * gamma);
            let direct: f64 = spec
                .terms()
                .iter()
                .map(|t| Ok(t.alpha * envelope(&t.g, gamma, &t.l.apply(&x)?)?))
                .sum::<Result<f64>>()?;
            let lib = comixture_envelope(&spec, &x)?;
            let r = comixture_argmin(&spec, &o)?;
            let a = r.argpoint.clone().ok_or_else(|| Error::param("no minimizer"))?;
            let (ca, cae) = comix(&spec, &a, &o)?;
            let (cx, cxe) = comix(&spec, &x, &o)?;
            Ok(vec![
                equal("envelope of the comixture", &inputs, direct, env, eq_slack(&[cpe])),
                equal("library envelope of the comixture", &inputs, direct, lib, 1e-12 * (1.0 + direct.abs())),
                equal("comixture at the envelope minimizer", &inputs, r.to_f64(), ca, eq_slack(&[cae])),
                at_least("comixture above its infimum", &inputs, r.to_f64(), cx, eq_slack(&[cxe])),
            ])
        } else {
            let spec = rmixture(rng, dims, lipschitz_fn, true, gamma)?;
            let x = z.slice(0, spec.dim());
            let y = rvec(rng, spec.dim(), 2.0);
            let inputs = json!({ "family": family_inputs(&spec, &x), "y": y });
            let t = 1e4;
            let rec = comixture_recession(&spec, &x)?.to_f64();
            let (ct, cte) = comix(&spec, &x.scale(t), &o)?;
            let offset = (weighted_sum(&spec, &x.scale(t))?.to_f64() - t * rec).abs();
            let rec_slack = (gamma * weighted_lipschitz_sq(&spec) / 2.0 + offset + cte) / t + INEQUALITY_SLACK;
            let beta = spec.terms().iter().map(|t| t.g.lipschitz_bound().expect("Lipschitz family")).fold(0.0, f64::max);
            let (cx, cxe) = comix(&spec, &x, &o)?;
            let (cy, cye) = comix(&spec, &y, &o)?;
            Ok(vec![
                equal("recession quotient of the comixture", &inputs, rec, ct / t, rec_slack),
                at_most("comixture Lipschitz transfer", &inputs, beta * x.dist(&y), (cx - cy).abs(), 2.0 * o.tol + cxe + cye),
            ])
        }
    }))
}

/// Scalar family of two terms and the fibre oracle of its parallel
/// composition mean `inf { Σ αₖ gₖ(yₖ) : Σ αₖ lₖ yₖ = x }`.
struct ScalarPair {
    spec: MixtureSpec,
}

impl ScalarPair {
    fn stacked(&self) -> Result<DenseMap> {
        DenseMap::from_rows(&self.spec.terms().iter().map(|t| vec![t.alpha * t.l.get(0, 0)]).collect::<Vec<_>>())
    }

    fn pcm(&self, x: f64) -> Result<(f64, Option<Vector>)> {
        let terms = self.spec.terms();
        let h = |y: &Vector| -> Result<f64> {
            terms.iter().enumerate().map(|(k, t)| Ok(t.alpha * val(&t.g, &sv(y[k]))?)).sum()
        };
        fibre_min(&self.stacked()?, &h, &sv(x))
    }

    /// `½(Σ αₖ yₖ² − x²)`
    fn coupling(&self, y: &Vector, x: f64) -> f64 {
        let s: f64 = self.spec.terms().iter().enumerate().map(|(k, t)| t.alpha * y[k] * y[k]).sum();
        0.5 * (s - x * x)
    }
}

fn scalar_pair(rng: &mut ChaCha8Rng, gen: FnGen, unit: bool, gamma: f64) -> Result<ScalarPair> {
    let mut terms = Vec::with_capacity(2);
    let a = unif(rng, 0.2, 0.8);
    for alpha in [a, 1.0 - a] {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let l = if unit { sign } else { sign * unif(rng, 0.3, 1.0) };
        terms.push(MixtureTerm { alpha, l: DenseMap::scalar(l), g: gen(rng, 1)? });
    }
    Ok(ScalarPair { spec: MixtureSpec::new(terms, gamma)? })
}

pub(super) fn thm70(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = unif(rng, -2.0, 2.0);
        if i % 4 == 3 {
            let pair = scalar_pair(rng, any_fn, true, gamma)?;
            let inputs = family_inputs(&pair.spec, &sv(x));
            let (m, me) = mix(&pair.spec, &sv(x), &o)?;
            let (c, ce) = comix(&pair.spec, &sv(x), &o)?;
            return Ok(vec![equal("isometries with probability weights collapse", &inputs, m, c, eq_slack(&[me, ce]))]);
        }
        let pair = scalar_pair(rng, coercive_fn, false, gamma)?;
        let spec = &pair.spec;
        let xv = sv(x);
        let inputs = family_inputs(spec, &xv);
        let (m, me) = mix(spec, &xv, &o)?;
        let (c, ce) = comix(spec, &xv, &o)?;
        let (pcm, _) = pair.pcm(x)?;
        let env: f64 = spec.terms().iter().map(|t| Ok(t.alpha * envelope(&t.g, gamma, &t.l.apply(&xv)?)?)).sum::<Result<f64>>()?;
        let sum = weighted_sum(spec, &xv)?.to_f64();
        Ok(vec![
            at_least("mixture above the parallel composition mean", &inputs, pcm, m, eq_slack(&[me])),
            at_least("comixture above the weighted envelopes", &inputs, env, c, eq_slack(&[ce])),
            at_most("comixture below the weighted sum", &inputs, sum, c, eq_slack(&[ce])),
            at_most("comixture below the mixture", &inputs, m, c, eq_slack(&[me, ce])),
        ])
    }))
}

pub(super) fn ex12(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let tail = [16.0, 64.0, 256.0];
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let x = unif(rng, -2.0, 2.0);
        let xv = sv(x);
        if i % 4 == 0 {
            let pair = scalar_pair(rng, coercive_fn, false, 1.0)?;
            let inputs = family_inputs(&pair.spec, &xv);
            let report = pcm_estimate(&pair.spec, &xv, &tail, &o, Execution::Sequential)?;
            let (pcm, y) = pair.pcm(x)?;
            let y = y.ok_or_else(|| Error::param("empty fibre"))?;
            let big = *tail.last().expect("nonempty");
            let (m, me) = mix(&pair.spec.with_gamma(big)?, &xv, &o)?;
            Ok(vec![
                equal("library parallel composition mean", &inputs, pcm, report.pcm.value, 1e-5),
                holds("mixture tail non-increasing", &inputs, report.tail_monotone),
                at_least("large parameter mixture above its limit", &inputs, pcm, m, eq_slack(&[me])),
                at_most("large parameter mixture within the coupling bound", &inputs, pcm + pair.coupling(&y, x) / big, m, eq_slack(&[me])),
            ])
        } else {
            let small = 2f64.powi(-10);
            let pair = scalar_pair(rng, lipschitz_fn, false, small)?;
            let inputs = family_inputs(&pair.spec, &xv);
            let (c, ce) = comix(&pair.spec, &xv, &o)?;
            let gap = weighted_sum(&pair.spec, &xv)?.to_f64() - c;
            Ok(vec![
                at_least("small parameter comixture gap is nonnegative", &inputs, 0.0, gap, eq_slack(&[ce])),
                at_most("small parameter comixture gap bound", &inputs, small * weighted_lipschitz_sq(&pair.spec) / 2.0, gap, eq_slack(&[ce])),
            ])
        }
    }))
}

fn scalar_family(terms: Vec<(f64, f64, ConvexFunction)>) -> Result<MixtureSpec> {
    MixtureSpec::new(terms.into_iter().map(|(alpha, l, g)| MixtureTerm { alpha, l: DenseMap::scalar(l), g }).collect(), 1.0)
}

fn comixture_instances() -> Result<Vec<MixtureSpec>> {
    Ok(vec![
        scalar_family(vec![
            (0.5, 0.8, ConvexFunction::abs().translate(sv(1.0))?),
            (0.5, 0.6, ConvexFunction::quadratic(1).translate(sv(-1.0))?),
        ])?,
        scalar_family(vec![
            (1.0, 0.6, ConvexFunction::dist_ball(sv(1.0), 0.2)?),
            (1.0, -0.7, ConvexFunction::abs().scale_val(2.0)?),
        ])?,
        scalar_family(vec![
            (0.3, 1.0, ConvexFunction::abs().translate(sv(2.0))?),
            (0.3, 1.0, ConvexFunction::abs().translate(sv(-1.0))?),
            (0.4, 1.0, ConvexFunction::quadratic(1)),
        ])?,
    ])
}

pub(super) fn ex13(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let steps = ctx.scale.grid_steps;
    let instances = comixture_instances()?;
    let gammas: Vec<f64> = (0..=14).map(|k| 2f64.powi(-k)).collect();
    Ok(ctx.cases(instances.len(), |i, _| {
        let spec = &instances[i];
        let inputs = json!({ "family": family_inputs(spec, &sv(0.0)), "gammas": gammas });
        let rows = comixture_argmin_sequence(spec, &gammas, &o)?;
        let f = |t: f64| -> Result<f64> { Ok(weighted_sum(spec, &sv(t))?.to_f64()) };
        let (min, _, _) = grid_min_1d(&f, -10.0, 10.0, steps)?;
        let last = rows.last().expect("nonempty").infimum;
        let mut out = vec![equal("comixture infimum at the smallest parameter", &inputs, min, last, 1e-4)];
        for w in rows.windows(2) {
            out.push(at_least("comixture infima nondecreasing", &inputs, w[0].infimum, w[1].infimum, 1e-9));
        }
        for r in &rows {
            out.push(at_most("comixture infimum below the weighted minimum", &inputs, min, r.infimum, 1e-9));
        }
        Ok(out)
    }))
}

pub(super) fn prop75(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    Ok(ctx.cases(ctx.n() / 2, |_, rng| {
        let gamma = gamma_draw(rng, -2.0, 1.0);
        let pair = scalar_pair(rng, full_domain_fn, false, gamma)?;
        let spec = &pair.spec;
        let x = sv(unif(rng, -2.0, 2.0));
        let inputs = family_inputs(spec, &x);
        let family = spec
            .terms()
            .iter()
            .map(|t| -> Result<(f64, CocompositionFn)> {
                Ok((t.alpha, CocompositionFn { spec: spec_of(&t.l, t.g.clone(), gamma)?, opts: o }))
            })
            .collect::<Result<Vec<_>>>()?;
        let pav = proximal_average(family, gamma)?;
        let (pv, pe) = solved(&mixture_eval(&pav, &x, &o)?.direct_sum);
        let (cv, ce) = comix(spec, &x, &o)?;
        let pp = mixture_prox(&pav, &x)?;
        let cp = comixture_prox(spec, &x)?;
        Ok(vec![
            equal("average of cocompositions is the comixture", &inputs, cv, pv, 1e-5 + pe + ce),
            equal("prox of the average of cocompositions", &inputs, 0.0, pp.dist(&cp), 1e-10),
        ])
    }))
}

fn spec_of(l: &DenseMap, g: ConvexFunction, gamma: f64) -> Result<CompositionSpec> {
    spec(l, g, gamma)
}

/// Proximal average of one to three random functions on `R^dim` with
/// probability weights.
fn raverage(rng: &mut ChaCha8Rng, dim: usize, gen: FnGen, gamma: f64) -> Result<MixtureSpec> {
    let m = rng.random_range(1..=3);
    let mut alphas: Vec<f64> = (0..m).map(|_| unif(rng, 0.2, 1.0)).collect();
    let total: f64 = alphas.iter().sum();
    alphas.iter_mut().for_each(|a| *a /= total);
    let mut family = Vec::with_capacity(m);
    for a in alphas {
        family.push((a, gen(rng, dim)?));
    }
    proximal_average(family, gamma)
}

pub(super) fn prop79(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let dim = rdim(rng, dims);
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = rvec(rng, dim, 2.0);
        if i % 2 == 0 {
            let pav = raverage(rng, dim, conjugable_fn, gamma)?;
            let inputs = family_inputs(&pav, &x);
            let (m, me) = mix(&pav, &x, &o)?;
            let (c, ce) = comix(&pav, &x, &o)?;
            let p = mixture_prox(&pav, &x)?;
            let direct = pav.terms().iter().map(|t| Ok(t.g.prox(gamma, &x)?.scale(t.alpha))).try_fold(
                Vector::zeros(dim),
                |acc, v: Result<Vector>| -> Result<Vector> { Ok(&acc + &v?) },
            )?;
            let s = (&x - &p).scale(1.0 / gamma);
            let (mp, mpe) = mix(&pav, &p, &o)?;
            let dual = conjugate_family(&pav, 1.0 / gamma)?;
            let (ds, dse) = mix(&dual, &s, &o)?;
            let w = rvec(rng, dim, 2.0);
            let (mw, mwe) = mix(&pav, &w, &o)?;
            let env = mp + x.dist(&p).powi(2) / (2.0 * gamma);
            let env_sum: f64 = pav.terms().iter().map(|t| Ok(t.alpha * envelope(&t.g, gamma, &x)?)).sum::<Result<f64>>()?;
            Ok(vec![
                equal("average as mixture and comixture", &inputs, m, c, eq_slack(&[me, ce])),
                equal("prox of the average", &inputs, 0.0, p.dist(&direct), 1e-12 * (1.0 + x.norm())),
                at_least("average subgradient inequality", &inputs, mp + s.dot(&(&w - &p)), mw, eq_slack(&[mpe, mwe])),
                equal("conjugate of the average at a witness", &inputs, p.dot(&s), mp + ds, 1e-5 + mpe + dse),
                equal("envelope of the average", &inputs, env_sum, env, eq_slack(&[mpe])),
            ])
        } else {
            let pav = raverage(rng, dim, lipschitz_fn, gamma)?;
            let y = rvec(rng, dim, 2.0);
            let inputs = json!({ "family": family_inputs(&pav, &x), "y": y });
            let t = 1e4;
            let rec = comixture_recession(&pav, &x)?.to_f64();
            let (mt, mte) = mix(&pav, &x.scale(t), &o)?;
            let offset = (weighted_sum(&pav, &x.scale(t))?.to_f64() - t * rec).abs();
            let rec_slack = (gamma * weighted_lipschitz_sq(&pav) / 2.0 + offset + mte) / t + INEQUALITY_SLACK;
            let beta = pav.terms().iter().map(|t| t.g.lipschitz_bound().expect("Lipschitz family")).fold(0.0, f64::max);
            let (mx, mxe) = mix(&pav, &x, &o)?;
            let (my, mye) = mix(&pav, &y, &o)?;
            Ok(vec![
                equal("recession quotient of the average", &inputs, rec, mt / t, rec_slack),
                at_most("average Lipschitz transfer", &inputs, beta * x.dist(&y), (mx - my).abs(), 2.0 * o.tol + mxe + mye),
            ])
        }
    }))
}

pub(super) fn prop80(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let x = unif(rng, -2.0, 2.0);
        let xv = sv(x);
        match i % 3 {
            0 => {
                let gamma = gamma_draw(rng, -2.0, 2.0);
                let pair = scalar_pair(rng, coercive_fn, true, gamma)?;
                let pav = proximal_average(pair.spec.terms().iter().map(|t| (t.alpha, t.g.clone())).collect(), gamma)?;
                let pair = ScalarPair { spec: pav };
                let inputs = family_inputs(&pair.spec, &xv);
                let (m, me) = mix(&pair.spec, &xv, &o)?;
                let env: f64 = pair.spec.terms().iter().map(|t| Ok(t.alpha * envelope(&t.g, gamma, &xv)?)).sum::<Result<f64>>()?;
                let (pex, _) = pair.pcm(x)?;
                Ok(vec![
                    at_least("average above the weighted envelopes", &inputs, env, m, eq_slack(&[me])),
                    at_least("average above the proximal epi-average", &inputs, pex, m, eq_slack(&[me])),
                    at_most("average below the weighted sum", &inputs, weighted_sum(&pair.spec, &xv)?.to_f64(), m, eq_slack(&[me])),
                ])
            }
            1 => {
                let big = 256.0;
                let pair = scalar_pair(rng, coercive_fn, true, big)?;
                let pav = proximal_average(pair.spec.terms().iter().map(|t| (t.alpha, t.g.clone())).collect(), big)?;
                let pair = ScalarPair { spec: pav };
                let inputs = family_inputs(&pair.spec, &xv);
                let (pex, y) = pair.pcm(x)?;
                let y = y.ok_or_else(|| Error::param("empty fibre"))?;
                let (m, me) = mix(&pair.spec, &xv, &o)?;
                Ok(vec![
                    at_least("large parameter average above the epi-average", &inputs, pex, m, eq_slack(&[me])),
                    at_most("large parameter average within the coupling bound", &inputs, pex + pair.coupling(&y, x) / big, m, eq_slack(&[me])),
                ])
            }
            _ => {
                let small = 2f64.powi(-10);
                let pav = raverage(rng, 1, lipschitz_fn, small)?;
                let inputs = family_inputs(&pav, &xv);
                let (m, me) = mix(&pav, &xv, &o)?;
                let gap = weighted_sum(&pav, &xv)?.to_f64() - m;
                Ok(vec![
                    at_least("small parameter average gap is nonnegative", &inputs, 0.0, gap, eq_slack(&[me])),
                    at_most("small parameter average gap bound", &inputs, small * weighted_lipschitz_sq(&pav) / 2.0, gap, eq_slack(&[me])),
                ])
            }
        }
    }))
}

pub(super) fn rem80(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let abs_quad = proximal_average(vec![(0.5, ConvexFunction::abs()), (0.5, ConvexFunction::quadratic(1))], 1.0)?;
    let mut out = vec![equal(
        "prox of the absolute value and quadratic average",
        &family_inputs(&abs_quad, &sv(2.0)),
        1.0,
        mixture_prox(&abs_quad, &sv(2.0))?[0],
        1e-12,
    )];
    out.extend(ctx.cases(ctx.n(), |_, rng| {
        let gamma = gamma_draw(rng, -1.0, 1.0);
        let pav = raverage(rng, 1, conjugable_fn, gamma)?;
        let x = unif(rng, -2.0, 2.0);
        let inputs = family_inputs(&pav, &sv(x));
        let conj: Vec<(f64, ConvexFunction)> =
            pav.terms().iter().map(|t| (t.alpha, t.g.conjugate_function().expect("conjugable"))).collect();
        let negated = |z: f64| -> Result<f64> {
            let s: f64 = conj.iter().map(|(a, f)| Ok(a * envelope(f, 1.0 / gamma, &sv(z))?)).sum::<Result<f64>>()?;
            Ok(s - x * z)
        };
        let (_, v) = line_min(negated, -30.0, 30.0, 4000)?;
        let expected = -v - x * x / (2.0 * gamma);
        let (m, me) = mix(&pav, &sv(x), &o)?;
        Ok(vec![equal("average through the conjugate envelope formula", &inputs, expected, m, eq_slack(&[me]))])
    }));
    Ok(out)
}

/// Family of Monte Carlo checks: a sampler of parameters, the member for a
/// parameter, the exact expectation of the prox.
struct MonteCarlo<'a> {
    label: &'a str,
    dim: usize,
    exact: Vector,
    report: ExpectationReport,
}

fn mc_records(mc: &MonteCarlo<'_>, inputs: &Value) -> Vec<CaseRecord> {
    (0..mc.dim)
        .map(|k| {
            equal(
                format!("{} sampled prox", mc.label),
                inputs,
                mc.exact[k],
                mc.report.mean[k],
                3.0 * mc.report.std_error[k] + 1e-12,
            )
        })
        .collect()
}

pub(super) fn mc_expectation(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let n = if ctx.scale.n_points < 100 { 2000 } else { 10_000 };
    let exec = ctx.exec;
    Ok(ctx.cases(4, |i, rng| {
        let seed: u64 = rng.random();
        let gamma = gamma_draw(rng, -1.0, 1.0);
        match i {
            0 => {
                let x = sv(unif(rng, -3.0, 4.0));
                let omegas = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
                let member = |w: &f64| ConvexFunction::abs().translate(sv(*w));
                let exact = omegas.iter().map(|w| Ok(member(w)?.prox(gamma, &x)?[0])).sum::<Result<f64>>()? / 6.0;
                let sampler = |r: &mut ChaCha8Rng| omegas[r.random_range(0..6)];
                let report = sampled_expectation_prox(sampler, member, seed, n, gamma, &x, exec)?;
                let other = if exec == Execution::Parallel { Execution::Sequential } else { Execution::Parallel };
                let again = sampled_expectation_prox(sampler, member, seed, n, gamma, &x, other)?;
                let inputs = json!({ "omegas": omegas, "gamma": gamma, "x": x, "seed": seed, "n": n });
                let mut out = mc_records(&MonteCarlo { label: "shifted absolute values", dim: 1, exact: sv(exact), report: report.clone() }, &inputs);
                out.push(equal("sampled prox independent of execution", &inputs, report.mean[0], again.mean[0], 0.0));
                Ok(out)
            }
            1 => {
                let x = sv(unif(rng, -3.0, 3.0));
                let omegas = [-1.0, 0.0, 1.0];
                let three = proximal_average(
                    omegas.iter().map(|w| Ok((1.0 / 3.0, ConvexFunction::abs().translate(sv(*w))?))).collect::<Result<Vec<_>>>()?,
                    gamma,
                )?;
                let exact = mixture_prox(&three, &x)?;
                let enumerated =
                    omegas.iter().map(|w| Ok(ConvexFunction::abs().translate(sv(*w))?.prox(gamma, &x)?[0])).sum::<Result<f64>>()? / 3.0;
                let sampler = |r: &mut ChaCha8Rng| omegas[r.random_range(0..3)];
                let report = sampled_expectation_prox(sampler, |w: &f64| ConvexFunction::abs().translate(sv(*w)), seed, n, gamma, &x, exec)?;
                let inputs = json!({ "omegas": omegas, "gamma": gamma, "x": x, "seed": seed, "n": n });
                let mut out = vec![equal("enumerated expectation is the average prox", &inputs, exact[0], enumerated, 1e-12)];
                out.extend(mc_records(&MonteCarlo { label: "three point average", dim: 1, exact, report }, &inputs));
                Ok(out)
            }
            2 => {
                let x = sv(unif(rng, -3.0, 3.0));
                let pav = proximal_average(vec![(0.5, ConvexFunction::abs()), (0.5, ConvexFunction::quadratic(1))], gamma)?;
                let exact = mixture_prox(&pav, &x)?;
                let sampler = |r: &mut ChaCha8Rng| r.random_bool(0.5);
                let family = |b: &bool| Ok(if *b { ConvexFunction::abs() } else { ConvexFunction::quadratic(1) });
                let report = sampled_expectation_prox(sampler, family, seed, n, gamma, &x, exec)?;
                let inputs = json!({ "gamma": gamma, "x": x, "seed": seed, "n": n });
                Ok(mc_records(&MonteCarlo { label: "two atom average", dim: 1, exact, report }, &inputs))
            }
            _ => {
                let x = rvec(rng, 2, 2.0);
                let centres: Vec<Vector> = (0..4).map(|_| rvec(rng, 2, 1.5)).collect();
                let member = |c: &usize| ConvexFunction::eucl_norm(2).translate(centres[*c].clone());
                let exact = (0..4).map(|c| member(&c)).try_fold(Vector::zeros(2), |acc, f| -> Result<Vector> {
                    Ok(acc.axpy(0.25, &f?.prox(gamma, &x)?))
                })?;
                let sampler = |r: &mut ChaCha8Rng| r.random_range(0..4usize);
                let report = sampled_expectation_prox(sampler, member, seed, n, gamma, &x, exec)?;
                let inputs = json!({ "centres": centres, "gamma": gamma, "x": x, "seed": seed, "n": n });
                Ok(mc_records(&MonteCarlo { label: "translated norms", dim: 2, exact, report }, &inputs))
            }
        }
    }))
}
