//! Suites on orderings, gap bounds, worked examples and the behaviour of both
//! operations as the parameter tends to zero or infinity.

use super::*;

/// `max_k (v_{k+1} − v_k)` over consecutive finite values, `+∞` when a finite
/// value is followed by `+∞`.
fn max_increase(values: &[ExtReal]) -> f64 {
    values
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => b - a,
            (ExtReal::PlusInfinity, _) => f64::NEG_INFINITY,
            (ExtReal::Finite(_), ExtReal::PlusInfinity) => f64::INFINITY,
        })
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

pub(super) fn prop20(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(2 * ctx.n(), |i, rng| {
        let gamma = gamma_draw(rng, -2.0, 2.0);
        match i % 4 {
            0 => {
                let (rows, cols) = rshape(rng, dims);
                let l = rmap(rng, rows, cols, 0.3, 0.95)?;
                let g = full_domain_fn(rng, rows)?;
                let x = rvec(rng, cols, 2.0);
                let inputs = inputs_lg(&l, &g, gamma, &x);
                let lx = l.apply(&x)?;
                let (cv, ce) = coco(&l, &g, gamma, &x, &o)?;
                let (pv, pe) = comp(&l, &g, gamma, &x, &o)?;
                let (post, _) = postcomposition_oracle(&l, &g, &x)?;
                Ok(vec![
                    at_least("cocomposition above the envelope", &inputs, envelope(&g, gamma, &lx)?, cv, eq_slack(&[ce])),
                    at_most("cocomposition below the composite", &inputs, val(&g, &lx)?, cv, eq_slack(&[ce])),
                    at_most("cocomposition below the composition", &inputs, pv, cv, eq_slack(&[ce, pe])),
                    at_least("composition above the infimal postcomposition", &inputs, post, pv, eq_slack(&[pe])),
                ])
            }
            1 => {
                let cols = rdim(rng, dims);
                let rows = rng.random_range(cols..=dims);
                let l = isometry(rng, rows, cols)?;
                let g = full_domain_fn(rng, rows)?;
                let x = rvec(rng, cols, 2.0);
                let inputs = inputs_lg(&l, &g, gamma, &x);
                let (cv, ce) = coco(&l, &g, gamma, &x, &o)?;
                let (pv, pe) = comp(&l, &g, gamma, &x, &o)?;
                Ok(vec![equal("isometry collapse", &inputs, cv, pv, eq_slack(&[ce, pe]))])
            }
            2 => {
                let rows = rdim(rng, dims);
                let cols = rng.random_range(rows..=dims);
                let l = coisometry(rng, rows, cols)?;
                let g = any_fn(rng, rows)?;
                let x = if rng.random_bool(0.8) { l.adjoint_apply(&domain_point(&g, rng)?)? } else { rvec(rng, cols, 2.0) };
                let inputs = inputs_lg(&l, &g, gamma, &x);
                let (cv, ce) = coco(&l, &g, gamma, &x, &o)?;
                let (pv, pe) = comp(&l, &g, gamma, &x, &o)?;
                let (post, _) = postcomposition_oracle(&l, &g, &x)?;
                Ok(vec![
                    equal("coisometry cocomposition", &inputs, val(&g, &l.apply(&x)?)?, cv, eq_slack(&[ce])),
                    equal("coisometry composition", &inputs, post, pv, eq_slack(&[pe])),
                ])
            }
            _ => {
                let dim = rdim(rng, dims);
                let l = isometry(rng, dim, dim)?;
                let g = any_fn(rng, dim)?;
                let x = l.adjoint_apply(&domain_point(&g, rng)?)?;
                let inputs = inputs_lg(&l, &g, gamma, &x);
                let (cv, ce) = coco(&l, &g, gamma, &x, &o)?;
                let (pv, pe) = comp(&l, &g, gamma, &x, &o)?;
                let (post, _) = postcomposition_oracle(&l, &g, &x)?;
                let direct = val(&g, &l.apply(&x)?)?;
                Ok(vec![
                    equal("orthogonal cocomposition", &inputs, direct, cv, eq_slack(&[ce])),
                    equal("orthogonal composition", &inputs, direct, pv, eq_slack(&[pe])),
                    equal("orthogonal infimal postcomposition", &inputs, direct, post, INEQUALITY_SLACK),
                ])
            }
        }
    }))
}

/// A projector onto a line `V` of the plane and a function radial around a
/// point of `V`.
fn radial_on_line(rng: &mut ChaCha8Rng) -> Result<(DenseMap, ConvexFunction)> {
    let (p, b) = line_projector(rng, 2)?;
    let c = b[0].scale(unif(rng, -1.0, 1.0));
    let r = unif(rng, 0.2, 1.0);
    let g = match rng.random_range(0..4) {
        0 => ConvexFunction::eucl_norm(2).translate(c)?,
        1 => ConvexFunction::quadratic(2).translate(c)?,
        2 => ConvexFunction::dist_ball(c, r)?,
        _ => ConvexFunction::support_ball(c, r)?,
    };
    Ok((p, g))
}

pub(super) fn prop25(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let t = tight();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let gamma = gamma_draw(rng, -2.0, 2.0);
        if i % 2 == 0 {
            let rows = rdim(rng, dims);
            let cols = rng.random_range(rows..=dims);
            let l = rmap(rng, rows, cols, 0.3, 0.95)?;
            let g = any_fn(rng, rows)?;
            let z = rvec(rng, rows, 2.0);
            let q = g.prox(1.0, &z)?;
            let ystar = &z - &q;
            let cogram = pseudo_inverse_small(&l.cogram(), DEFAULT_RANK_TOL)?;
            let x = l.adjoint_apply(&cogram.apply(&q)?)?;
            let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x, "ystar": ystar });
            let (cv, ce) = coco(&l, &g, gamma, &x, &o)?;
            let gap = val(&g, &l.apply(&x)?)? - cv;
            Ok(vec![
                at_least("gap is nonnegative", &inputs, 0.0, gap, eq_slack(&[ce])),
                at_most("gap below the coupling bound", &inputs, gamma * phi(&l, &ystar)?, gap, eq_slack(&[ce])),
            ])
        } else {
            let (l, g) = radial_on_line(rng)?;
            let x = rvec(rng, 2, 2.0);
            let inputs = inputs_lg(&l, &g, gamma, &x);
            let (cv, _) = coco(&l, &g, gamma, &x, &t)?;
            Ok(vec![equal("no gap when subgradients stay in the range", &inputs, val(&g, &l.apply(&x)?)?, cv, 1e-8)])
        }
    }))
}

pub(super) fn prop30_i(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let t = tight();
    let dims = ctx.max_dim();
    Ok(ctx.cases(10 * ctx.n(), |i, rng| {
        let cols = rdim(rng, dims);
        let l = if i % 4 == 3 {
            unit_map(rng, cols)?
        } else {
            let rows = rdim(rng, dims);
            rmap(rng, rows, cols, 0.3, 0.95)?
        };
        let g = unit_lipschitz_fn(rng, l.rows())?;
        let gamma = gamma_draw(rng, -3.0, 3.0);
        let x = rvec(rng, cols, 2.0);
        let inputs = inputs_lg(&l, &g, gamma, &x);
        let (cv, _) = coco(&l, &g, gamma, &x, &t)?;
        let gap = val(&g, &l.apply(&x)?)? - cv;
        Ok(vec![
            at_least("gap above the lower tolerance", &inputs, -1e-8, gap, 0.0),
            at_most("gap below half the parameter", &inputs, gamma / 2.0, gap, INEQUALITY_SLACK),
        ])
    }))
}

pub(super) fn prop30_ii(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let l = rmap(rng, 2, 1, 0.3, 0.95)?;
        let (g, gs) = loop {
            let g = lipschitz_fn(rng, 2)?;
            if let Some(gs) = g.conjugate_function() {
                break (g, gs);
            }
        };
        let beta = g.lipschitz_bound().expect("Lipschitz family");
        let gamma = gamma_draw(rng, -2.0, 2.0);
        // average of two subgradients, inside the domain of the conjugate
        let (z, w) = (rvec(rng, 2, 3.0), rvec(rng, 2, 3.0));
        let y0 = (&(&z - &g.prox(1.0, &z)?) + &(&w - &g.prox(1.0, &w)?)).scale(0.5);
        let x = l.adjoint_apply(&y0)?;
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x });
        let h = |y: &Vector| -> Result<f64> { val(&gs, y) };
        let (post, _) = fibre_min_through(&l, &h, &x, Some(&y0))?;
        let (pv, pe) = comp(&l, &gs, 1.0 / gamma, &x, &o)?;
        Ok(vec![
            at_least("conjugate composition above the postcomposition", &inputs, post, pv, eq_slack(&[pe])),
            at_most("conjugate composition within the Lipschitz gap", &inputs, post + gamma * beta * beta / 2.0, pv, eq_slack(&[pe])),
        ])
    }))
}

pub(super) fn ex_comp(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let rows = rdim(rng, dims);
        let cols = rng.random_range(rows..=dims);
        let c = coisometry(rng, rows, cols)?;
        let rho = unif(rng, 0.2, 3.0);
        let l = c.scale(rho.sqrt());
        let g = any_fn(rng, rows)?;
        let h = g.clone().scale_arg(rho.sqrt())?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = if rng.random_bool(0.7) { c.adjoint_apply(&domain_point(&h, rng)?)? } else { rvec(rng, cols, 2.0) };
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "rho": rho, "x": x });
        let lx = l.apply(&x)?;
        let (cv, ce) = coco(&c, &h, gamma, &x, &o)?;

        let p = x.axpy(1.0 / rho, &l.adjoint_apply(&(&g.prox(gamma * rho, &lx)? - &lx))?);
        let lib = prox_cocomposition(&spec(&c, &h, gamma)?, &x)?;
        let objective = |z: &Vector| -> Result<f64> { Ok(val(&g, &l.apply(z)?)? + x.dist(z).powi(2) / (2.0 * gamma)) };
        let at_p = objective(&p)?;
        let worst = (0..8)
            .map(|_| -> Result<f64> {
                let z = p.axpy(1.0, &rvec(rng, cols, 0.5));
                Ok(at_p - objective(&z)?)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(vec![
            equal("composite as a cocomposition", &inputs, val(&g, &lx)?, cv, eq_slack(&[ce])),
            equal("prox formula against the library", &inputs, 0.0, p.dist(&lib), 1e-10 * (1.0 + x.norm())),
            at_most("prox formula minimizes the prox objective", &inputs, 0.0, worst, 1e-9 * (1.0 + at_p.abs())),
        ])
    }))
}

pub(super) fn ex_proj(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let t = tight();
    Ok(ctx.cases((ctx.n() / 2).max(10), |_, rng| {
        let (p, b) = line_projector(rng, 2)?;
        let g = ConvexFunction::eucl_norm(2);
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let inside = b[0].scale(unif(rng, -2.0, 2.0));
        let normal = Vector::from(vec![-b[0][1], b[0][0]]);
        let outside = inside.axpy(unif(rng, 0.1, 2.0), &normal);
        let x = rvec(rng, 2, 2.0);
        let inputs = json!({ "V": b, "gamma": gamma, "inside": inside, "outside": outside, "x": x });
        Ok(vec![
            equal("composition on the line", &inputs, inside.norm(), comp(&p, &g, gamma, &inside, &t)?.0, 1e-9),
            equal("composition off the line", &inputs, f64::INFINITY, comp(&p, &g, gamma, &outside, &t)?.0, 0.0),
            equal("cocomposition is the norm of the projection", &inputs, p.apply(&x)?.norm(), coco(&p, &g, gamma, &x, &t)?.0, 1e-9),
        ])
    }))
}

pub(super) fn ex_yama(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let l = coisometry(rng, 1, 2)?;
        let g = any_fn(rng, 1)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = if rng.random_bool(0.7) { l.adjoint_apply(&domain_point(&g, rng)?)? } else { rvec(rng, 2, 2.0) };
        let inputs = inputs_lg(&l, &g, gamma, &x);
        let proj = l.gram();
        let idem = proj.compose(&proj)?.sub(&proj)?.max_abs();
        let sym = proj.sub(&proj.transpose())?.max_abs();
        let (cv, ce) = coco(&l, &g, gamma, &x, &o)?;
        let (pv, pe) = comp(&l, &g, gamma, &x, &o)?;
        let (post, _) = postcomposition_oracle(&l, &g, &x)?;
        Ok(vec![
            equal("adjoint product is a projector", &inputs, 0.0, idem.max(sym), 1e-12),
            equal("cocomposition equals the composite", &inputs, val(&g, &l.apply(&x)?)?, cv, eq_slack(&[ce])),
            equal("composition equals the infimal postcomposition", &inputs, post, pv, eq_slack(&[pe])),
        ])
    }))
}

fn powers(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

pub(super) fn thm45_i(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = SolverOpts::default().with_tol(1e-10);
    let dims = ctx.max_dim();
    let gammas = powers(-8, 8);
    Ok(ctx.cases((ctx.n() / 4).max(5), |_, rng| {
        let (rows, cols) = rshape(rng, dims);
        let l = rmap(rng, rows, cols, 0.3, 0.95)?;
        let g = if rows > cols { full_domain_fn(rng, rows)? } else { any_fn(rng, rows)? };
        let x = if rng.random_bool(0.7) { l.adjoint_apply(&domain_point(&g, rng)?)? } else { rvec(rng, cols, 2.0) };
        let inputs = json!({ "L": l, "g": g, "x": x, "gammas": gammas });
        let sweep = gamma_sweep(&l, &g, &x, &gammas, &o, 1e-7, Execution::Sequential)?;
        let comp: Vec<ExtReal> = sweep.rows.iter().map(|r| r.composition).collect();
        let coco: Vec<ExtReal> = sweep.rows.iter().map(|r| r.cocomposition).collect();
        Ok(vec![
            at_most("composition non-increasing in the parameter", &inputs, 0.0, max_increase(&comp), 1e-7),
            at_most("cocomposition non-increasing in the parameter", &inputs, 0.0, max_increase(&coco), 1e-7),
        ])
    }))
}

pub(super) fn thm45_iv(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    let gammas = [2f64.powi(-10), 2f64.powi(-8), 2f64.powi(-6), 2f64.powi(-4)];
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let (rows, cols) = rshape(rng, dims);
        let l = rmap(rng, rows, cols, 0.3, 0.95)?;
        let g = lipschitz_fn(rng, rows)?;
        let beta = g.lipschitz_bound().expect("Lipschitz family");
        let x = rvec(rng, cols, 2.0);
        let inputs = json!({ "L": l, "g": g, "x": x });
        let target = val(&g, &l.apply(&x)?)?;
        let report = limit_small_gamma(&l, &g, &x, &gammas, &o, INEQUALITY_SLACK)?;
        let mut out = Vec::new();
        for &gamma in &gammas {
            let (cv, ce) = coco(&l, &g, gamma, &x, &o)?;
            let gap = target - cv;
            out.push(at_least("small parameter gap is nonnegative", &inputs, 0.0, gap, eq_slack(&[ce])));
            out.push(at_most("small parameter gap bound", &inputs, gamma * beta * beta / 2.0, gap, eq_slack(&[ce])));
        }
        out.push(holds("library small parameter report", &inputs, report.all_within));
        Ok(out)
    }))
}

/// A coercive function with minimum value zero and one of its minimizers.
fn coercive_with_minimizer(rng: &mut ChaCha8Rng, dim: usize) -> Result<(ConvexFunction, Vector)> {
    let c = rvec(rng, dim, 0.3);
    let g = match rng.random_range(0..5) {
        0 => ConvexFunction::eucl_norm(dim).translate(c.clone())?,
        1 => ConvexFunction::l1_norm(dim).translate(c.clone())?,
        2 => ConvexFunction::quadratic(dim).translate(c.clone())?,
        3 => ConvexFunction::quad_form(psd(rng, dim, 0.2)?)?.translate(c.clone())?,
        _ => ConvexFunction::dist_ball(c.clone(), unif(rng, 0.1, 0.5))?,
    };
    Ok((g, c))
}

const LARGE_GAMMA: f64 = 1024.0;

pub(super) fn thm45_vi(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    let mut out = ctx.cases(ctx.n(), |_, rng| {
        let (rows, cols) = rshape(rng, dims);
        let l = rmap(rng, rows, cols, 0.3, 0.7)?;
        let (g, w) = coercive_with_minimizer(rng, rows)?;
        let x = if rows < cols {
            l.adjoint_apply(&rvec(rng, rows, 0.75 / (rows as f64).sqrt()))?
        } else {
            rvec(rng, cols, 0.75 / (cols as f64).sqrt())
        };
        let inputs = inputs_lg(&l, &g, LARGE_GAMMA, &x);
        let (case, target) = cocomposition_limit(&l, &g, &x, &o)?;
        let (cv, ce) = coco(&l, &g, LARGE_GAMMA, &x, &o)?;
        let n2 = l.norm().powi(2);
        let bound = l.apply(&x)?.dist(&w).powi(2) / (2.0 * LARGE_GAMMA * (1.0 - n2));
        let (pv, pe) = comp(&l, &g, LARGE_GAMMA, &x, &o)?;
        let (post, y) = postcomposition_oracle(&l, &g, &x)?;
        let y = y.ok_or_else(|| Error::param("empty fibre"))?;
        Ok(vec![
            holds("contraction case detected", &inputs, case == LargeGammaCase::Contraction),
            equal("library limit is the infimum", &inputs, 0.0, target, 1e-6),
            equal("cocomposition near its limit", &inputs, target, cv, 1e-3),
            at_most("cocomposition within the envelope bound", &inputs, bound, cv, eq_slack(&[ce])),
            at_least("composition above its limit", &inputs, post, pv, eq_slack(&[pe])),
            at_most("composition within the coupling bound", &inputs, post + phi(&l, &y)? / LARGE_GAMMA, pv, eq_slack(&[pe])),
        ])
    });
    out.extend(ctx.cases(ctx.n() / 5 + 2, |i, rng| {
        if i % 2 == 0 {
            let (p, _) = line_projector(rng, 2)?;
            let c = rvec(rng, 2, 0.5);
            let g = ConvexFunction::eucl_norm(2).translate(c.clone())?;
            let x = rvec(rng, 2, 1.0);
            let inputs = inputs_lg(&p, &g, LARGE_GAMMA, &x);
            let expected = p.apply(&(&x - &c))?.norm();
            let (case, target) = cocomposition_limit(&p, &g, &x, &o)?;
            let (cv, _) = coco(&p, &g, LARGE_GAMMA, &x, &o)?;
            Ok(vec![
                holds("unit norm case detected", &inputs, case == LargeGammaCase::UnitNorm),
                equal("library limit for a projector", &inputs, expected, target, 1e-6),
                equal("projector cocomposition near its limit", &inputs, expected, cv, 1e-3),
            ])
        } else {
            let th = unif(rng, 0.0, std::f64::consts::PI);
            let (cs, sn) = (th.cos(), th.sin());
            let rot = DenseMap::from_rows(&[vec![cs, -sn], vec![sn, cs]])?;
            let l = rot.compose(&DenseMap::diag(&[1.0, 0.5]))?;
            let x = rvec(rng, 2, 1.0);
            let lx = l.apply(&x)?;
            let n = Vector::from(vec![-sn, cs]);
            // minimizer of the line search sits near lx
            let c = lx.axpy(unif(rng, -0.3, 0.3), &n).axpy(unif(rng, -0.2, 0.2), &Vector::from(vec![cs, sn]));
            let g = ConvexFunction::l1_norm(2).translate(c)?;
            let inputs = inputs_lg(&l, &g, LARGE_GAMMA, &x);
            let (_, expected) = line_min(|t| val(&g, &lx.axpy(t, &n)), -10.0, 10.0, 4000)?;
            let (case, target) = cocomposition_limit(&l, &g, &x, &o)?;
            let (cv, _) = coco(&l, &g, LARGE_GAMMA, &x, &o)?;
            Ok(vec![
                holds("unit norm case detected", &inputs, case == LargeGammaCase::UnitNorm),
                equal("library limit along the complementary range", &inputs, expected, target, 1e-6),
                equal("cocomposition near the affine infimum", &inputs, expected, cv, 1e-3),
            ])
        }
    }));
    Ok(out)
}

pub(super) fn cor46(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let cols = rdim(rng, dims);
        let rows = rng.random_range(cols..=dims);
        let l = isometry(rng, rows, cols)?;
        let g = nonneg_lipschitz_fn(rng, rows)?;
        let beta = g.lipschitz_bound().expect("Lipschitz family");
        let x = rvec(rng, cols, 2.0);
        let inputs = json!({ "L": l, "g": g, "x": x });
        let (post, y) = postcomposition_oracle(&l, &g, &x)?;
        let y = y.ok_or_else(|| Error::param("empty fibre"))?;
        let big = 256.0;
        let (pb, pbe) = comp(&l, &g, big, &x, &o)?;
        let small = 2f64.powi(-10);
        let (ps, pse) = comp(&l, &g, small, &x, &o)?;
        let direct = val(&g, &l.apply(&x)?)?;
        Ok(vec![
            at_least("large parameter above the postcomposition", &inputs, post, pb, eq_slack(&[pbe])),
            at_most("large parameter within the coupling bound", &inputs, post + phi(&l, &y)? / big, pb, eq_slack(&[pbe])),
            at_least("small parameter gap is nonnegative", &inputs, 0.0, direct - ps, eq_slack(&[pse])),
            at_most("small parameter gap bound", &inputs, small * beta * beta / 2.0, direct - ps, eq_slack(&[pse])),
        ])
    }))
}

/// Scalar instances with known `min g∘L`.
fn minimizer_instances() -> Result<Vec<(DenseMap, ConvexFunction, f64)>> {
    Ok(vec![
        (DenseMap::scalar(0.5), ConvexFunction::abs().translate(sv(1.0))?.add_affine(sv(0.3), 0.0)?, 0.3),
        (DenseMap::scalar(-0.8), ConvexFunction::dist_ball(sv(2.0), 0.5)?.add_affine(sv(-0.2), 1.0)?, 0.5),
        (DenseMap::scalar(1.0), ConvexFunction::abs().translate(sv(-0.5))?.scale_val(2.0)?.add_quad(1.0)?, 0.125),
    ])
}

pub(super) fn prop55(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let steps = ctx.scale.grid_steps;
    let instances = minimizer_instances()?;
    let gammas: Vec<f64> = (0..=12).map(|k| 2f64.powi(-k)).collect();
    Ok(ctx.cases(instances.len(), |i, _| {
        let (l, g, min) = &instances[i];
        let inputs = json!({ "L": l, "g": g, "gammas": gammas });
        let report = minimizer_convergence(l, g, &gammas, &o, 1e-9)?;
        let f = |t: f64| -> Result<f64> { val(g, &l.apply(&sv(t))?) };
        let (grid, _, bound) = grid_min_1d(&f, -10.0, 10.0, steps)?;
        let last = report.rows.last().expect("nonempty").infimum;
        let mut out = vec![
            equal("grid minimum of the composite", &inputs, *min, grid, bound),
            equal("infimum at the smallest parameter", &inputs, grid, last, 1e-4),
            holds("infima nondecreasing as the parameter shrinks", &inputs, report.nondecreasing),
        ];
        for row in &report.rows {
            out.push(at_most("infimum below the composite minimum", &inputs, *min, row.infimum, 1e-9));
        }
        Ok(out)
    }))
}
