//! Suites on single compositions and cocompositions: worked values, the
//! preliminary identities, and the calculus of the two operations.

use super::*;

pub(super) fn def1(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let steps = ctx.scale.grid_steps;
    let l = DenseMap::scalar(0.5);
    let g = ConvexFunction::abs();
    let at_one = inputs_lg(&l, &g, 1.0, &sv(1.0));
    let at_half = inputs_lg(&l, &g, 1.0, &sv(0.5));
    let (cv, ce) = coco(&l, &g, 1.0, &sv(1.0), &o)?;
    let (pv, pe) = comp(&l, &g, 1.0, &sv(0.5), &o)?;
    let (gc, gc_bound) = grid_cocomposition_1d(0.5, &g, 1.0, 1.0, steps)?;
    let (gp, gp_bound) = grid_composition_1d(0.5, &g, 1.0, 0.5, steps)?;
    let mut out = vec![
        equal("cocomposition worked value", &at_one, 1.0 / 6.0, cv, 1e-6 + ce),
        equal("cocomposition worked value on a grid", &at_one, 1.0 / 6.0, gc, gc_bound),
        equal("composition worked value", &at_half, 1.375, pv, 1e-6 + pe),
        equal("composition worked value on a grid", &at_half, 1.375, gp, gp_bound),
    ];
    out.extend(ctx.cases(ctx.n(), |_, rng| {
        let l = unif(rng, 0.3, 0.95) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lm = DenseMap::scalar(l);
        let g = full_domain_fn(rng, 1)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = sv(unif(rng, -2.0, 2.0));
        let inputs = inputs_lg(&lm, &g, gamma, &x);
        let (cv, ce) = coco(&lm, &g, gamma, &x, &o)?;
        let (pv, pe) = comp(&lm, &g, gamma, &x, &o)?;
        let y = x[0] / l;
        let closed = val(&g, &sv(y))? + y * y * (1.0 - l * l) / (2.0 * gamma);
        Ok(vec![
            equal("cocomposition of a scalar map", &inputs, cocomposition_row_oracle(&lm, &g, gamma, &x)?, cv, eq_slack(&[ce])),
            equal("composition of a scalar map", &inputs, closed, pv, eq_slack(&[pe])),
        ])
    }));
    Ok(out)
}

pub(super) fn lemma2(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let dim = rdim(rng, dims);
        let f = conjugable_fn(rng, dim)?;
        let rho = unif(rng, 0.3, 3.0);
        let fs = |s: &Vector| -> Result<f64> { Ok(f.conjugate_eval_closed(s)?.to_f64()) };
        // keep s where the right-hand sides are finite
        let mut s = rvec(rng, dim, 1.0);
        for _ in 0..20 {
            if fs(&s)?.is_finite() && fs(&s.scale(1.0 / rho))?.is_finite() {
                break;
            }
            s = s.scale(0.5);
        }
        let inputs = json!({ "f": f, "rho": rho, "s": s });
        let (a, ae) = solved(&conjugate_numeric(&f.clone().scale_val(rho)?, &s, &o)?);
        let (b, be) = solved(&conjugate_numeric(&f.clone().scale_arg(1.0 / rho)?.scale_val(rho)?, &s, &o)?);
        let (c, ce) = solved(&conjugate_numeric(&f.clone().scale_arg(rho)?, &s, &o)?);
        Ok(vec![
            equal("conjugate of a scaled function", &inputs, rho * fs(&s.scale(1.0 / rho))?, a, eq_slack(&[ae])),
            equal("conjugate of a perspective scaling", &inputs, rho * fs(&s)?, b, eq_slack(&[be])),
            equal("conjugate of an argument scaling", &inputs, fs(&s.scale(1.0 / rho))?, c, eq_slack(&[ce])),
        ])
    }))
}

pub(super) fn lemma3(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let dim = rdim(rng, dims);
        let f = any_fn(rng, dim)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let rho = unif(rng, 0.3, 3.0);
        let x = rvec(rng, dim, 2.0);
        let inputs = json!({ "f": f, "gamma": gamma, "rho": rho, "x": x });
        let a = rho * envelope(&f, gamma, &x)?;
        let b = envelope(&f.clone().scale_val(rho)?, gamma / rho, &x)?;
        let c = envelope(&f, gamma, &x.scale(rho))?;
        let d = envelope(&f.clone().scale_arg(rho)?, gamma / (rho * rho), &x)?;
        Ok(vec![
            equal("scaled envelope", &inputs, a, b, 1e-9 * (1.0 + a.abs())),
            equal("envelope at a scaled argument", &inputs, c, d, 1e-9 * (1.0 + c.abs())),
        ])
    }))
}

/// Catalog atoms paired with a hand-written proximity operator of their
/// conjugate.
type ConjugateProx = Box<dyn Fn(&Vector) -> Vector>;

fn moreau_atom(k: usize, rng: &mut ChaCha8Rng) -> Result<(ConvexFunction, ConjugateProx)> {
    let c = rvec(rng, 2, 0.5);
    let r = unif(rng, 0.2, 1.5);
    Ok(match k {
        0 => (ConvexFunction::l1_norm(2), Box::new(|x: &Vector| x.map(|v| v.clamp(-1.0, 1.0)))),
        1 => (ConvexFunction::eucl_norm(2), Box::new(|x: &Vector| x.scale(1.0 / x.norm().max(1.0)))),
        2 => {
            let a = psd(rng, 2, 0.1)?;
            let shifted = DenseMap::new(2, 2, vec![a.get(0, 0) + 1.0, a.get(0, 1), a.get(1, 0), a.get(1, 1) + 1.0])?;
            let inv = pseudo_inverse_small(&shifted, DEFAULT_RANK_TOL)?;
            let f = ConvexFunction::quad_form(a.clone())?;
            (f, Box::new(move |x: &Vector| a.apply(&inv.apply(x).expect("dims")).expect("dims")))
        }
        3 => {
            let d = if rng.random_bool(0.5) { [r, 0.0] } else { [0.0, r] };
            let f = ConvexFunction::quad_form(DenseMap::diag(&d))?;
            (f, Box::new(move |x: &Vector| (0..2).map(|i| d[i] * x[i] / (d[i] + 1.0)).collect()))
        }
        4 => {
            let u = rvec(rng, 2, 1.0);
            let f = ConvexFunction::affine(u.clone(), unif(rng, -1.0, 1.0))?;
            (f, Box::new(move |_: &Vector| u.clone()))
        }
        5 => {
            let f = ConvexFunction::indicator_ball(c.clone(), r)?;
            (f, Box::new(move |x: &Vector| {
                let z = x - &c;
                z.scale((1.0 - r / z.norm()).max(0.0))
            }))
        }
        6 => {
            let b = orthonormal_rows(rng, 1, 2)?.remove(0);
            let f = ConvexFunction::indicator_subspace(2, std::slice::from_ref(&b))?;
            (f, Box::new(move |x: &Vector| x.axpy(-b.dot(x), &b)))
        }
        7 => {
            let f = ConvexFunction::dist_ball(c.clone(), r)?;
            (f, Box::new(move |x: &Vector| {
                let z = x - &c;
                let n = z.norm();
                if n == 0.0 {
                    z
                } else {
                    z.scale((n - r).clamp(0.0, 1.0) / n)
                }
            }))
        }
        8 => {
            let f = ConvexFunction::support_ball(c.clone(), r)?;
            (f, Box::new(move |x: &Vector| {
                let z = x - &c;
                c.axpy((r / z.norm()).min(1.0), &z)
            }))
        }
        _ => {
            let (w1, w2) = (unif(rng, 0.5, 2.0), unif(rng, 0.5, 2.0));
            let f = ConvexFunction::separable_sum(vec![
                crate::funcat::Block { weight: w1, start: 0, end: 1, function: ConvexFunction::abs() },
                crate::funcat::Block { weight: w2, start: 1, end: 3, function: ConvexFunction::eucl_norm(2) },
            ])?;
            (f, Box::new(move |x: &Vector| {
                let tail = x.slice(1, 3);
                let tail = tail.scale(1.0 / (tail.norm() / w2).max(1.0));
                Vector::concat([&sv(x[0].clamp(-w1, w1)), &tail])
            }))
        }
    })
}

const MOREAU_ATOMS: usize = 10;

pub(super) fn lemma8(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    Ok(ctx.cases(MOREAU_ATOMS * ctx.n(), |i, rng| {
        let (f, prox_conj) = moreau_atom(i % MOREAU_ATOMS, rng)?;
        let x = rvec(rng, f.dim(), 3.0);
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let inputs = json!({ "f": f, "x": x, "gamma": gamma });
        let p = f.prox(1.0, &x)?;
        let q = prox_conj(&x);
        let decomposition = (&(&p + &q) - &x).norm_inf();
        let env_conj = f.conjugate_eval_closed(&q)?.to_f64() + 0.5 * x.dist(&q).powi(2);
        let q_sum = envelope(&f, 1.0, &x)? + env_conj;
        let grad = envelope_gradient(&f, gamma, &x)?;
        let h = 1e-6;
        let fd_err = (0..x.dim())
            .map(|k| -> Result<f64> {
                let e = Vector::basis(x.dim(), k);
                let fd = (envelope(&f, gamma, &x.axpy(h, &e))? - envelope(&f, gamma, &x.axpy(-h, &e))?) / (2.0 * h);
                Ok((fd - grad[k]).abs())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let atom = f.atom_name();
        Ok(vec![
            equal(format!("prox decomposition for {atom}"), &inputs, 0.0, decomposition, 1e-9),
            equal(format!("envelope decomposition for {atom}"), &inputs, 0.5 * x.norm_sq(), q_sum, 1e-9 * (1.0 + x.norm_sq())),
            equal(format!("envelope gradient for {atom}"), &inputs, 0.0, fd_err, 1e-5),
        ])
    }))
}

pub(super) fn lemma10(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let b = rvec(rng, 2, 1.0);
        let scale = unif(rng, 0.3, 2.0);
        let a = DenseMap::new(2, 2, vec![b[0] * b[0], b[0] * b[1], b[1] * b[0], b[1] * b[1]])?.scale(scale);
        let f = ConvexFunction::quad_form(a.clone())?;
        let z = rvec(rng, 2, 1.5);
        let s = a.apply(&z)?;
        let expected = 0.5 * z.dot(&s);
        let kernel = Vector::from(vec![-b[1], b[0]]).scale(unif(rng, 0.1, 1.0) / b.norm());
        let off = &s + &kernel;
        let inputs = json!({ "A": a, "s": s, "off": off });
        Ok(vec![
            equal("conjugate on the range", &inputs, expected, solved(&conjugate_numeric(&f, &s, &o)?).0, 1e-6 * (1.0 + expected)),
            equal("catalog conjugate on the range", &inputs, expected, f.conjugate_eval_closed(&s)?.to_f64(), 1e-9 * (1.0 + expected)),
            equal("conjugate off the range", &inputs, f64::INFINITY, solved(&conjugate_numeric(&f, &off, &o)?).0, 0.0),
            equal("catalog conjugate off the range", &inputs, f64::INFINITY, f.conjugate_eval_closed(&off)?.to_f64(), 0.0),
        ])
    }))
}

pub(super) fn prop1(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let dim = rdim(rng, dims);
        let l = square_map(rng, dim)?;
        let g = conjugable_fn(rng, dim)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let rho = unif(rng, 0.3, 3.0);
        let x = rvec(rng, dim, 2.0);
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "rho": rho, "x": x });

        let (p, s) = subgradient_witness_composition(&spec(&l, &g, gamma)?, &x)?;
        let gs = g.conjugate_function().expect("conjugable");
        let (fp, fe) = comp(&l, &g, gamma, &p, &o)?;
        let (fs, fse) = coco(&l, &gs, 1.0 / gamma, &s, &o)?;

        let (a, ae) = comp(&l, &g, gamma, &x, &o)?;
        let (b, be) = comp(&l, g.clone().scale_val(rho)?, gamma / rho, &x, &o)?;
        let (c, ce) = comp(&l, &g, gamma, &x.scale(rho), &o)?;
        let (d, de) = comp(&l, g.clone().scale_arg(rho)?, gamma / (rho * rho), &x, &o)?;
        let (e, ee) = coco(&l, &g, gamma, &x, &o)?;
        let (f, fe2) = coco(&l, g.clone().scale_val(rho)?, gamma / rho, &x, &o)?;
        let (h, he) = coco(&l, &g, gamma, &x.scale(rho), &o)?;
        let (k, ke) = coco(&l, g.clone().scale_arg(rho)?, gamma / (rho * rho), &x, &o)?;
        Ok(vec![
            equal("conjugate of the composition at a witness", &inputs, p.dot(&s), fp + fs, eq_slack(&[fe, fse])),
            equal("composition value scaling", &inputs, rho * a, b, eq_slack(&[rho * ae, be])),
            equal("composition argument scaling", &inputs, c, d, eq_slack(&[ce, de])),
            equal("cocomposition value scaling", &inputs, rho * e, f, eq_slack(&[rho * ee, fe2])),
            equal("cocomposition argument scaling", &inputs, h, k, eq_slack(&[he, ke])),
        ])
    }))
}

pub(super) fn prop4(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let (rows, cols) = rshape(rng, dims);
        let l = rmap(rng, rows, cols, 0.3, 0.95)?;
        // fibres of dimension one are searched by a line scan, which needs
        // a finite objective along the whole line
        let g = if rows > cols { full_domain_fn(rng, rows)? } else { any_fn(rng, rows)? };
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = if i % 5 == 4 { rvec(rng, cols, 2.0) } else { l.adjoint_apply(&domain_point(&g, rng)?)? };
        let inputs = inputs_lg(&l, &g, gamma, &x);
        let (pv, pe) = comp(&l, &g, gamma, &x, &o)?;
        let (oracle, _) = composition_oracle(&l, &g, gamma, &x)?;
        let (cv, ce) = coco(&l, &g, gamma, &x, &o)?;
        let env = envelope(&g, gamma, &l.apply(&x)?)?;

        let row = rmap(rng, 1, cols, 0.3, 0.95)?;
        let h = any_fn(rng, 1)?;
        let row_inputs = inputs_lg(&row, &h, gamma, &x);
        let (rv, re) = coco(&row, &h, gamma, &x, &o)?;
        Ok(vec![
            equal("composition against the fibre infimum", &inputs, oracle, pv, eq_slack(&[pe])),
            holds("composition domain", &inputs, pv.is_finite() == oracle.is_finite()),
            at_least("cocomposition above the envelope", &inputs, env, cv, eq_slack(&[ce])),
            holds("cocomposition finite everywhere", &inputs, cv.is_finite()),
            equal("cocomposition of a single row", &row_inputs, cocomposition_row_oracle(&row, &h, gamma, &x)?, rv, eq_slack(&[re])),
        ])
    }))
}

pub(super) fn prop5(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let dim = rdim(rng, dims);
        let l = square_map(rng, dim)?;
        let g = full_domain_fn(rng, dim)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let rho = unif(rng, 0.1, 2.0);
        let alpha = unif(rng, -1.0, 1.0);
        let u = rvec(rng, dim, 1.0);
        let x = rvec(rng, dim, 2.0);
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "rho": rho, "alpha": alpha, "u": u, "x": x });
        let beta = gamma / (1.0 + rho * gamma);
        let perturbed = g.clone().add_quad(rho)?.add_affine(l.apply(&u)?, alpha)?;
        let (a, ae) = comp(&l, &perturbed, gamma, &x, &o)?;
        let (b, be) = comp(&l, &g, beta, &x, &o)?;
        let rhs = b + 0.5 * rho * x.norm_sq() + x.dot(&u) + alpha;
        let shifted = g.clone().translate(l.apply(&u)?)?.add_affine(Vector::zeros(dim), alpha)?;
        let (c, ce) = coco(&l, &shifted, gamma, &x, &o)?;
        let (d, de) = coco(&l, &g, gamma, &(&x - &u), &o)?;
        Ok(vec![
            equal("composition of a quadratic and affine perturbation", &inputs, rhs, a, eq_slack(&[ae, be])),
            equal("cocomposition of a translation", &inputs, d + alpha, c, eq_slack(&[ce, de])),
        ])
    }))
}

/// `h(m) ≤ (h(a) + h(b))/2` at the midpoint of `[a, b]`.
fn midpoint(label: &str, inputs: &Value, h: impl Fn(&Vector) -> Result<(f64, f64)>, a: &Vector, b: &Vector) -> Result<CaseRecord> {
    let m = (a + b).scale(0.5);
    let (ha, ea) = h(a)?;
    let (hb, eb) = h(b)?;
    let (hm, em) = h(&m)?;
    Ok(at_most(label, inputs, 0.5 * (ha + hb), hm, eq_slack(&[ea, eb, em])))
}

pub(super) fn prop6(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let dim = rdim(rng, dims);
        let l = square_map(rng, dim)?;
        let base = full_domain_fn(rng, dim)?;
        let a = unif(rng, 0.2, 2.0);
        let g = base.clone().add_quad(a)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let n2 = l.norm().powi(2);
        let beta_a = (a + 1.0 / gamma) / n2 - 1.0 / gamma;
        let beta_0 = (1.0 / gamma) / n2 - 1.0 / gamma;
        let (x, y) = (rvec(rng, dim, 2.0), rvec(rng, dim, 2.0));
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x, "y": y });
        let shifted = |f: &ConvexFunction, beta: f64| {
            let l = &l;
            let o = &o;
            let f = f.clone();
            move |z: &Vector| -> Result<(f64, f64)> {
                let (v, e) = comp(l, &f, gamma, z, o)?;
                Ok((v - 0.5 * beta * z.norm_sq(), e))
            }
        };
        Ok(vec![
            midpoint("composition minus its strong convexity shift", &inputs, shifted(&g, beta_a), &x, &y)?,
            midpoint("composition minus the shift of a plain function", &inputs, shifted(&base, beta_0), &x, &y)?,
        ])
    }))
}

pub(super) fn prop7(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(2 * ctx.n(), |_, rng| {
        let dim = rdim(rng, dims);
        let l = square_map(rng, dim)?;
        let g = conjugable_fn(rng, dim)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let (x, y) = (rvec(rng, dim, 2.0), rvec(rng, dim, 2.0));
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x, "y": y });
        let (p, s) = subgradient_witness_cocomposition(&spec(&l, &g, gamma)?, &x)?;
        let gs = g.conjugate_function().expect("conjugable");
        let (fp, fe) = coco(&l, &g, gamma, &p, &o)?;
        let (fs, fse) = comp(&l, &gs, 1.0 / gamma, &s, &o)?;
        Ok(vec![
            midpoint("composition midpoint convexity", &inputs, |z| comp(&l, &g, gamma, z, &o), &x, &y)?,
            midpoint("cocomposition midpoint convexity", &inputs, |z| coco(&l, &g, gamma, z, &o), &x, &y)?,
            equal("conjugate of the cocomposition at a witness", &inputs, p.dot(&s), fp + fs, eq_slack(&[fe, fse])),
        ])
    }))
}

pub(super) fn prop9(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let dim = rdim(rng, dims);
        let l = square_map(rng, dim)?;
        let g = full_domain_fn(rng, dim)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = rvec(rng, dim, 2.0);
        let z = rvec(rng, dim, 2.0);
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x, "z": z });
        let sp = spec(&l, &g, gamma)?;

        // cocomposition: s = L*y with y ∈ ∂g(q), q = prox_{γg}(Lx)
        let (p, s) = subgradient_witness_cocomposition(&sp, &x)?;
        let lx = l.apply(&x)?;
        let q = g.prox(gamma, &lx)?;
        let y = (&lx - &q).scale(1.0 / gamma);
        let w = rvec(rng, dim, 2.0);
        let (cp, cpe) = coco(&l, &g, gamma, &p, &o)?;
        let (cz, cze) = coco(&l, &g, gamma, &z, &o)?;

        // composition
        let (pp, ps) = subgradient_witness_composition(&sp, &x)?;
        let (fp, fpe) = comp(&l, &g, gamma, &pp, &o)?;
        let (fz, fze) = comp(&l, &g, gamma, &z, &o)?;
        let resolvent = (&(&l.apply(&ps)? - &l.gram_complement_apply(&q)?.scale(1.0 / gamma)) - &y).norm();
        Ok(vec![
            at_least("cocomposition subgradient inequality", &inputs, cp + s.dot(&(&z - &p)), cz, eq_slack(&[cpe, cze])),
            equal("cocomposition witness through the conjugate resolvent", &inputs, 0.0, l.adjoint_apply(&y)?.dist(&s), 1e-12 * (1.0 + s.norm())),
            at_least("subgradient of g at the inner prox", &inputs, val(&g, &q)? + y.dot(&(&w - &q)), val(&g, &w)?, 1e-9),
            at_least("composition subgradient inequality", &inputs, fp + ps.dot(&(&z - &pp)), fz, eq_slack(&[fpe, fze])),
            equal("composition witness through the parallel sum", &inputs, 0.0, resolvent, 1e-10 * (1.0 + y.norm())),
        ])
    }))
}

pub(super) fn prop10(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let rows = rdim(rng, dims);
        let l = rmap(rng, rows, 1, 0.3, 0.95)?;
        let g = any_fn(rng, rows)?;
        let gamma = gamma_draw(rng, -2.0, 1.0);
        let rho = gamma_draw(rng, -2.0, 1.0);
        let x = unif(rng, -2.0, 2.0);
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "rho": rho, "x": x });
        let outer = spec(&l, &g, gamma + rho)?;
        let f_outer = |t: f64| -> Result<f64> { Ok(eval_cocomposition(&outer, &sv(t), &o)?.to_f64()) };
        let lhs = envelope_1d(f_outer, rho, x, 12.0)?;
        let (rhs, re) = coco(&l, EnvelopeFn::new(&g, rho)?, gamma, &sv(x), &o)?;
        let lib = envelope_cocomposition(&outer, rho, &sv(x), &o)?;

        let inner = spec(&l, &g, gamma)?;
        let f_inner = |t: f64| -> Result<f64> { Ok(eval_cocomposition(&inner, &sv(t), &o)?.to_f64()) };
        let self_env = envelope_1d(f_inner, gamma, x, 12.0)?;
        let direct = envelope(&g, gamma, &l.apply(&sv(x))?)?;
        let lib_self = envelope_cocomposition(&inner, gamma, &sv(x), &o)?;
        let line = 1e-6;
        Ok(vec![
            equal("envelope of a cocomposition with a larger parameter", &inputs, lhs, rhs, eq_slack(&[re, line])),
            equal("library envelope of a cocomposition", &inputs, lhs, lib, eq_slack(&[line])),
            equal("envelope of a cocomposition with its own parameter", &inputs, direct, self_env, eq_slack(&[line])),
            equal("library envelope with the same parameter", &inputs, direct, lib_self, 1e-12 * (1.0 + direct.abs())),
        ])
    }))
}

pub(super) fn cor_argmin(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    let fixed_l = DenseMap::scalar(0.5);
    let fixed_g = ConvexFunction::abs().translate(sv(1.0))?;
    let mut out = ctx.cases(3, |k, _| {
        let gamma = [0.25, 1.0, 4.0][k];
        let r = argmin_cocomposition(&spec(&fixed_l, &fixed_g, gamma)?, &o)?;
        let p = r.argpoint.ok_or_else(|| Error::param("no minimizer"))?;
        Ok(vec![equal("minimizer of a Huber composition", &inputs_lg(&fixed_l, &fixed_g, gamma, &p), 2.0, p[0], 1e-5)])
    });
    out.extend(ctx.cases(ctx.n(), |_, rng| {
        let rows = rdim(rng, dims);
        let l = rmap(rng, rows, 1, 0.3, 0.95)?;
        let g = coercive_fn(rng, rows)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let sp = spec(&l, &g, gamma)?;
        let r = argmin_cocomposition(&sp, &o)?;
        let p = r.argpoint.clone().ok_or_else(|| Error::param("no minimizer"))?;
        let inputs = inputs_lg(&l, &g, gamma, &p);
        let f = |t: f64| -> Result<f64> { Ok(eval_cocomposition(&sp, &sv(t), &o)?.to_f64()) };
        let (_, min) = line_min(f, -10.0, 10.0, 400)?;
        let (at_p, pe) = solved(&eval_cocomposition(&sp, &p, &o)?);
        Ok(vec![
            equal("infimum through the envelope", &inputs, min, r.to_f64(), 1e-6),
            equal("cocomposition at the envelope minimizer", &inputs, min, at_p, eq_slack(&[pe])),
        ])
    }));
    Ok(out)
}

pub(super) fn cor11(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let (k, h, gdim) = (rdim(rng, dims), rdim(rng, dims), rdim(rng, dims));
        let s = rmap(rng, h, k, 0.3, 0.95)?;
        let l = rmap(rng, gdim, h, 0.3, 0.95)?;
        let g = full_domain_fn(rng, gdim)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = rvec(rng, k, 2.0);
        let ls = l.compose(&s)?;
        let inputs = json!({ "S": s, "L": l, "g": g, "gamma": gamma, "x": x });
        let inner = CocompositionFn { spec: spec(&l, g.clone(), gamma)?, opts: o };
        let (a, ae) = coco(&s, inner, gamma, &x, &o)?;
        let (b, be) = coco(&ls, &g, gamma, &x, &o)?;

        let sq = square_map(rng, k)?;
        let lq = square_map(rng, k)?;
        let gq = full_domain_fn(rng, k)?;
        let sq_inputs = json!({ "S": sq, "L": lq, "g": gq, "gamma": gamma, "x": x });
        let inner = CompositionFn { spec: spec(&lq, gq.clone(), gamma)?, opts: o };
        let (c, ce) = comp(&sq, inner, gamma, &x, &o)?;
        let (d, de) = comp(&lq.compose(&sq)?, &gq, gamma, &x, &o)?;
        Ok(vec![
            equal("nested cocompositions", &inputs, b, a, 1e-5 + ae + be),
            equal("nested compositions", &sq_inputs, d, c, 1e-5 + ce + de),
        ])
    }))
}

/// `⊙(tx)/t` against `rec g(Lx)`, with the slack of a `β`-Lipschitz `g`.
fn recession_quotient(l: &DenseMap, g: &ConvexFunction, gamma: f64, x: &Vector, t: f64, o: &SolverOpts) -> Result<(f64, f64, f64)> {
    let beta = g.lipschitz_bound().ok_or_else(|| Error::param("Lipschitz function expected"))?;
    let rec = g.recession_eval(&l.apply(x)?)?.to_f64();
    let (v, e) = coco(l, g, gamma, &x.scale(t), o)?;
    let k = recession_offset(g, &l.apply(&x.scale(t))?, t, rec)?;
    Ok((rec, v / t, (gamma * beta * beta / 2.0 + k + e) / t + INEQUALITY_SLACK))
}

pub(super) fn prop13(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let (rows, cols) = rshape(rng, dims);
        let l = rmap(rng, rows, cols, 0.3, 0.95)?;
        let g = lipschitz_fn(rng, rows)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = rvec(rng, cols, 1.0);
        let inputs = inputs_lg(&l, &g, gamma, &x);
        let (rec, quotient, slack) = recession_quotient(&l, &g, gamma, &x, 1e4, &o)?;
        let lib = recession_cocomposition(&spec(&l, &g, gamma)?, &x)?.to_f64();
        Ok(vec![
            equal("recession quotient of the cocomposition", &inputs, rec, quotient, slack),
            equal("library recession function", &inputs, rec, lib, 1e-12 * (1.0 + rec.abs())),
        ])
    }))
}

pub(super) fn prop16(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |_, rng| {
        let (rows, cols) = rshape(rng, dims);
        let l = rmap(rng, rows, cols, 0.3, 0.95)?;
        let g = lipschitz_fn(rng, rows)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = rvec(rng, cols, 1.0);
        let xi = unif(rng, 0.2, 3.0);
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x, "xi": xi });
        let sp = spec(&l, &g, gamma)?;
        let persp = perspective_cocomposition(&sp, &x, xi, &o)?.to_f64();
        let scaled = g.clone().scale_arg(1.0 / xi)?.scale_val(xi)?;
        let (direct, de) = coco(&l, &scaled, xi * gamma, &x, &o)?;
        let (rec, quotient, slack) = recession_quotient(&l, &g, gamma, &x, 1e4, &o)?;
        let at_zero = perspective_cocomposition(&sp, &x, 0.0, &o)?.to_f64();
        let negative = perspective_cocomposition(&sp, &x, -xi, &o)?.to_f64();
        Ok(vec![
            equal("perspective with a positive scale", &inputs, direct, persp, eq_slack(&[de, o.tol])),
            equal("perspective at zero scale", &inputs, rec, at_zero, 1e-12 * (1.0 + rec.abs())),
            equal("perspective near zero scale", &inputs, at_zero, quotient, slack),
            equal("perspective with a negative scale", &inputs, f64::INFINITY, negative, 0.0),
        ])
    }))
}

pub(super) fn prop17(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let steps = ctx.scale.grid_steps;
    Ok(ctx.cases(2 * ctx.n(), |i, rng| {
        let l = if i % 10 == 9 { 1.0 } else { unif(rng, 0.3, 0.999) } * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lm = DenseMap::scalar(l);
        let g = any_fn(rng, 1)?;
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = unif(rng, -3.0, 3.0);
        let inputs = inputs_lg(&lm, &g, gamma, &sv(x));
        let sp = spec(&lm, &g, gamma)?;
        if i % 2 == 0 {
            let f = |t: f64| -> Result<f64> {
                let y = t / l;
                Ok(val(&g, &sv(y))? + y * y * (1.0 - l * l) / (2.0 * gamma))
            };
            let (p, step) = grid_prox_1d(&f, gamma, x, steps)?;
            Ok(vec![equal("composition prox against grid argmin", &inputs, p, prox_composition(&sp, &sv(x))?[0], 2.0 * step)])
        } else {
            let row = lm.clone();
            let f = |t: f64| cocomposition_row_oracle(&row, &g, gamma, &sv(t));
            let (p, step) = grid_prox_1d(&f, gamma, x, steps)?;
            Ok(vec![equal("cocomposition prox against grid argmin", &inputs, p, prox_cocomposition(&sp, &sv(x))?[0], 2.0 * step)])
        }
    }))
}

fn gradient_ratio<G: ProxFunction>(sp: &CompositionSpec<G>, x: &Vector, y: &Vector, o: &SolverOpts) -> Result<f64> {
    let gx = gradient_cocomposition(sp, x, o)?;
    let gy = gradient_cocomposition(sp, y, o)?;
    Ok(gx.dist(&gy) / x.dist(y))
}

pub(super) fn prop18(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = tight();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let dim = rdim(rng, dims);
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let x = rvec(rng, dim, 2.0);
        let dir = rvec(rng, dim, 1.0);
        let y = x.axpy(unif(rng, 0.05, 1.0) / dir.norm(), &dir);
        if i % 2 == 0 {
            let (rows, _) = rshape(rng, dims);
            let l = rmap(rng, rows, dim, 0.3, 0.95)?;
            let g = any_fn(rng, rows)?;
            let n2 = l.norm().powi(2);
            let beta = gamma * (1.0 / n2 - 1.0);
            let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x, "y": y });
            let ratio = gradient_ratio(&spec(&l, &g, gamma)?, &x, &y, &o)?;
            Ok(vec![at_most("gradient Lipschitz ratio of a contraction", &inputs, 1.0 / beta, ratio, 0.1 / beta)])
        } else {
            let l = if rng.random_bool(0.3) { unit_map(rng, dim)? } else { rmap(rng, dim, dim, 0.3, 0.95)? };
            let (g, theta) = if rng.random_bool(0.5) {
                (ConvexFunction::quadratic(l.rows()).translate(rvec(rng, l.rows(), 0.5))?, 1.0)
            } else {
                let a = psd(rng, l.rows(), 0.2)?;
                let theta = a.norm();
                (ConvexFunction::quad_form(a)?, theta)
            };
            let n2 = l.norm().powi(2);
            let beta = (1.0 / theta + gamma) / n2 - gamma;
            let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x, "y": y });
            let ratio = gradient_ratio(&spec(&l, &g, gamma)?, &x, &y, &o)?;
            Ok(vec![at_most("gradient Lipschitz ratio for a smooth function", &inputs, 1.0 / beta, ratio, 0.1 / beta)])
        }
    }))
}

pub(super) fn cor19(ctx: &Ctx) -> Result<Vec<CaseRecord>> {
    let o = opts();
    let dims = ctx.max_dim();
    Ok(ctx.cases(ctx.n(), |i, rng| {
        let cols = rdim(rng, dims);
        let l = if i % 5 == 4 {
            unit_map(rng, cols)?
        } else {
            let rows = rdim(rng, dims);
            rmap(rng, rows, cols, 0.3, 0.95)?
        };
        let g = lipschitz_fn(rng, l.rows())?;
        let beta = g.lipschitz_bound().expect("Lipschitz family");
        let gamma = gamma_draw(rng, -2.0, 2.0);
        let (x, y) = (rvec(rng, cols, 2.0), rvec(rng, cols, 2.0));
        let inputs = json!({ "L": l, "g": g, "gamma": gamma, "x": x, "y": y });
        let (a, ae) = coco(&l, &g, gamma, &x, &o)?;
        let (b, be) = coco(&l, &g, gamma, &y, &o)?;
        Ok(vec![at_most(
            "cocomposition Lipschitz transfer",
            &inputs,
            beta * l.norm() * x.dist(&y),
            (a - b).abs(),
            2.0 * o.tol + ae + be,
        )])
    }))
}
