//! Property tests over randomly drawn catalog functions, operators and points.

use proptest::prelude::*;
use proxmix::cli::{parse_config, Command, JobConfig, Target};
use proxmix::mixture::{comixture_envelope, comixture_eval, comixture_prox, embedded_proxes, mixture_eval, mixture_prox, weighted_sum, MixtureSpec, MixtureTerm};
use proxmix::moreau::envelope;
use proxmix::proxcomp::{eval_cocomposition, eval_composition, prox_cocomposition, prox_composition};
use proxmix::{CompositionSpec, ConvexFunction, DenseMap, Execution, ExtReal, SolverOpts, Vector};

const CASES: u32 = 64;

fn vecs(dim: usize, r: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-r..r, dim).prop_map(Vector::from)
}

fn map(rows: usize, cols: usize) -> impl Strategy<Value = DenseMap> {
    prop::collection::vec(-1.0..1.0f64, rows * cols).prop_map(move |d| DenseMap::new(rows, cols, d).unwrap())
}

/// `M / max(1, ‖M‖)`: admissible after scaling, possibly with unit norm.
fn admissible(rows: usize, cols: usize) -> impl Strategy<Value = DenseMap> {
    map(rows, cols).prop_filter("nonzero", |m| m.max_abs() > 1e-3).prop_map(|m| {
        let n = m.operator_norm(1e-13).unwrap();
        m.scale(1.0 / n.max(1.0))
    })
}

fn catalog(dim: usize) -> impl Strategy<Value = ConvexFunction> {
    (0..8usize, vecs(dim, 1.0), 0.2..2.0f64).prop_map(move |(k, c, r)| match k {
        0 => ConvexFunction::l1_norm(dim),
        1 => ConvexFunction::eucl_norm(dim).translate(c).unwrap(),
        2 => ConvexFunction::quadratic(dim).translate(c).unwrap(),
        3 => ConvexFunction::indicator_ball(c, r).unwrap(),
        4 => ConvexFunction::dist_ball(c, r).unwrap(),
        5 => ConvexFunction::support_ball(c, r).unwrap(),
        6 => ConvexFunction::eucl_norm(dim).scale_val(r).unwrap().translate(c).unwrap(),
        _ => ConvexFunction::l1_norm(dim).scale_arg(r).unwrap().add_quad(0.5).unwrap(),
    })
}

/// Finite-valued and Lipschitz.
fn lipschitz(dim: usize) -> impl Strategy<Value = ConvexFunction> {
    (0..3usize, vecs(dim, 1.0), 0.2..2.0f64).prop_map(move |(k, c, r)| match k {
        0 => ConvexFunction::l1_norm(dim).translate(c).unwrap(),
        1 => ConvexFunction::eucl_norm(dim).translate(c).unwrap(),
        _ => ConvexFunction::dist_ball(c, r).unwrap(),
    })
}

fn val(v: ExtReal) -> f64 {
    v.to_f64()
}

fn opts() -> SolverOpts {
    SolverOpts::default().with_tol(1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn adjoint_identity(m in map(3, 2), x in vecs(2, 3.0), y in vecs(3, 3.0)) {
        let lhs = m.apply(&x).unwrap().dot(&y);
        let rhs = x.dot(&m.adjoint_apply(&y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + x.norm() * y.norm()));
    }

    #[test]
    fn norm_bound_certifies(m in map(3, 3), x in vecs(3, 1.0)) {
        prop_assume!(x.norm() > 1e-6);
        let u = x.scale(1.0 / x.norm());
        prop_assert!(m.apply(&u).unwrap().norm() <= m.norm_bound() * (1.0 + 1e-12));
    }

    #[test]
    fn gram_complement_is_psd(l in admissible(3, 2), y in vecs(3, 2.0)) {
        prop_assert!(y.dot(&l.gram_complement_apply(&y).unwrap()) >= -1e-10);
    }

    #[test]
    fn prox_minimizes(f in catalog(2), gamma in 0.1..4.0f64, x in vecs(2, 3.0), zs in prop::collection::vec(vecs(2, 3.0), 20)) {
        let p = f.prox(gamma, &x).unwrap();
        let at = |y: &Vector| val(f.eval(y).unwrap()) + x.dist(y).powi(2) / (2.0 * gamma);
        let best = at(&p);
        prop_assert!(best.is_finite());
        for z in zs.iter().chain(std::iter::once(&p.axpy(1e-3, &Vector::basis(2, 0)))) {
            prop_assert!(best <= at(z) + 1e-10, "{} > {}", best, at(z));
        }
    }

    #[test]
    fn prox_is_firmly_nonexpansive(f in catalog(2), gamma in 0.1..4.0f64, x in vecs(2, 3.0), y in vecs(2, 3.0)) {
        let (p, q) = (f.prox(gamma, &x).unwrap(), f.prox(gamma, &y).unwrap());
        let d = &p - &q;
        prop_assert!(d.norm_sq() <= d.dot(&(&x - &y)) + 1e-12);
    }

    #[test]
    fn fenchel_young_equality_at_prox_witness(f in catalog(2), x in vecs(2, 3.0)) {
        let p = f.prox(1.0, &x).unwrap();
        let s = &x - &p;
        let fp = val(f.eval(&p).unwrap());
        let fs = val(f.conjugate_eval_closed(&s).unwrap());
        prop_assert!((fp + fs - p.dot(&s)).abs() <= 1e-9 * (1.0 + p.norm() * s.norm()), "{} {} {}", fp, fs, p.dot(&s));
        let z = x.scale(0.5);
        prop_assert!(val(f.eval(&z).unwrap()) + fs >= z.dot(&s) - 1e-9);
    }

    #[test]
    fn moreau_identity(f in catalog(2), x in vecs(2, 3.0)) {
        let fc = f.conjugate_function();
        prop_assume!(fc.is_some());
        let fc = fc.unwrap();
        let total = envelope(&f, 1.0, &x).unwrap() + envelope(&fc, 1.0, &x).unwrap();
        prop_assert!((total - x.norm_sq() / 2.0).abs() <= 1e-9 * (1.0 + x.norm_sq()));
        let dec = &f.prox(1.0, &x).unwrap() + &f.prox_conjugate(1.0, &x).unwrap();
        prop_assert!(dec.dist(&x) <= 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn envelope_scaling(f in catalog(2), gamma in 0.2..3.0f64, rho in 0.3..3.0f64, x in vecs(2, 3.0)) {
        let lhs = rho * envelope(&f, gamma, &x).unwrap();
        let rhs = envelope(&f.clone().scale_val(rho).unwrap(), gamma / rho, &x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        let lhs = envelope(&f, gamma, &x.scale(rho)).unwrap();
        let rhs = envelope(&f.clone().scale_arg(rho).unwrap(), gamma / (rho * rho), &x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn ordering_chain(l in admissible(2, 2), g in lipschitz(2), gamma in 0.2..4.0f64, x in vecs(2, 2.0)) {
        let spec = CompositionSpec::new(l.clone(), g.clone(), gamma).unwrap();
        let o = opts();
        let coco = eval_cocomposition(&spec, &x, &o).unwrap();
        let comp = eval_composition(&spec, &x, &o).unwrap();
        let lx = l.apply(&x).unwrap();
        let tol = 1e-6 + coco.gap.unwrap_or(coco.residual) + comp.residual;
        prop_assert!(envelope(&g, gamma, &lx).unwrap() <= coco.to_f64() + tol);
        prop_assert!(coco.to_f64() <= val(g.eval(&lx).unwrap()) + tol);
        prop_assert!(coco.to_f64() <= comp.to_f64() + tol);
    }

    #[test]
    fn coisometry_collapse(theta in 0.0..6.3f64, g in lipschitz(1), gamma in 0.2..4.0f64, x in vecs(2, 2.0)) {
        let l = DenseMap::from_rows(&[vec![theta.cos(), theta.sin()]]).unwrap();
        let spec = CompositionSpec::new(l.clone(), g.clone(), gamma).unwrap();
        let coco = eval_cocomposition(&spec, &x, &opts()).unwrap().to_f64();
        prop_assert!((coco - val(g.eval(&l.apply(&x).unwrap()).unwrap())).abs() <= 1e-6);
    }

    #[test]
    fn composition_proxes_are_firmly_nonexpansive(l in admissible(3, 2), g in catalog(3), gamma in 0.2..4.0f64, x in vecs(2, 3.0), y in vecs(2, 3.0)) {
        let spec = CompositionSpec::new(l, g, gamma).unwrap();
        for prox in [prox_composition::<ConvexFunction>, prox_cocomposition::<ConvexFunction>] {
            let d = &prox(&spec, &x).unwrap() - &prox(&spec, &y).unwrap();
            prop_assert!(d.norm_sq() <= d.dot(&(&x - &y)) + 1e-10);
        }
    }

    #[test]
    fn mixture_prox_decomposes(l1 in admissible(2, 2), l2 in admissible(1, 2), g1 in catalog(2), g2 in catalog(1), a in 0.1..0.9f64, gamma in 0.2..4.0f64, x in vecs(2, 3.0)) {
        let terms = vec![MixtureTerm { alpha: a, l: l1, g: g1 }, MixtureTerm { alpha: 1.0 - a, l: l2, g: g2 }];
        let spec = MixtureSpec::new(terms, gamma).unwrap();
        let (pm, pc) = embedded_proxes(&spec, &x).unwrap();
        prop_assert!(pm.dist(&mixture_prox(&spec, &x).unwrap()) <= 1e-10);
        prop_assert!(pc.dist(&comixture_prox(&spec, &x).unwrap()) <= 1e-10);
    }

    #[test]
    fn comixture_sandwich(l1 in admissible(1, 1), l2 in admissible(1, 1), g1 in lipschitz(1), g2 in lipschitz(1), a in 0.1..0.9f64, gamma in 0.2..4.0f64, x in vecs(1, 2.0)) {
        let terms = vec![MixtureTerm { alpha: a, l: l1, g: g1 }, MixtureTerm { alpha: 1.0 - a, l: l2, g: g2 }];
        let spec = MixtureSpec::new(terms, gamma).unwrap();
        let o = opts();
        let co = comixture_eval(&spec, &x, &o).unwrap();
        let mx = mixture_eval(&spec, &x, &o).unwrap();
        prop_assert!(co.discrepancy() <= 2.0 * o.tol + 1e-9, "{:?}", co);
        prop_assert!(mx.discrepancy() <= 2.0 * o.tol + 1e-9, "{:?}", mx);
        let tol = 1e-6;
        prop_assert!(comixture_envelope(&spec, &x).unwrap() <= co.to_f64() + tol);
        prop_assert!(co.to_f64() <= val(weighted_sum(&spec, &x).unwrap()) + tol);
        prop_assert!(co.to_f64() <= mx.to_f64() + tol);
    }

    #[test]
    fn execution_strategies_agree(n in 0..300usize) {
        let f = |i: usize| (i as f64).sin() * 1e3;
        prop_assert_eq!(Execution::Sequential.map(n, f), Execution::Parallel.map(n, f));
    }

    #[test]
    fn job_configs_round_trip(seed in any::<u64>(), pts in prop::collection::vec(vecs(1, 1e6), 1..5), gamma in 1e-3..1e3f64) {
        let mut cfg = JobConfig::new(Command::Eval);
        let spec = CompositionSpec::new(DenseMap::scalar(0.5), ConvexFunction::abs(), gamma).unwrap();
        cfg.target = Some(Target::Cocomposition(spec));
        cfg.points = pts;
        cfg.seed = seed;
        let json = cfg.to_json();
        prop_assert_eq!(parse_config(&json).unwrap().to_json(), json);
    }
}
