//! Worked values, each confirmed by a brute-force scan written here rather
//! than by the library's own solvers.

use proxmix::cli::Preset;
use proxmix::linalg::pseudo_inverse_small;
use proxmix::mixture::{comixture_eval, comixture_prox, mixture_prox, proximal_average, sampled_expectation_prox, MixtureSpec, MixtureTerm};
use proxmix::moreau::{envelope, envelope_gradient, grid_oracle, Grid, GridProblem};
use proxmix::proxcomp::{
    argmin_cocomposition, envelope_cocomposition, eval_cocomposition, eval_composition, perspective_cocomposition,
    prox_cocomposition, prox_composition, subgradient_witness_cocomposition,
};
use proxmix::{CompositionSpec, ConvexFunction, DenseMap, ExtReal, SolverOpts, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn s(v: f64) -> Vector {
    Vector::scalar(v)
}

fn v2(a: f64, b: f64) -> Vector {
    Vector::from(vec![a, b])
}

fn half_abs(gamma: f64) -> CompositionSpec {
    CompositionSpec::new(DenseMap::scalar(0.5), ConvexFunction::abs(), gamma).unwrap()
}

fn opts() -> SolverOpts {
    SolverOpts::default().with_tol(1e-10)
}

/// `(argmin, min)` of `f` over the points `lo + k·h` in `[lo, hi]`.
fn scan_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, h: f64) -> (f64, f64) {
    let n = ((hi - lo) / h).round() as usize;
    let mut best = (lo, f(lo));
    for k in 0..=n {
        let t = lo + k as f64 * h;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

fn fine_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let (mut c, mut h) = (scan_min(&f, lo, hi, 1e-3).0, 1e-3);
    let mut best = (c, f(c));
    while h > 1e-9 {
        best = scan_min(&f, c - 2.0 * h, c + 2.0 * h, h / 20.0);
        c = best.0;
        h /= 20.0;
    }
    best
}

#[test]
fn cocomposition_worked_value() {
    // sup over |y| ≤ 1 of 0.5y − (3/8)y²
    let (_, neg) = fine_min(|y| -(0.5 * y - 0.375 * y * y), -1.0, 1.0);
    assert!((-neg - 1.0 / 6.0).abs() < 1e-9);
    let r = eval_cocomposition(&half_abs(1.0), &s(1.0), &opts()).unwrap();
    assert!((r.to_f64() - 1.0 / 6.0).abs() < 1e-6, "{r:?}");
}

#[test]
fn composition_worked_value() {
    // the fibre {0.5y = 0.5} is the single point y = 1
    let feasible: Vec<f64> = (0..=4000).map(|k| -2.0 + k as f64 * 1e-3).filter(|y| (0.5 * y - 0.5f64).abs() < 1e-9).collect();
    assert_eq!(feasible.len(), 1);
    let y = feasible[0];
    let oracle = y.abs() + 0.5 * (y * y - 0.25 * y * y);
    assert!((oracle - 1.375).abs() < 1e-9);
    let r = eval_composition(&half_abs(1.0), &s(0.5), &opts()).unwrap();
    assert!((r.to_f64() - 1.375).abs() < 1e-6, "{r:?}");
}

#[test]
fn prox_formulas_match_grid_prox() {
    let spec = half_abs(1.0);
    let o = opts();
    assert_eq!(prox_composition(&spec, &s(2.0)).unwrap(), s(0.0));
    let p = prox_composition(&spec, &s(4.0)).unwrap().as_slice()[0];
    assert_eq!(p, 0.5);
    let comp = |y: f64| eval_composition(&spec, &s(y), &o).unwrap().to_f64();
    let (arg, _) = scan_min(|y| comp(y) + (4.0 - y).powi(2) / 2.0, -1.0, 2.0, 1e-3);
    assert!((arg - p).abs() <= 2e-3, "{arg}");

    let p = prox_cocomposition(&spec, &s(2.0)).unwrap().as_slice()[0];
    assert_eq!(p, 1.5);
    let coco = |y: f64| eval_cocomposition(&spec, &s(y), &o).unwrap().to_f64();
    let (arg, _) = scan_min(|y| coco(y) + (2.0 - y).powi(2) / 2.0, 0.5, 2.5, 1e-3);
    assert!((arg - p).abs() <= 2e-3, "{arg}");
    let (pt, sub) = subgradient_witness_cocomposition(&spec, &s(2.0)).unwrap();
    assert_eq!((pt, sub.clone()), (s(1.5), s(0.5)));
    for k in 0..50 {
        let z = -5.0 + 0.2 * k as f64;
        assert!(coco(z) >= coco(1.5) + (z - 1.5) * sub.as_slice()[0] - 1e-6);
    }
}

#[test]
fn envelope_and_perspective_values() {
    let spec = half_abs(1.0);
    let o = opts();
    assert!((envelope_cocomposition(&spec, 1.0, &s(2.0), &o).unwrap() - 0.5).abs() < 1e-15);
    let coco = |y: f64| eval_cocomposition(&spec, &s(y), &o).unwrap().to_f64();
    for rho in [0.5, 2.0] {
        let (_, m) = fine_min(|y| coco(y) + (2.0 - y).powi(2) / (2.0 * rho), -2.0, 4.0);
        let got = envelope_cocomposition(&spec, rho, &s(2.0), &o).unwrap();
        assert!((got - m).abs() < 1e-4, "rho {rho}: {got} vs {m}");
    }
    let p = perspective_cocomposition(&spec, &s(2.0), 2.0, &o).unwrap().to_f64();
    assert!((p - 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn huber_envelope_and_gradient() {
    let f = ConvexFunction::eucl_norm(1);
    let (_, m) = fine_min(|y| y.abs() + (2.0 - y).powi(2) / 2.0, -4.0, 4.0);
    assert!((m - 1.5).abs() < 1e-9);
    assert!((envelope(&f, 1.0, &s(2.0)).unwrap() - 1.5).abs() < 1e-12);
    assert!((envelope(&f, 1.0, &s(0.5)).unwrap() - 0.125).abs() < 1e-12);
    let h = 1e-6;
    let fd = (envelope(&f, 1.0, &s(2.0 + h)).unwrap() - envelope(&f, 1.0, &s(2.0 - h)).unwrap()) / (2.0 * h);
    let g = envelope_gradient(&f, 1.0, &s(2.0)).unwrap().as_slice()[0];
    assert_eq!(g, 1.0);
    assert!((fd - g).abs() < 1e-5);
}

#[test]
fn catalog_values() {
    let ball = ConvexFunction::dist_ball(Vector::zeros(2), 2.0).unwrap();
    assert_eq!(ball.prox(1.0, &v2(4.0, 0.0)).unwrap(), v2(3.0, 0.0));
    let ball1 = ConvexFunction::dist_ball(s(0.0), 2.0).unwrap();
    let (arg, _) = scan_min(|y| (y.abs() - 2.0).max(0.0) + (4.0 - y).powi(2) / 2.0, -6.0, 6.0, 1e-3);
    assert!((ball1.prox(1.0, &s(4.0)).unwrap().as_slice()[0] - arg).abs() <= 1e-3);
    let norm = ConvexFunction::eucl_norm(2);
    let p = norm.prox_conjugate(1.0, &v2(3.0, 0.0)).unwrap();
    assert!(p.dist(&v2(1.0, 0.0)) < 1e-15);
    let q = ConvexFunction::quad_form(DenseMap::diag(&[2.0, 0.0])).unwrap();
    assert_eq!(q.conjugate_eval_closed(&v2(2.0, 0.0)).unwrap(), ExtReal::Finite(1.0));
    assert_eq!(q.conjugate_eval_closed(&v2(0.0, 1.0)).unwrap(), ExtReal::PlusInfinity);
    let l1 = ConvexFunction::l1_norm(2);
    assert_eq!(l1.conjugate_eval_closed(&v2(0.5, -0.9)).unwrap(), ExtReal::Finite(0.0));
    let g = Preset::Example1.function();
    assert!((g.eval(&Vector::zeros(5)).unwrap().to_f64() - 5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn grid_oracle_reproduces_known_values() {
    let huber = |y: &Vector| Ok(ExtReal::Finite(y.norm()));
    let x = s(2.0);
    let out = grid_oracle(&GridProblem::Envelope { f: &huber, gamma: 1.0, x: &x }, &Grid::new(-4.0, 4.0, 2000).unwrap(), Some(3.0)).unwrap();
    assert!((out.value.to_f64() - 1.5).abs() < 1e-3);
    let dist = |y: &Vector| Ok(ExtReal::Finite((y.norm() - 2.0).max(0.0)));
    let x = s(4.0);
    let out = grid_oracle(&GridProblem::Prox { f: &dist, gamma: 1.0, x: &x }, &Grid::new(-6.0, 6.0, 2000).unwrap(), None).unwrap();
    assert!((out.point.unwrap().as_slice()[0] - 3.0).abs() <= out.step);
}

/// Largest eigenvalue of `[[a, b], [b, d]]` from its characteristic polynomial.
fn top_eigenvalue_2x2(a: f64, b: f64, d: f64) -> f64 {
    let tr = a + d;
    let det = a * d - b * b;
    0.5 * (tr + (tr * tr - 4.0 * det).sqrt())
}

#[test]
fn operator_norms_and_pseudo_inverse() {
    for p in [Preset::Example1, Preset::Example2] {
        let l = p.operator();
        let g = l.gram();
        let want = top_eigenvalue_2x2(g.get(0, 0), g.get(0, 1), g.get(1, 1)).sqrt();
        assert!((l.operator_norm(1e-13).unwrap() - want).abs() < 1e-10);
        assert!(want <= 1.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = DenseMap::new(3, 3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let a = m.gram();
    let pi = pseudo_inverse_small(&a, 1e-10).unwrap();
    for k in 0..3 {
        let e = Vector::basis(3, k);
        let apa = a.apply(&pi.apply(&a.apply(&e).unwrap()).unwrap()).unwrap();
        assert!(apa.dist(&a.apply(&e).unwrap()) < 1e-9);
        let pap = pi.apply(&a.apply(&pi.apply(&e).unwrap()).unwrap()).unwrap();
        assert!(pap.dist(&pi.apply(&e).unwrap()) < 1e-9);
    }
    for _ in 0..100 {
        let x = Vector::from(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let y = Vector::from(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        assert!((m.apply(&x).unwrap().dot(&y) - x.dot(&m.adjoint_apply(&y).unwrap())).abs() < 1e-12);
    }
    assert!((DenseMap::scalar(0.5).gram_complement_apply(&s(1.0)).unwrap().as_slice()[0] - 0.75).abs() < 1e-15);
}

#[test]
fn cocomposition_argmin_of_shifted_huber() {
    let g = ConvexFunction::eucl_norm(1).translate(s(1.0)).unwrap();
    for gamma in [0.25, 1.0, 4.0] {
        let spec = CompositionSpec::new(DenseMap::scalar(0.5), g.clone(), gamma).unwrap();
        let r = argmin_cocomposition(&spec, &opts()).unwrap();
        let (arg, m) = scan_min(|y| (0.5 * y - 1.0f64).abs(), -4.0, 8.0, 1e-3);
        assert!((r.argpoint.as_ref().unwrap().as_slice()[0] - 2.0).abs() < 1e-4 && (arg - 2.0).abs() < 1e-9);
        assert!((r.to_f64() - m).abs() < 1e-8);
    }
}

#[test]
fn cocomposition_decreases_in_gamma() {
    let vals: Vec<f64> =
        [0.25, 1.0, 4.0].iter().map(|&g| eval_cocomposition(&half_abs(g), &s(1.0), &opts()).unwrap().to_f64()).collect();
    assert!(vals[0] > vals[1] && vals[1] > vals[2], "{vals:?}");
    // one-row closed form env_{γ(1−l²)}|·|(0.5)
    for (g, v) in [0.25, 1.0, 4.0].iter().zip(&vals) {
        let mu = g * 0.75;
        let (_, m) = fine_min(|y| y.abs() + (0.5 - y).powi(2) / (2.0 * mu), -2.0, 2.0);
        assert!((v - m).abs() < 1e-6);
    }
}

#[test]
fn proximal_average_prox() {
    let pav = proximal_average(vec![(0.5, ConvexFunction::abs()), (0.5, ConvexFunction::quadratic(1))], 1.0).unwrap();
    assert!((mixture_prox(&pav, &s(2.0)).unwrap().as_slice()[0] - 1.0).abs() < 1e-15);
}

#[test]
fn comixture_prox_and_envelope_match_grid() {
    let terms = vec![
        MixtureTerm { alpha: 0.5, l: DenseMap::scalar(0.8), g: ConvexFunction::abs() },
        MixtureTerm { alpha: 0.5, l: DenseMap::scalar(0.6), g: ConvexFunction::abs().translate(s(1.0)).unwrap() },
    ];
    let spec = MixtureSpec::new(terms, 1.0).unwrap();
    let o = opts();
    let r = |y: f64| comixture_eval(&spec, &s(y), &o).unwrap().to_f64();
    let x = 1.7;
    let p = comixture_prox(&spec, &s(x)).unwrap().as_slice()[0];
    let (arg, m) = scan_min(|y| r(y) + (x - y).powi(2) / 2.0, -1.0, 3.0, 1e-3);
    assert!((arg - p).abs() <= 2e-3, "{arg} vs {p}");
    let huber = |l: f64, c: f64| {
        let t: f64 = l * x - c;
        if t.abs() <= 1.0 { t * t / 2.0 } else { t.abs() - 0.5 }
    };
    let want = 0.5 * huber(0.8, 0.0) + 0.5 * huber(0.6, 1.0);
    assert!((m - want).abs() < 1e-5, "{m} vs {want}");
}

#[test]
fn enumerated_expectation_matches_mixture() {
    let family = |w: &f64| ConvexFunction::abs().translate(s(*w));
    let terms: Vec<(f64, ConvexFunction)> = [-1.0, 0.0, 1.0].iter().map(|w| (1.0 / 3.0, family(w).unwrap())).collect();
    let pav = proximal_average(terms, 1.0).unwrap();
    let x = s(0.4);
    let exact = mixture_prox(&pav, &x).unwrap().as_slice()[0];
    let hand: f64 = [-1.0f64, 0.0, 1.0]
        .iter()
        .map(|w| {
            let t = 0.4 - w;
            w + t.signum() * (t.abs() - 1.0).max(0.0)
        })
        .sum::<f64>()
        / 3.0;
    assert!((exact - hand).abs() < 1e-15);
    let r = sampled_expectation_prox(|rng| [-1.0, 0.0, 1.0][rng.random_range(0..3)], family, 11, 10_000, 1.0, &x, Default::default())
        .unwrap();
    assert!((r.mean.as_slice()[0] - exact).abs() <= 3.0 * r.std_error.as_slice()[0] + 1e-12);
}

#[test]
fn composition_constrained_grid_oracle() {
    // two rows: the fibre {L*y = x} is a line, searched on a 2-D grid
    let l = DenseMap::from_rows(&[vec![0.6], vec![0.0]]).unwrap();
    let g = ConvexFunction::eucl_norm(2);
    let spec = CompositionSpec::new(l.clone(), g.clone(), 1.0).unwrap();
    let x = s(0.3);
    let got = eval_composition(&spec, &x, &opts()).unwrap().to_f64();
    // y = (0.5, t): ‖y‖ + (‖y‖² − 0.09)/2
    let (_, m) = fine_min(|t| (0.25 + t * t).sqrt() + (0.25 + t * t - 0.09) / 2.0, -3.0, 3.0);
    assert!((got - m).abs() < 1e-6, "{got} vs {m}");
}
