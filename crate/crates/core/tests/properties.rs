use std::f64::consts::TAU;
use std::sync::Arc;

use mrho_core::diagnostics::{
    fourier_coeffs, graph_manifold_samples, nonpersistence_conditions, resonance_min, AngleFn, NonpersistenceInput,
    NonpersistenceVerdict, DEFAULT_ZERO_THRESHOLD,
};
use mrho_core::functional::{regular_fraction, weighted_ratio};
use mrho_core::poincare::{angle_diff, build_first_order_map, PerturbationFn};
use mrho_core::systems::{benchmark_system, eval_benchmark_field, eval_density, CouplingMatrix};
use mrho_core::{
    classify, compute_m_rho, ftle_max, ActionAngleModel, Analytic, BenchmarkParams, FtleRecord, FunctionalConfig,
    GridSpec, IntegrationConfig, PerturbationDef, PhaseState, SmoothFn,
};
use proptest::prelude::*;

fn short_cfg() -> IntegrationConfig {
    IntegrationConfig { t_max: 20.0, ..Default::default() }
}

fn record(rho0: f64, lambda: f64, escaped: bool, tol: f64) -> FtleRecord {
    FtleRecord { index: 0, u0: vec![], rho0, lambda_max: lambda, escaped, regular: classify(lambda, escaped, tol) }
}

/// Smallest `|<p, omega>|` over the cube, scanning indices in reverse order.
fn brute_resonance(omega: &[f64], order: i64) -> f64 {
    let m = omega.len();
    let side = (2 * order + 1) as usize;
    let mut best = f64::INFINITY;
    for code in (0..side.pow(m as u32)).rev() {
        let mut c = code;
        let mut s = 0.0;
        let mut nonzero = false;
        for w in omega {
            let p = (c % side) as i64 - order;
            c /= side;
            nonzero |= p != 0;
            s += p as f64 * w;
        }
        if nonzero {
            best = best.min(s.abs());
        }
    }
    best
}

fn sine_perturbation(a: f64, b: f64, k: f64) -> PerturbationDef {
    let f0: Arc<PerturbationFn> = Arc::new(move |_, th: &[f64], t| a * th[0].sin() + b * (k * th[0] - t).cos());
    let f1: Arc<PerturbationFn> = Arc::new(move |i, th: &[f64], _| b * i * th[0].cos());
    PerturbationDef::new(vec![f0, f1])
}

fn linear_model() -> ActionAngleModel {
    let f: Arc<dyn SmoothFn> = Arc::new(Analytic(|k: usize, x: f64| match k {
        0 => 1.0 + 0.5 * x,
        1 => 0.5,
        _ => 0.0,
    }));
    ActionAngleModel::new(vec![f], 1.0, (0.0, 2.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weighted_ratio_is_a_fraction(
        rows in prop::collection::vec((1.0f64..50.0, -0.1f64..0.1, any::<bool>()), 1..60),
        tol in 1e-4f64..0.1,
    ) {
        let recs: Vec<_> = rows.iter().map(|&(r, l, e)| record(r, l, e, tol)).collect();
        let (m, wr, wt) = weighted_ratio(&recs).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert!(wr <= wt);
    }

    #[test]
    fn unit_density_gives_unweighted_fraction(
        rows in prop::collection::vec((-0.1f64..0.1, any::<bool>()), 1..60),
    ) {
        let recs: Vec<_> = rows.iter().map(|&(l, e)| record(1.0, l, e, 1e-2)).collect();
        let (m, _, _) = weighted_ratio(&recs).unwrap();
        prop_assert_eq!(m, regular_fraction(&recs));
    }

    #[test]
    fn escaped_orbits_are_never_regular(lambda in -1e3f64..1e3, tol in 0.0f64..1e3) {
        prop_assert!(!classify(lambda, true, tol));
    }

    #[test]
    fn density_and_weighted_field_identity(
        eps in 0.0f64..2.0,
        delta in -1.0f64..1.0,
        alpha in 0.0f64..1.0,
        u in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let p = BenchmarkParams::new(eps, delta, alpha).unwrap();
        let st = PhaseState::new(u.to_vec()).unwrap();
        let rho = eval_density(&p, &st).unwrap();
        prop_assert!(rho >= 1.0);
        let v = eval_benchmark_field(&p, &st).unwrap();
        let mut lu = [0.0; 4];
        CouplingMatrix::benchmark(delta).apply(&u, &mut lu);
        let cubic = |x: f64, y: f64| (x.powi(3) - 3.0 * x * y * y, y.powi(3) - 3.0 * y * x * x);
        let (n1, n2) = cubic(u[0], u[1]);
        let (n3, n4) = cubic(u[2], u[3]);
        let rhs = [lu[0] + alpha * n1, lu[1] + alpha * n2, lu[2] + alpha * n3, lu[3] + alpha * n4];
        for k in 0..4 {
            let scale = rhs[k].abs().max(1.0);
            prop_assert!((rho * v[k] - rhs[k]).abs() <= 1e-13 * scale, "{} vs {}", rho * v[k], rhs[k]);
        }
    }

    #[test]
    fn resonance_matches_reverse_scan(
        omega in prop::collection::vec(-3.0f64..3.0, 1..4),
        order in 1i64..5,
    ) {
        let r = resonance_min(&omega, order).unwrap();
        prop_assert_eq!(r.min, brute_resonance(&omega, order));
        let s: f64 = r.p.iter().zip(&omega).map(|(&p, w)| p as f64 * w).sum();
        prop_assert_eq!(s.abs(), r.min);
        prop_assert!(r.p.iter().any(|&p| p != 0) && r.p.iter().all(|p| p.abs() <= order));
    }

    #[test]
    fn parseval_on_trig_polynomials(
        coeffs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..8),
        c0 in -2.0f64..2.0,
    ) {
        let g = |th: f64| {
            c0 + coeffs.iter().enumerate().map(|(j, (a, b))| {
                let k = (j + 1) as f64;
                a * (k * th).cos() + b * (k * th).sin()
            }).sum::<f64>()
        };
        let table = fourier_coeffs(g, 8, 64).unwrap();
        let mean_square = c0 * c0 + coeffs.iter().map(|(a, b)| 0.5 * (a * a + b * b)).sum::<f64>();
        prop_assert!((table.energy() - mean_square).abs() <= 1e-12 * mean_square.max(1.0));
    }

    #[test]
    fn map_is_two_pi_equivariant(
        action in 0.1f64..1.9,
        theta in 0.0f64..TAU,
        shift in -3i32..4,
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
    ) {
        let map = build_first_order_map(&linear_model(), &sine_perturbation(a, b, 2.0), 256).unwrap();
        let base = map.apply(action, &[theta], 1e-3).unwrap();
        let moved = map.apply(action, &[theta + TAU * shift as f64], 1e-3).unwrap();
        prop_assert!((base.action - moved.action).abs() <= 1e-12);
        prop_assert!(angle_diff(base.angles[0], moved.angles[0]).abs() <= 1e-12);
    }

    #[test]
    fn doubling_quadrature_is_stable(
        action in 0.1f64..1.9,
        theta in 0.0f64..TAU,
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
    ) {
        let pert = sine_perturbation(a, b, 2.0);
        let coarse = build_first_order_map(&linear_model(), &pert, 1024).unwrap().tilde_f(action, &[theta]).unwrap();
        let fine = build_first_order_map(&linear_model(), &pert, 2048).unwrap().tilde_f(action, &[theta]).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            prop_assert!((c - f).abs() <= 1e-10, "{c} vs {f}");
        }
    }
}

/// Verdict for `F0 = c I1` against `g = (a + cos(theta), 0)`, `f = I1`, on
/// the samples in the given order.
fn verdict(c: f64, a: f64, order: &[usize]) -> NonpersistenceVerdict {
    let base = graph_manifold_samples(|_| 0.0, &[(-1.0, 1.0)], 7);
    let samples: Vec<Vec<f64>> = order.iter().map(|&k| base[k].clone()).collect();
    let f0 = move |i: &[f64]| c * i[0];
    let grad = move |_: &[f64]| vec![c, 0.0];
    let freq = |i: &[f64]| i[0];
    let g1: Box<AngleFn> = Box::new(move |_: &[f64], th: f64| a + th.cos());
    let g2: Box<AngleFn> = Box::new(|_: &[f64], _: f64| 0.0);
    let input = NonpersistenceInput {
        f0: &f0,
        grad_f0: &grad,
        g: vec![g1.as_ref(), g2.as_ref()],
        frequency: &freq,
        samples: &samples,
        max_j: 1,
        nodes: 64,
        threshold: DEFAULT_ZERO_THRESHOLD,
        tol_f: 1e-10,
    };
    nonpersistence_conditions(&input).unwrap().verdict
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nonpersistence_verdict_invariances(
        c in 0.1f64..10.0,
        a in prop::sample::select(vec![0.0, 0.5]),
        order in Just((0..7).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let reference = verdict(1.0, a, &(0..7).collect::<Vec<_>>());
        let expected = if a == 0.0 { NonpersistenceVerdict::Condition2 } else { NonpersistenceVerdict::Condition1 };
        prop_assert_eq!(reference, expected);
        prop_assert_eq!(verdict(c, a, &order), reference);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn m_rho_in_unit_interval(
        eps in 0.0f64..1.0,
        delta in -0.5f64..0.5,
        alpha in 0.0f64..0.6,
        half in 0.2f64..1.5,
    ) {
        let sys = benchmark_system(BenchmarkParams::new(eps, delta, alpha).unwrap()).unwrap();
        let grid = GridSpec { nx: 3, box_lo: -half, box_hi: half, ..Default::default() };
        let fc = FunctionalConfig { tol: 0.03, ..Default::default() };
        let r = compute_m_rho(&sys, &grid, &short_cfg(), &fc).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.m_rho));
        prop_assert!(r.records.iter().filter(|x| x.escaped).all(|x| !x.regular));
    }

    #[test]
    fn zero_epsilon_run_is_unweighted(alpha in 0.0f64..0.6, half in 0.2f64..1.5) {
        let sys = benchmark_system(BenchmarkParams::new(0.0, 0.3, alpha).unwrap()).unwrap();
        let grid = GridSpec { nx: 3, box_lo: -half, box_hi: half, ..Default::default() };
        let r = compute_m_rho(&sys, &grid, &short_cfg(), &FunctionalConfig::default()).unwrap();
        prop_assert_eq!(r.m_rho, regular_fraction(&r.records));
    }

    #[test]
    fn density_scale_leaves_m_rho_unchanged(c in 0.01f64..100.0, alpha in 0.0f64..0.4) {
        let sys = benchmark_system(BenchmarkParams::new(0.5, 0.3, alpha).unwrap()).unwrap();
        let grid = GridSpec { nx: 3, ..Default::default() };
        let fc = FunctionalConfig::default();
        let a = compute_m_rho(&sys, &grid, &short_cfg(), &fc).unwrap();
        let b = compute_m_rho(&sys.with_density_scaled(c), &grid, &short_cfg(), &fc).unwrap();
        prop_assert!((a.m_rho - b.m_rho).abs() <= 1e-12);
    }

    #[test]
    fn renormalization_cadence_does_not_matter(
        u in prop::array::uniform4(-0.8f64..0.8),
        every in 2usize..50,
    ) {
        let sys = benchmark_system(BenchmarkParams::default()).unwrap();
        let st = PhaseState::new(u.to_vec()).unwrap();
        let e0 = [1.0, 0.0, 0.0, 0.0];
        let a = ftle_max(&sys, &st, &short_cfg(), &e0).unwrap();
        let b = ftle_max(&sys, &st, &IntegrationConfig { renorm_every: every, ..short_cfg() }, &e0).unwrap();
        prop_assert!((a.lambda - b.lambda).abs() <= 1e-12, "{} vs {}", a.lambda, b.lambda);
    }
}
