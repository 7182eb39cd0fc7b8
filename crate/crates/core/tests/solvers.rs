use altbi_core::benchmarks::{gen_a, gen_d, generate, random_initializers, BenchmarkKind, BenchmarkSpec};
use altbi_core::metrics::{kkt_residual, penalized_gradient_w, sparsity, DEFAULT_SPARSITY_TOL};
use altbi_core::mu::run_penalized;
use altbi_core::{
    grid_sweep, init_lambda, penalized_objective, run_altbi, run_altbi_from, run_mu, run_pmu, AltBiConfig,
    LambdaPolicy, LambdaVector, NmfError, NonnegMatrix, SolverConfig,
};

fn non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|p| p[1] <= p[0] + 1e-12 * p[0].abs())
}

#[test]
fn mu_and_pmu_descend_on_benchmark_a() {
    let gt = gen_a(200, 50, 4, 3).unwrap();
    let (w0, h0) = random_initializers(200, 50, 4, 30);
    let mu = run_mu(&gt.y, &w0, &h0, &SolverConfig::default()).unwrap();
    assert!(non_increasing(&mu.objective_trace));
    assert_eq!(mu.objective_trace.len(), mu.iter + 1);
    let pmu = run_pmu(&gt.y, &w0, &h0, &SolverConfig::default()).unwrap();
    assert!(non_increasing(&pmu.objective_trace));
    assert!(sparsity(&pmu.w, DEFAULT_SPARSITY_TOL) >= sparsity(&mu.w, DEFAULT_SPARSITY_TOL));
}

#[test]
fn grid_sweep_over_ten_values() {
    let gt = gen_a(60, 20, 3, 4).unwrap();
    let (w0, h0) = random_initializers(60, 20, 3, 40);
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let cfg = SolverConfig {
        max_iter: 300,
        ..SolverConfig::default()
    };
    let runs = grid_sweep(&gt.y, &w0, &h0, &cfg, &grid).unwrap();
    assert_eq!(runs.len(), 10);
    for (run, &lam) in runs.iter().zip(&grid) {
        assert_eq!(run.lambda, lam);
        assert!(run.state.lambda.as_slice().iter().all(|&v| v == lam));
        assert!(non_increasing(&run.state.objective_trace));
    }
}

#[test]
fn kkt_gradient_matches_finite_differences() {
    let gt = gen_a(6, 5, 2, 8).unwrap();
    let (w, h) = random_initializers(6, 5, 2, 80);
    let lambda = LambdaVector::new(vec![0.1, 0.4, 0.0, 1.2, 0.7, 0.3]).unwrap();
    let grad = penalized_gradient_w(&gt.y, &w, &h, &lambda).unwrap();
    let step = 1e-6;
    for i in 0..6 {
        for k in 0..2 {
            let bump = |d: f64| {
                let m = NonnegMatrix::from_fn(6, 2, |a, b| w.get(a, b) + if (a, b) == (i, k) { d } else { 0.0 }).unwrap();
                penalized_objective(&gt.y, &m, &h, &lambda).unwrap()
            };
            let fd = (bump(step) - bump(-step)) / (2.0 * step);
            let g = grad[i * 2 + k];
            assert!((g - fd).abs() <= 1e-5 * g.abs().max(fd.abs()).max(1.0), "({i},{k}) {g} vs {fd}");
        }
    }
}

#[test]
fn kkt_residual_settles_at_the_end_of_a_run() {
    let gt = gen_a(40, 15, 3, 9).unwrap();
    let (w0, h0) = random_initializers(40, 15, 3, 90);
    let run = |iters| {
        let cfg = SolverConfig {
            max_iter: iters,
            tol: 1e-300,
            ..SolverConfig::default()
        };
        let st = run_mu(&gt.y, &w0, &h0, &cfg).unwrap();
        kkt_residual(&gt.y, &st.w, &st.h, &st.lambda).unwrap()
    };
    let early = run(900);
    let late = run(1000);
    assert!(late <= early, "{early} -> {late}");
}

#[test]
fn altbi_fits_an_exactly_factorable_matrix() {
    let gt = gen_a(50, 20, 3, 5).unwrap();
    let (w0, h0) = random_initializers(50, 20, 3, 50);
    let st = run_altbi(&gt.y, &w0, &h0, &AltBiConfig::default()).unwrap();
    let response = *st.response_trace.last().unwrap();
    assert!(response < 1e-4 * gt.y.sum(), "response {response}");
    assert!(st.lambda_history.iter().all(|(_, l)| l.as_slice().iter().all(|&v| v >= 0.0)));
    assert!(st.w.min_entry() >= 0.0 && st.h.min_entry() >= 0.0);
}

#[test]
fn altbi_improves_the_response_on_every_generated_benchmark() {
    for kind in [BenchmarkKind::A, BenchmarkKind::B, BenchmarkKind::C] {
        let mut spec = BenchmarkSpec::new(kind, 80, 30, 3, 6);
        spec.alpha_h = if kind == BenchmarkKind::A { 0.0 } else { 0.3 };
        let gt = generate(&spec).unwrap();
        let (w0, h0) = random_initializers(80, 30, 3, 60);
        let cfg = AltBiConfig {
            max_iter: 200,
            ..AltBiConfig::default()
        };
        let st = run_altbi(&gt.y, &w0, &h0, &cfg).unwrap();
        assert!(st.response_trace.last().unwrap() < &st.response_trace[0], "{kind:?}");
    }
}

#[test]
fn altbi_without_gradient_is_pmu_with_initial_weights() {
    let gt = gen_a(30, 12, 3, 7).unwrap();
    let (w0, h0) = random_initializers(30, 12, 3, 70);
    let lambda0 = init_lambda(&gt.y, &w0, &h0).unwrap();
    let solver = SolverConfig {
        max_iter: 150,
        ..SolverConfig::default()
    };
    let pmu = run_penalized(&gt.y, &w0, &h0, &solver, lambda0.clone()).unwrap();
    for policy in [LambdaPolicy::ZeroGradient, LambdaPolicy::Frozen] {
        let cfg = AltBiConfig {
            bunch_len: 1,
            max_iter: 150,
            lambda_policy: policy,
            ..AltBiConfig::default()
        };
        let ab = run_altbi_from(&gt.y, &w0, &h0, lambda0.clone(), &cfg).unwrap();
        assert_eq!(ab.w, pmu.w);
        assert_eq!(ab.h, pmu.h);
        assert_eq!(ab.objective_trace, pmu.objective_trace);
        assert_eq!(ab.lambda, lambda0);
    }

    let cfg = AltBiConfig {
        bunch_len: 1,
        max_iter: 150,
        lambda_policy: LambdaPolicy::Frozen,
        ..AltBiConfig::default()
    };
    let ab = run_altbi_from(&gt.y, &w0, &h0, LambdaVector::zeros(30), &cfg).unwrap();
    let mu = run_mu(&gt.y, &w0, &h0, &solver).unwrap();
    assert_eq!(ab.w, mu.w);
    assert_eq!(ab.response_trace, mu.response_trace);
}

#[test]
fn altbi_is_deterministic_and_thins_history() {
    let gt = gen_a(30, 12, 3, 7).unwrap();
    let (w0, h0) = random_initializers(30, 12, 3, 71);
    let cfg = AltBiConfig {
        max_iter: 37,
        tol: 1e-300,
        lambda_history_stride: 10,
        ..AltBiConfig::default()
    };
    let a = run_altbi(&gt.y, &w0, &h0, &cfg).unwrap();
    let b = run_altbi(&gt.y, &w0, &h0, &cfg).unwrap();
    assert_eq!(a, b);
    let iters: Vec<usize> = a.lambda_history.iter().map(|(i, _)| *i).collect();
    assert_eq!(iters, vec![0, 10, 20, 30, 37]);
    assert_eq!(a.lambda_l1_trace.len(), 38);
}

#[test]
fn altbi_rejects_bad_input() {
    let gt = gen_a(10, 8, 2, 1).unwrap();
    let (w0, h0) = random_initializers(10, 8, 2, 1);
    let bad = AltBiConfig {
        bunch_len: 0,
        ..AltBiConfig::default()
    };
    assert!(matches!(run_altbi(&gt.y, &w0, &h0, &bad), Err(NmfError::InvalidConfig(_))));
    let (w_wrong, _) = random_initializers(9, 8, 2, 1);
    assert!(matches!(
        run_altbi(&gt.y, &w_wrong, &h0, &AltBiConfig::default()),
        Err(NmfError::ShapeMismatch { .. })
    ));
    let zero_w = NonnegMatrix::zeros(10, 2);
    assert!(run_altbi(&gt.y, &zero_w, &h0, &AltBiConfig::default()).is_err());
}

fn synthetic_reflectances(n: usize, r: usize) -> NonnegMatrix {
    NonnegMatrix::from_fn(n, r, |i, k| {
        let t = i as f64 / n as f64;
        let centre = (k as f64 + 0.5) / r as f64;
        0.05 + 0.9 * (-(t - centre) * (t - centre) / 0.01).exp()
    })
    .unwrap()
}

#[test]
fn hyperspectral_shapes() {
    let mut spec = BenchmarkSpec::new(BenchmarkKind::D, 224, 3025, 5, 2);
    spec.d_signals_path = Some("unused.csv".into());
    let gt = gen_d(&spec, &synthetic_reflectances(224, 5)).unwrap();
    assert_eq!(gt.w_true.shape(), (224, 5));
    assert_eq!(gt.h_true.shape(), (5, 3025));
    assert_eq!(gt.y.shape(), (224, 3025));
    for j in 0..3025 {
        let s: f64 = (0..5).map(|k| gt.h_true.get(k, j)).sum();
        assert!(s <= 1.0 + 1e-12);
    }
}

#[test]
fn hyperspectral_rejects_duplicate_signatures() {
    let base = synthetic_reflectances(224, 5);
    let dup = NonnegMatrix::from_fn(224, 5, |i, k| base.get(i, if k == 3 { 1 } else { k })).unwrap();
    let spec = BenchmarkSpec::new(BenchmarkKind::D, 224, 100, 5, 2);
    match gen_d(&spec, &dup) {
        Err(NmfError::AngleSeparation { a, b, degrees, .. }) => {
            assert_eq!((a, b), (1, 3));
            assert!(degrees < 1e-6);
        }
        other => panic!("expected angle error, got {other:?}"),
    }
}
