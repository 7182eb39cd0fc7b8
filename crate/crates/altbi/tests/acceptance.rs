//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line with the
//! measured values, written straight to stderr so it shows up even when
//! test output is captured.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use altbi::config::ExperimentConfig;
use altbi::experiment::fraction_below_tenth;
use altbi::gradcheck::{run_gradcheck, GradCheckConfig};
use altbi::{emit_csv, run_experiment, Campaign};
use altbi_core::benchmarks::{gen_a, random_initializers};
use altbi_core::metrics::{kkt_residual, median};
use altbi_core::mu::{run_penalized, update_h_kl, update_w_penalized_row};
use altbi_core::{
    grid_sweep, init_lambda, penalized_objective, run_altbi_from, run_mu, run_pmu, AltBiConfig, LambdaPolicy, LambdaVector, NonnegMatrix,
    SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("[acceptance] {} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn check(name: &str, pass: bool, detail: String) {
    report(name, pass, &detail);
    assert!(pass, "{name}: {detail}");
}

fn config_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn hypergradient_correctness() {
    let start = Instant::now();
    let rep = run_gradcheck(&GradCheckConfig {
        instances: 100,
        seed: 2024,
        ..GradCheckConfig::default()
    })
    .unwrap();
    let elapsed = start.elapsed();
    check(
        "hypergradient correctness",
        rep.fmd_vs_fd <= 1e-4 && rep.fmd_vs_rmd <= 1e-10 && elapsed < Duration::from_secs(10),
        format!(
            "100 instances, max rel FMD-FD {:.2e} (<= 1e-4), FMD-RMD {:.2e} (<= 1e-10), {:.2?} (< 10 s)",
            rep.fmd_vs_fd, rep.fmd_vs_rmd, elapsed
        ),
    );
}

#[test]
fn jacobian_closed_forms() {
    let start = Instant::now();
    let rep = run_gradcheck(&GradCheckConfig {
        instances: 50,
        seed: 77,
        ..GradCheckConfig::default()
    })
    .unwrap();
    let elapsed = start.elapsed();
    check(
        "jacobian closed forms",
        rep.jacobian_a <= 1e-5 && rep.jacobian_b <= 1e-5 && rep.outer_g <= 1e-5 && elapsed < Duration::from_secs(5),
        format!(
            "50 instances, max rel A {:.2e}, B {:.2e}, G {:.2e} (<= 1e-5), {:.2?} (< 5 s)",
            rep.jacobian_a, rep.jacobian_b, rep.outer_g, elapsed
        ),
    );
}

fn random_positive(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> NonnegMatrix {
    NonnegMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.01..2.0)).unwrap()
}

/// One MU iteration with per-row penalties; `lambda = 0` is plain MU.
fn step(x: &NonnegMatrix, w: &mut NonnegMatrix, h: &mut NonnegMatrix, lambda: &LambdaVector) {
    *h = update_h_kl(x, w, h).unwrap();
    for i in 0..x.rows() {
        let next = update_w_penalized_row(w.row(i), lambda.as_slice()[i], x.row(i), h);
        w.set_row(i, &next).unwrap();
    }
}

#[test]
fn monotone_descent() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut runs = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=20);
        let m = rng.random_range(2..=15);
        // r < min(n, m): a random X then has no exact factorization and the
        // objective stays away from the rounding floor at zero.
        let r = rng.random_range(1..n.min(m)).min(4);
        let x = random_positive(&mut rng, n, m);
        let w0 = random_positive(&mut rng, n, r);
        let h0 = random_positive(&mut rng, r, m);
        let penalties = LambdaVector::new((0..n).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap();
        for lambda in [LambdaVector::zeros(n), penalties] {
            runs += 1;
            let (mut w, mut h) = (w0.clone(), h0.clone());
            let mut prev = penalized_objective(&x, &w, &h, &lambda).unwrap();
            for _ in 0..200 {
                step(&x, &mut w, &mut h, &lambda);
                let f = penalized_objective(&x, &w, &h, &lambda).unwrap();
                worst = worst.max((f - prev) / prev);
                prev = f;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        "monotone descent",
        worst <= 1e-12 && elapsed < Duration::from_secs(30),
        format!("{runs} runs x 200 iterations (MU and P-MU), largest relative increase {worst:.2e} (<= 1e-12), {elapsed:.2?} (< 30 s)"),
    );
}

#[test]
fn fixed_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (n, m, r) = (rng.random_range(1..=12), rng.random_range(1..=12), rng.random_range(1..=5));
        let w = random_positive(&mut rng, n, r);
        let h = random_positive(&mut rng, r, m);
        let x = w.matmul(&h).unwrap();
        let h_next = update_h_kl(&x, &w, &h).unwrap();
        for (a, b) in h_next.as_slice().iter().zip(h.as_slice()) {
            worst = worst.max((a - b).abs() / b);
        }
        for i in 0..n {
            let next = update_w_penalized_row(w.row(i), 0.0, x.row(i), &h);
            for (a, b) in next.iter().zip(w.row(i)) {
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    check(
        "fixed points",
        worst <= 1e-12,
        format!("X = WH, lambda = 0, 50 instances: max relative change {worst:.2e} (<= 1e-12)"),
    );
}

#[test]
fn degenerate_equivalences() {
    let gt = gen_a(40, 15, 3, 12).unwrap();
    let (w0, h0) = random_initializers(40, 15, 3, 120);
    let solver = SolverConfig {
        max_iter: 200,
        ..SolverConfig::default()
    };

    let lambda0 = init_lambda(&gt.y, &w0, &h0).unwrap();
    let pmu_init = run_penalized(&gt.y, &w0, &h0, &solver, lambda0.clone()).unwrap();
    let zero_grad = run_altbi_from(
        &gt.y,
        &w0,
        &h0,
        lambda0,
        &AltBiConfig {
            bunch_len: 1,
            max_iter: 200,
            lambda_policy: LambdaPolicy::ZeroGradient,
            ..AltBiConfig::default()
        },
    )
    .unwrap();
    let altbi_is_pmu = zero_grad.w == pmu_init.w
        && zero_grad.h == pmu_init.h
        && zero_grad.objective_trace == pmu_init.objective_trace;

    let mu = run_mu(&gt.y, &w0, &h0, &solver).unwrap();
    let pmu_zero = run_pmu(
        &gt.y,
        &w0,
        &h0,
        &SolverConfig {
            fixed_lambda: 0.0,
            ..solver.clone()
        },
    )
    .unwrap();
    let pmu_is_mu = pmu_zero.w == mu.w && pmu_zero.h == mu.h && pmu_zero.objective_trace == mu.objective_trace;

    let sweep = grid_sweep(&gt.y, &w0, &h0, &solver, &[0.0]).unwrap();
    let grid_is_mu = sweep.len() == 1 && sweep[0].state.w == mu.w && sweep[0].state.objective_trace == mu.objective_trace;

    let frozen_zero = run_altbi_from(
        &gt.y,
        &w0,
        &h0,
        LambdaVector::zeros(40),
        &AltBiConfig {
            bunch_len: 1,
            max_iter: 200,
            lambda_policy: LambdaPolicy::Frozen,
            ..AltBiConfig::default()
        },
    )
    .unwrap();
    let frozen_is_mu = frozen_zero.w == mu.w && frozen_zero.response_trace == mu.response_trace;

    check(
        "degenerate equivalences",
        altbi_is_pmu && pmu_is_mu && grid_is_mu && frozen_is_mu,
        format!(
            "bitwise: AltBi(zero gradient, T=1) = P-MU(initial lambda) {altbi_is_pmu}; P-MU(0) = MU {pmu_is_mu}; \
             grid_sweep([0]) = MU {grid_is_mu}; AltBi(lambda = 0, frozen, T=1) = MU {frozen_is_mu}"
        ),
    );
}

struct Desk {
    campaign: Campaign,
    elapsed: Duration,
}

fn desk_campaign() -> &'static Desk {
    static DESK: OnceLock<Desk> = OnceLock::new();
    DESK.get_or_init(|| {
        let mut cfg = ExperimentConfig::load(&config_path("desk_a.toml")).unwrap();
        assert_eq!((cfg.benchmark.n, cfg.benchmark.m, cfg.benchmark.r, cfg.mc_runs), (200, 50, 4, 10));
        cfg.workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(10);
        let start = Instant::now();
        let campaign = run_experiment(&cfg).unwrap();
        Desk {
            campaign,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn identification_at_desk_scale() {
    let desk = desk_campaign();
    let c = &desk.campaign;
    let mean = |alg: &str, w: bool| {
        let a = c.aggregate(alg).unwrap();
        assert_eq!(a.completed, 10, "{alg} runs failed");
        if w { a.sir_w } else { a.sir_h }.unwrap().mean
    };
    let (aw, ah) = (mean("altbi", true), mean("altbi", false));
    let (mw, mh) = (mean("mu", true), mean("mu", false));
    let (pw, ph) = (mean("pmu", true), mean("pmu", false));
    let margin = (aw - mw).min(aw - pw).min(ah - mh).min(ah - ph);
    check(
        "identification at desk scale",
        margin >= 2.0 && desk.elapsed < Duration::from_secs(300),
        format!(
            "mean SIR(W) altbi {aw:.2} / mu {mw:.2} / pmu {pw:.2} dB; mean SIR(H) altbi {ah:.2} / mu {mh:.2} / pmu {ph:.2} dB; \
             smallest margin {margin:.2} dB (>= 2); campaign {:.1?} (< 5 min)",
            desk.elapsed
        ),
    );
}

#[test]
fn sparsity_direction() {
    let c = &desk_campaign().campaign;
    let med = |alg: &str, w: bool| {
        let vals: Vec<f64> = c
            .reports_for(alg)
            .filter_map(|r| r.metrics())
            .map(|m| if w { m.sparsity_w } else { m.sparsity_h })
            .collect();
        median(&vals)
    };
    let (aw, mw) = (med("altbi", true), med("mu", true));
    let (ah, mh) = (med("altbi", false), med("mu", false));
    check(
        "sparsity direction",
        aw >= mw && (ah - mh).abs() <= 5.0,
        format!("median Sp(W) altbi {aw:.2} >= mu {mw:.2}; median Sp(H) altbi {ah:.2} vs mu {mh:.2}, |diff| {:.2} (<= 5)", (ah - mh).abs()),
    );
}

#[test]
fn lambda_sparsification() {
    let c = &desk_campaign().campaign;
    let mut increased = 0;
    let mut finals = Vec::new();
    let mut ratios = Vec::new();
    for m in c.reports_for("altbi").filter_map(|r| r.metrics()) {
        let before = fraction_below_tenth(&m.lambda_init, &m.lambda_init);
        let after = fraction_below_tenth(&m.lambda_final, &m.lambda_init);
        if after > before {
            increased += 1;
        }
        finals.push(after);
        let smallest = m
            .lambda_final
            .iter()
            .zip(&m.lambda_init)
            .filter(|(_, l0)| **l0 > 0.0)
            .map(|(l, l0)| l / l0)
            .fold(f64::INFINITY, f64::min);
        ratios.push(smallest);
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        "lambda sparsification",
        increased >= 8,
        format!(
            "fraction of lambda_i below lambda_i(0)/10 increased on {increased}/10 runs (need >= 8); \
             final fractions {finals:?}; smallest lambda_i/lambda_i(0) over all runs {min_ratio:.3}"
        ),
    );
}

#[test]
fn kkt_stationarity_at_mu_termination() {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut max_iters = 0;
    for (n, m, r) in [(7, 5, 1), (30, 12, 1), (60, 20, 1), (20, 10, 2), (40, 15, 2)] {
        for seed in 0..4 {
            let gt = gen_a(n, m, r, seed).unwrap();
            let (w0, h0) = random_initializers(n, m, r, 500 + seed);
            // Terminate on the relative-change rule, not the iteration cap.
            let cfg = SolverConfig {
                max_iter: 100_000,
                ..SolverConfig::default()
            };
            let st = run_mu(&gt.y, &w0, &h0, &cfg).unwrap();
            assert!(st.converged, "({n},{m},{r}) seed {seed} hit the iteration cap");
            max_iters = max_iters.max(st.iter);
            let res = kkt_residual(&gt.y, &st.w, &st.h, &st.lambda).unwrap() / gt.y.max_entry();
            worst = worst.max(res);
            count += 1;
        }
    }
    check(
        "KKT stationarity",
        worst <= 1e-6,
        format!("{count} exactly factorable instances (r <= 2): max ||W .* grad||_inf / ||X||_inf = {worst:.2e} (<= 1e-6), longest run {max_iters} iterations"),
    );
}

#[test]
fn pipeline_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (k, dir) in dirs.iter().enumerate() {
        let mut cfg = ExperimentConfig::load(&config_path("desk_a.toml")).unwrap();
        cfg.benchmark.n = 40;
        cfg.benchmark.m = 15;
        cfg.benchmark.r = 3;
        cfg.mc_runs = 3;
        cfg.solver.max_iter = 150;
        cfg.altbi.max_iter = 150;
        cfg.algorithms.push(altbi::Algorithm::Grid);
        cfg.grid = vec![0.1, 0.5];
        // Different worker counts must not matter either.
        cfg.workers = 1 + 2 * k;
        emit_csv(&run_experiment(&cfg).unwrap(), dir.path(), false).unwrap();
    }
    let names = ["traces.csv", "sir.csv", "sparsity.csv", "lambda.csv", "runs.csv", "summary.csv"];
    let differing: Vec<&str> = names
        .iter()
        .copied()
        .filter(|name| std::fs::read(dirs[0].path().join(name)).unwrap() != std::fs::read(dirs[1].path().join(name)).unwrap())
        .collect();
    check(
        "pipeline determinism",
        differing.is_empty(),
        format!("two executions, same config and seed: differing files {differing:?}"),
    );
}
