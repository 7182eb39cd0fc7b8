//! Monte-Carlo campaigns: one shared ground truth, `mc_runs` initializer
//! draws, every selected algorithm started from the same draw.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use altbi_core::benchmarks::{gen_d, generate, random_initializers, BenchmarkKind, GroundTruth};
use altbi_core::metrics::{match_components, match_rows, sparsity, SirReport, Summary};
use altbi_core::{grid_sweep, run_altbi, run_mu, run_pmu, FactorizationState, NonnegMatrix};

use crate::config::{Algorithm, ExperimentConfig};
use crate::csv_io::read_matrix;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: Duration,
    pub final_objective: f64,
    pub final_response: f64,
    pub sir_w: SirReport,
    pub sir_h: SirReport,
    pub sparsity_w: f64,
    pub sparsity_h: f64,
    pub lambda_init: Vec<f64>,
    pub lambda_final: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub response_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(Box<RunMetrics>),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub run_id: usize,
    /// `mu`, `pmu`, `altbi`, or `grid:<λ>` for sweep members.
    pub algorithm: String,
    pub seed: u64,
    pub outcome: RunOutcome,
}

impl RunReport {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        match &self.outcome {
            RunOutcome::Completed(m) => Some(m),
            RunOutcome::Failed(_) => None,
        }
    }
}

/// Summaries over the completed runs of one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub algorithm: String,
    pub completed: usize,
    pub failed: usize,
    pub sir_w: Option<Summary>,
    pub sir_h: Option<Summary>,
    pub sparsity_w: Option<Summary>,
    pub sparsity_h: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    /// Ordered by run id, then algorithm.
    pub reports: Vec<RunReport>,
    /// Ordered by algorithm label.
    pub aggregates: Vec<Aggregate>,
}

impl Campaign {
    pub fn aggregate(&self, algorithm: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.algorithm == algorithm)
    }

    pub fn reports_for<'a>(&'a self, algorithm: &'a str) -> impl Iterator<Item = &'a RunReport> + 'a {
        self.reports.iter().filter(move |r| r.algorithm == algorithm)
    }

    /// Algorithms whose every run failed.
    pub fn all_failed(&self) -> Vec<String> {
        self.aggregates
            .iter()
            .filter(|a| a.completed == 0)
            .map(|a| a.algorithm.clone())
            .collect()
    }
}

pub fn grid_label(lambda: f64) -> String {
    format!("grid:{lambda}")
}

pub fn ground_truth(cfg: &ExperimentConfig) -> Result<GroundTruth> {
    let spec = &cfg.benchmark;
    if spec.kind == BenchmarkKind::D {
        let path = spec
            .d_signals_path
            .as_deref()
            .ok_or_else(|| HarnessError::Config("benchmark D needs d_signals_path".into()))?;
        let signals = read_matrix(Path::new(path))?;
        Ok(gen_d(spec, &signals)?)
    } else {
        Ok(generate(spec)?)
    }
}

/// Runs the campaign. Individual run failures are recorded in their report
/// and left out of the aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Campaign> {
    cfg.validate()?;
    let truth = ground_truth(cfg)?;
    let algorithms = cfg.algorithm_set();
    let workers = cfg.workers.min(cfg.mc_runs);

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Vec<RunReport>>>> = Mutex::new(vec![None; cfg.mc_runs]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let run_id = next.fetch_add(1, Ordering::Relaxed);
                if run_id >= cfg.mc_runs {
                    break;
                }
                let reports = run_one(cfg, &truth, &algorithms, run_id);
                slots.lock().expect("worker panicked")[run_id] = Some(reports);
            });
        }
    });

    let reports: Vec<RunReport> = slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .flat_map(|r| r.expect("every run id is claimed"))
        .collect();
    let aggregates = aggregate(&reports);
    Ok(Campaign { reports, aggregates })
}

fn run_one(cfg: &ExperimentConfig, truth: &GroundTruth, algorithms: &[Algorithm], run_id: usize) -> Vec<RunReport> {
    let seed = cfg.seed_for_run(run_id);
    let spec = &cfg.benchmark;
    let (w0, h0) = random_initializers(spec.n, spec.m, spec.r, seed);
    let x = &truth.y;
    let report = |algorithm: String, outcome: RunOutcome| RunReport {
        run_id,
        algorithm,
        seed,
        outcome,
    };
    let mut out = Vec::new();
    for &alg in algorithms {
        let start = Instant::now();
        match alg {
            Algorithm::Mu | Algorithm::Pmu | Algorithm::Altbi => {
                let result = match alg {
                    Algorithm::Mu => run_mu(x, &w0, &h0, &cfg.solver),
                    Algorithm::Pmu => run_pmu(x, &w0, &h0, &cfg.solver),
                    _ => run_altbi(x, &w0, &h0, &cfg.altbi),
                };
                let elapsed = start.elapsed();
                out.push(report(alg.name().into(), outcome(result, truth, cfg, elapsed, alg == Algorithm::Altbi)));
            }
            Algorithm::Grid => match grid_sweep(x, &w0, &h0, &cfg.solver, &cfg.grid) {
                Ok(runs) => {
                    // The sweep is timed as a whole; split evenly.
                    let elapsed = start.elapsed() / runs.len() as u32;
                    for run in runs {
                        out.push(report(grid_label(run.lambda), outcome(Ok(run.state), truth, cfg, elapsed, false)));
                    }
                }
                Err(e) => {
                    log::warn!("run {run_id}: grid sweep failed: {e}");
                    for &lambda in &cfg.grid {
                        out.push(report(grid_label(lambda), RunOutcome::Failed(e.to_string())));
                    }
                }
            },
        }
    }
    out
}

fn outcome(
    result: altbi_core::Result<FactorizationState>,
    truth: &GroundTruth,
    cfg: &ExperimentConfig,
    wall_time: Duration,
    keep_lambda: bool,
) -> RunOutcome {
    let scored = result.map_err(|e| e.to_string()).and_then(|st| {
        let sir_w = match_components(&truth.w_true, &st.w).map_err(|e| e.to_string())?;
        let sir_h = match_rows(&truth.h_true, &st.h).map_err(|e| e.to_string())?;
        let last = |t: &[f64]| t.last().copied().unwrap_or(f64::NAN);
        let metrics = RunMetrics {
            iterations: st.iter,
            converged: st.converged,
            wall_time,
            final_objective: last(&st.objective_trace),
            final_response: last(&st.response_trace),
            sir_w,
            sir_h,
            sparsity_w: sparsity(&st.w, cfg.sparsity_tol),
            sparsity_h: sparsity(&st.h, cfg.sparsity_tol),
            lambda_init: if keep_lambda { st.lambda_init.as_slice().to_vec() } else { Vec::new() },
            lambda_final: if keep_lambda { st.lambda.as_slice().to_vec() } else { Vec::new() },
            objective_trace: st.objective_trace,
            response_trace: st.response_trace,
        };
        if !(metrics.final_objective.is_finite() && metrics.final_response.is_finite()) {
            return Err("non-finite final objective".to_string());
        }
        Ok(metrics)
    });
    match scored {
        Ok(m) => RunOutcome::Completed(Box::new(m)),
        Err(msg) => {
            log::warn!("run failed: {msg}");
            RunOutcome::Failed(msg)
        }
    }
}

pub fn aggregate(reports: &[RunReport]) -> Vec<Aggregate> {
    let mut by_alg: BTreeMap<&str, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        by_alg.entry(&r.algorithm).or_default().push(r);
    }
    by_alg
        .into_iter()
        .map(|(algorithm, runs)| {
            let done: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.metrics()).collect();
            let collect = |f: fn(&RunMetrics) -> f64| Summary::of(&done.iter().map(|m| f(m)).collect::<Vec<_>>());
            Aggregate {
                algorithm: algorithm.to_string(),
                completed: done.len(),
                failed: runs.len() - done.len(),
                sir_w: collect(|m| m.sir_w.mean_db),
                sir_h: collect(|m| m.sir_h.mean_db),
                sparsity_w: collect(|m| m.sparsity_w),
                sparsity_h: collect(|m| m.sparsity_h),
            }
        })
        .collect()
}

/// Fraction of entries of `lambda` strictly below a tenth of the matching
/// entry of `lambda_init`.
pub fn fraction_below_tenth(lambda: &[f64], lambda_init: &[f64]) -> f64 {
    if lambda.is_empty() {
        return 0.0;
    }
    let below = lambda.iter().zip(lambda_init).filter(|(l, l0)| **l < **l0 / 10.0).count();
    below as f64 / lambda.len() as f64
}

/// Writes `W`, `H`, and `X` for a generated benchmark.
pub fn write_ground_truth(truth: &GroundTruth, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let files: [(&str, &NonnegMatrix); 3] = [("X.csv", &truth.y), ("W_true.csv", &truth.w_true), ("H_true.csv", &truth.h_true)];
    for (name, m) in files {
        crate::csv_io::write_matrix(&dir.join(name), m)?;
    }
    Ok(())
}
