//! Campaign results as CSV files.
//!
//! | file            | columns                                                    |
//! |-----------------|------------------------------------------------------------|
//! | `traces.csv`    | run_id, algorithm, iter, objective, response               |
//! | `sir.csv`       | run_id, algorithm, factor, component, sir_db               |
//! | `sparsity.csv`  | run_id, algorithm, factor, sparsity                        |
//! | `lambda.csv`    | run_id, row_index, lambda_init, lambda_final (AltBi only)  |
//! | `runs.csv`      | one line per run and algorithm, including failures         |
//! | `summary.csv`   | algorithm, metric, count, mean, median, q1, q3, min, max   |
//! | `timings.csv`   | run_id, algorithm, wall_seconds (only when requested)      |
//!
//! Everything except `timings.csv` is a pure function of the configuration,
//! so repeated campaigns produce identical bytes.

use std::path::{Path, PathBuf};

use altbi_core::metrics::Summary;
use serde::Serialize;

use crate::experiment::{Campaign, RunOutcome};
use crate::error::{HarnessError, Result};

#[derive(Serialize)]
struct TraceRow<'a> {
    run_id: usize,
    algorithm: &'a str,
    iter: usize,
    objective: f64,
    response: f64,
}

#[derive(Serialize)]
struct SirRow<'a> {
    run_id: usize,
    algorithm: &'a str,
    factor: &'a str,
    component: usize,
    sir_db: f64,
}

#[derive(Serialize)]
struct SparsityRow<'a> {
    run_id: usize,
    algorithm: &'a str,
    factor: &'a str,
    sparsity: f64,
}

#[derive(Serialize)]
struct LambdaRow {
    run_id: usize,
    row_index: usize,
    lambda_init: f64,
    lambda_final: f64,
}

#[derive(Serialize)]
struct RunRow<'a> {
    run_id: usize,
    algorithm: &'a str,
    seed: u64,
    status: &'a str,
    iterations: Option<usize>,
    converged: Option<bool>,
    final_objective: Option<f64>,
    final_response: Option<f64>,
    sir_w_mean: Option<f64>,
    sir_h_mean: Option<f64>,
    sparsity_w: Option<f64>,
    sparsity_h: Option<f64>,
    error: &'a str,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    algorithm: &'a str,
    metric: &'a str,
    count: usize,
    mean: f64,
    median: f64,
    q1: f64,
    q3: f64,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    run_id: usize,
    algorithm: &'a str,
    wall_seconds: f64,
}

const FACTORS: [&str; 2] = ["W", "H"];

/// Writes the CSV set into `out_dir` (created if missing) and returns the
/// paths written.
pub fn emit_csv(campaign: &Campaign, out_dir: &Path, with_timings: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut written = Vec::new();

    written.push(write_rows(out_dir, "traces.csv", &["run_id", "algorithm", "iter", "objective", "response"], |w| {
        for r in &campaign.reports {
            if let Some(m) = r.metrics() {
                for (iter, (&objective, &response)) in m.objective_trace.iter().zip(&m.response_trace).enumerate() {
                    w.serialize(TraceRow {
                        run_id: r.run_id,
                        algorithm: &r.algorithm,
                        iter,
                        objective,
                        response,
                    })?;
                }
            }
        }
        Ok(())
    })?);

    written.push(write_rows(out_dir, "sir.csv", &["run_id", "algorithm", "factor", "component", "sir_db"], |w| {
        for r in &campaign.reports {
            if let Some(m) = r.metrics() {
                for (factor, rep) in FACTORS.iter().zip([&m.sir_w, &m.sir_h]) {
                    for (component, &sir_db) in rep.per_component_db.iter().enumerate() {
                        w.serialize(SirRow {
                            run_id: r.run_id,
                            algorithm: &r.algorithm,
                            factor,
                            component,
                            sir_db,
                        })?;
                    }
                }
            }
        }
        Ok(())
    })?);

    written.push(write_rows(out_dir, "sparsity.csv", &["run_id", "algorithm", "factor", "sparsity"], |w| {
        for r in &campaign.reports {
            if let Some(m) = r.metrics() {
                for (factor, sparsity) in FACTORS.iter().zip([m.sparsity_w, m.sparsity_h]) {
                    w.serialize(SparsityRow {
                        run_id: r.run_id,
                        algorithm: &r.algorithm,
                        factor,
                        sparsity,
                    })?;
                }
            }
        }
        Ok(())
    })?);

    written.push(write_rows(out_dir, "lambda.csv", &["run_id", "row_index", "lambda_init", "lambda_final"], |w| {
        for r in campaign.reports.iter().filter(|r| r.algorithm == "altbi") {
            if let Some(m) = r.metrics() {
                for (row_index, (&lambda_init, &lambda_final)) in m.lambda_init.iter().zip(&m.lambda_final).enumerate() {
                    w.serialize(LambdaRow {
                        run_id: r.run_id,
                        row_index,
                        lambda_init,
                        lambda_final,
                    })?;
                }
            }
        }
        Ok(())
    })?);

    let run_header = [
        "run_id",
        "algorithm",
        "seed",
        "status",
        "iterations",
        "converged",
        "final_objective",
        "final_response",
        "sir_w_mean",
        "sir_h_mean",
        "sparsity_w",
        "sparsity_h",
        "error",
    ];
    written.push(write_rows(out_dir, "runs.csv", &run_header, |w| {
        for r in &campaign.reports {
            let m = r.metrics();
            let error = match &r.outcome {
                RunOutcome::Failed(msg) => msg.as_str(),
                RunOutcome::Completed(_) => "",
            };
            w.serialize(RunRow {
                run_id: r.run_id,
                algorithm: &r.algorithm,
                seed: r.seed,
                status: if m.is_some() { "completed" } else { "failed" },
                iterations: m.map(|m| m.iterations),
                converged: m.map(|m| m.converged),
                final_objective: m.map(|m| m.final_objective),
                final_response: m.map(|m| m.final_response),
                sir_w_mean: m.map(|m| m.sir_w.mean_db),
                sir_h_mean: m.map(|m| m.sir_h.mean_db),
                sparsity_w: m.map(|m| m.sparsity_w),
                sparsity_h: m.map(|m| m.sparsity_h),
                error,
            })?;
        }
        Ok(())
    })?);

    let summary_header = ["algorithm", "metric", "count", "mean", "median", "q1", "q3", "min", "max"];
    written.push(write_rows(out_dir, "summary.csv", &summary_header, |w| {
        for agg in &campaign.aggregates {
            let metrics: [(&str, &Option<Summary>); 4] = [
                ("sir_w", &agg.sir_w),
                ("sir_h", &agg.sir_h),
                ("sparsity_w", &agg.sparsity_w),
                ("sparsity_h", &agg.sparsity_h),
            ];
            for (metric, s) in metrics {
                if let Some(s) = s {
                    w.serialize(SummaryRow {
                        algorithm: &agg.algorithm,
                        metric,
                        count: s.count,
                        mean: s.mean,
                        median: s.median,
                        q1: s.q1,
                        q3: s.q3,
                        min: s.min,
                        max: s.max,
                    })?;
                }
            }
        }
        Ok(())
    })?);

    if with_timings {
        written.push(write_rows(out_dir, "timings.csv", &["run_id", "algorithm", "wall_seconds"], |w| {
            for r in &campaign.reports {
                if let Some(m) = r.metrics() {
                    w.serialize(TimingRow {
                        run_id: r.run_id,
                        algorithm: &r.algorithm,
                        wall_seconds: m.wall_time.as_secs_f64(),
                    })?;
                }
            }
            Ok(())
        })?);
    }
    Ok(written)
}

/// The header is written explicitly so that files with no data rows still
/// carry it.
fn write_rows<F>(dir: &Path, name: &str, header: &[&str], body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut csv::Writer<std::fs::File>) -> std::result::Result<(), csv::Error>,
{
    let path = dir.join(name);
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .map_err(|e| HarnessError::csv(&path, e))?;
    writer.write_record(header).map_err(|e| HarnessError::csv(&path, e))?;
    body(&mut writer).map_err(|e| HarnessError::csv(&path, e))?;
    writer.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}
