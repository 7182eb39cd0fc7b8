//! Evaluation against ground truth: SIR with permutation and scale matching,
//! the sparsity measure, the KKT residual, and summary statistics.

use alloc::vec;
use alloc::vec::Vec;

use crate::divergence::{LambdaVector, EPS};
use crate::error::{NmfError, Result};
use crate::linalg::dot;
use crate::math;
use crate::matrix::{check_factor_shapes, reconstruct_row, NonnegMatrix};

/// Ceiling for SIR values, reached on exact recovery.
pub const SIR_CAP_DB: f64 = 300.0;

/// Default threshold below which an entry counts as zero in [`sparsity`].
pub const DEFAULT_SPARSITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SirReport {
    /// SIR of true component `k` against its matched estimate.
    pub per_component_db: Vec<f64>,
    pub mean_db: f64,
    /// `assignment[k]` is the estimated component matched to true `k`.
    pub assignment: Vec<usize>,
    /// Least-squares scale applied to each matched estimate.
    pub scales: Vec<f64>,
}

/// `10 log10(‖s‖² / ‖s - c ŝ‖²)` with `c` the least-squares scale of `ŝ`
/// onto `s`, capped at [`SIR_CAP_DB`].
pub fn sir_db(true_sig: &[f64], est_sig: &[f64]) -> Result<f64> {
    sir_and_scale(true_sig, est_sig).map(|(sir, _)| sir)
}

fn sir_and_scale(true_sig: &[f64], est_sig: &[f64]) -> Result<(f64, f64)> {
    if true_sig.len() != est_sig.len() {
        return Err(NmfError::ShapeMismatch {
            op: "sir_db",
            expected: (true_sig.len(), 1),
            found: (est_sig.len(), 1),
        });
    }
    let energy = dot(true_sig, true_sig);
    if !(energy > 0.0) {
        return Err(NmfError::ZeroSignal);
    }
    let est_energy = dot(est_sig, est_sig);
    let scale = if est_energy > 0.0 {
        dot(true_sig, est_sig) / est_energy
    } else {
        0.0
    };
    let residual: f64 = true_sig
        .iter()
        .zip(est_sig)
        .map(|(&s, &e)| {
            let d = s - scale * e;
            d * d
        })
        .sum();
    let sir = if residual <= 0.0 {
        SIR_CAP_DB
    } else {
        (10.0 * math::log10(energy / residual)).min(SIR_CAP_DB)
    };
    Ok((sir, scale))
}

/// Matches the columns of `w_est` to those of `w_true` so that the total SIR
/// is maximal, then reports per-component SIR.
///
/// The assignment is exact (dynamic programming over subsets), which is
/// cheap for the ranks used here.
pub fn match_components(w_true: &NonnegMatrix, w_est: &NonnegMatrix) -> Result<SirReport> {
    if w_true.shape() != w_est.shape() {
        return Err(NmfError::ShapeMismatch {
            op: "match_components",
            expected: w_true.shape(),
            found: w_est.shape(),
        });
    }
    let r = w_true.cols();
    if r > 20 {
        return Err(NmfError::Domain("component matching supports at most 20 components".into()));
    }
    let true_cols: Vec<Vec<f64>> = (0..r).map(|k| w_true.col(k)).collect();
    let est_cols: Vec<Vec<f64>> = (0..r).map(|k| w_est.col(k)).collect();
    let mut table = vec![(0.0, 0.0); r * r];
    for a in 0..r {
        for b in 0..r {
            table[a * r + b] = sir_and_scale(&true_cols[a], &est_cols[b])?;
        }
    }
    let assignment = best_assignment(r, |a, b| table[a * r + b].0);
    let per_component_db: Vec<f64> = (0..r).map(|a| table[a * r + assignment[a]].0).collect();
    let scales = (0..r).map(|a| table[a * r + assignment[a]].1).collect();
    let mean_db = mean(&per_component_db);
    Ok(SirReport {
        per_component_db,
        mean_db,
        assignment,
        scales,
    })
}

/// Row-wise matching, used for `H`.
pub fn match_rows(h_true: &NonnegMatrix, h_est: &NonnegMatrix) -> Result<SirReport> {
    match_components(&h_true.transpose(), &h_est.transpose())
}

/// Maximum-weight perfect assignment; `score(a, b)` is the gain of pairing
/// row `a` with column `b`.
fn best_assignment<F>(r: usize, score: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> f64,
{
    // best[mask] = best total for assigning the first popcount(mask) rows
    // to the columns in mask.
    let states = 1usize << r;
    let mut best = vec![f64::NEG_INFINITY; states];
    let mut choice = vec![usize::MAX; states];
    best[0] = 0.0;
    for mask in 0..states {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        let a = mask.count_ones() as usize;
        if a == r {
            continue;
        }
        for b in 0..r {
            if mask & (1 << b) != 0 {
                continue;
            }
            let next = mask | (1 << b);
            let value = best[mask] + score(a, b);
            if value > best[next] {
                best[next] = value;
                choice[next] = b;
            }
        }
    }
    let mut assignment = vec![0; r];
    let mut mask = states - 1;
    for a in (0..r).rev() {
        let b = choice[mask];
        assignment[a] = b;
        mask &= !(1 << b);
    }
    assignment
}

/// Percentage of entries at or below `tol`.
pub fn sparsity(a: &NonnegMatrix, tol: f64) -> f64 {
    let total = a.as_slice().len();
    if total == 0 {
        return 0.0;
    }
    let small = a.as_slice().iter().filter(|&&v| v <= tol).count();
    100.0 * small as f64 / total as f64
}

/// Gradient of `Σ_ij (-X_ij log (WH)_ij + (WH)_ij) + Σ_i λ_i Σ_k W_ik` with
/// respect to `W`, row-major `n × r`.
pub fn penalized_gradient_w(
    x: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    lambda: &LambdaVector,
) -> Result<Vec<f64>> {
    check_factor_shapes("kkt_residual", x, w, h)?;
    if lambda.len() != x.rows() {
        return Err(NmfError::ShapeMismatch {
            op: "kkt_residual",
            expected: (x.rows(), 1),
            found: (lambda.len(), 1),
        });
    }
    let (n, r) = w.shape();
    let mut grad = vec![0.0; n * r];
    let mut recon = vec![0.0; x.cols()];
    for i in 0..n {
        reconstruct_row(w.row(i), h, &mut recon);
        for (q, &xij) in recon.iter_mut().zip(x.row(i)) {
            *q = 1.0 - xij / q.max(EPS);
        }
        for k in 0..r {
            grad[i * r + k] = dot(h.row(k), &recon) + lambda.as_slice()[i];
        }
    }
    Ok(grad)
}

/// `‖W .* ∇_W F‖_∞`, zero at KKT points of the penalized objective.
pub fn kkt_residual(
    x: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    lambda: &LambdaVector,
) -> Result<f64> {
    let grad = penalized_gradient_w(x, w, h, lambda)?;
    Ok(w.as_slice()
        .iter()
        .zip(&grad)
        .map(|(&wv, &g)| (wv * g).abs())
        .fold(0.0, f64::max))
}

/// Location and spread of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty sample. Quartiles interpolate linearly between
    /// order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            count: values.len(),
            mean: mean(values),
            median: quantile_sorted(&sorted, 0.5),
            q1: quantile_sorted(&sorted, 0.25),
            q3: quantile_sorted(&sorted, 0.75),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
        })
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear-interpolation quantile of an already sorted, nonempty sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    Summary::of(values).map_or(f64::NAN, |s| s.median)
}
