//! Multiplicative updates for `H` and for the rows of `W`, and the two
//! baseline solvers built from them: unpenalized MU and fixed-λ P-MU.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::divergence::{objective_parts, Beta, LambdaVector, EPS};
use crate::error::{NmfError, Result};
use crate::math;
use crate::matrix::{check_factor_shapes, reconstruct_row, NonnegMatrix};

/// Settings shared by the MU and P-MU baselines.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop once the relative change of the penalized objective drops below
    /// this value.
    pub tol: f64,
    pub beta: Beta,
    /// Penalty weight shared by every row in P-MU.
    pub fixed_lambda: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-6,
            beta: Beta::KL,
            fixed_lambda: 0.5,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(NmfError::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(NmfError::InvalidConfig(format!("tol = {} must be > 0", self.tol)));
        }
        if !(self.fixed_lambda.is_finite() && self.fixed_lambda >= 0.0) {
            return Err(NmfError::InvalidConfig(format!(
                "fixed_lambda = {} must be finite and >= 0",
                self.fixed_lambda
            )));
        }
        if !self.beta.is_kl() {
            return Err(NmfError::InvalidConfig(format!(
                "the W update is derived for KL only; beta = {}",
                self.beta.value()
            )));
        }
        Ok(())
    }
}

/// Factors, penalty weights and traces of a solver run.
///
/// Traces start with the value at the initializers, so `objective_trace`
/// has `iter + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationState {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
    pub lambda: LambdaVector,
    pub lambda_init: LambdaVector,
    pub iter: usize,
    pub converged: bool,
    /// Penalized objective `D_1(X, WH) + Σ λ_i ‖W_i‖₁` per outer iteration.
    pub objective_trace: Vec<f64>,
    /// Response `D_1(X, WH)` per outer iteration.
    pub response_trace: Vec<f64>,
    /// `‖λ‖₁` per outer iteration.
    pub lambda_l1_trace: Vec<f64>,
    /// `(iteration, λ)` snapshots, possibly thinned.
    pub lambda_history: Vec<(usize, LambdaVector)>,
    /// Number of λ entries clipped at their upper bound, summed over the run.
    pub saturation_events: usize,
}

/// One P-MU run of a λ sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRun {
    pub lambda: f64,
    pub state: FactorizationState,
}

/// General-β multiplicative update of `H`:
/// `H ← H .* (Wᵀ((WH)^(β-2) .* X)) / (Wᵀ (WH)^(β-1))`.
pub fn update_h_beta(
    x: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    beta: Beta,
) -> Result<NonnegMatrix> {
    check_factor_shapes("update_h_beta", x, w, h)?;
    if !beta.in_monotone_range() {
        log::warn!(
            "beta = {} outside [0, 2]: update applied without a descent guarantee",
            beta.value()
        );
    }
    let b = beta.value();
    let (r, m) = h.shape();
    let mut num = vec![0.0; r * m];
    let mut den = vec![0.0; r * m];
    let mut recon = vec![0.0; m];
    let mut ratio = vec![0.0; m];
    let mut power = vec![0.0; m];
    for i in 0..x.rows() {
        reconstruct_row(w.row(i), h, &mut recon);
        for j in 0..m {
            let y = recon[j].max(EPS);
            ratio[j] = pow_int_aware(y, b - 2.0) * x.get(i, j);
            power[j] = pow_int_aware(y, b - 1.0);
        }
        for (k, &wik) in w.row(i).iter().enumerate() {
            if wik == 0.0 {
                continue;
            }
            let num_k = &mut num[k * m..(k + 1) * m];
            let den_k = &mut den[k * m..(k + 1) * m];
            for j in 0..m {
                num_k[j] += wik * ratio[j];
                den_k[j] += wik * power[j];
            }
        }
    }
    let data = h
        .as_slice()
        .iter()
        .zip(num.iter().zip(&den))
        .map(|(&hkj, (&n, &d))| hkj * n / d.max(EPS))
        .collect();
    Ok(NonnegMatrix::from_vec_unchecked(r, m, data))
}

fn pow_int_aware(y: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == -1.0 {
        1.0 / y
    } else if e == 1.0 {
        y
    } else {
        math::powf(y, e)
    }
}

/// KL multiplicative update of `H`:
/// `H ← H .* (Wᵀ(X ./ WH)) ./ (column sums of W)`.
pub fn update_h_kl(x: &NonnegMatrix, w: &NonnegMatrix, h: &NonnegMatrix) -> Result<NonnegMatrix> {
    check_factor_shapes("update_h_kl", x, w, h)?;
    let (r, m) = h.shape();
    let mut num = vec![0.0; r * m];
    let mut col_sums = vec![0.0; r];
    let mut recon = vec![0.0; m];
    for i in 0..x.rows() {
        let w_i = w.row(i);
        reconstruct_row(w_i, h, &mut recon);
        for (rj, &xij) in recon.iter_mut().zip(x.row(i)) {
            *rj = xij / rj.max(EPS);
        }
        for (k, &wik) in w_i.iter().enumerate() {
            col_sums[k] += wik;
            if wik == 0.0 {
                continue;
            }
            for (n, &q) in num[k * m..(k + 1) * m].iter_mut().zip(&recon) {
                *n += wik * q;
            }
        }
    }
    let mut data = Vec::with_capacity(r * m);
    for k in 0..r {
        let den = col_sums[k].max(EPS);
        for j in 0..m {
            data.push(h.get(k, j) * num[k * m + j] / den);
        }
    }
    Ok(NonnegMatrix::from_vec_unchecked(r, m, data))
}

/// Row-wise multiplicative update of `W` for the ℓ1-penalized KL loss:
/// `w_k ← w_k (Σ_j H_kj x_j / (wH)_j) / (Σ_j H_kj + λ)`.
pub fn update_w_penalized_row(w: &[f64], lambda: f64, x_row: &[f64], h: &NonnegMatrix) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let mut scratch = vec![0.0; h.cols()];
    update_w_row_into(w, lambda, x_row, h, &mut scratch, &mut out);
    out
}

/// Allocation-free core of [`update_w_penalized_row`]. Every caller that
/// needs bitwise-identical W trajectories goes through this function.
pub(crate) fn update_w_row_into(
    w: &[f64],
    lambda: f64,
    x_row: &[f64],
    h: &NonnegMatrix,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    assert_eq!(w.len(), h.rows(), "update_w: w length vs H rows");
    assert_eq!(x_row.len(), h.cols(), "update_w: x length vs H cols");
    reconstruct_row(w, h, scratch);
    for (q, &xj) in scratch.iter_mut().zip(x_row) {
        *q = xj / q.max(EPS);
    }
    for (k, o) in out.iter_mut().enumerate() {
        let h_k = h.row(k);
        let mut num = 0.0;
        let mut row_sum = 0.0;
        for (&hkj, &q) in h_k.iter().zip(scratch.iter()) {
            num += hkj * q;
            row_sum += hkj;
        }
        *o = w[k] * num / (row_sum + lambda).max(EPS);
    }
}

/// Unpenalized KL multiplicative updates (λ = 0 on every row).
pub fn run_mu(
    x: &NonnegMatrix,
    w0: &NonnegMatrix,
    h0: &NonnegMatrix,
    cfg: &SolverConfig,
) -> Result<FactorizationState> {
    run_penalized(x, w0, h0, cfg, LambdaVector::zeros(x.rows()))
}

/// P-MU: KL updates with the same penalty weight `cfg.fixed_lambda` on every
/// row of `W`.
pub fn run_pmu(
    x: &NonnegMatrix,
    w0: &NonnegMatrix,
    h0: &NonnegMatrix,
    cfg: &SolverConfig,
) -> Result<FactorizationState> {
    let lambda = LambdaVector::uniform(x.rows(), cfg.fixed_lambda)?;
    run_penalized(x, w0, h0, cfg, lambda)
}

/// Alternates the H update and the row-wise penalized W update with the
/// given, fixed per-row weights.
pub fn run_penalized(
    x: &NonnegMatrix,
    w0: &NonnegMatrix,
    h0: &NonnegMatrix,
    cfg: &SolverConfig,
    lambda: LambdaVector,
) -> Result<FactorizationState> {
    cfg.validate()?;
    check_factor_shapes("run_penalized", x, w0, h0)?;
    if lambda.len() != x.rows() {
        return Err(NmfError::ShapeMismatch {
            op: "run_penalized",
            expected: (x.rows(), 1),
            found: (lambda.len(), 1),
        });
    }
    w0.ensure_strictly_positive()?;
    h0.ensure_strictly_positive()?;

    let mut w = w0.clone();
    let mut h = h0.clone();
    let (response, penalty) = objective_parts(x, &w, &h, &lambda)?;
    let mut f_prev = response + penalty;
    let mut state_traces = Traces::new(response, penalty, &lambda);

    let r = w.cols();
    let mut scratch = vec![0.0; x.cols()];
    let mut row_out = vec![0.0; r];
    let mut iter = 0;
    let mut converged = false;
    while iter < cfg.max_iter {
        iter += 1;
        h = update_h_kl(x, &w, &h)?;
        for i in 0..x.rows() {
            update_w_row_into(w.row(i), lambda.as_slice()[i], x.row(i), &h, &mut scratch, &mut row_out);
            w.row_mut(i).copy_from_slice(&row_out);
        }
        let (response, penalty) = objective_parts(x, &w, &h, &lambda)?;
        let f = response + penalty;
        if !f.is_finite() {
            return Err(NmfError::NonFinite {
                what: "penalized objective",
                iter,
                row: None,
            });
        }
        state_traces.push(response, penalty, &lambda);
        if relative_change(f_prev, f) < cfg.tol {
            converged = true;
            break;
        }
        f_prev = f;
    }

    Ok(FactorizationState {
        w,
        h,
        lambda_init: lambda.clone(),
        lambda,
        iter,
        converged,
        objective_trace: state_traces.objective,
        response_trace: state_traces.response,
        lambda_l1_trace: state_traces.lambda_l1,
        lambda_history: Vec::new(),
        saturation_events: 0,
    })
}

/// One P-MU run per grid value, all from the same initializers, in grid
/// order.
pub fn grid_sweep(
    x: &NonnegMatrix,
    w0: &NonnegMatrix,
    h0: &NonnegMatrix,
    cfg: &SolverConfig,
    grid: &[f64],
) -> Result<Vec<GridRun>> {
    if grid.is_empty() {
        return Err(NmfError::InvalidConfig("lambda grid is empty".into()));
    }
    grid.iter()
        .map(|&lambda| {
            let cfg = SolverConfig {
                fixed_lambda: lambda,
                ..cfg.clone()
            };
            run_pmu(x, w0, h0, &cfg).map(|state| GridRun { lambda, state })
        })
        .collect()
}

/// `|F_prev - F| / max(F_prev, ε)`.
#[inline]
pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    (prev - cur).abs() / prev.max(EPS)
}

pub(crate) struct Traces {
    pub objective: Vec<f64>,
    pub response: Vec<f64>,
    pub lambda_l1: Vec<f64>,
}

impl Traces {
    pub fn new(response: f64, penalty: f64, lambda: &LambdaVector) -> Self {
        let mut t = Self {
            objective: Vec::new(),
            response: Vec::new(),
            lambda_l1: Vec::new(),
        };
        t.push(response, penalty, lambda);
        t
    }

    pub fn push(&mut self, response: f64, penalty: f64, lambda: &LambdaVector) {
        self.objective.push(response + penalty);
        self.response.push(response);
        self.lambda_l1.push(lambda.l1_norm());
    }
}
