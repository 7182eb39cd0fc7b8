//! Alternating bi-level solver.
//!
//! Each outer iteration updates `H` once with the KL multiplicative rule,
//! then runs a bunch of `T` penalized updates on every row of `W` while
//! propagating the forward-mode tangent, and finally moves every row's
//! penalty weight by one projected steepest-descent step with step size
//! `1/s`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::divergence::{objective_parts, row_error, LambdaVector};
use crate::error::{NmfError, Result};
use crate::hypergrad::RowDynamics;
use crate::math;
use crate::matrix::{check_factor_shapes, NonnegMatrix};
use crate::mu::{relative_change, update_h_kl, FactorizationState, Traces};

/// How the penalty weights evolve during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LambdaPolicy {
    /// Steepest descent on the forward-mode hypergradient.
    #[default]
    Hypergradient,
    /// The descent step runs with every hypergradient replaced by zero.
    ZeroGradient,
    /// No λ update at all, and no tangent propagation.
    Frozen,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AltBiConfig {
    /// Inner steps per row per outer iteration (`T`).
    pub bunch_len: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Row `i` is projected onto `[0, lambda_max_factor · λ_i^(0)]`.
    pub lambda_max_factor: f64,
    pub seed: u64,
    /// Keep a λ snapshot every this many outer iterations.
    pub lambda_history_stride: usize,
    pub lambda_policy: LambdaPolicy,
}

impl Default for AltBiConfig {
    fn default() -> Self {
        Self {
            bunch_len: 4,
            max_iter: 1000,
            tol: 1e-6,
            lambda_max_factor: 10.0,
            seed: 0,
            lambda_history_stride: 1,
            lambda_policy: LambdaPolicy::Hypergradient,
        }
    }
}

impl AltBiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bunch_len == 0 {
            return Err(NmfError::InvalidConfig("bunch_len must be >= 1".into()));
        }
        if self.max_iter == 0 {
            return Err(NmfError::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(NmfError::InvalidConfig(format!("tol = {} must be > 0", self.tol)));
        }
        if !(self.lambda_max_factor > 0.0 && self.lambda_max_factor.is_finite()) {
            return Err(NmfError::InvalidConfig(format!(
                "lambda_max_factor = {} must be finite and > 0",
                self.lambda_max_factor
            )));
        }
        if self.lambda_history_stride == 0 {
            return Err(NmfError::InvalidConfig("lambda_history_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Harmonic step sizes `c_s = 1/s`: their sum diverges, the sum of their
/// squares does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepSchedule {
    s: usize,
}

impl StepSchedule {
    pub fn harmonic() -> Self {
        Self { s: 0 }
    }

    /// Advances the counter and returns `(s, c_s)`.
    pub fn advance(&mut self) -> (usize, f64) {
        self.s += 1;
        (self.s, Self::step_size(self.s))
    }

    pub fn step_size(s: usize) -> f64 {
        1.0 / s as f64
    }

    pub fn count(&self) -> usize {
        self.s
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self::harmonic()
    }
}

/// Initial weights balancing the two terms of the objective:
/// `λ_i = E_i(W0, H0) / (10 ‖W0_i‖₁)`.
pub fn init_lambda(x: &NonnegMatrix, w0: &NonnegMatrix, h0: &NonnegMatrix) -> Result<LambdaVector> {
    check_factor_shapes("init_lambda", x, w0, h0)?;
    let mut values = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let w_i = w0.row(i);
        let l1: f64 = w_i.iter().sum();
        if !(l1 > 0.0) {
            return Err(NmfError::ZeroNormRow { row: i });
        }
        values.push(row_error(w_i, x.row(i), h0) / (10.0 * l1));
    }
    if values.iter().all(|&v| v == 0.0) {
        log::warn!("initial factors reproduce X exactly; every initial lambda is zero");
    }
    LambdaVector::new(values)
}

/// Projected steepest descent: `clip(λ - grad/s, 0, λ_max)` entrywise.
pub fn lambda_step(
    lambda: &LambdaVector,
    grads: &[f64],
    s: usize,
    lambda_max: &LambdaVector,
) -> Result<LambdaVector> {
    Ok(lambda_step_counted(lambda, grads, s, lambda_max)?.0)
}

fn lambda_step_counted(
    lambda: &LambdaVector,
    grads: &[f64],
    s: usize,
    lambda_max: &LambdaVector,
) -> Result<(LambdaVector, usize)> {
    if s == 0 {
        return Err(NmfError::InvalidConfig("step counter s must be >= 1".into()));
    }
    if grads.len() != lambda.len() || lambda_max.len() != lambda.len() {
        return Err(NmfError::ShapeMismatch {
            op: "lambda_step",
            expected: (lambda.len(), 1),
            found: (grads.len(), lambda_max.len()),
        });
    }
    let c = StepSchedule::step_size(s);
    let mut saturated = 0;
    let values = lambda
        .as_slice()
        .iter()
        .zip(grads)
        .zip(lambda_max.as_slice())
        .map(|((&l, &g), &hi)| {
            let v = l - c * g;
            if v > hi {
                saturated += 1;
                hi
            } else if v > 0.0 {
                v
            } else {
                0.0
            }
        })
        .collect();
    Ok((LambdaVector::from_vec_unchecked(values), saturated))
}

/// AltBi from the balanced initial weights of [`init_lambda`].
pub fn run_altbi(
    x: &NonnegMatrix,
    w0: &NonnegMatrix,
    h0: &NonnegMatrix,
    cfg: &AltBiConfig,
) -> Result<FactorizationState> {
    let lambda0 = init_lambda(x, w0, h0)?;
    run_altbi_from(x, w0, h0, lambda0, cfg)
}

/// AltBi from explicit initial weights; the projection box of row `i` is
/// `[0, lambda_max_factor · lambda0_i]`.
pub fn run_altbi_from(
    x: &NonnegMatrix,
    w0: &NonnegMatrix,
    h0: &NonnegMatrix,
    lambda0: LambdaVector,
    cfg: &AltBiConfig,
) -> Result<FactorizationState> {
    cfg.validate()?;
    check_factor_shapes("run_altbi", x, w0, h0)?;
    if lambda0.len() != x.rows() {
        return Err(NmfError::ShapeMismatch {
            op: "run_altbi",
            expected: (x.rows(), 1),
            found: (lambda0.len(), 1),
        });
    }
    w0.ensure_strictly_positive()?;
    h0.ensure_strictly_positive()?;

    let n = x.rows();
    let lambda_max = LambdaVector::from_vec_unchecked(
        lambda0.as_slice().iter().map(|&l| cfg.lambda_max_factor * l).collect(),
    );
    let mut lambda = lambda0.clone();
    let mut w = w0.clone();
    let mut h = h0.clone();

    let (response, penalty) = objective_parts(x, &w, &h, &lambda)?;
    let mut f_prev = response + penalty;
    let mut traces = Traces::new(response, penalty, &lambda);
    let mut lambda_history = vec![(0, lambda.clone())];
    let mut schedule = StepSchedule::harmonic();
    let mut saturation_events = 0;
    let mut grads = vec![0.0; n];

    let mut iter = 0;
    let mut converged = false;
    while iter < cfg.max_iter {
        iter += 1;
        h = update_h_kl(x, &w, &h)?;

        for i in 0..n {
            let x_i = x.row(i);
            let mut dynamics = RowDynamics::new(w.row(i).to_vec(), lambda.as_slice()[i], cfg.bunch_len);
            match cfg.lambda_policy {
                LambdaPolicy::Frozen => {
                    for _ in 0..cfg.bunch_len {
                        dynamics.phi_step(x_i, &h);
                    }
                    grads[i] = 0.0;
                }
                LambdaPolicy::Hypergradient | LambdaPolicy::ZeroGradient => {
                    dynamics.run_bunch(x_i, &h).map_err(|e| with_row(e, iter, i))?;
                    grads[i] = match cfg.lambda_policy {
                        LambdaPolicy::Hypergradient => dynamics.hypergradient(x_i, &h),
                        _ => 0.0,
                    };
                    if !grads[i].is_finite() {
                        return Err(NmfError::NonFinite {
                            what: "hypergradient",
                            iter,
                            row: Some(i),
                        });
                    }
                }
            }
            if dynamics.w.iter().any(|v| !v.is_finite()) {
                return Err(NmfError::NonFinite {
                    what: "W row",
                    iter,
                    row: Some(i),
                });
            }
            w.row_mut(i).copy_from_slice(&dynamics.w);
        }
        if log::log_enabled!(log::Level::Trace) {
            let largest = (0..w.rows())
                .map(|i| math::sqrt(w.row(i).iter().map(|v| v * v).sum()))
                .fold(0.0, f64::max);
            log::trace!("iteration {iter}: max row ||w||_2 = {largest:e}");
        }

        if cfg.lambda_policy != LambdaPolicy::Frozen {
            let (s, _) = schedule.advance();
            let (next, saturated) = lambda_step_counted(&lambda, &grads, s, &lambda_max)?;
            if saturated > 0 {
                log::debug!("iteration {iter}: {saturated} lambda entries clipped at their upper bound");
            }
            saturation_events += saturated;
            lambda = next;
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
        traces.push(response, penalty, &lambda);
        if iter % cfg.lambda_history_stride == 0 {
            lambda_history.push((iter, lambda.clone()));
        }
        if relative_change(f_prev, f) < cfg.tol {
            converged = true;
            break;
        }
        f_prev = f;
    }
    if lambda_history.last().map(|(it, _)| *it) != Some(iter) {
        lambda_history.push((iter, lambda.clone()));
    }
    if saturation_events > 0 {
        log::info!("lambda upper bound reached {saturation_events} times");
    }

    Ok(FactorizationState {
        w,
        h,
        lambda,
        lambda_init: lambda0,
        iter,
        converged,
        objective_trace: traces.objective,
        response_trace: traces.response,
        lambda_l1_trace: traces.lambda_l1,
        lambda_history,
        saturation_events,
    })
}

fn with_row(err: NmfError, iter: usize, row: usize) -> NmfError {
    match err {
        NmfError::NonFinite { what, .. } => NmfError::NonFinite {
            what,
            iter,
            row: Some(row),
        },
        other => other,
    }
}
