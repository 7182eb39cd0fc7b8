//! Penalized nonnegative matrix factorization under the generalized
//! Kullback-Leibler divergence, with a per-row ℓ1 penalty on the basis
//! matrix whose weights are tuned inside the factorization loop.
//!
//! The tuning is a bi-level problem solved row by row: the inner problem is
//! a short bunch of multiplicative updates of one row of `W`, the outer
//! problem minimizes the reconstruction error of that row with respect to
//! its penalty weight. The derivative of the outer objective through the
//! unrolled inner updates (the hypergradient) is propagated in forward mode
//! and fed to a projected steepest-descent step on the weights.
//!
//! Module map:
//!
//! * [`matrix`]: dense nonnegative matrices.
//! * [`divergence`]: β-divergences and the scalar objectives.
//! * [`mu`]: multiplicative updates and the MU / P-MU baselines.
//! * [`hypergrad`]: per-row inner dynamics, Jacobians, forward and reverse
//!   mode hypergradients, finite-difference oracle.
//! * [`altbi`]: the alternating bi-level solver.
//! * [`benchmarks`]: seeded synthetic ground truths.
//! * [`metrics`]: SIR with component matching, sparsity, KKT residual,
//!   summary statistics.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod altbi;
pub mod benchmarks;
pub mod divergence;
mod error;
pub mod hypergrad;
mod linalg;
mod math;
pub mod matrix;
pub mod metrics;
pub mod mu;

pub use altbi::{init_lambda, lambda_step, run_altbi, run_altbi_from, AltBiConfig, LambdaPolicy, StepSchedule};
pub use divergence::{
    beta_div_elem, penalized_objective, row_error, row_loss, total_divergence, Beta, LambdaVector, EPS,
};
pub use error::{NmfError, Result};
pub use matrix::NonnegMatrix;
pub use mu::{grid_sweep, run_mu, run_pmu, FactorizationState, GridRun, SolverConfig};
