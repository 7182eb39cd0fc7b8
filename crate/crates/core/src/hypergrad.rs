//! Per-row inner dynamics and the derivative of the row error with respect
//! to the row's penalty weight, through `T` unrolled updates.
//!
//! The inner map is the penalized multiplicative W update
//!
//! ```text
//! Φ_k(w, λ) = w_k S_k / (Σ_j H_kj + λ),   S_k = Σ_j H_kj x_j / (wH)_j
//! ```
//!
//! and the response is `f(λ) = E(w^(T)(λ))` with `E` the KL error of the row.
//! Forward mode carries the tangent `Z_t = dw^(t)/dλ`:
//!
//! ```text
//! Z_0 = 0,   Z_t = A_t Z_{t-1} + B_t,   ∇_λ f = G(w^(T)) · Z_T
//! ```
//!
//! with `A_t = ∂Φ/∂w` and `B_t = ∂Φ/∂λ` evaluated at `w^(t-1)`, and
//! `G = ∂E/∂w`. Reverse mode and central finite differences compute the same
//! number and are kept as oracles.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::divergence::{row_error, EPS};
use crate::error::{NmfError, Result};
use crate::matrix::{reconstruct_row, NonnegMatrix};
use crate::mu::update_w_row_into;

/// Jacobian blocks of one inner step plus the outer gradient at the same
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergradPieces {
    /// `r × r`, row-major, `a[k * r + h] = ∂Φ_k/∂w_h`.
    pub a: Vec<f64>,
    /// `∂Φ_k/∂λ`.
    pub b: Vec<f64>,
    /// `∂E/∂w_k` at the evaluation point.
    pub g: Vec<f64>,
}

impl HypergradPieces {
    pub fn rank(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn a_at(&self, k: usize, h: usize) -> f64 {
        self.a[k * self.rank() + h]
    }
}

/// A, B and G at `(w, λ)` from one pass over the row.
pub fn hypergrad_pieces(w: &[f64], lambda: f64, x_row: &[f64], h: &NonnegMatrix) -> HypergradPieces {
    let r = w.len();
    let m = h.cols();
    assert_eq!(r, h.rows(), "hypergrad_pieces: w length vs H rows");
    assert_eq!(x_row.len(), m, "hypergrad_pieces: x length vs H cols");

    let mut recon = vec![0.0; m];
    reconstruct_row(w, h, &mut recon);
    // q_j = x_j / s_j and q2_j = x_j / s_j² with s_j the clamped reconstruction.
    let mut q = vec![0.0; m];
    let mut q2 = vec![0.0; m];
    for j in 0..m {
        let s = recon[j].max(EPS);
        q[j] = x_row[j] / s;
        q2[j] = q[j] / s;
    }

    let mut a = vec![0.0; r * r];
    let mut b = vec![0.0; r];
    let mut g = vec![0.0; r];
    for k in 0..r {
        let h_k = h.row(k);
        let mut s_k = 0.0;
        let mut row_sum = 0.0;
        for j in 0..m {
            s_k += h_k[j] * q[j];
            row_sum += h_k[j];
        }
        let den = (row_sum + lambda).max(EPS);
        g[k] = row_sum - s_k;
        b[k] = -w[k] * s_k / (den * den);
        for hh in 0..r {
            let h_h = h.row(hh);
            let cross: f64 = (0..m).map(|j| h_k[j] * h_h[j] * q2[j]).sum();
            let diag = if hh == k { s_k } else { 0.0 };
            a[k * r + hh] = (diag - w[k] * cross) / den;
        }
    }
    HypergradPieces { a, b, g }
}

/// `A = ∂Φ/∂w` as row-major `r × r`.
pub fn jacobian_a(w: &[f64], lambda: f64, x_row: &[f64], h: &NonnegMatrix) -> Vec<f64> {
    hypergrad_pieces(w, lambda, x_row, h).a
}

/// `B = ∂Φ/∂λ`.
pub fn jacobian_b(w: &[f64], lambda: f64, x_row: &[f64], h: &NonnegMatrix) -> Vec<f64> {
    hypergrad_pieces(w, lambda, x_row, h).b
}

/// `G_k = ∂E/∂w_k = Σ_j H_kj (1 - x_j / (wH)_j)`.
pub fn outer_gradient_g(w: &[f64], x_row: &[f64], h: &NonnegMatrix) -> Vec<f64> {
    hypergrad_pieces(w, 0.0, x_row, h).g
}

/// State of one row during a bunch.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDynamics {
    pub w: Vec<f64>,
    /// Tangent `dw^(t)/dλ`.
    pub z: Vec<f64>,
    pub lambda: f64,
    /// Steps taken in the current bunch.
    pub t: usize,
    pub bunch_len: usize,
}

impl RowDynamics {
    /// Starts a bunch at `w0` with a zero tangent.
    pub fn new(w0: Vec<f64>, lambda: f64, bunch_len: usize) -> Self {
        let r = w0.len();
        Self {
            w: w0,
            z: vec![0.0; r],
            lambda,
            t: 0,
            bunch_len,
        }
    }

    /// Advances `w` by one inner update; the tangent is left untouched.
    pub fn phi_step(&mut self, x_row: &[f64], h: &NonnegMatrix) {
        let mut next = vec![0.0; self.w.len()];
        let mut scratch = vec![0.0; h.cols()];
        update_w_row_into(&self.w, self.lambda, x_row, h, &mut scratch, &mut next);
        self.w = next;
        self.t += 1;
    }

    /// One forward-mode step: `Z ← A Z + B` at the current `w`, then
    /// `w ← Φ(w)`.
    pub fn fmd_step(&mut self, x_row: &[f64], h: &NonnegMatrix) -> Result<()> {
        let pieces = hypergrad_pieces(&self.w, self.lambda, x_row, h);
        let r = self.w.len();
        let mut z_next = pieces.b;
        for k in 0..r {
            z_next[k] += (0..r).map(|c| pieces.a[k * r + c] * self.z[c]).sum::<f64>();
        }
        if z_next.iter().any(|v| !v.is_finite()) {
            return Err(NmfError::NonFinite {
                what: "hypergradient tangent",
                iter: self.t + 1,
                row: None,
            });
        }
        self.z = z_next;
        self.phi_step(x_row, h);
        Ok(())
    }

    /// Runs the remaining steps of the bunch in forward mode.
    pub fn run_bunch(&mut self, x_row: &[f64], h: &NonnegMatrix) -> Result<()> {
        while self.t < self.bunch_len {
            self.fmd_step(x_row, h)?;
        }
        Ok(())
    }

    /// `∂f/∂λ + G(w) · Z`; the response has no explicit λ, so the first
    /// term is zero.
    pub fn hypergradient(&self, x_row: &[f64], h: &NonnegMatrix) -> f64 {
        let direct = 0.0;
        let g = outer_gradient_g(&self.w, x_row, h);
        direct + dot(&g, &self.z)
    }
}

/// Result of a forward-mode hypergradient computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergradient {
    pub value: f64,
    /// `w^(T)`.
    pub w: Vec<f64>,
    /// `Z_T = dw^(T)/dλ`.
    pub tangent: Vec<f64>,
}

/// Forward-mode hypergradient after `bunch_len` inner steps from `w0`.
pub fn fmd_hypergradient(
    w0: &[f64],
    lambda: f64,
    x_row: &[f64],
    h: &NonnegMatrix,
    bunch_len: usize,
) -> Result<Hypergradient> {
    check_bunch(bunch_len, lambda)?;
    let mut dynamics = RowDynamics::new(w0.to_vec(), lambda, bunch_len);
    dynamics.run_bunch(x_row, h)?;
    let value = dynamics.hypergradient(x_row, h);
    if !value.is_finite() {
        return Err(NmfError::NonFinite {
            what: "hypergradient",
            iter: bunch_len,
            row: None,
        });
    }
    Ok(Hypergradient {
        value,
        w: dynamics.w,
        tangent: dynamics.z,
    })
}

/// Storage for the reverse sweep: the full trajectory and the multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct RmdState {
    /// `w^(0) .. w^(T)`.
    pub w_history: Vec<Vec<f64>>,
    /// Row vector of multipliers, `α_T = ∇E(w^(T))`.
    pub alpha: Vec<f64>,
    /// Running accumulator, `h_T = ∂f/∂λ = 0`.
    pub h: f64,
}

/// Reverse-mode hypergradient: store the trajectory, then sweep
/// `h ← h + α B_t`, `α ← α A_t` from `t = T` down to `1`.
pub fn rmd_hypergradient(
    w0: &[f64],
    lambda: f64,
    x_row: &[f64],
    h: &NonnegMatrix,
    bunch_len: usize,
) -> Result<f64> {
    check_bunch(bunch_len, lambda)?;
    let mut dynamics = RowDynamics::new(w0.to_vec(), lambda, bunch_len);
    let mut w_history = Vec::with_capacity(bunch_len + 1);
    w_history.push(dynamics.w.clone());
    for _ in 0..bunch_len {
        dynamics.phi_step(x_row, h);
        w_history.push(dynamics.w.clone());
    }
    let mut state = RmdState {
        alpha: outer_gradient_g(&w_history[bunch_len], x_row, h),
        w_history,
        h: 0.0,
    };
    let r = w0.len();
    for t in (1..=bunch_len).rev() {
        let pieces = hypergrad_pieces(&state.w_history[t - 1], lambda, x_row, h);
        state.h += dot(&state.alpha, &pieces.b);
        let alpha: Vec<f64> = (0..r)
            .map(|c| (0..r).map(|k| state.alpha[k] * pieces.a[k * r + c]).sum())
            .collect();
        state.alpha = alpha;
    }
    if !state.h.is_finite() {
        return Err(NmfError::NonFinite {
            what: "reverse-mode hypergradient",
            iter: bunch_len,
            row: None,
        });
    }
    Ok(state.h)
}

/// Row error after `bunch_len` inner steps from `w0` at penalty `lambda`.
pub fn unrolled_response(w0: &[f64], lambda: f64, x_row: &[f64], h: &NonnegMatrix, bunch_len: usize) -> f64 {
    let mut dynamics = RowDynamics::new(w0.to_vec(), lambda, bunch_len);
    for _ in 0..bunch_len {
        dynamics.phi_step(x_row, h);
    }
    row_error(&dynamics.w, x_row, h)
}

/// Central difference of [`unrolled_response`] in λ.
pub fn fd_hypergradient_oracle(
    w0: &[f64],
    lambda: f64,
    x_row: &[f64],
    h: &NonnegMatrix,
    bunch_len: usize,
    step: f64,
) -> Result<f64> {
    if !(step > 0.0) || lambda - step < 0.0 {
        return Err(NmfError::Domain(format!(
            "finite-difference step {step} must be > 0 and keep lambda = {lambda} nonnegative"
        )));
    }
    let plus = unrolled_response(w0, lambda + step, x_row, h, bunch_len);
    let minus = unrolled_response(w0, lambda - step, x_row, h, bunch_len);
    Ok((plus - minus) / (2.0 * step))
}

fn check_bunch(bunch_len: usize, lambda: f64) -> Result<()> {
    if bunch_len == 0 {
        return Err(NmfError::InvalidConfig("bunch length must be >= 1".into()));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(NmfError::Domain(format!("lambda = {lambda} must be finite and >= 0")));
    }
    Ok(())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
