//! β-divergences and the scalar objectives built on them.
//!
//! Every reconstruction value and denominator is clamped below at [`EPS`]
//! before it is divided by or passed to a logarithm, and `0·log 0 = 0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{NmfError, Result};
use crate::math;
use crate::matrix::{check_factor_shapes, reconstruct_row, NonnegMatrix};

/// Lower clamp for reconstructions and denominators.
pub const EPS: f64 = 1e-16;

/// The β of a β-divergence.
///
/// `0` is Itakura-Saito, `1` generalized Kullback-Leibler, `2` half the
/// squared Euclidean distance. Values in `[0, 2]` are accepted by
/// [`Beta::new`]; the multiplicative H update is monotone only there.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "f64", into = "f64"))]
pub struct Beta(f64);

impl Beta {
    pub const ITAKURA_SAITO: Beta = Beta(0.0);
    pub const KL: Beta = Beta(1.0);
    pub const FROBENIUS: Beta = Beta(2.0);

    pub fn new(beta: f64) -> Result<Self> {
        if (0.0..=2.0).contains(&beta) {
            Ok(Beta(beta))
        } else {
            Err(NmfError::Domain(format!("beta = {beta} outside [0, 2]")))
        }
    }

    /// Any finite β. Outside `[0, 2]` the H update is still defined but its
    /// descent property is not guaranteed.
    pub fn unchecked(beta: f64) -> Result<Self> {
        if beta.is_finite() {
            Ok(Beta(beta))
        } else {
            Err(NmfError::Domain(format!("beta = {beta} is not finite")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_kl(self) -> bool {
        self.0 == 1.0
    }

    pub fn in_monotone_range(self) -> bool {
        (0.0..=2.0).contains(&self.0)
    }
}

impl Default for Beta {
    fn default() -> Self {
        Beta::KL
    }
}

impl TryFrom<f64> for Beta {
    type Error = NmfError;

    fn try_from(value: f64) -> Result<Self> {
        Beta::new(value)
    }
}

impl From<Beta> for f64 {
    fn from(beta: Beta) -> f64 {
        beta.0
    }
}

/// Per-row ℓ1 penalty weights (the diagonal of the penalty matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaVector(Vec<f64>);

impl LambdaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NmfError::Domain(format!(
                "lambda[{i}] = {} must be finite and nonnegative",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Elementwise divergence `d_β(x, y)` with `y` clamped at [`EPS`].
///
/// For β = 0 the data value is clamped as well, since `d_0(0, y)` is
/// infinite.
pub fn beta_div_elem(x: f64, y: f64, beta: Beta) -> f64 {
    raw_beta_div(x, y.max(EPS), beta)
}

/// Elementwise divergence without clamping; rejects `y <= 0`.
pub fn try_beta_div_elem(x: f64, y: f64, beta: Beta) -> Result<f64> {
    if !(y > 0.0) {
        return Err(NmfError::Domain(format!("divergence denominator y = {y} <= 0")));
    }
    if !(x >= 0.0) {
        return Err(NmfError::Domain(format!("divergence data x = {x} < 0")));
    }
    Ok(raw_beta_div(x, y, beta))
}

fn raw_beta_div(x: f64, y: f64, beta: Beta) -> f64 {
    let b = beta.value();
    if b == 1.0 {
        kl_elem(x, y)
    } else if b == 0.0 {
        let x = x.max(EPS);
        let ratio = x / y;
        if (0.5..=1.5).contains(&ratio) {
            let u = (x - y) / y;
            u - math::ln_1p(u)
        } else {
            ratio - math::ln(ratio) - 1.0
        }
    } else if b == 2.0 {
        let d = x - y;
        0.5 * d * d
    } else {
        (math::powf(x, b) + (b - 1.0) * math::powf(y, b) - b * x * math::powf(y, b - 1.0))
            / (b * (b - 1.0))
    }
}

/// Generalized KL term `x log(x/y) - x + y`, `y > 0` assumed.
///
/// Near `x = y` the term is evaluated through `log1p` of the relative gap so
/// that an exact fit gives a value at rounding level instead of `O(eps·x)`.
#[inline]
pub(crate) fn kl_elem(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        return y;
    }
    let t = (x - y) / y;
    if t.abs() <= 0.5 {
        x * math::ln_1p(t) - (x - y)
    } else {
        x * math::ln(x / y) - x + y
    }
}

/// `D_β(X, WH)`, the sum of elementwise divergences.
pub fn total_divergence(
    x: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    beta: Beta,
) -> Result<f64> {
    check_factor_shapes("total_divergence", x, w, h)?;
    let mut recon = vec![0.0; x.cols()];
    let mut total = 0.0;
    for i in 0..x.rows() {
        reconstruct_row(w.row(i), h, &mut recon);
        total += x
            .row(i)
            .iter()
            .zip(&recon)
            .map(|(&xij, &yij)| beta_div_elem(xij, yij, beta))
            .sum::<f64>();
    }
    Ok(total)
}

/// `D_1(X, WH) + Σ_i λ_i ‖W_i‖₁`.
pub fn penalized_objective(
    x: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    lambda: &LambdaVector,
) -> Result<f64> {
    objective_parts(x, w, h, lambda).map(|(response, penalty)| response + penalty)
}

/// `(D_1(X, WH), Σ_i λ_i ‖W_i‖₁)` computed in one pass; the pair the solvers
/// trace as response and objective.
pub(crate) fn objective_parts(
    x: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
    lambda: &LambdaVector,
) -> Result<(f64, f64)> {
    check_factor_shapes("penalized_objective", x, w, h)?;
    if lambda.len() != x.rows() {
        return Err(NmfError::ShapeMismatch {
            op: "penalized_objective",
            expected: (x.rows(), 1),
            found: (lambda.len(), 1),
        });
    }
    let mut recon = vec![0.0; x.cols()];
    let mut response = 0.0;
    let mut penalty = 0.0;
    for i in 0..x.rows() {
        let w_i = w.row(i);
        response += row_error_with(w_i, x.row(i), h, &mut recon);
        penalty += lambda.as_slice()[i] * w_i.iter().sum::<f64>();
    }
    Ok((response, penalty))
}

/// Inner (loss) objective of one row: `Σ_j d_1(x_j, (w H)_j) + λ ‖w‖₁`.
pub fn row_loss(w: &[f64], lambda: f64, x_row: &[f64], h: &NonnegMatrix) -> f64 {
    row_error(w, x_row, h) + lambda * w.iter().sum::<f64>()
}

/// Outer (error) objective of one row: `Σ_j d_1(x_j, (w H)_j)`.
pub fn row_error(w: &[f64], x_row: &[f64], h: &NonnegMatrix) -> f64 {
    assert_eq!(w.len(), h.rows(), "row_error: w length vs H rows");
    assert_eq!(x_row.len(), h.cols(), "row_error: x length vs H cols");
    let mut recon = vec![0.0; h.cols()];
    row_error_with(w, x_row, h, &mut recon)
}

pub(crate) fn row_error_with(w: &[f64], x_row: &[f64], h: &NonnegMatrix, recon: &mut [f64]) -> f64 {
    reconstruct_row(w, h, recon);
    x_row
        .iter()
        .zip(recon.iter())
        .map(|(&xj, &yj)| kl_elem(xj, yj.max(EPS)))
        .sum()
}
