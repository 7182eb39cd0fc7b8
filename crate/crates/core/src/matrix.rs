//! Dense, row-major, entrywise nonnegative matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{NmfError, Result};

/// A dense nonnegative matrix stored in row-major order.
///
/// Every entry is finite and `>= 0`; constructors reject anything else.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NonnegMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl NonnegMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(NmfError::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NmfError::InvalidEntry {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
                value: data[idx],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn<F>(rows: usize, cols: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(NmfError::ShapeMismatch {
                    op: "from_rows",
                    expected: (i, cols),
                    found: (i, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Caller guarantees the invariants; used on products and updates of
    /// nonnegative operands.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Replaces row `i`; the new values must be nonnegative and finite.
    pub fn set_row(&mut self, i: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.cols {
            return Err(NmfError::ShapeMismatch {
                op: "set_row",
                expected: (1, self.cols),
                found: (1, values.len()),
            });
        }
        if let Some(j) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NmfError::InvalidEntry {
                row: i,
                col: j,
                value: values[j],
            });
        }
        self.row_mut(i).copy_from_slice(values);
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self::from_vec_unchecked(self.cols, self.rows, data)
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(NmfError::ShapeMismatch {
                op: "matmul",
                expected: (self.cols, rhs.cols),
                found: rhs.shape(),
            });
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_vec_unchecked(self.rows, rhs.cols, out))
    }

    /// Largest entry (the ∞-norm of the entries, all being nonnegative).
    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Sum of all entries (the entrywise ℓ1 norm).
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Smallest entry, `+inf` for an empty matrix.
    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn ensure_strictly_positive(&self) -> Result<()> {
        match self.data.iter().position(|&v| v <= 0.0) {
            Some(idx) => Err(NmfError::NonPositiveInitializer {
                row: idx / self.cols,
                col: idx % self.cols,
            }),
            None => Ok(()),
        }
    }
}

/// `(W h)_j = Σ_k w_k H_kj` for one row `w` of `W`, written into `out`.
#[inline]
pub(crate) fn reconstruct_row(w: &[f64], h: &NonnegMatrix, out: &mut [f64]) {
    debug_assert_eq!(w.len(), h.rows());
    debug_assert_eq!(out.len(), h.cols());
    out.iter_mut().for_each(|o| *o = 0.0);
    for (k, &wk) in w.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        for (o, &hkj) in out.iter_mut().zip(h.row(k)) {
            *o += wk * hkj;
        }
    }
}

pub(crate) fn check_factor_shapes(
    op: &'static str,
    x: &NonnegMatrix,
    w: &NonnegMatrix,
    h: &NonnegMatrix,
) -> Result<()> {
    if w.rows() != x.rows() {
        return Err(NmfError::ShapeMismatch {
            op,
            expected: (x.rows(), h.rows()),
            found: w.shape(),
        });
    }
    if h.cols() != x.cols() || h.rows() != w.cols() {
        return Err(NmfError::ShapeMismatch {
            op,
            expected: (w.cols(), x.cols()),
            found: h.shape(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan() {
        assert!(matches!(
            NonnegMatrix::new(1, 2, vec![1.0, -0.5]),
            Err(NmfError::InvalidEntry { row: 0, col: 1, .. })
        ));
        assert!(NonnegMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(matches!(
            NonnegMatrix::new(2, 2, vec![1.0; 3]),
            Err(NmfError::DataLength { .. })
        ));
    }

    #[test]
    fn matmul_and_transpose() {
        let a = NonnegMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = a.transpose();
        assert_eq!(b.shape(), (3, 2));
        assert_eq!(b.get(2, 1), 6.0);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[14.0, 32.0, 32.0, 77.0]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn reconstruct_row_matches_matmul() {
        let w = NonnegMatrix::new(2, 2, vec![0.5, 1.0, 2.0, 0.0]).unwrap();
        let h = NonnegMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 0.5, 0.25, 0.0]).unwrap();
        let wh = w.matmul(&h).unwrap();
        let mut out = vec![0.0; 3];
        for i in 0..2 {
            reconstruct_row(w.row(i), &h, &mut out);
            assert_eq!(&out[..], wh.row(i));
        }
    }
}
