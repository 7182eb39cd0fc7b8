//! Small dense helpers that the generators and metrics need.

use alloc::vec::Vec;

use crate::math;
use crate::matrix::NonnegMatrix;

/// Numerical rank by Gaussian elimination with partial pivoting. Pivots
/// below `1e-10 · max|a_ij| · max(rows, cols)` count as zero.
pub(crate) fn numerical_rank(a: &NonnegMatrix) -> usize {
    let (rows, cols) = a.shape();
    let mut m: Vec<f64> = a.as_slice().to_vec();
    let scale = a.max_entry();
    if scale == 0.0 {
        return 0;
    }
    let tol = 1e-10 * scale * rows.max(cols) as f64;
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let (pivot, best) = (rank..rows)
            .map(|r| (r, m[r * cols + c].abs()))
            .fold((rank, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best <= tol {
            continue;
        }
        if pivot != rank {
            for j in 0..cols {
                m.swap(pivot * cols + j, rank * cols + j);
            }
        }
        let p = m[rank * cols + c];
        for r in rank + 1..rows {
            let factor = m[r * cols + c] / p;
            if factor != 0.0 {
                for j in c..cols {
                    m[r * cols + j] -= factor * m[rank * cols + j];
                }
            }
        }
        rank += 1;
    }
    rank
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Angle between two vectors in degrees; `0` if either is zero.
pub(crate) fn angle_degrees(a: &[f64], b: &[f64]) -> f64 {
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    // 2·atan2(|â - b̂|, |â + b̂|) stays accurate for nearly parallel vectors,
    // where acos of the cosine loses half the digits.
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    (2.0 * math::atan2(math::sqrt(diff), math::sqrt(sum))).to_degrees()
}
