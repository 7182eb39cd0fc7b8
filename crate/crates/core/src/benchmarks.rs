//! Seeded synthetic ground truths `Y = W_true · H_true`.
//!
//! All randomness comes from a `ChaCha8Rng` keyed by the benchmark's 64-bit seed,
//! so a given `BenchmarkSpec` yields the same bytes on every platform.
//!
//! * A: `H` uniform on `[0, 1)`, `W` standard normal clipped at zero.
//! * B: clipped sinusoids as the columns of `W`, sparse uniform `H`.
//! * C: smooth synthetic spectra (sums of Gaussian bumps) as the columns of
//!   `W`, sparse uniform `H`.
//! * D: user-supplied reflectance signatures as `W`, synthetic abundance
//!   maps as `H`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{NmfError, Result};
use crate::linalg::{angle_degrees, numerical_rank};
use crate::math;
use crate::matrix::NonnegMatrix;

const RANK_RETRIES: usize = 10;
const ANGLE_RETRIES: usize = 100;
/// Minimum pairwise angle between endmember / spectrum columns.
pub const MIN_ANGLE_DEGREES: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BenchmarkKind {
    A,
    B,
    C,
    D,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    /// Fraction of structurally zero entries in `H` (B and C only).
    #[cfg_attr(feature = "serde", serde(default))]
    pub alpha_h: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
    /// CSV of reflectance signatures, one band per row (D only).
    #[cfg_attr(feature = "serde", serde(default))]
    pub d_signals_path: Option<String>,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind, n: usize, m: usize, r: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            m,
            r,
            alpha_h: 0.0,
            seed,
            d_signals_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.r == 0 {
            return Err(NmfError::InvalidConfig(format!(
                "benchmark dimensions must be >= 1 (n={}, m={}, r={})",
                self.n, self.m, self.r
            )));
        }
        if self.r > self.n.min(self.m) {
            return Err(NmfError::InvalidConfig(format!(
                "rank r={} exceeds min(n, m)={}",
                self.r,
                self.n.min(self.m)
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha_h) {
            return Err(NmfError::InvalidConfig(format!("alpha_h = {} outside [0, 1]", self.alpha_h)));
        }
        if self.kind == BenchmarkKind::D && self.d_signals_path.is_none() {
            return Err(NmfError::InvalidConfig("benchmark D needs d_signals_path".into()));
        }
        Ok(())
    }
}

/// Noiseless ground truth with `y = w_true · h_true`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub w_true: NonnegMatrix,
    pub h_true: NonnegMatrix,
    pub y: NonnegMatrix,
}

impl GroundTruth {
    fn from_factors(w_true: NonnegMatrix, h_true: NonnegMatrix) -> Result<Self> {
        let y = w_true.matmul(&h_true)?;
        Ok(Self { w_true, h_true, y })
    }
}

/// Generates A, B or C. Benchmark D needs its signal matrix; use [`gen_d`].
pub fn generate(spec: &BenchmarkSpec) -> Result<GroundTruth> {
    spec.validate()?;
    match spec.kind {
        BenchmarkKind::A => gen_a(spec.n, spec.m, spec.r, spec.seed),
        BenchmarkKind::B => gen_b(spec.n, spec.m, spec.r, spec.alpha_h, spec.seed),
        BenchmarkKind::C => gen_c(spec.n, spec.m, spec.r, spec.alpha_h, spec.seed),
        BenchmarkKind::D => Err(NmfError::InvalidConfig(
            "benchmark D is generated from a signal matrix, see gen_d".into(),
        )),
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_dims(n: usize, m: usize, r: usize, alpha_h: f64) -> Result<()> {
    let mut spec = BenchmarkSpec::new(BenchmarkKind::A, n, m, r, 0);
    spec.alpha_h = alpha_h;
    spec.validate()
}

/// Draws with `draw` until the result has full rank `r`.
fn full_rank<F>(what: &'static str, r: usize, mut draw: F) -> Result<NonnegMatrix>
where
    F: FnMut() -> Result<NonnegMatrix>,
{
    for _ in 0..RANK_RETRIES {
        let candidate = draw()?;
        if numerical_rank(&candidate) == r {
            return Ok(candidate);
        }
    }
    Err(NmfError::RankDeficient {
        what,
        retries: RANK_RETRIES,
    })
}

fn uniform_h(rng: &mut ChaCha8Rng, r: usize, m: usize) -> Result<NonnegMatrix> {
    NonnegMatrix::from_fn(r, m, |_, _| rng.random::<f64>())
}

/// Uniform `H` with exactly `round(alpha_h · r · m)` entries set to zero at
/// uniformly chosen positions.
fn sparse_h(rng: &mut ChaCha8Rng, r: usize, m: usize, alpha_h: f64) -> Result<NonnegMatrix> {
    let total = r * m;
    let zeros = libm::round(alpha_h * total as f64) as usize;
    let mut data: Vec<f64> = (0..total).map(|_| rng.random::<f64>()).collect();
    for idx in index::sample(rng, total, zeros.min(total)).iter() {
        data[idx] = 0.0;
    }
    NonnegMatrix::new(r, m, data)
}

/// Benchmark A: `H ~ U[0, 1)`, `W = max(0, N(0, 1))`.
pub fn gen_a(n: usize, m: usize, r: usize, seed: u64) -> Result<GroundTruth> {
    check_dims(n, m, r, 0.0)?;
    let mut rng = rng_for(seed);
    let h = full_rank("H", r, || uniform_h(&mut rng, r, m))?;
    let w = full_rank("W", r, || {
        NonnegMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal).max(0.0))
    })?;
    GroundTruth::from_factors(w, h)
}

/// Benchmark B: `W_ik = max(0, sin(2π f_k i/n + φ_k))` with distinct seeded
/// frequencies in `[1.5, 12)` cycles and phases in `[0, 2π)`; `H` sparse
/// uniform.
pub fn gen_b(n: usize, m: usize, r: usize, alpha_h: f64, seed: u64) -> Result<GroundTruth> {
    check_dims(n, m, r, alpha_h)?;
    let mut rng = rng_for(seed);
    let w = full_rank("W", r, || {
        let mut freqs: Vec<f64> = Vec::with_capacity(r);
        while freqs.len() < r {
            let f = rng.random_range(1.5..12.0);
            if freqs.iter().all(|&g: &f64| (g - f).abs() > 0.25) {
                freqs.push(f);
            }
        }
        let phases: Vec<f64> = (0..r).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        NonnegMatrix::from_fn(n, r, |i, k| {
            math::sin(2.0 * PI * freqs[k] * i as f64 / n as f64 + phases[k]).max(0.0)
        })
    })?;
    let h = full_rank("H", r, || sparse_h(&mut rng, r, m, alpha_h))?;
    GroundTruth::from_factors(w, h)
}

/// Benchmark C: each column of `W` is a sum of 2 to 5 Gaussian bumps over
/// `[0, 1]` sampled at `n` points and max-normalized to 1; columns are
/// redrawn until every pair is more than 15 degrees apart. `H` as in B.
pub fn gen_c(n: usize, m: usize, r: usize, alpha_h: f64, seed: u64) -> Result<GroundTruth> {
    check_dims(n, m, r, alpha_h)?;
    let mut rng = rng_for(seed);
    let mut w = None;
    let mut worst = None;
    for _ in 0..ANGLE_RETRIES {
        let candidate = synthetic_spectra(&mut rng, n, r)?;
        match first_close_pair(&candidate, MIN_ANGLE_DEGREES) {
            None if numerical_rank(&candidate) == r => {
                w = Some(candidate);
                break;
            }
            None => {}
            Some(pair) => worst = Some(pair),
        }
    }
    let w = match (w, worst) {
        (Some(w), _) => w,
        (None, Some((a, b, degrees))) => {
            return Err(NmfError::AngleSeparation {
                a,
                b,
                degrees,
                min_degrees: MIN_ANGLE_DEGREES,
            })
        }
        (None, None) => {
            return Err(NmfError::RankDeficient {
                what: "W",
                retries: ANGLE_RETRIES,
            })
        }
    };
    let h = full_rank("H", r, || sparse_h(&mut rng, r, m, alpha_h))?;
    GroundTruth::from_factors(w, h)
}

fn synthetic_spectra(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Result<NonnegMatrix> {
    let grid = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(r);
    for _ in 0..r {
        let bumps = rng.random_range(2..=5);
        let params: Vec<(f64, f64, f64)> = (0..bumps)
            .map(|_| {
                (
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.02..0.1),
                    rng.random_range(0.3..1.0),
                )
            })
            .collect();
        let mut col: Vec<f64> = (0..n)
            .map(|i| {
                let t = grid(i);
                params
                    .iter()
                    .map(|&(c, s, a)| a * math::exp(-(t - c) * (t - c) / (2.0 * s * s)))
                    .sum()
            })
            .collect();
        let peak = col.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 {
            col.iter_mut().for_each(|v| *v /= peak);
        }
        cols.push(col);
    }
    NonnegMatrix::from_fn(n, r, |i, k| cols[k][i])
}

/// First column pair whose angle is at most `min_degrees`.
pub fn first_close_pair(w: &NonnegMatrix, min_degrees: f64) -> Option<(usize, usize, f64)> {
    let cols: Vec<Vec<f64>> = (0..w.cols()).map(|k| w.col(k)).collect();
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            let deg = angle_degrees(&cols[a], &cols[b]);
            if deg <= min_degrees {
                return Some((a, b, deg));
            }
        }
    }
    None
}

/// Benchmark D from a signal matrix (bands × signatures, values in `[0, 1]`).
///
/// `W` is the first `r` columns and must satisfy the 15 degree separation.
/// `H` holds abundance maps over a `√m × √m` grid when `m` is a perfect
/// square (a `1 × m` strip otherwise): each endmember gets a few Gaussian
/// blobs, every pixel is normalized to sum to one, and each endmember gets
/// at least one pure pixel.
pub fn gen_d(spec: &BenchmarkSpec, signals: &NonnegMatrix) -> Result<GroundTruth> {
    let (n, m, r) = (spec.n, spec.m, spec.r);
    check_dims(n, m, r, 0.0)?;
    if signals.rows() != n || signals.cols() < r {
        return Err(NmfError::ShapeMismatch {
            op: "gen_d",
            expected: (n, r),
            found: signals.shape(),
        });
    }
    if let Some(idx) = signals.as_slice().iter().position(|&v| v > 1.0) {
        return Err(NmfError::Domain(format!(
            "reflectance ({}, {}) = {} outside [0, 1]",
            idx / signals.cols(),
            idx % signals.cols(),
            signals.as_slice()[idx]
        )));
    }
    let w = NonnegMatrix::from_fn(n, r, |i, k| signals.get(i, k))?;
    if let Some((a, b, degrees)) = first_close_pair(&w, MIN_ANGLE_DEGREES) {
        return Err(NmfError::AngleSeparation {
            a,
            b,
            degrees,
            min_degrees: MIN_ANGLE_DEGREES,
        });
    }
    let mut rng = rng_for(spec.seed);
    let h = abundance_maps(&mut rng, r, m)?;
    GroundTruth::from_factors(w, h)
}

/// `(rows, cols)` of the pixel grid used for `m` pixels.
pub fn abundance_grid(m: usize) -> (usize, usize) {
    let side = libm::round(math::sqrt(m as f64)) as usize;
    if side * side == m {
        (side, side)
    } else {
        (1, m)
    }
}

fn abundance_maps(rng: &mut ChaCha8Rng, r: usize, m: usize) -> Result<NonnegMatrix> {
    let (gr, gc) = abundance_grid(m);
    let extent = gr.max(gc) as f64;
    let mut fields = vec![0.0; r * m];
    for k in 0..r {
        let blobs = rng.random_range(2..=4);
        for _ in 0..blobs {
            let cy = rng.random_range(0.0..gr as f64);
            let cx = rng.random_range(0.0..gc as f64);
            let sigma = extent * rng.random_range(0.08..0.25);
            let amp = rng.random_range(0.5..1.0);
            for p in 0..m {
                let (py, px) = ((p / gc) as f64, (p % gc) as f64);
                let d2 = (py - cy) * (py - cy) + (px - cx) * (px - cx);
                fields[k * m + p] += amp * math::exp(-d2 / (2.0 * sigma * sigma));
            }
        }
        // Background level so every pixel mixes every endmember a little.
        for p in 0..m {
            fields[k * m + p] += 0.01;
        }
    }
    for p in 0..m {
        let total: f64 = (0..r).map(|k| fields[k * m + p]).sum();
        for k in 0..r {
            fields[k * m + p] /= total;
        }
    }
    let mut taken = vec![false; m];
    for k in 0..r {
        let best = (0..m)
            .filter(|&p| !taken[p])
            .max_by(|&a, &b| fields[k * m + a].total_cmp(&fields[k * m + b]));
        if let Some(p) = best {
            taken[p] = true;
            for kk in 0..r {
                fields[kk * m + p] = if kk == k { 1.0 } else { 0.0 };
            }
        }
    }
    NonnegMatrix::new(r, m, fields)
}

/// Strictly positive initializers, entries uniform on `(0, 1]`.
pub fn random_initializers(n: usize, m: usize, r: usize, seed: u64) -> (NonnegMatrix, NonnegMatrix) {
    let mut rng = rng_for(seed);
    let mut draw = |rows, cols| {
        let data = (0..rows * cols).map(|_| 1.0 - rng.random::<f64>()).collect();
        NonnegMatrix::from_vec_unchecked(rows, cols, data)
    };
    let w0 = draw(n, r);
    let h0 = draw(r, m);
    (w0, h0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_fraction(a: &NonnegMatrix) -> f64 {
        let zeros = a.as_slice().iter().filter(|&&v| v == 0.0).count();
        zeros as f64 / a.as_slice().len().max(1) as f64
    }

    #[test]
    fn a_is_deterministic_and_exact() {
        let a = gen_a(60, 20, 3, 9).unwrap();
        assert_eq!(a, gen_a(60, 20, 3, 9).unwrap());
        assert_ne!(a, gen_a(60, 20, 3, 10).unwrap());
        assert_eq!(a.y, a.w_true.matmul(&a.h_true).unwrap());
        assert_eq!(numerical_rank(&a.y), 3);
    }

    #[test]
    fn a_has_about_half_zeros_in_w() {
        let a = gen_a(400, 10, 4, 1).unwrap();
        let z = zero_fraction(&a.w_true);
        assert!((0.45..=0.55).contains(&z), "zero fraction {z}");
    }

    #[test]
    fn b_columns_are_clipped_waves() {
        let b = gen_b(200, 50, 4, 0.0, 3).unwrap();
        assert_eq!(zero_fraction(&b.h_true), 0.0);
        for k in 0..4 {
            assert!(b.w_true.col(k).contains(&0.0));
            assert!(b.w_true.col(k).iter().all(|&v| v <= 1.0));
        }
    }

    #[test]
    fn b_realizes_alpha() {
        let b = gen_b(100, 300, 4, 0.1, 7).unwrap();
        let z = zero_fraction(&b.h_true);
        assert!((z - 0.1).abs() <= 0.02, "{z}");
    }

    #[test]
    fn c_spectra_are_separated_and_normalized() {
        let c = gen_c(300, 50, 5, 0.1, 2).unwrap();
        assert!(first_close_pair(&c.w_true, MIN_ANGLE_DEGREES).is_none());
        for k in 0..5 {
            let col = c.w_true.col(k);
            assert_eq!(col.iter().copied().fold(0.0, f64::max), 1.0);
        }
        assert_eq!(c, gen_c(300, 50, 5, 0.1, 2).unwrap());
    }

    #[test]
    fn d_abundances() {
        let signals = NonnegMatrix::from_fn(30, 3, |i, k| match k {
            0 => i as f64 / 29.0,
            1 => 1.0 - i as f64 / 29.0,
            _ => if i % 2 == 0 { 0.9 } else { 0.1 },
        })
        .unwrap();
        let mut spec = BenchmarkSpec::new(BenchmarkKind::D, 30, 49, 3, 5);
        spec.d_signals_path = Some("unused".into());
        let d = gen_d(&spec, &signals).unwrap();
        assert_eq!(d.h_true.shape(), (3, 49));
        for p in 0..49 {
            let s: f64 = (0..3).map(|k| d.h_true.get(k, p)).sum();
            assert!(s <= 1.0 + 1e-12);
        }
        for k in 0..3 {
            assert!((0..49).any(|p| d.h_true.get(k, p) == 1.0));
        }

        let dup = NonnegMatrix::from_fn(30, 2, |i, _| i as f64 / 29.0).unwrap();
        let spec2 = BenchmarkSpec { r: 2, ..spec };
        assert!(matches!(
            gen_d(&spec2, &dup),
            Err(NmfError::AngleSeparation { a: 0, b: 1, .. })
        ));
    }

    #[test]
    fn abundance_grid_shapes() {
        assert_eq!(abundance_grid(3025), (55, 55));
        assert_eq!(abundance_grid(50), (1, 50));
    }

    #[test]
    fn spec_validation() {
        assert!(BenchmarkSpec::new(BenchmarkKind::A, 5, 5, 6, 0).validate().is_err());
        assert!(BenchmarkSpec::new(BenchmarkKind::A, 0, 5, 1, 0).validate().is_err());
        let mut s = BenchmarkSpec::new(BenchmarkKind::B, 10, 10, 2, 0);
        s.alpha_h = 1.5;
        assert!(s.validate().is_err());
        assert!(BenchmarkSpec::new(BenchmarkKind::D, 10, 10, 2, 0).validate().is_err());
    }

    #[test]
    fn initializers_strictly_positive() {
        let (w, h) = random_initializers(20, 10, 3, 4);
        assert!(w.min_entry() > 0.0 && h.min_entry() > 0.0);
        assert!(w.max_entry() <= 1.0);
        assert_eq!((w, h), random_initializers(20, 10, 3, 4));
    }
}
