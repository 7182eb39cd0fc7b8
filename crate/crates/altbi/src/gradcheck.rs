//! Hypergradient oracle suite: forward mode against central differences
//! and against reverse mode, and the closed-form Jacobians against
//! differences of the update map.

use altbi_core::benchmarks::random_initializers;
use altbi_core::hypergrad::{
    fd_hypergradient_oracle, fmd_hypergradient, jacobian_a, jacobian_b, outer_gradient_g, rmd_hypergradient,
};
use altbi_core::mu::update_w_penalized_row;
use altbi_core::{row_error, NonnegMatrix};

use crate::error::Result;

pub const FMD_FD_TOL: f64 = 1e-4;
pub const FMD_RMD_TOL: f64 = 1e-10;
pub const JACOBIAN_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub instances: usize,
    pub max_rank: usize,
    pub max_cols: usize,
    pub max_bunch: usize,
    pub seed: u64,
    /// Central-difference step for the hypergradient.
    pub fd_step: f64,
    /// Central-difference step for the Jacobians.
    pub jac_step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            instances: 100,
            max_rank: 5,
            max_cols: 10,
            max_bunch: 4,
            seed: 0,
            fd_step: 1e-5,
            jac_step: 1e-6,
        }
    }
}

/// Worst relative deviations seen over the suite.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradCheckReport {
    pub instances: usize,
    pub fmd_vs_fd: f64,
    pub fmd_vs_rmd: f64,
    pub jacobian_a: f64,
    pub jacobian_b: f64,
    pub outer_g: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.fmd_vs_fd <= FMD_FD_TOL
            && self.fmd_vs_rmd <= FMD_RMD_TOL
            && self.jacobian_a <= JACOBIAN_TOL
            && self.jacobian_b <= JACOBIAN_TOL
            && self.outer_g <= JACOBIAN_TOL
    }
}

/// Relative deviation with an absolute floor of `floor` on the scale.
fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

struct Instance {
    w: Vec<f64>,
    x: Vec<f64>,
    h: NonnegMatrix,
    lambda: f64,
    bunch: usize,
}

/// Instance `k` is built from uniform draws keyed by `seed + k`, so the
/// suite needs no generator beyond the initializer sampler.
fn instance(cfg: &GradCheckConfig, k: usize) -> Instance {
    let seed = cfg.seed.wrapping_add(k as u64);
    let (u, _) = random_initializers(1, 1, 8, seed);
    let pick = |v: f64, hi: usize| 1 + ((v * hi as f64) as usize).min(hi - 1);
    let r = pick(u.get(0, 0), cfg.max_rank);
    let m = pick(u.get(0, 1), cfg.max_cols);
    let bunch = pick(u.get(0, 2), cfg.max_bunch);
    let lambda = 0.1 + 1.9 * u.get(0, 3);
    let (w, h) = random_initializers(1, m, r, seed ^ 0x9e37_79b9_7f4a_7c15);
    let (x, _) = random_initializers(1, 1, m, seed ^ 0x6a09_e667_f3bc_c909);
    Instance {
        w: w.row(0).iter().map(|v| 0.1 + 1.9 * v).collect(),
        x: x.row(0).iter().map(|v| 0.1 + 2.9 * v).collect(),
        h: NonnegMatrix::from_fn(r, m, |a, b| 0.05 + 1.45 * h.get(a, b)).expect("positive entries"),
        lambda,
        bunch,
    }
}

pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rep = GradCheckReport {
        instances: cfg.instances,
        ..GradCheckReport::default()
    };
    for k in 0..cfg.instances {
        let p = instance(cfg, k);
        let fmd = fmd_hypergradient(&p.w, p.lambda, &p.x, &p.h, p.bunch)?.value;
        let fd = fd_hypergradient_oracle(&p.w, p.lambda, &p.x, &p.h, p.bunch, cfg.fd_step)?;
        let rmd = rmd_hypergradient(&p.w, p.lambda, &p.x, &p.h, p.bunch)?;
        rep.fmd_vs_fd = rep.fmd_vs_fd.max(rel(fmd, fd, 1e-12));
        rep.fmd_vs_rmd = rep.fmd_vs_rmd.max(rel(fmd, rmd, 1e-12));

        let step = cfg.jac_step;
        let r = p.w.len();
        let a = jacobian_a(&p.w, p.lambda, &p.x, &p.h);
        let g = outer_gradient_g(&p.w, &p.x, &p.h);
        for c in 0..r {
            let mut plus = p.w.clone();
            let mut minus = p.w.clone();
            plus[c] += step;
            minus[c] -= step;
            let fp = update_w_penalized_row(&plus, p.lambda, &p.x, &p.h);
            let fm = update_w_penalized_row(&minus, p.lambda, &p.x, &p.h);
            for k in 0..r {
                let fd = (fp[k] - fm[k]) / (2.0 * step);
                rep.jacobian_a = rep.jacobian_a.max(rel(a[k * r + c], fd, 1e-3));
            }
            let fd = (row_error(&plus, &p.x, &p.h) - row_error(&minus, &p.x, &p.h)) / (2.0 * step);
            rep.outer_g = rep.outer_g.max(rel(g[c], fd, 1.0));
        }
        let b = jacobian_b(&p.w, p.lambda, &p.x, &p.h);
        let fp = update_w_penalized_row(&p.w, p.lambda + step, &p.x, &p.h);
        let fm = update_w_penalized_row(&p.w, p.lambda - step, &p.x, &p.h);
        for k in 0..r {
            let fd = (fp[k] - fm[k]) / (2.0 * step);
            rep.jacobian_b = rep.jacobian_b.max(rel(b[k], fd, 1e-12));
        }
    }
    Ok(rep)
}
