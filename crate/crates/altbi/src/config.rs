//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use altbi_core::benchmarks::BenchmarkSpec;
use altbi_core::metrics::DEFAULT_SPARSITY_TOL;
use altbi_core::{AltBiConfig, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mu,
    Pmu,
    Altbi,
    /// One P-MU run per value of `grid`.
    Grid,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mu => "mu",
            Self::Pmu => "pmu",
            Self::Altbi => "altbi",
            Self::Grid => "grid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mu" => Some(Self::Mu),
            "pmu" | "p-mu" => Some(Self::Pmu),
            "altbi" => Some(Self::Altbi),
            "grid" => Some(Self::Grid),
            _ => None,
        }
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Mu, Algorithm::Pmu, Algorithm::Altbi]
}

fn default_mc_runs() -> usize {
    30
}

fn default_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

fn default_sparsity_tol() -> f64 {
    DEFAULT_SPARSITY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkSpec,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_mc_runs")]
    pub mc_runs: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub altbi: AltBiConfig,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Run `k` draws its initializers from seed `base_seed + k`.
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_sparsity_tol")]
    pub sparsity_tol: f64,
    /// Also write `timings.csv` with wall-clock seconds per run.
    #[serde(default)]
    pub record_timings: bool,
}

impl ExperimentConfig {
    /// A configuration with every optional field at its default.
    pub fn new(benchmark: BenchmarkSpec) -> Self {
        Self {
            benchmark,
            algorithms: default_algorithms(),
            mc_runs: default_mc_runs(),
            solver: SolverConfig::default(),
            altbi: AltBiConfig::default(),
            grid: default_grid(),
            output_dir: default_output_dir(),
            base_seed: 0,
            workers: default_workers(),
            sparsity_tol: default_sparsity_tol(),
            record_timings: false,
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|source| HarnessError::ConfigParse {
            path: origin.into(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::ConfigRead {
            path: path.into(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        // A relative signals path is taken relative to the config file.
        if let (Some(p), Some(dir)) = (&cfg.benchmark.d_signals_path, path.parent()) {
            let p = Path::new(p);
            if p.is_relative() {
                cfg.benchmark.d_signals_path = Some(dir.join(p).to_string_lossy().into_owned());
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.mc_runs == 0 {
            return bad("mc_runs must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms is empty".into());
        }
        if self.algorithms.contains(&Algorithm::Grid) {
            if self.grid.is_empty() {
                return bad("algorithm grid needs a nonempty grid".into());
            }
            if let Some(v) = self.grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return bad(format!("grid value {v} must be finite and >= 0"));
            }
        }
        if !(self.sparsity_tol >= 0.0) {
            return bad(format!("sparsity_tol = {} must be >= 0", self.sparsity_tol));
        }
        self.benchmark.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.altbi.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Algorithms in a fixed order with duplicates removed.
    pub fn algorithm_set(&self) -> Vec<Algorithm> {
        let mut algs = self.algorithms.clone();
        algs.sort();
        algs.dedup();
        algs
    }

    pub fn seed_for_run(&self, run_id: usize) -> u64 {
        self.base_seed.wrapping_add(run_id as u64)
    }
}
