//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use altbi_core::benchmarks::{BenchmarkKind, BenchmarkSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{ground_truth, run_experiment, write_ground_truth, Campaign};
use crate::gradcheck::{run_gradcheck, GradCheckConfig, FMD_FD_TOL, FMD_RMD_TOL};
use crate::output::emit_csv;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "altbi", version, about = "Per-row penalized KL-NMF with hypergradient-tuned penalties")]
pub struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of mu, pmu, altbi, grid.
    #[arg(long, value_delimiter = ',')]
    pub algo: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    A,
    B,
    C,
    D,
}

impl From<KindArg> for BenchmarkKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::A => BenchmarkKind::A,
            KindArg::B => BenchmarkKind::B,
            KindArg::C => BenchmarkKind::C,
            KindArg::D => BenchmarkKind::D,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo campaign from a config file.
    Run(RunArgs),
    /// Check forward-mode hypergradients against finite differences and
    /// reverse mode.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
    /// Compare the P-MU λ grid with AltBi on the first run of a config.
    Sweep(RunArgs),
    /// Write a benchmark's X, W_true and H_true as CSV.
    Gen {
        #[arg(long, value_enum, ignore_case = true)]
        kind: KindArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        alpha_h: f64,
        /// Reflectance CSV for kind D.
        #[arg(long)]
        signals: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Parses `args` and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_with_overrides(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(list) = &args.algo {
        cfg.algorithms = list
            .iter()
            .map(|s| Algorithm::parse(s).ok_or_else(|| HarnessError::Config(format!("unknown algorithm {s:?}"))))
            .collect::<Result<_>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Run(args) => {
            let cfg = load_with_overrides(args)?;
            finish_campaign(&cfg, run_experiment(&cfg)?, quiet, out)
        }
        Command::Sweep(args) => {
            let mut cfg = load_with_overrides(args)?;
            if args.algo.is_none() {
                cfg.algorithms = vec![Algorithm::Grid, Algorithm::Altbi];
            }
            cfg.mc_runs = 1;
            finish_campaign(&cfg, run_experiment(&cfg)?, quiet, out)
        }
        Command::Gradcheck { seed, instances } => {
            let rep = run_gradcheck(&GradCheckConfig {
                seed: *seed,
                instances: *instances,
                ..GradCheckConfig::default()
            })?;
            if !quiet {
                let _ = writeln!(out, "instances            {}", rep.instances);
                let _ = writeln!(out, "fmd vs fd   (max rel) {:.3e}  (limit {FMD_FD_TOL:e})", rep.fmd_vs_fd);
                let _ = writeln!(out, "fmd vs rmd  (max rel) {:.3e}  (limit {FMD_RMD_TOL:e})", rep.fmd_vs_rmd);
                let _ = writeln!(out, "jacobian A  (max rel) {:.3e}", rep.jacobian_a);
                let _ = writeln!(out, "jacobian B  (max rel) {:.3e}", rep.jacobian_b);
                let _ = writeln!(out, "gradient G  (max rel) {:.3e}", rep.outer_g);
            }
            if rep.passed() {
                Ok(())
            } else {
                Err(HarnessError::GradCheck(format!("{rep:?}")))
            }
        }
        Command::Gen {
            kind,
            n,
            m,
            r,
            seed,
            alpha_h,
            signals,
            out: dir,
        } => {
            let mut spec = BenchmarkSpec::new((*kind).into(), *n, *m, *r, *seed);
            spec.alpha_h = *alpha_h;
            spec.d_signals_path = signals.as_ref().map(|p| p.to_string_lossy().into_owned());
            let mut cfg = ExperimentConfig::new(spec);
            cfg.algorithms = vec![Algorithm::Mu];
            cfg.validate()?;
            write_ground_truth(&ground_truth(&cfg)?, dir)?;
            if !quiet {
                let _ = writeln!(out, "wrote X.csv, W_true.csv, H_true.csv to {}", dir.display());
            }
            Ok(())
        }
    }
}

fn finish_campaign(cfg: &ExperimentConfig, campaign: Campaign, quiet: bool, out: &mut dyn Write) -> Result<()> {
    let written = emit_csv(&campaign, &cfg.output_dir, cfg.record_timings)?;
    if !quiet {
        let _ = writeln!(out, "{:<12} {:>5} {:>6} {:>10} {:>10} {:>8} {:>8}", "algorithm", "ok", "failed", "SIR(W)", "SIR(H)", "Sp(W)", "Sp(H)");
        for a in &campaign.aggregates {
            let mean = |s: &Option<altbi_core::metrics::Summary>| s.map_or(f64::NAN, |s| s.mean);
            let med = |s: &Option<altbi_core::metrics::Summary>| s.map_or(f64::NAN, |s| s.median);
            let _ = writeln!(
                out,
                "{:<12} {:>5} {:>6} {:>10.3} {:>10.3} {:>8.2} {:>8.2}",
                a.algorithm,
                a.completed,
                a.failed,
                mean(&a.sir_w),
                mean(&a.sir_h),
                med(&a.sparsity_w),
                med(&a.sparsity_h)
            );
        }
        for path in &written {
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    match campaign.all_failed().into_iter().next() {
        Some(algorithm) => Err(HarnessError::AllRunsFailed { algorithm }),
        None => Ok(()),
    }
}
