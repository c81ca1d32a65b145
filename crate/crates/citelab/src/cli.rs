//! Command dispatch for the `citelab` binary.
//!
//! Kernel syntax everywhere: `lognormal:<mu>,<sigma>`, `exponential:<rate>`,
//! `uniform:<horizon>`. Horizons are either `exhaust` or a time value.
//! `CITELAB_THREADS` caps the worker pool; all outputs are reproducible
//! byte-for-byte from (config, seed, version).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::fit::{fit_pooled, KernelKind};
use crate::io::{
    self, to_json_pretty, ArbitrationReport, Artifact, ReportMeta,
};
use crate::model::{
    ultimate_citations, AgingKernel, KernelVariant, SystemParams,
};
use crate::ode::{self, OdeVariant};
use crate::sim::{
    arbitrate, simulate_ensemble_on_grid, simulate_system, default_grid, FitnessSource, Horizon,
    SimConfig, SystemSimConfig,
};

#[derive(Debug, Parser)]
#[command(name = "citelab", version, about = "Citation-impact model laboratory")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    /// Attachment weight proportional to the bare citation count.
    Literal,
    /// Attachment weight proportional to count + m.
    #[value(name = "with-m", alias = "with-attractiveness")]
    WithM,
}

impl From<VariantArg> for KernelVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Literal => KernelVariant::Literal,
            VariantArg::WithM => KernelVariant::WithAttractiveness,
        }
    }
}

impl From<VariantArg> for OdeVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Literal => OdeVariant::Literal,
            VariantArg::WithM => OdeVariant::WithAttractiveness,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HorizonArg(pub Horizon);

impl FromStr for HorizonArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("exhaust") {
            return Ok(HorizonArg(Horizon::Exhaust));
        }
        let t: f64 = s
            .parse()
            .map_err(|_| format!("horizon must be a time or \"exhaust\", got {s:?}"))?;
        Ok(HorizonArg(Horizon::Time(t)))
    }
}

fn parse_kernel(s: &str) -> Result<AgingKernel, String> {
    AgingKernel::from_str(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKindArg {
    Lognormal,
    Exponential,
    Uniform,
}

impl From<KernelKindArg> for KernelKind {
    fn from(k: KernelKindArg) -> Self {
        match k {
            KernelKindArg::Lognormal => KernelKind::LogNormal,
            KernelKindArg::Exponential => KernelKind::Exponential,
            KernelKindArg::Uniform => KernelKind::Uniform,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output path; "-" writes to stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-paper ensemble: mean citation curve and final counts (CSV).
    Simulate {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 3)]
        m: u64,
        #[arg(long, value_parser = parse_kernel, default_value = "lognormal:0,1")]
        kernel: AgingKernel,
        #[arg(long, default_value = "exhaust")]
        horizon: HorizonArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long, default_value_t = 20)]
        grid_points: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Full growing-system run: all citation histories (CSV).
    System {
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 1.0)]
        big_a: f64,
        #[arg(long, default_value_t = 3)]
        m: u64,
        #[arg(long, default_value_t = 50)]
        n0: u64,
        #[arg(long)]
        t_end: f64,
        /// Constant fitness for every paper (exclusive with --eta-range).
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Uniformly sampled fitness "lo,hi".
        #[arg(long)]
        eta_range: Option<String>,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_parser = parse_kernel, default_value = "lognormal:0,1")]
        kernel: AgingKernel,
        /// References per arriving paper; defaults to m.
        #[arg(long)]
        refs: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Integrate a mean-field equation; trajectory CSV (dt, f, c_implied).
    Integrate {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_parser = parse_kernel, default_value = "lognormal:0,1")]
        kernel: AgingKernel,
        /// Defaults to the kernel-exhaustion age.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 3)]
        m: u64,
        #[arg(long, default_value_t = 513)]
        grid_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Verify the f = 1 fixed point of the literal-kernel equation (JSON).
    VerifyFixedPoint {
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_parser = parse_kernel, default_value = "lognormal:0,1")]
        kernel: AgingKernel,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 3)]
        m: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Maximum-likelihood fit of (lambda, kernel parameters) from histories
    /// (JSON).
    Fit {
        /// History file: .json, or CSV with header paper_id,pub_time,event_time.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        m: u64,
        #[arg(long, value_enum, default_value_t = KernelKindArg::Lognormal)]
        kernel_kind: KernelKindArg,
        /// Right-censoring time; defaults to the latest event.
        #[arg(long)]
        observation_end: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Closed-form ultimate citations m (e^lambda - 1).
    Predict {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 3)]
        m: u64,
    },
    /// Simulate both kernel readings and report which prediction each
    /// matches (markdown + JSON).
    Arbitrate {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 3)]
        m: u64,
        #[arg(long, value_parser = parse_kernel, default_value = "lognormal:0,1")]
        kernel: AgingKernel,
        #[arg(long, default_value = "exhaust")]
        horizon: HorizonArg,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report path ("-" for stdout).
        #[arg(long)]
        out_json: Option<PathBuf>,
        /// Markdown report path; stdout when neither output is given.
        #[arg(long)]
        out_md: Option<PathBuf>,
    },
}

/// Entry point used by `main`; parses `std::env::args`.
pub fn run() -> Result<()> {
    init_thread_pool()?;
    dispatch(RunConfig::parse())
}

fn init_thread_pool() -> Result<()> {
    if let Ok(threads) = std::env::var("CITELAB_THREADS") {
        let n: usize = threads
            .parse()
            .with_context(|| format!("CITELAB_THREADS must be a thread count, got {threads:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool already initialized")?;
    }
    Ok(())
}

fn write_output(path: &PathBuf, content: &[u8]) -> Result<()> {
    if path.as_os_str() == "-" {
        std::io::stdout().write_all(content)?;
        Ok(())
    } else {
        fs::write(path, content).with_context(|| format!("writing {}", path.display()))
    }
}

/// Output paths are checked before any computation runs, so a bad --out does
/// not burn a long simulation first.
fn validate_out(path: &Path) -> Result<()> {
    if path.as_os_str() == "-" {
        return Ok(());
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    Ok(())
}

fn out_paths(cfg: &Command) -> Vec<&PathBuf> {
    match cfg {
        Command::Simulate { out, .. }
        | Command::System { out, .. }
        | Command::Integrate { out, .. }
        | Command::VerifyFixedPoint { out, .. }
        | Command::Fit { out, .. } => vec![&out.out],
        Command::Predict { .. } => vec![],
        Command::Arbitrate { out_json, out_md, .. } => {
            out_json.iter().chain(out_md.iter()).collect()
        }
    }
}

/// Executes one parsed command, writing its artifacts.
pub fn dispatch(cfg: RunConfig) -> Result<()> {
    for path in out_paths(&cfg.command) {
        validate_out(path)?;
    }
    match cfg.command {
        Command::Simulate {
            variant,
            lambda,
            m,
            kernel,
            horizon,
            seed,
            replicas,
            grid_points,
            out,
        } => {
            if grid_points < 1 {
                bail!("--grid-points must be at least 1");
            }
            let sim = SimConfig::new(variant.into(), lambda, m, kernel, horizon.0, seed, replicas)?;
            let meta = ReportMeta::new(&sim, seed);
            let grid = default_grid(&kernel, horizon.0, grid_points);
            let stats = simulate_ensemble_on_grid(&sim, &grid)?;
            let mut buf = Vec::new();
            io::write_ensemble_csv(&mut buf, &stats, &meta)?;
            write_output(&out.out, &buf)
        }
        Command::System {
            beta,
            big_a,
            m,
            n0,
            t_end,
            eta,
            eta_range,
            variant,
            kernel,
            refs,
            seed,
            out,
        } => {
            let fitness_source = match eta_range {
                None => FitnessSource::Constant(eta),
                Some(range) => {
                    let (lo, hi) = range
                        .split_once(',')
                        .context("--eta-range expects \"lo,hi\"")?;
                    FitnessSource::SampledUniform {
                        lo: lo.trim().parse().context("bad eta-range lo")?,
                        hi: hi.trim().parse().context("bad eta-range hi")?,
                    }
                }
            };
            let cfg = SystemSimConfig {
                sys: SystemParams::new(beta, big_a, m, n0)?,
                t_end,
                fitness_source,
                variant: variant.into(),
                kernel,
                refs_per_paper: refs.unwrap_or(m),
                seed,
            };
            let meta = ReportMeta::new(&cfg, seed);
            let run = simulate_system(&cfg)?;
            let mut buf = Vec::new();
            io::write_system_csv(&mut buf, &run, &meta)?;
            write_output(&out.out, &buf)
        }
        Command::Integrate {
            variant,
            lambda,
            kernel,
            t_end,
            tol,
            m,
            grid_points,
            seed,
            out,
        } => {
            let t_end = t_end.unwrap_or_else(|| kernel.default_t_end());
            #[derive(Serialize)]
            struct Cfg<'a> {
                variant: OdeVariant,
                lambda: f64,
                kernel: &'a AgingKernel,
                t_end: f64,
                tol: f64,
                m: u64,
                grid_points: usize,
            }
            let variant: OdeVariant = variant.into();
            let meta = ReportMeta::new(
                &Cfg { variant, lambda, kernel: &kernel, t_end, tol, m, grid_points },
                seed,
            );
            if grid_points < 2 {
                bail!("--grid-points must be at least 2");
            }
            let grid: Vec<f64> = (0..grid_points)
                .map(|i| t_end * i as f64 / (grid_points - 1) as f64)
                .collect();
            let traj = ode::integrate_on_grid(variant, lambda, &kernel, &grid, tol)?;
            let mut buf = Vec::new();
            io::write_trajectory_csv(&mut buf, &traj, m, &meta)?;
            write_output(&out.out, &buf)
        }
        Command::VerifyFixedPoint { lambda, kernel, t_end, tol, m, seed, out } => {
            let t_end = t_end.unwrap_or_else(|| kernel.default_t_end());
            let report = ode::verify_fixed_point(lambda, &kernel, t_end, tol, m)?;
            let meta = ReportMeta::new(&report, seed);
            let artifact = Artifact { meta, report };
            write_output(&out.out, to_json_pretty(&artifact).as_bytes())
        }
        Command::Fit { input, m, kernel_kind, observation_end, seed, out } => {
            let histories = io::parse_history_path(&input)?;
            if histories.is_empty() {
                bail!("no histories in {}", input.display());
            }
            let last_event = histories
                .iter()
                .flat_map(|h| h.event_times().last().copied())
                .fold(f64::NEG_INFINITY, f64::max);
            let observation_end = observation_end.unwrap_or_else(|| {
                if last_event.is_finite() {
                    last_event
                } else {
                    histories.iter().map(|h| h.pub_time()).fold(0.0, f64::max)
                }
            });
            #[derive(Serialize)]
            struct Cfg<'a> {
                input: &'a str,
                m: u64,
                kernel_kind: KernelKind,
                observation_end: f64,
            }
            let kind: KernelKind = kernel_kind.into();
            let meta = ReportMeta::new(
                &Cfg {
                    input: &input.display().to_string(),
                    m,
                    kernel_kind: kind,
                    observation_end,
                },
                seed,
            );
            let result = fit_pooled(&histories, m, kind, observation_end)?;
            let artifact = Artifact { meta, report: result };
            write_output(&out.out, to_json_pretty(&artifact).as_bytes())
        }
        Command::Predict { lambda, m } => {
            if lambda < 0.0 {
                bail!("--lambda must be nonnegative");
            }
            println!("{}", ultimate_citations(lambda, m));
            Ok(())
        }
        Command::Arbitrate {
            lambda,
            m,
            kernel,
            horizon,
            replicas,
            seed,
            out_json,
            out_md,
        } => {
            let sim = SimConfig::new(
                KernelVariant::WithAttractiveness,
                lambda,
                m,
                kernel,
                horizon.0,
                seed,
                replicas,
            )?;
            let meta = ReportMeta::new(&sim, seed);
            let started = std::time::Instant::now();
            let verdict = arbitrate(&sim)?;
            eprintln!("arbitrate: {} replicas x 2 variants in {:.2?}", replicas, started.elapsed());
            let report = ArbitrationReport { rows: verdict.rows, meta };
            match (&out_json, &out_md) {
                (None, None) => write_output(&PathBuf::from("-"), report.to_markdown().as_bytes()),
                _ => {
                    if let Some(p) = &out_json {
                        write_output(p, report.to_json().as_bytes())?;
                    }
                    if let Some(p) = &out_md {
                        write_output(p, report.to_markdown().as_bytes())?;
                    }
                    Ok(())
                }
            }
        }
    }
}
