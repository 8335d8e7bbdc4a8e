//! `stabpoly`: spectrum → optimize → construct → verify → integrate pipeline.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::commands::{Failure, Report};
use crate::manifest::RunManifest;

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "STABPOLY_THREADS";

#[derive(Parser)]
#[command(name = "stabpoly", version, about = "Optimal stability polynomials and many-stage Runge-Kutta methods")]
struct Cli {
    /// TOML file; the table named after the command overrides its flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Manifest location (default: next to the primary output file).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or load eigenvalue spectra.
    Spectrum {
        #[command(subcommand)]
        action: SpectrumCommand,
    },
    /// Find the largest stable timestep for a spectrum.
    Optimize(OptimizeArgs),
    /// Build a Shu-Osher tableau from a pseudo-extrema file.
    Construct(ConstructArgs),
    /// Check a polynomial against a spectrum.
    Verify(VerifyArgs),
    /// Run one method-of-lines integration.
    Integrate(IntegrateArgs),
    /// Temporal convergence study over halved timesteps.
    Converge(ConvergeArgs),
}

#[derive(Subcommand)]
enum SpectrumCommand {
    /// Built-in generators.
    Gen {
        #[command(subcommand)]
        generator: Generator,
    },
    /// Read a `re,im` CSV file.
    Load(LoadArgs),
}

#[derive(Subcommand)]
enum Generator {
    /// Upwind finite volumes for linear advection (a circle in the left half plane).
    FvAdvection(FvAdvectionArgs),
    /// Equally spaced points on the negative real axis.
    RealLine(RealLineArgs),
    /// The Burgers scheme linearized about a constant speed.
    Burgers(BurgersSpectrumArgs),
}

#[derive(Args, Serialize, Deserialize)]
pub struct FvAdvectionArgs {
    #[arg(long)]
    pub cells: usize,
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    #[arg(long, default_value_t = 1.0)]
    pub velocity: f64,
    /// Keep one representative per conjugate pair.
    #[arg(long)]
    pub reduce: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
pub struct RealLineArgs {
    #[arg(long)]
    pub points: usize,
    #[arg(long)]
    pub extent: f64,
    #[arg(long)]
    pub reduce: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
pub struct BurgersSpectrumArgs {
    #[arg(long, default_value_t = 256)]
    pub cells: usize,
    #[arg(long, default_value_t = 3.0)]
    pub speed: f64,
    #[arg(long)]
    pub reduce: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
pub struct LoadArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub reduce: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Maximize,
    Feasibility,
}

#[derive(Args, Serialize, Deserialize)]
pub struct OptimizeArgs {
    /// Spectrum CSV (`re,im` rows).
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Polynomial degree (number of stages); must be even.
    #[arg(long)]
    pub degree: usize,
    #[arg(long, default_value_t = 2)]
    pub order: u8,
    #[arg(long, value_enum, default_value_t = ModeArg::Maximize)]
    pub mode: ModeArg,
    /// Timestep of a feasibility probe, or the first probe when maximizing.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Reference timestep, scaled by degree / s-ref.
    #[arg(long, requires = "s_ref")]
    pub dt_ref: Option<f64>,
    #[arg(long, requires = "dt_ref")]
    pub s_ref: Option<usize>,
    /// Half-width of the imaginary corrections relative to the hull height.
    #[arg(long, default_value_t = stabpoly::optimizer::DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-14)]
    pub constraint_tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    /// Constrain only hull vertices plus this many interior eigenvalues.
    #[arg(long)]
    pub hull_plus_samples: Option<usize>,
    /// Pseudo-extrema CSV output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
pub struct ConstructArgs {
    /// Pseudo-extrema CSV written by `optimize`.
    #[arg(long)]
    pub pe: PathBuf,
    /// Allow negative β entries in the two-stage submethods.
    #[arg(long)]
    pub negative_beta: bool,
    /// Group pairs close to the imaginary axis with far-left pairs (default).
    #[arg(long, conflicts_with = "no_lebedev")]
    pub lebedev: bool,
    #[arg(long)]
    pub no_lebedev: bool,
    /// Pairs with a real part above this value are grouped.
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub grouping_threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stability-boundary samples for the amplification estimate.
    #[arg(long, default_value_t = stabpoly::rk::BOUNDARY_SAMPLES)]
    pub samples: usize,
    /// Tableau JSON output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[arg(long)]
    pub pe: PathBuf,
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Timestep to check (default: the one stored with the polynomial).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Largest accepted `max |P| − 1`.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemArg {
    /// Upwind finite volumes for `u_t + a u_x = 0`, exact ODE reference.
    Advection,
    /// Fifth-order upwind finite volumes with a Godunov flux for Burgers' equation plus a manufactured source.
    Burgers,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    Linf,
    WeightedL1,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceArg {
    Exact,
    Refined,
}

#[derive(Args, Serialize, Deserialize, Clone)]
pub struct SystemArgs {
    #[arg(long, value_enum)]
    pub system: SystemArg,
    /// Tableau JSON (default: a 16-stage second-order method, the disk polynomial
    /// for advection and one optimized for the frozen Burgers spectrum otherwise).
    #[arg(long)]
    pub tableau: Option<PathBuf>,
    /// Cells (default 200 for advection, 256 for Burgers).
    #[arg(long)]
    pub cells: Option<usize>,
    /// Advection domain length.
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
    /// Advection velocity.
    #[arg(long, default_value_t = 1.0)]
    pub velocity: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tf: f64,
}

#[derive(Args, Serialize, Deserialize)]
pub struct IntegrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub system: SystemArgs,
    /// Timestep (default: the tableau's design timestep).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final state CSV.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
pub struct ConvergeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub system: SystemArgs,
    /// Number of timesteps, each half the previous one.
    #[arg(long, default_value_t = 5)]
    pub dts: usize,
    /// Largest timestep (default: the tableau's design timestep).
    #[arg(long)]
    pub dt_max: Option<f64>,
    /// Error norm (default: L∞ for advection, weighted L1 for Burgers).
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    #[arg(long, value_enum, default_value_t = ReferenceArg::Exact)]
    pub reference: ReferenceArg,
    /// `dt,error,steps` CSV output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| Failure::Usage(anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Other(e.into()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<Report, Failure> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(p) => Some(config::load(p).map_err(Failure::Usage)?),
        None => None,
    };
    let cfg = cfg.as_ref();
    macro_rules! run {
        ($args:expr, $path:expr, $f:path) => {{
            let (args, snapshot) = config::overlay($args, cfg, $path).map_err(Failure::Usage)?;
            let mut report = $f(&args)?;
            report.config = snapshot;
            Ok(report)
        }};
    }
    match &cli.command {
        Command::Spectrum { action } => match action {
            SpectrumCommand::Gen { generator: Generator::FvAdvection(a) } => {
                run!(clone_args(a)?, &["spectrum", "gen", "fv-advection"], commands::spectrum_fv_advection)
            }
            SpectrumCommand::Gen { generator: Generator::RealLine(a) } => {
                run!(clone_args(a)?, &["spectrum", "gen", "real-line"], commands::spectrum_real_line)
            }
            SpectrumCommand::Gen { generator: Generator::Burgers(a) } => {
                run!(clone_args(a)?, &["spectrum", "gen", "burgers"], commands::spectrum_burgers)
            }
            SpectrumCommand::Load(a) => run!(clone_args(a)?, &["spectrum", "load"], commands::spectrum_load),
        },
        Command::Optimize(a) => run!(clone_args(a)?, &["optimize"], commands::optimize),
        Command::Construct(a) => run!(clone_args(a)?, &["construct"], commands::construct),
        Command::Verify(a) => run!(clone_args(a)?, &["verify"], commands::verify),
        Command::Integrate(a) => run!(clone_args(a)?, &["integrate"], commands::integrate),
        Command::Converge(a) => run!(clone_args(a)?, &["converge"], commands::converge),
    }
}

fn clone_args<T: Serialize + serde::de::DeserializeOwned>(a: &T) -> Result<T, Failure> {
    serde_json::from_value(serde_json::to_value(a).map_err(|e| Failure::Other(e.into()))?)
        .map_err(|e| Failure::Other(e.into()))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Spectrum { action: SpectrumCommand::Gen { generator: Generator::FvAdvection(_) } } => {
            "spectrum gen fv-advection"
        }
        Command::Spectrum { action: SpectrumCommand::Gen { generator: Generator::RealLine(_) } } => {
            "spectrum gen real-line"
        }
        Command::Spectrum { action: SpectrumCommand::Gen { generator: Generator::Burgers(_) } } => {
            "spectrum gen burgers"
        }
        Command::Spectrum { action: SpectrumCommand::Load(_) } => "spectrum load",
        Command::Optimize(_) => "optimize",
        Command::Construct(_) => "construct",
        Command::Verify(_) => "verify",
        Command::Integrate(_) => "integrate",
        Command::Converge(_) => "converge",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = dispatch(&cli);
    let (report, code, status) = match result {
        Ok(r) => {
            let status = r.status.clone();
            (r, 0u8, status)
        }
        Err(failure) => {
            eprintln!("error: {failure}");
            let code = failure.exit_code();
            let report = failure.into_report();
            let status = report.status.clone();
            (report, code, status)
        }
    };
    let manifest_path = cli.manifest.clone().or_else(|| report.outputs.first().map(|p| manifest::default_path(p)));
    if let Some(path) = manifest_path {
        let digests = |paths: &[PathBuf]| -> Vec<manifest::FileDigest> {
            paths.iter().filter_map(|p| manifest::FileDigest::of(p).ok()).collect()
        };
        let m = RunManifest {
            command: command_name(&cli.command).to_string(),
            argv: std::env::args().collect(),
            config: report.config.clone(),
            inputs: digests(&report.inputs),
            outputs: digests(&report.outputs),
            wall_time_seconds: start.elapsed().as_secs_f64(),
            status,
            exit_code: code,
        };
        if let Err(e) = m.write(&path) {
            eprintln!("error: {e:#}");
            if code == 0 {
                return ExitCode::from(1);
            }
        }
    }
    ExitCode::from(code)
}
