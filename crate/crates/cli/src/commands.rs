//! Command implementations. Each returns a [`Report`] listing the files it read and
//! wrote, or a [`Failure`] that determines the exit code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use stabpoly::exec::Exec;
use stabpoly::mol::{self, ErrorNorm, Reference, SemidiscreteSystem};
use stabpoly::optimizer::{self, Mode, OptimizeConfig, Status};
use stabpoly::polynomial::{disk_polynomial_pe, StabilityPolynomial};
use stabpoly::rk::{self, BuildOptions, ShuOsherTableau};
use stabpoly::spectra::{self, Spectrum, SpectrumFormat};

use crate::{
    BurgersSpectrumArgs, ConstructArgs, ConvergeArgs, FvAdvectionArgs, IntegrateArgs, LoadArgs, ModeArg, NormArg,
    OptimizeArgs, RealLineArgs, ReferenceArg, SystemArg, SystemArgs, VerifyArgs,
};

/// Largest `|β|` accepted without a warning.
pub const BETA_WARNING: f64 = 10.0;

#[derive(Debug, Default)]
pub struct Report {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub status: String,
    pub config: serde_json::Value,
}

impl Report {
    fn ok(inputs: Vec<PathBuf>, outputs: Vec<PathBuf>) -> Self {
        Self { inputs, outputs, status: "ok".into(), config: serde_json::Value::Null }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0:#}")]
    Usage(anyhow::Error),
    #[error("{message}")]
    Infeasible { message: String, report: Box<Report> },
    #[error("{0}")]
    Construction(String),
    #[error("{message}")]
    Instability { message: String, report: Box<Report> },
    #[error("{0:#}")]
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Infeasible { .. } => 3,
            Failure::Construction(_) => 4,
            Failure::Instability { .. } => 5,
            Failure::Other(_) => 1,
        }
    }

    pub fn into_report(self) -> Report {
        let status = match &self {
            Failure::Usage(_) => "usage-error",
            Failure::Infeasible { .. } => "infeasible",
            Failure::Construction(_) => "construction-failed",
            Failure::Instability { .. } => "unstable",
            Failure::Other(_) => "error",
        };
        let mut report = match self {
            Failure::Infeasible { report, .. } | Failure::Instability { report, .. } => *report,
            _ => Report::default(),
        };
        report.status = status.into();
        report
    }
}

impl From<stabpoly::Error> for Failure {
    fn from(e: stabpoly::Error) -> Self {
        use stabpoly::Error as E;
        match e {
            E::Construction(m) => Failure::Construction(m),
            E::Diverged { .. } => Failure::Instability { message: e.to_string(), report: Box::default() },
            E::Io { .. }
            | E::Parse { .. }
            | E::Empty(_)
            | E::PositiveRealPart { .. }
            | E::InvalidArgument(_)
            | E::OutOfRange { .. }
            | E::AlphaTooLarge(_)
            | E::DegreeTooLarge { .. }
            | E::Format(_) => Failure::Usage(e.into()),
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Usage)
}

/// Writes `text` to `output`, or to stdout without one.
fn emit(text: &str, output: Option<&PathBuf>) -> Result<Vec<PathBuf>, Failure> {
    match output {
        Some(p) => {
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(Failure::Other)?;
            Ok(vec![p.clone()])
        }
        None => {
            print!("{text}");
            Ok(Vec::new())
        }
    }
}

fn finish_spectrum(
    s: Spectrum,
    reduce: bool,
    output: Option<&PathBuf>,
    inputs: Vec<PathBuf>,
) -> Result<Report, Failure> {
    let s = if reduce { spectra::reduce_to_upper(&s, s.default_dedup_tol()) } else { s };
    let outputs = emit(&s.to_csv(), output)?;
    eprintln!("eigenvalues: {}", s.len());
    Ok(Report::ok(inputs, outputs))
}

pub fn spectrum_fv_advection(a: &FvAdvectionArgs) -> Result<Report, Failure> {
    let s = spectra::generate_fv_advection_circle(a.cells, a.length, a.velocity)?;
    finish_spectrum(s, a.reduce, a.output.as_ref(), Vec::new())
}

pub fn spectrum_real_line(a: &RealLineArgs) -> Result<Report, Failure> {
    let s = spectra::generate_negative_real_line(a.points, a.extent)?;
    finish_spectrum(s, a.reduce, a.output.as_ref(), Vec::new())
}

pub fn spectrum_burgers(a: &BurgersSpectrumArgs) -> Result<Report, Failure> {
    let s = mol::burgers_frozen_spectrum(a.cells, a.speed)?;
    finish_spectrum(s, a.reduce, a.output.as_ref(), Vec::new())
}

pub fn spectrum_load(a: &LoadArgs) -> Result<Report, Failure> {
    read_input(&a.file)?;
    let s = spectra::load_spectrum(&a.file, SpectrumFormat::Csv)?;
    finish_spectrum(s, a.reduce, a.output.as_ref(), vec![a.file.clone()])
}

fn load_spectrum(path: &Path) -> Result<Spectrum, Failure> {
    read_input(path)?;
    Ok(spectra::load_spectrum(path, SpectrumFormat::Csv)?)
}

fn load_polynomial(path: &Path) -> Result<StabilityPolynomial, Failure> {
    Ok(StabilityPolynomial::parse_csv(&read_input(path)?)?)
}

fn load_tableau(path: &Path) -> Result<ShuOsherTableau, Failure> {
    Ok(rk::deserialize_tableau(&read_input(path)?)?)
}

pub fn optimize(a: &OptimizeArgs) -> Result<Report, Failure> {
    if !a.degree.is_multiple_of(2) {
        return Err(Failure::Usage(anyhow!(
            "degree {} is odd; only even degrees (one real pseudo-extremum plus pairs) are supported",
            a.degree
        )));
    }
    let spectrum = load_spectrum(&a.spectrum)?;
    let mut cfg = OptimizeConfig::new(a.degree, a.order);
    cfg.eps = a.eps;
    cfg.mode = match a.mode {
        ModeArg::Maximize => Mode::Maximize,
        ModeArg::Feasibility => Mode::Feasibility,
    };
    cfg.dt = a.dt;
    cfg.dt_ref = a.dt_ref;
    cfg.s_ref = a.s_ref;
    cfg.bisection_rtol = a.rtol;
    cfg.constraint_tol = a.constraint_tol;
    cfg.max_iterations = a.max_iterations;
    cfg.seed = a.seed;
    cfg.restarts = a.restarts;
    cfg.hull_plus_samples = a.hull_plus_samples;
    cfg.validate()?;

    let result = optimizer::find_max_dt(&cfg, &spectrum)?;
    let residuals = result.polynomial.order_residuals();
    let mut summary = String::new();
    let _ = writeln!(summary, "status: {:?}", result.status);
    let _ = writeln!(summary, "achieved_dt: {:.16e}", result.achieved_dt);
    let _ = writeln!(summary, "max_violation: {:.16e}", result.max_violation);
    let _ = writeln!(
        summary,
        "order_residuals: [{}]",
        residuals.iter().map(|r| format!("{r:.16e}")).collect::<Vec<_>>().join(", ")
    );
    let _ = writeln!(summary, "probes: {}", result.probes.len());
    let _ = writeln!(summary, "iterations: {}", result.iterations);
    eprint!("{summary}");

    let inputs = vec![a.spectrum.clone()];
    match result.status {
        Status::Optimal | Status::Feasible => {
            let outputs = emit(&result.polynomial.to_csv(), a.output.as_ref())?;
            Ok(Report::ok(inputs, outputs))
        }
        Status::Infeasible | Status::MaxIter => Err(Failure::Infeasible {
            message: format!(
                "no feasible polynomial found; best violation {:.16e} at dt {:.16e}",
                result.max_violation, result.achieved_dt
            ),
            report: Box::new(Report { inputs, ..Report::default() }),
        }),
    }
}

pub fn construct(a: &ConstructArgs) -> Result<Report, Failure> {
    let poly = load_polynomial(&a.pe)?;
    let opts = BuildOptions {
        allow_negative_beta: a.negative_beta,
        lebedev_grouping: !a.no_lebedev,
        grouping_threshold: a.grouping_threshold,
        seed: a.seed,
    };
    let tab = rk::build_tableau(&poly, &opts)?;
    let samples = rk::boundary_samples(&poly, rk::default_anchor(&poly), a.samples)?;
    let amp = rk::internal_stability(&tab, &samples);
    let truncation = poly.dt.powi(i32::from(poly.order) + 1);
    let max_beta = tab.max_abs_beta();

    eprintln!("stages: {}", tab.stages());
    eprintln!("submethods: {}", tab.grouping.len());
    eprintln!("m_tilde: {:.16e}", amp.m_tilde);
    eprintln!("dt^(p+1): {truncation:.16e}");
    eprintln!("max_abs_beta: {max_beta:.16e}");
    eprintln!("ssp_coefficient: {:.16e}", rk::ssp_coefficient(&tab));
    if amp.m_tilde * f64::EPSILON > truncation {
        eprintln!("warning: round-off amplification exceeds the truncation error scale");
    }
    if max_beta > BETA_WARNING {
        eprintln!("warning: largest |beta| is {max_beta:.3e} (above {BETA_WARNING}); try grouping or --negative-beta");
    }
    let outputs = emit(&rk::serialize_tableau(&tab), a.output.as_ref())?;
    Ok(Report::ok(vec![a.pe.clone()], outputs))
}

pub fn verify(a: &VerifyArgs) -> Result<Report, Failure> {
    let poly = load_polynomial(&a.pe)?;
    let spectrum = load_spectrum(&a.spectrum)?;
    let poly = match a.dt {
        Some(dt) => StabilityPolynomial::new(poly.pe.clone(), poly.order, poly.dt)?.rescaled(dt),
        None => poly,
    };
    let violation = optimizer::verify_stability(&poly, &spectrum);
    println!("dt: {:.16e}", poly.dt);
    println!("max_violation: {violation:.16e}");
    for (i, r) in poly.order_residuals().iter().enumerate() {
        println!("order_residual_{}: {r:.16e}", i + 2);
    }
    let inputs = vec![a.pe.clone(), a.spectrum.clone()];
    if violation > a.tol {
        return Err(Failure::Instability {
            message: format!("unstable: max |P| - 1 = {violation:.3e} exceeds {:.3e}", a.tol),
            report: Box::new(Report { inputs, ..Report::default() }),
        });
    }
    Ok(Report::ok(inputs, Vec::new()))
}

/// Largest characteristic speed of the built-in systems.
fn max_speed(s: &SystemArgs) -> f64 {
    match s.system {
        SystemArg::Advection => s.velocity,
        SystemArg::Burgers => 3.0,
    }
}

/// The system, its tableau and the timestep the tableau was designed for.
fn setup(s: &SystemArgs) -> Result<(SemidiscreteSystem, ShuOsherTableau, f64, Vec<PathBuf>), Failure> {
    let sys = match s.system {
        SystemArg::Advection => {
            let cells = s.cells.unwrap_or(200);
            let length = s.length;
            mol::advect_fv_system(cells, length, s.velocity, move |x| (2.0 * std::f64::consts::PI * x / length).sin())?
        }
        SystemArg::Burgers => mol::burgers_manufactured_system(s.cells.unwrap_or(256))?,
    };
    match &s.tableau {
        Some(p) => {
            let tab = load_tableau(p)?;
            let dt = tab.dt;
            Ok((sys, tab, dt, vec![p.clone()]))
        }
        None => {
            let degree = 16;
            let (poly, dt) = match s.system {
                SystemArg::Advection => {
                    // the disk polynomial is optimal for the upwind circle: stable up to 15 Δx / a
                    let dt = 0.99 * (degree - 1) as f64 * sys.cell_width() / max_speed(s);
                    (StabilityPolynomial::new(disk_polynomial_pe(degree, 2)?, 2, 1.0)?, dt)
                }
                SystemArg::Burgers => {
                    let spectrum = mol::burgers_frozen_spectrum(sys.dimension(), max_speed(s))?;
                    let result = optimizer::find_max_dt(&OptimizeConfig::new(degree, 2), &spectrum)?;
                    let dt = result.achieved_dt;
                    (result.polynomial, dt)
                }
            };
            let tab = rk::build_tableau(&poly, &BuildOptions::default())?;
            Ok((sys, tab, dt, Vec::new()))
        }
    }
}

pub fn integrate(a: &IntegrateArgs) -> Result<Report, Failure> {
    let (sys, tab, design_dt, inputs) = setup(&a.system)?;
    let dt = a.dt.unwrap_or(design_dt);
    let u0 = sys.initial_state().to_vec();
    let run = match mol::integrate(&sys, &tab, dt, 0.0, a.system.tf, &u0) {
        Ok(run) => run,
        Err(e @ stabpoly::Error::Diverged { .. }) => {
            return Err(Failure::Instability {
                message: e.to_string(),
                report: Box::new(Report { inputs, ..Report::default() }),
            })
        }
        Err(e) => return Err(e.into()),
    };
    let exact = sys.exact_solution(a.system.tf).expect("built-in systems have reference solutions");
    let dx = sys.cell_width();
    let linf = ErrorNorm::Linf.measure(&run.state, &exact, dx, sys.domain_length());
    let l1 = ErrorNorm::WeightedL1.measure(&run.state, &exact, dx, sys.domain_length());
    let tv = mol::total_variation_increase(&u0, &run.state)?;
    println!("system: {}", sys.label());
    println!("stages: {}", tab.stages());
    println!("dt: {dt:.16e}");
    println!("steps: {}", run.steps);
    println!("t_end: {:.16e}", run.t_end);
    println!("error_linf: {linf:.16e}");
    println!("error_weighted_l1: {l1:.16e}");
    println!("e_tv: {tv:.16e}");
    let outputs = match &a.output {
        Some(p) => {
            let mut csv = String::from("u\n");
            for u in &run.state {
                let _ = writeln!(csv, "{u:.16e}");
            }
            emit(&csv, Some(p))?
        }
        None => Vec::new(),
    };
    Ok(Report::ok(inputs, outputs))
}

pub fn converge(a: &ConvergeArgs) -> Result<Report, Failure> {
    if a.dts < 3 {
        return Err(Failure::Usage(anyhow!("--dts must be at least 3, got {}", a.dts)));
    }
    let (sys, tab, design_dt, inputs) = setup(&a.system)?;
    let dt_max = a.dt_max.unwrap_or(design_dt);
    let dts: Vec<f64> = (0..a.dts).map(|i| dt_max / 2f64.powi(i as i32)).collect();
    let norm = match a.norm {
        Some(NormArg::Linf) => ErrorNorm::Linf,
        Some(NormArg::WeightedL1) => ErrorNorm::WeightedL1,
        None => match a.system.system {
            SystemArg::Advection => ErrorNorm::Linf,
            SystemArg::Burgers => ErrorNorm::WeightedL1,
        },
    };
    let reference = match a.reference {
        ReferenceArg::Exact => Reference::Exact,
        ReferenceArg::Refined => Reference::Refined(16),
    };
    let study = mol::convergence_study(&sys, &tab, &dts, a.system.tf, norm, reference, Exec::Parallel)?;
    let outputs = emit(&study.to_csv(), a.output.as_ref())?;
    match study.slope {
        Some(s) => eprintln!("slope: {s:.16e}"),
        None => eprintln!("slope: undefined"),
    }
    let diverged = study.diverged();
    if !diverged.is_empty() {
        let list = diverged.iter().map(|d| format!("{d:.6e}")).collect::<Vec<_>>().join(", ");
        return Err(Failure::Instability {
            message: format!("unstable runs at dt = {list}"),
            report: Box::new(Report { inputs, outputs, ..Report::default() }),
        });
    }
    Ok(Report::ok(inputs, outputs))
}
