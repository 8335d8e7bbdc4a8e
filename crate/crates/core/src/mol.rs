//! Method-of-lines harness: periodic 1-D semidiscretizations, fixed-step time
//! marching with a Shu-Osher tableau, and temporal convergence studies.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::FftPlanner;

use crate::exec::Exec;
use crate::rk::ShuOsherTableau;
use crate::spectra::{Spectrum, SpectrumSource};
use crate::{Complex64, Error, Result};

/// `F(t, u)` written into the output slice.
pub type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
/// Reference solution sampled on the grid.
pub type ExactFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// `U'(t) = F(t, U(t))` on a uniform periodic grid.
#[derive(Clone)]
pub struct SemidiscreteSystem {
    label: String,
    n: usize,
    domain_length: f64,
    rhs: Arc<RhsFn>,
    exact: Option<Arc<ExactFn>>,
    initial: Vec<f64>,
}

impl std::fmt::Debug for SemidiscreteSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemidiscreteSystem")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("domain_length", &self.domain_length)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl SemidiscreteSystem {
    pub fn new(
        label: impl Into<String>,
        initial: Vec<f64>,
        domain_length: f64,
        rhs: Arc<RhsFn>,
        exact: Option<Arc<ExactFn>>,
    ) -> Self {
        Self { label: label.into(), n: initial.len(), domain_length, rhs, exact, initial }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn cell_width(&self) -> f64 {
        self.domain_length / self.n as f64
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial
    }

    pub fn rhs(&self, t: f64, u: &[f64], out: &mut [f64]) {
        (self.rhs)(t, u, out)
    }

    pub fn has_exact_solution(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact_solution(&self, t: f64) -> Option<Vec<f64>> {
        self.exact.as_ref().map(|e| e(t))
    }
}

/// Cell centres `x_i = (i + ½) Δx`.
fn centres(cells: usize, length: f64) -> Vec<f64> {
    let dx = length / cells as f64;
    (0..cells).map(|i| (i as f64 + 0.5) * dx).collect()
}

/// Periodic first-order upwind finite volumes for `u_t + a u_x = 0`:
/// `u_i' = −(a/Δx)(u_i − u_{i−1})`, initial data sampled at cell centres.
///
/// The reference solution is the exact solution of this circulant ODE system,
/// obtained by propagating discrete Fourier modes with `exp(λ_k t)`, so errors
/// against it are purely temporal.
pub fn advect_fv_system(
    cells: usize,
    domain_length: f64,
    velocity: f64,
    initial_profile: impl Fn(f64) -> f64,
) -> Result<SemidiscreteSystem> {
    if cells < 4 {
        return Err(Error::InvalidArgument(format!("advection needs at least 4 cells, got {cells}")));
    }
    if !(domain_length > 0.0 && velocity > 0.0) {
        return Err(Error::InvalidArgument("domain length and velocity must be positive".into()));
    }
    let rate = velocity * cells as f64 / domain_length;
    let u0: Vec<f64> = centres(cells, domain_length).into_iter().map(initial_profile).collect();

    let rhs = move |_t: f64, u: &[f64], out: &mut [f64]| {
        let n = u.len();
        out[0] = -rate * (u[0] - u[n - 1]);
        for i in 1..n {
            out[i] = -rate * (u[i] - u[i - 1]);
        }
    };

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(cells);
    let inverse = planner.plan_fft_inverse(cells);
    let mut modes: Vec<Complex64> = u0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    forward.process(&mut modes);
    let lambdas: Vec<Complex64> = (0..cells)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / cells as f64;
            -rate * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -theta))
        })
        .collect();
    let exact = move |t: f64| {
        let mut buf: Vec<Complex64> = modes.iter().zip(&lambdas).map(|(m, l)| m * (l * t).exp()).collect();
        inverse.process(&mut buf);
        buf.iter().map(|c| c.re / cells as f64).collect()
    };

    Ok(SemidiscreteSystem::new(
        format!("advection cells={cells} length={domain_length} velocity={velocity}"),
        u0,
        domain_length,
        Arc::new(rhs),
        Some(Arc::new(exact)),
    ))
}

/// Exact Godunov flux for `f(u) = u²/2`.
pub fn godunov_flux(left: f64, right: f64) -> f64 {
    let f = |u: f64| 0.5 * u * u;
    f(left.max(0.0)).max(f(right.min(0.0)))
}

/// Manufactured solution `u(t, x) = 2 + sin(2π(x − t))`.
pub fn burgers_exact(t: f64, x: f64) -> f64 {
    2.0 + (2.0 * PI * (x - t)).sin()
}

/// Source that makes [`burgers_exact`] solve `u_t + (u²/2)_x = s`.
pub fn burgers_source(t: f64, x: f64) -> f64 {
    let phase = 2.0 * PI * (x - t);
    2.0 * PI * phase.cos() * (1.0 + phase.sin())
}

fn sinc(a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else {
        a.sin() / a
    }
}

/// Mean of [`burgers_exact`] over the cell of width `dx` centred at `x`.
pub fn burgers_exact_average(t: f64, x: f64, dx: f64) -> f64 {
    2.0 + (2.0 * PI * (x - t)).sin() * sinc(PI * dx)
}

/// Mean of [`burgers_source`] over the cell of width `dx` centred at `x`, using
/// `s = 2π cos φ + π sin 2φ`.
pub fn burgers_source_average(t: f64, x: f64, dx: f64) -> f64 {
    let phase = 2.0 * PI * (x - t);
    2.0 * PI * phase.cos() * sinc(PI * dx) + PI * (2.0 * phase).sin() * sinc(2.0 * PI * dx)
}

/// Left state at face `i + ½` from the five averages `u_{i−2} … u_{i+2}`
/// (linear fifth-order upwind-biased reconstruction).
fn reconstruct_left(u: [f64; 5]) -> f64 {
    (2.0 * u[0] - 13.0 * u[1] + 47.0 * u[2] + 27.0 * u[3] - 3.0 * u[4]) / 60.0
}

/// Periodic finite volumes for Burgers' equation on `[0, 1]` with the manufactured
/// source. Face states come from an unlimited fifth-order upwind-biased
/// reconstruction on either side and are joined by the exact Godunov flux. State,
/// source and reference solution are exact cell averages, so the spatial error is
/// `O(Δx⁵)` and far below the temporal error at practical timesteps.
pub fn burgers_manufactured_system(cells: usize) -> Result<SemidiscreteSystem> {
    if cells < 8 {
        return Err(Error::InvalidArgument(format!("Burgers needs at least 8 cells, got {cells}")));
    }
    let dx = 1.0 / cells as f64;
    let x = centres(cells, 1.0);
    let u0: Vec<f64> = x.iter().map(|&x| burgers_exact_average(0.0, x, dx)).collect();

    let xs = x.clone();
    let rhs = move |t: f64, u: &[f64], out: &mut [f64]| {
        let n = u.len();
        let at = |i: usize, k: isize| u[(i as isize + k).rem_euclid(n as isize) as usize];
        // flux through face i + ½
        let face = |i: usize| {
            let left = reconstruct_left([at(i, -2), at(i, -1), at(i, 0), at(i, 1), at(i, 2)]);
            let right = reconstruct_left([at(i, 3), at(i, 2), at(i, 1), at(i, 0), at(i, -1)]);
            godunov_flux(left, right)
        };
        let mut west = face(n - 1);
        for i in 0..n {
            let east = face(i);
            out[i] = -(east - west) / dx + burgers_source_average(t, xs[i], dx);
            west = east;
        }
    };
    let exact = move |t: f64| x.iter().map(|&x| burgers_exact_average(t, x, dx)).collect();

    Ok(SemidiscreteSystem::new(
        format!("burgers-manufactured cells={cells}"),
        u0,
        1.0,
        Arc::new(rhs),
        Some(Arc::new(exact)),
    ))
}

/// Spectrum of the Burgers scheme linearized about a constant state `speed > 0`:
/// `λ_k = −(speed/Δx) L(θ_k)(1 − e^{−iθ_k})`, where `L` is the symbol of the
/// left-state reconstruction. With `speed = max u` it bounds the spectra along
/// the manufactured solution.
pub fn burgers_frozen_spectrum(cells: usize, speed: f64) -> Result<Spectrum> {
    if cells < 8 || !(speed > 0.0) {
        return Err(Error::InvalidArgument(format!("need cells ≥ 8 and speed > 0 (got {cells}, {speed})")));
    }
    let rate = speed * cells as f64;
    let eigenvalues = (0..cells)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / cells as f64;
            let e = |m: f64| Complex64::from_polar(1.0, m * theta);
            let symbol = (2.0 * e(-2.0) - 13.0 * e(-1.0) + 47.0 * e(0.0) + 27.0 * e(1.0) - 3.0 * e(2.0)) / 60.0;
            let z = -rate * symbol * (e(0.0) - e(-1.0));
            // the real part is −(speed/Δx)(1 − cos θ)³/7.5 ≤ 0; clear round-off
            Complex64::new(z.re.min(0.0), z.im)
        })
        .collect();
    Spectrum::new(eigenvalues, format!("burgers-frozen cells={cells} speed={speed}"), SpectrumSource::Generator)
}

/// Final state of a fixed-step run.
#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub state: Vec<f64>,
    pub steps: usize,
    pub t_end: f64,
}

/// One step of size `dt` from `(t, u)` with the modified Shu-Osher recursion.
/// `y` and `f` are scratch buffers of `S` stage vectors each.
fn step(
    sys: &SemidiscreteSystem,
    tab: &ShuOsherTableau,
    t: f64,
    dt: f64,
    u: &mut [f64],
    y: &mut [Vec<f64>],
    f: &mut [Vec<f64>],
) {
    let s = tab.stages();
    let c = tab.c();
    for k in 0..=s {
        let mut next = vec![0.0; u.len()];
        let vk = tab.v()[k];
        if vk != 0.0 {
            next.iter_mut().zip(u.iter()).for_each(|(n, x)| *n = vk * x);
        }
        for e in tab.row(k) {
            if e.alpha != 0.0 {
                next.iter_mut().zip(&y[e.col]).for_each(|(n, x)| *n += e.alpha * x);
            }
            if e.beta != 0.0 {
                let w = dt * e.beta;
                next.iter_mut().zip(&f[e.col]).for_each(|(n, x)| *n += w * x);
            }
        }
        if k == s {
            u.copy_from_slice(&next);
        } else {
            sys.rhs(t + c[k] * dt, &next, &mut f[k]);
            y[k] = next;
        }
    }
}

/// Marches from `t0` to `tf` with constant `dt`, shortening only the last step so
/// that the run lands on `tf`.
pub fn integrate(
    sys: &SemidiscreteSystem,
    tab: &ShuOsherTableau,
    dt: f64,
    t0: f64,
    tf: f64,
    u0: &[f64],
) -> Result<Integration> {
    if !(dt > 0.0) || !(tf > t0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and tf > t0 (dt = {dt}, t0 = {t0}, tf = {tf})")));
    }
    if u0.len() != sys.dimension() {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} entries, system has {}",
            u0.len(),
            sys.dimension()
        )));
    }
    let n = u0.len();
    let s = tab.stages();
    let mut u = u0.to_vec();
    let mut y = vec![vec![0.0; n]; s];
    let mut f = vec![vec![0.0; n]; s];
    let full_steps = ((tf - t0) / dt).floor() as usize;
    let remainder = (tf - t0) - full_steps as f64 * dt;
    // a remainder at round-off level is absorbed into the last full step
    let tail = remainder > 1e-12 * (tf - t0).abs().max(dt);
    let total = full_steps + usize::from(tail);
    for i in 0..total {
        let t = t0 + i as f64 * dt;
        let h = if i + 1 == total { tf - t } else { dt };
        step(sys, tab, t, h, &mut u, &mut y, &mut f);
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { step: i + 1, t: t + h });
        }
    }
    Ok(Integration { state: u, steps: total, t_end: tf })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    Linf,
    /// `(1/|Ω|) Σ |e_i| Δx`.
    WeightedL1,
}

impl ErrorNorm {
    pub fn measure(self, a: &[f64], b: &[f64], dx: f64, domain_length: f64) -> f64 {
        let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            ErrorNorm::Linf => diffs.fold(0.0, f64::max),
            ErrorNorm::WeightedL1 => diffs.sum::<f64>() * dx / domain_length,
        }
    }
}

/// What errors in a convergence study are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// The system's exact solution.
    Exact,
    /// The same method run with the smallest study timestep divided by this factor.
    Refined(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    /// `None` when the run diverged.
    pub error: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub norm: ErrorNorm,
    /// Ordered by decreasing `dt`.
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log error` against `log dt` over the stable runs with
    /// positive error; `None` with fewer than three such runs.
    pub slope: Option<f64>,
}

impl ConvergenceStudy {
    pub fn diverged(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.error.is_none()).map(|r| r.dt).collect()
    }

    /// `dt,error,steps` rows; diverged runs carry `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dt,error,steps\n");
        for r in &self.rows {
            let e = r.error.map_or("nan".to_string(), |e| format!("{e:.16e}"));
            let _ = writeln!(out, "{:.16e},{e},{}", r.dt, r.steps);
        }
        out
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs the tableau at every `dt` (in parallel under [`Exec::Parallel`]) from the
/// system's initial state over `[0, tf]` and fits the observed order.
pub fn convergence_study(
    sys: &SemidiscreteSystem,
    tab: &ShuOsherTableau,
    dts: &[f64],
    tf: f64,
    norm: ErrorNorm,
    reference: Reference,
    exec: Exec,
) -> Result<ConvergenceStudy> {
    if dts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a convergence study needs at least 3 timesteps, got {}",
            dts.len()
        )));
    }
    let mut dts = dts.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    let u0 = sys.initial_state();
    let target = match reference {
        Reference::Exact => sys
            .exact_solution(tf)
            .ok_or_else(|| Error::InvalidArgument(format!("system '{}' has no exact solution", sys.label())))?,
        Reference::Refined(factor) => {
            if factor < 2 {
                return Err(Error::InvalidArgument("the refinement factor must be at least 2".into()));
            }
            let finest = dts[dts.len() - 1] / factor as f64;
            integrate(sys, tab, finest, 0.0, tf, u0)?.state
        }
    };
    let dx = sys.cell_width();
    let rows: Vec<ConvergenceRow> = exec.map(&dts, |&dt| match integrate(sys, tab, dt, 0.0, tf, u0) {
        Ok(run) => ConvergenceRow {
            dt,
            error: Some(norm.measure(&run.state, &target, dx, sys.domain_length())),
            steps: run.steps,
        },
        Err(_) => ConvergenceRow { dt, error: None, steps: 0 },
    });
    let points: Vec<(f64, f64)> =
        rows.iter().filter_map(|r| r.error.filter(|e| *e > 0.0).map(|e| (r.dt.ln(), e.ln()))).collect();
    let slope = if points.len() >= 3 { fit_slope(&points) } else { None };
    Ok(ConvergenceStudy { norm, rows, slope })
}

/// Periodic total variation `Σ_j |u_{j+1} − u_j|`.
pub fn total_variation(u: &[f64]) -> f64 {
    let n = u.len();
    (0..n).map(|j| (u[(j + 1) % n] - u[j]).abs()).sum()
}

/// `TV(u_final) − TV(u_initial)`.
pub fn total_variation_increase(u_initial: &[f64], u_final: &[f64]) -> Result<f64> {
    if u_initial.len() != u_final.len() {
        return Err(Error::InvalidArgument(format!("state lengths differ ({} vs {})", u_initial.len(), u_final.len())));
    }
    Ok(total_variation(u_final) - total_variation(u_initial))
}
