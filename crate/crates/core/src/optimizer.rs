//! Timestep maximization over pseudo-extrema.
//!
//! At a fixed timestep the spectrum is scaled, its upper convex hull `I` is built and
//! the free pseudo-extrema are parametrized by their real parts only:
//! `r_j = x_j + i I(x_j)` (stage 1). If that is not enough, stage 2 adds bounded
//! imaginary corrections `y_j ∈ [−ε max I, ε max I]`. Both stages minimize a squared
//! hinge of `ln |P(z_m)|²` over the spectrum plus a quadratic penalty on the order
//! conditions, with a projected L-BFGS inner loop and exact gradients. The outer search
//! brackets and bisects the timestep, warm-starting each probe from the best feasible
//! solution so far.

mod lbfgs;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envelope::{convex_hull_upper, equal_arclength_points, HullFunction};
use crate::exec::Exec;
use crate::polynomial::{eval, eval_gradient, order_constraints_with_jacobian, PseudoExtremaSet, StabilityPolynomial};
use crate::spectra::{reduce_to_upper, Spectrum};
use crate::{Error, Result};

pub use lbfgs::Stop;

/// Default half-width of the imaginary corrections relative to the hull height.
pub const DEFAULT_EPS: f64 = 0.02;
/// Order-condition residual accepted in returned polynomials.
pub const ORDER_TOL: f64 = 1e-10;

/// Stability is enforced as `ln |P|² ≤ −LOG_MARGIN` so that the final check
/// `|P| − 1 ≤ constraint_tol` survives the last projection onto the order conditions.
const LOG_MARGIN: f64 = 1e-9;
/// Violations below this keep the penalty continuation going after a stall.
const NEAR_MISS: f64 = 1e-8;
const PENALTY_START: f64 = 100.0;
const PENALTY_ROUNDS: u32 = 5;
const RESIDUAL_TARGET: f64 = 1e-12;
const MAX_BRACKET_STEPS: usize = 60;
/// Upward step after a downward scan lands in the feasible band.
const CREEP: f64 = 1.0025;
const MAX_SCAN_STEPS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Feasibility,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub degree: usize,
    pub order: u8,
    pub eps: f64,
    pub mode: Mode,
    /// Explicit timestep for feasibility mode, or the first probe when maximizing.
    pub dt: Option<f64>,
    pub dt_ref: Option<f64>,
    pub s_ref: Option<usize>,
    pub bisection_rtol: f64,
    pub constraint_tol: f64,
    /// Inner iteration budget per stage solve.
    pub max_iterations: usize,
    pub seed: u64,
    /// Extra solves from jittered initial guesses when the deterministic ones fail.
    pub restarts: usize,
    /// Keep only hull vertices plus this many interior samples as constraints.
    pub hull_plus_samples: Option<usize>,
    #[serde(skip)]
    pub exec: Exec,
}

impl OptimizeConfig {
    pub fn new(degree: usize, order: u8) -> Self {
        Self {
            degree,
            order,
            eps: DEFAULT_EPS,
            mode: Mode::Maximize,
            dt: None,
            dt_ref: None,
            s_ref: None,
            bisection_rtol: 1e-4,
            constraint_tol: 1e-14,
            max_iterations: 1000,
            seed: 0,
            restarts: 0,
            hull_plus_samples: None,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.degree < 2 {
            return bad(format!("degree {} too small", self.degree));
        }
        if !(1..=3).contains(&self.order) {
            return bad(format!("order {} not in 1..=3", self.order));
        }
        if self.order as usize >= self.degree {
            return bad(format!("order {} needs more than {} stages", self.order, self.degree));
        }
        if !(self.eps >= 0.0) {
            return bad("eps must be non-negative".into());
        }
        if !(self.bisection_rtol > 0.0) || !(self.constraint_tol >= 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.dt_ref.is_some() != self.s_ref.is_some() {
            return bad("dt_ref and s_ref must be given together".into());
        }
        if self.mode == Mode::Feasibility && self.dt.is_none() && self.dt_ref.is_none() {
            return bad("feasibility mode needs dt or (dt_ref, s_ref)".into());
        }
        for v in [self.dt, self.dt_ref].into_iter().flatten() {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("timestep {v} must be positive"));
            }
        }
        if self.s_ref == Some(0) {
            return bad("s_ref must be positive".into());
        }
        Ok(())
    }

    /// Linearly scaled reference timestep `(S / S_ref) dt_ref`.
    pub fn scaled_reference(&self) -> Option<f64> {
        match (self.dt_ref, self.s_ref) {
            (Some(dt), Some(s)) => Some(self.degree as f64 / s as f64 * dt),
            _ => None,
        }
    }

    fn n_real(&self) -> usize {
        usize::from(self.degree.is_multiple_of(2))
    }

    fn n_pairs(&self) -> usize {
        (self.degree - 1 - self.n_real()) / 2
    }
}

/// One feasibility solve of the outer search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub dt: f64,
    pub feasible: bool,
    pub max_violation: f64,
    pub stage1_iterations: usize,
    pub stage2_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub polynomial: StabilityPolynomial,
    pub achieved_dt: f64,
    pub max_violation: f64,
    /// Real parts `x*` of the returned pseudo-extrema, real root first.
    pub stage1_solution: Vec<f64>,
    /// Imaginary corrections `y*` of the pairs (zero when stage 2 was not needed).
    pub stage2_corrections: Vec<f64>,
    pub iterations: usize,
    pub stage1_iterations: usize,
    pub status: Status,
    pub probes: Vec<Probe>,
}

/// Result of one stage solve at a fixed timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub pe: PseudoExtremaSet,
    /// `max |P(dt λ)| − 1` over the full reduced spectrum.
    pub max_violation: f64,
    pub order_residual: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub stop: Stop,
}

struct Aux {
    violation: f64,
    residual: f64,
}

/// The feasibility problem at one timestep.
pub struct Problem<'a> {
    cfg: &'a OptimizeConfig,
    dt: f64,
    hull: HullFunction,
    constraints: Vec<Complex64>,
    all_points: Vec<Complex64>,
    x_lo: f64,
    x_hi: f64,
    y_max: f64,
}

impl<'a> Problem<'a> {
    pub fn new(cfg: &'a OptimizeConfig, spectrum: &Spectrum, dt: f64) -> Result<Self> {
        let reduced = reduce_to_upper(spectrum, spectrum.default_dedup_tol());
        let all_points: Vec<Complex64> =
            reduced.eigenvalues().iter().map(|l| l * dt).filter(|z| z.norm() > 0.0).collect();
        if all_points.is_empty() {
            return Err(Error::Empty("spectrum has no nonzero eigenvalues".into()));
        }
        let hull = convex_hull_upper(&all_points)?;
        let x_lo = hull.x_min();
        if !(x_lo < 0.0) {
            return Err(Error::InvalidArgument("spectrum needs eigenvalues with negative real part".into()));
        }
        let x_hi = -1e-12 * x_lo.abs();
        let y_max = cfg.eps * hull.max_height();
        let constraints = match cfg.hull_plus_samples {
            Some(k) => constraint_subset(&all_points, &hull, k, cfg.degree / 2 + 1),
            None => all_points.clone(),
        };
        Ok(Self { cfg, dt, hull, constraints, all_points, x_lo, x_hi, y_max })
    }

    pub fn hull(&self) -> &HullFunction {
        &self.hull
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    /// Imaginary-correction half-width `ε · max I`.
    pub fn y_bound(&self) -> f64 {
        self.y_max
    }

    /// Pseudo-extrema `x_0` (real) and `x_j + i (I(x_j) + y_j)`, together with the
    /// hull slope and the sign flip applied when the imaginary part turns negative.
    fn assemble(&self, x: &[f64], y: Option<&[f64]>) -> (PseudoExtremaSet, Vec<(f64, f64)>) {
        let nr = self.cfg.n_real();
        let mut chain = Vec::with_capacity(self.cfg.n_pairs());
        let mut upper = Vec::with_capacity(self.cfg.n_pairs());
        for j in 0..self.cfg.n_pairs() {
            let xj = x[nr + j];
            let (h, slope) = self.hull.height_and_slope(xj);
            let im = h + y.map_or(0.0, |y| y[j]);
            chain.push((slope, if im < 0.0 { -1.0 } else { 1.0 }));
            upper.push(Complex64::new(xj, im));
        }
        let pe = PseudoExtremaSet::new(x[..nr].to_vec(), upper).expect("box keeps pseudo-extrema away from zero");
        (pe, chain)
    }

    pub fn pseudo_extrema(&self, x: &[f64], y: Option<&[f64]>) -> PseudoExtremaSet {
        self.assemble(x, y).0
    }

    fn split<'v>(&self, v: &'v [f64], stage2: bool) -> (&'v [f64], Option<&'v [f64]>) {
        let n = self.cfg.n_real() + self.cfg.n_pairs();
        if stage2 {
            (&v[..n], Some(&v[n..]))
        } else {
            (v, None)
        }
    }

    /// Chain rule from the flat pseudo-extremum gradient to the optimization variables.
    fn chain_to_vars(&self, gpe: &[f64], chain: &[(f64, f64)], stage2: bool) -> Vec<f64> {
        let nr = self.cfg.n_real();
        let np = self.cfg.n_pairs();
        let mut gx = gpe[..nr].to_vec();
        let mut gy = Vec::with_capacity(np);
        for (j, &(slope, sign)) in chain.iter().enumerate() {
            let g_re = gpe[nr + 2 * j];
            let g_im = gpe[nr + 2 * j + 1] * sign;
            gx.push(g_re + g_im * slope);
            gy.push(g_im);
        }
        if stage2 {
            gx.extend(gy);
        }
        gx
    }

    fn merit(&self, v: &[f64], stage2: bool, mu: f64) -> (f64, Vec<f64>, Aux) {
        let (x, y) = self.split(v, stage2);
        let (pe, chain) = self.assemble(x, y);
        let np = pe.n_params();
        let (hinge, mut gpe, max_sq) = self
            .cfg
            .exec
            .fold_chunks(
                &self.constraints,
                |chunk| {
                    let mut f = 0.0;
                    let mut g = vec![0.0; np];
                    let mut max_sq = 0.0f64;
                    for &z in chunk {
                        let m = eval(&pe, z).norm_sqr();
                        max_sq = max_sq.max(m);
                        let h = m.ln() + LOG_MARGIN;
                        if h > 0.0 {
                            f += h * h;
                            let w = 2.0 * h / m;
                            for (gi, d) in g.iter_mut().zip(eval_gradient(&pe, z).flat()) {
                                *gi += w * d;
                            }
                        }
                    }
                    (f, g, max_sq)
                },
                |a, b| {
                    let g = a.1.iter().zip(&b.1).map(|(p, q)| p + q).collect();
                    (a.0 + b.0, g, a.2.max(b.2))
                },
            )
            .expect("constraint set is non-empty");
        let (res, jac) = order_constraints_with_jacobian(&pe, self.cfg.order);
        let mut f = hinge;
        for (r, row) in res.iter().zip(&jac) {
            f += mu * r * r;
            for (gi, d) in gpe.iter_mut().zip(row) {
                *gi += 2.0 * mu * r * d;
            }
        }
        let grad = self.chain_to_vars(&gpe, &chain, stage2);
        let aux = Aux { violation: max_sq.sqrt() - 1.0, residual: res.iter().fold(0.0f64, |m, r| m.max(r.abs())) };
        (f, grad, aux)
    }

    fn var_bounds(&self, stage2: bool) -> (Vec<f64>, Vec<f64>) {
        let n = self.cfg.n_real() + self.cfg.n_pairs();
        let mut lo = vec![self.x_lo; n];
        let mut hi = vec![self.x_hi; n];
        if stage2 {
            lo.extend(std::iter::repeat_n(-self.y_max, self.cfg.n_pairs()));
            hi.extend(std::iter::repeat_n(self.y_max, self.cfg.n_pairs()));
        }
        (lo, hi)
    }

    /// Newton projection `v ← v − Jᵀ(JJᵀ)⁻¹ r` onto the order-condition manifold.
    fn polish(&self, v: &[f64], stage2: bool) -> Vec<f64> {
        let mut v = v.to_vec();
        if self.cfg.order < 2 {
            return v;
        }
        let (lo, hi) = self.var_bounds(stage2);
        for _ in 0..8 {
            let (x, y) = self.split(&v, stage2);
            let (pe, chain) = self.assemble(x, y);
            let (res, jac) = order_constraints_with_jacobian(&pe, self.cfg.order);
            if res.iter().all(|r| r.abs() <= 1e-16) {
                break;
            }
            let rows: Vec<Vec<f64>> = jac.iter().map(|row| self.chain_to_vars(row, &chain, stage2)).collect();
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
            let lambda = match rows.len() {
                1 => {
                    let d = dot(&rows[0], &rows[0]);
                    if d == 0.0 {
                        break;
                    }
                    vec![res[0] / d]
                }
                _ => {
                    let (a, b, c) = (dot(&rows[0], &rows[0]), dot(&rows[0], &rows[1]), dot(&rows[1], &rows[1]));
                    let det = a * c - b * b;
                    if det.abs() <= 1e-300 {
                        break;
                    }
                    vec![(c * res[0] - b * res[1]) / det, (a * res[1] - b * res[0]) / det]
                }
            };
            for (row, l) in rows.iter().zip(&lambda) {
                for (vi, d) in v.iter_mut().zip(row) {
                    *vi -= l * d;
                }
            }
            for ((vi, l), h) in v.iter_mut().zip(&lo).zip(&hi) {
                *vi = vi.clamp(*l, *h);
            }
        }
        v
    }

    /// `max |P(z)| − 1` over the full reduced spectrum.
    pub fn violation(&self, pe: &PseudoExtremaSet) -> f64 {
        max_violation(pe, &self.all_points, self.cfg.exec)
    }

    fn outcome(&self, v: Vec<f64>, stage2: bool, iterations: usize, stop: Stop) -> StageOutcome {
        let (x, y) = self.split(&v, stage2);
        let pe = self.pseudo_extrema(x, y);
        let max_violation = self.violation(&pe);
        let order_residual =
            order_constraints_with_jacobian(&pe, self.cfg.order).0.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        StageOutcome {
            x: x.to_vec(),
            y: y.map_or_else(|| vec![0.0; self.cfg.n_pairs()], <[f64]>::to_vec),
            feasible: max_violation <= self.cfg.constraint_tol && order_residual <= ORDER_TOL,
            pe,
            max_violation,
            order_residual,
            iterations,
            stop,
        }
    }

    fn run(&self, v0: Vec<f64>, stage2: bool) -> StageOutcome {
        let (lo, hi) = self.var_bounds(stage2);
        let tol = self.cfg.constraint_tol;
        let first_step = 0.01 * self.x_lo.abs();
        let mut v = v0;
        let mut iterations = 0;
        let mut last = None;
        for round in 0..PENALTY_ROUNDS {
            let mu = PENALTY_START * 10f64.powi(round as i32);
            let budget = self.cfg.max_iterations.saturating_sub(iterations);
            let out = lbfgs::minimize(
                |v| self.merit(v, stage2, mu),
                &v,
                &lo,
                &hi,
                budget,
                first_step,
                |a: &Aux| a.violation <= tol && a.residual <= RESIDUAL_TARGET,
            );
            iterations += out.iterations;
            let polished = self.polish(&out.v, stage2);
            let result = self.outcome(polished.clone(), stage2, iterations, out.stop);
            if result.feasible {
                return result;
            }
            let stuck = out.stop != Stop::Converged && out.aux.violation > NEAR_MISS;
            v = polished;
            last = Some(result);
            if stuck || budget == 0 {
                break;
            }
        }
        last.expect("at least one penalty round")
    }

    /// Stage 1: only real parts vary, imaginary parts follow the hull.
    pub fn stage1(&self, x0: &[f64]) -> StageOutcome {
        self.run(x0.to_vec(), false)
    }

    /// Stage 2: real parts and bounded imaginary corrections vary jointly.
    pub fn stage2(&self, x0: &[f64], y0: &[f64]) -> StageOutcome {
        if self.y_max == 0.0 {
            return self.stage1(x0);
        }
        let mut v = x0.to_vec();
        v.extend(y0.iter().map(|y| y.clamp(-self.y_max, self.y_max)));
        self.run(v, true)
    }

    /// Stage 1, then stage 2 from its result if needed.
    fn solve(&self, x0: &[f64], y0: Option<&[f64]>) -> (StageOutcome, usize, usize) {
        let s1 = self.stage1(x0);
        let it1 = s1.iterations;
        if s1.feasible || self.y_max == 0.0 {
            return (s1, it1, 0);
        }
        let zeros = vec![0.0; self.cfg.n_pairs()];
        let s2 = self.stage2(&s1.x, y0.unwrap_or(&zeros));
        let mut it2 = s2.iterations;
        let mut best = if s2.feasible || s2.max_violation < s1.max_violation { s2 } else { s1 };
        if let (false, Some(y0)) = (best.feasible, y0) {
            // stage 1 can wander far from a warm start; retry the joint solve from it directly
            let direct = self.stage2(x0, y0);
            it2 += direct.iterations;
            if direct.feasible || direct.max_violation < best.max_violation {
                best = direct;
            }
        }
        (best, it1, it2)
    }
}

fn constraint_subset(points: &[Complex64], hull: &HullFunction, samples: usize, min_count: usize) -> Vec<Complex64> {
    let is_knot = |z: &Complex64| hull.knots().iter().any(|&(x, y)| x == z.re && y == z.im);
    let (mut keep, rest): (Vec<Complex64>, Vec<Complex64>) = points.iter().partition(|z| is_knot(z));
    if samples > 0 && !rest.is_empty() {
        let step = rest.len() as f64 / samples.min(rest.len()) as f64;
        keep.extend((0..samples.min(rest.len())).map(|i| rest[(i as f64 * step) as usize]));
    }
    if keep.len() < min_count {
        points.to_vec()
    } else {
        keep
    }
}

fn max_violation(pe: &PseudoExtremaSet, points: &[Complex64], exec: Exec) -> f64 {
    exec.fold_chunks(points, |chunk| chunk.iter().map(|&z| eval(pe, z).norm()).fold(0.0f64, f64::max), f64::max)
        .unwrap_or(0.0)
        - 1.0
}

/// Initial real parts for the pseudo-extrema, real root first.
///
/// Without a prior they are equally arc-length distributed on the hull (left endpoint
/// first for even degree). With a result at half the degree, every second entry is the
/// prior's real part scaled by the timestep ratio and the remaining entries sit at the
/// arc-length midpoints between them (the last one between its neighbour and the
/// origin). A real-axis hull uses the shifted Chebyshev spacing instead.
pub fn initialize_pe(h: &HullFunction, degree: usize, prior: Option<&OptimizeResult>, dt: f64) -> Result<Vec<f64>> {
    if degree < 2 {
        return Err(Error::InvalidArgument(format!("degree {degree} too small")));
    }
    let even = degree.is_multiple_of(2);
    let n = if even { degree / 2 } else { (degree - 1) / 2 };
    let x_min = h.x_min();
    let x_hi = -1e-12 * x_min.abs();
    let curve = h.to_curve();
    if let Some(prior) = prior {
        let pd = prior.polynomial.degree();
        if 2 * pd != degree || !degree.is_multiple_of(4) {
            return Err(Error::InvalidArgument(format!("prior of degree {pd} cannot seed degree {degree}")));
        }
        let ratio = dt / prior.achieved_dt;
        let mut x = vec![0.0; n];
        for (i, xp) in prior.stage1_solution.iter().enumerate() {
            x[2 * i] = (xp * ratio).clamp(x_min, x_hi);
        }
        for k in (1..n).step_by(2) {
            let left = curve.arclength_at_re(x[k - 1]);
            let right = if k + 1 < n { curve.arclength_at_re(x[k + 1]) } else { curve.length() };
            x[k] = curve.at_arclength(0.5 * (left + right)).re.clamp(x_min, x_hi);
        }
        return Ok(x);
    }
    if h.is_degenerate() {
        let s = degree as f64;
        return Ok((0..n)
            .map(|k| {
                let j = n - k;
                (x_min * 0.5 * (1.0 - (2.0 * j as f64 * std::f64::consts::PI / s).cos())).clamp(x_min, x_hi)
            })
            .collect());
    }
    Ok(equal_arclength_points(&curve, n, even)?.into_iter().map(|p| p.re.clamp(x_min, x_hi)).collect())
}

/// Timestep suggested by a half-degree prior: linear scaling, then for `p ≥ 2` the
/// doubled start is stretched until `Σ −1/r̃ = 1/2` (scaling `dt` by `c` scales that sum
/// by `1/c`). Higher orders are feasible only in a thin band below the optimum, which
/// linear scaling alone tends to undershoot.
fn prior_reference(cfg: &OptimizeConfig, spectrum: &Spectrum, prior: &OptimizeResult) -> Result<f64> {
    let dt = prior.achieved_dt * cfg.degree as f64 / prior.polynomial.degree() as f64;
    if cfg.order < 2 {
        return Ok(dt);
    }
    let problem = Problem::new(cfg, spectrum, dt)?;
    let x0 = initialize_pe(problem.hull(), cfg.degree, Some(prior), dt)?;
    let y0 = doubled_corrections(prior, cfg.n_pairs(), dt / prior.achieved_dt);
    let sum: f64 = problem.pseudo_extrema(&x0, Some(&y0)).all_roots().iter().map(|r| -r.inv().re).sum();
    Ok(if sum > 0.0 { 2.0 * sum * dt } else { dt })
}

/// Stage-2 corrections matching [`initialize_pe`] with a prior: the prior's corrections
/// on the doubled pairs, neighbour averages on the interleaved ones.
fn doubled_corrections(prior: &OptimizeResult, n_pairs: usize, ratio: f64) -> Vec<f64> {
    let mut y = vec![0.0; n_pairs];
    for (j, yp) in prior.stage2_corrections.iter().enumerate() {
        if 2 * j + 1 < n_pairs {
            y[2 * j + 1] = yp * ratio;
        }
    }
    for k in (0..n_pairs).step_by(2) {
        let left = if k > 0 { y[k - 1] } else { 0.0 };
        let right = y.get(k + 1).copied().unwrap_or(0.0);
        y[k] = 0.5 * (left + right);
    }
    y
}

/// Stage 1 at a fixed timestep.
pub fn solve_stage1(cfg: &OptimizeConfig, spectrum: &Spectrum, dt: f64, x0: &[f64]) -> Result<StageOutcome> {
    cfg.validate()?;
    let problem = Problem::new(cfg, spectrum, dt)?;
    check_len(x0, cfg.n_real() + cfg.n_pairs())?;
    Ok(problem.stage1(x0))
}

/// Stage 2 at a fixed timestep.
pub fn solve_stage2(
    cfg: &OptimizeConfig,
    spectrum: &Spectrum,
    dt: f64,
    x0: &[f64],
    y0: &[f64],
) -> Result<StageOutcome> {
    cfg.validate()?;
    let problem = Problem::new(cfg, spectrum, dt)?;
    check_len(x0, cfg.n_real() + cfg.n_pairs())?;
    check_len(y0, cfg.n_pairs())?;
    Ok(problem.stage2(x0, y0))
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidArgument(format!("expected {n} entries, got {}", v.len())));
    }
    Ok(())
}

/// `max_m |P(dt λ_m)| − 1`; non-positive means stable.
pub fn verify_stability(poly: &StabilityPolynomial, spectrum: &Spectrum) -> f64 {
    let points: Vec<Complex64> = spectrum.eigenvalues().iter().map(|l| l * poly.dt).collect();
    max_violation(&poly.pe, &points, Exec::default())
}

struct Search<'a> {
    cfg: &'a OptimizeConfig,
    spectrum: &'a Spectrum,
    prior: Option<&'a OptimizeResult>,
    /// Lower-order solution `(dt, x, y)` used as a starting point until a probe succeeds.
    lower_order: Option<(f64, Vec<f64>, Vec<f64>)>,
    probes: Vec<Probe>,
    iterations: usize,
    stage1_iterations: usize,
    best: Option<(f64, StageOutcome)>,
    closest: Option<(f64, StageOutcome)>,
}

impl Search<'_> {
    /// Feasibility solve at `dt`; initial guesses are tried in order until one
    /// succeeds: warm start from the best feasible solution, prior, arc-length
    /// placement, jittered restarts.
    fn probe(&mut self, dt: f64) -> Result<bool> {
        let problem = Problem::new(self.cfg, self.spectrum, dt)?;
        let mut inits: Vec<(Vec<f64>, Option<Vec<f64>>)> = Vec::new();
        if let Some((bdt, sol)) = &self.best {
            let r = dt / bdt;
            inits.push((sol.x.iter().map(|x| x * r).collect(), Some(sol.y.iter().map(|y| y * r).collect())));
        } else {
            if let Some((ldt, x, y)) = &self.lower_order {
                let r = dt / ldt;
                inits.push((x.iter().map(|x| x * r).collect(), Some(y.iter().map(|y| y * r).collect())));
            }
            if let Some(prior) = self.prior {
                let x0 = initialize_pe(problem.hull(), self.cfg.degree, Some(prior), dt)?;
                let y0 = doubled_corrections(prior, self.cfg.n_pairs(), dt / prior.achieved_dt);
                inits.push((x0, Some(y0)));
            }
        }
        let cold = initialize_pe(problem.hull(), self.cfg.degree, None, dt)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let width = problem.x_hi - problem.x_lo;
        let jittered: Vec<(Vec<f64>, Option<Vec<f64>>)> = (0..self.cfg.restarts)
            .map(|_| {
                let x = cold
                    .iter()
                    .map(|x| (x + 0.005 * width * rng.random_range(-1.0..=1.0)).clamp(problem.x_lo, problem.x_hi))
                    .collect();
                (x, None)
            })
            .collect();
        inits.push((cold, None));
        inits.extend(jittered);

        let mut best_here: Option<StageOutcome> = None;
        let (mut it1, mut it2) = (0, 0);
        for (x0, y0) in inits {
            let (out, a, b) = problem.solve(&x0, y0.as_deref());
            it1 += a;
            it2 += b;
            let better = best_here.as_ref().is_none_or(|o| out.max_violation < o.max_violation);
            let done = out.feasible;
            if done || better {
                best_here = Some(out);
            }
            if done {
                break;
            }
        }
        let out = best_here.expect("at least one initial guess");
        self.iterations += it1 + it2;
        self.stage1_iterations += it1;
        self.probes.push(Probe {
            dt,
            feasible: out.feasible,
            max_violation: out.max_violation,
            stage1_iterations: it1,
            stage2_iterations: it2,
        });
        let feasible = out.feasible;
        if feasible {
            if self.best.as_ref().is_none_or(|(b, _)| dt > *b) {
                self.best = Some((dt, out));
            }
        } else if self.closest.as_ref().is_none_or(|(_, o)| out.max_violation < o.max_violation) {
            self.closest = Some((dt, out));
        }
        Ok(feasible)
    }

    fn finish(self, status_if_found: Status) -> Result<OptimizeResult> {
        let (dt, out, status) = match (self.best, self.closest) {
            (Some((dt, out)), _) => (dt, out, status_if_found),
            (None, Some((dt, out))) => {
                let status = if out.stop == Stop::MaxIter { Status::MaxIter } else { Status::Infeasible };
                (dt, out, status)
            }
            (None, None) => return Err(Error::InvalidArgument("no probe was run".into())),
        };
        Ok(OptimizeResult {
            polynomial: StabilityPolynomial::new(out.pe, self.cfg.order, dt)?,
            achieved_dt: dt,
            max_violation: out.max_violation,
            stage1_solution: out.x,
            stage2_corrections: out.y,
            iterations: self.iterations,
            stage1_iterations: self.stage1_iterations,
            status,
            probes: self.probes,
        })
    }
}

/// Runs the feasibility solve (mode `Feasibility`) or maximizes the timestep by
/// bracketing and bisection (mode `Maximize`).
pub fn find_max_dt(cfg: &OptimizeConfig, spectrum: &Spectrum) -> Result<OptimizeResult> {
    find_max_dt_with_prior(cfg, spectrum, None)
}

/// As [`find_max_dt`], seeding the first probe from a result at half the degree.
pub fn find_max_dt_with_prior(
    cfg: &OptimizeConfig,
    spectrum: &Spectrum,
    prior: Option<&OptimizeResult>,
) -> Result<OptimizeResult> {
    cfg.validate()?;
    let mut search = Search {
        cfg,
        spectrum,
        prior,
        lower_order: None,
        probes: Vec::new(),
        iterations: 0,
        stage1_iterations: 0,
        best: None,
        closest: None,
    };
    if cfg.mode == Mode::Feasibility {
        let dt = cfg.dt.or(cfg.scaled_reference()).expect("validated");
        search.probe(dt)?;
        return search.finish(Status::Feasible);
    }

    // linear scaling from an explicit reference, else from the prior
    let reference = match (cfg.scaled_reference(), prior) {
        (Some(r), _) => Some(r),
        (None, Some(p)) => Some(prior_reference(cfg, spectrum, p)?),
        (None, None) => None,
    };
    let (start, grow) = match (reference, cfg.dt) {
        // a reference is usually close, so start just above it and widen on success
        (Some(r), _) => (r, 1.0 + 2.0 * cfg.bisection_rtol),
        (None, Some(dt)) => (dt, 2.0),
        (None, None) if cfg.order == 1 => (cfg.degree as f64 / spectrum.max_modulus(), 2.0),
        (None, None) => {
            // any order-p polynomial is also first order, so the first-order optimum
            // bounds the search from above
            let mut first_order = cfg.clone();
            first_order.order = 1;
            first_order.bisection_rtol = cfg.bisection_rtol.max(1e-3);
            let bound = find_max_dt_with_prior(&first_order, spectrum, None)?;
            search.iterations += bound.iterations;
            search.stage1_iterations += bound.stage1_iterations;
            search.probes.extend(bound.probes);
            if !matches!(bound.status, Status::Optimal) {
                return search.finish(Status::Optimal);
            }
            search.lower_order = Some((bound.achieved_dt, bound.stage1_solution, bound.stage2_corrections));
            (bound.achieved_dt * 1.02, 1.05)
        }
    };
    // Below the optimum, first-order feasibility is monotone (shrinking a feasible
    // solution keeps it feasible), so the bracket halves. Higher orders are only
    // feasible in a band under the optimum and are scanned in small steps.
    let shrink = if cfg.order == 1 { 0.5 } else { 0.99 };
    let (mut lo, mut hi);
    if search.probe(start)? {
        lo = start;
        let adaptive = reference.is_some();
        let mut grow = grow;
        let mut next = start * grow;
        hi = f64::INFINITY;
        for _ in 0..MAX_BRACKET_STEPS {
            if search.probe(next)? {
                lo = next;
                if adaptive {
                    grow = (1.0 + 2.0 * (grow - 1.0)).min(2.0);
                }
                next = lo * grow;
            } else {
                hi = next;
                break;
            }
        }
        if !hi.is_finite() {
            return Err(Error::InvalidArgument("timestep unbounded: spectrum imposes no limit".into()));
        }
    } else {
        hi = start;
        lo = 0.0;
        let mut next = shrink * start;
        let floor = if cfg.order == 1 { 0.0 } else { 0.05 * start };
        for _ in 0..MAX_SCAN_STEPS {
            if next < floor {
                break;
            }
            if search.probe(next)? {
                lo = next;
                break;
            }
            hi = next;
            next *= shrink;
        }
        if lo == 0.0 {
            return search.finish(Status::Optimal);
        }
        // cold starts fail more often than warm ones near the band edge, so walk up
        // from the first feasible point, past the last failed scan point, before
        // bisecting
        let ceiling = hi / shrink;
        let mut next = lo * CREEP;
        while next < ceiling {
            if search.probe(next)? {
                lo = next;
                next *= CREEP;
            } else {
                hi = next;
                break;
            }
        }
    }
    while hi - lo > cfg.bisection_rtol * lo {
        let mid = 0.5 * (lo + hi);
        if search.probe(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    search.finish(Status::Optimal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::{check_order_constraints, disk_polynomial_pe};
    use crate::spectra::{generate_fv_advection_circle, generate_negative_real_line};

    fn circle() -> Spectrum {
        generate_fv_advection_circle(500, 2.0, 1.0).unwrap()
    }

    const DX: f64 = 2.0 / 500.0;

    #[test]
    fn straight_segment_initialization() {
        let h = convex_hull_upper(&[Complex64::new(-8.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        assert!(h.is_degenerate());
        // real-axis hull: shifted Chebyshev spacing
        let x = initialize_pe(&h, 4, None, 1.0).unwrap();
        assert_eq!(x.len(), 2);
        assert_eq!(x[0], -8.0);
        assert!((x[1] + 4.0).abs() < 1e-12);
        let tri = convex_hull_upper(&[Complex64::new(-8.0, 0.0), Complex64::new(-4.0, 0.1)]).unwrap();
        let x = initialize_pe(&tri, 4, None, 1.0).unwrap();
        assert_eq!(x[0], -8.0);
        assert!((x[1] + 4.0).abs() < 0.01);
    }

    #[test]
    fn semicircle_initialization_matches_disk_positions() {
        let s = 16;
        let dt = s as f64 * DX;
        let cfg = OptimizeConfig::new(s, 1);
        let problem = Problem::new(&cfg, &circle(), dt).unwrap();
        let x = initialize_pe(problem.hull(), s, None, dt).unwrap();
        let disk = disk_polynomial_pe(s, 1).unwrap();
        assert!((x[0] - disk.real_pe()[0]).abs() < 1e-12);
        for (k, r) in disk.upper_pe().iter().rev().enumerate() {
            assert!((x[k + 1] - r.re).abs() < 2e-3, "{k}: {} vs {}", x[k + 1], r.re);
        }
    }

    #[test]
    fn degenerate_initialization_is_chebyshev() {
        let s = 8;
        let line = generate_negative_real_line(400, 2.0 * 64.0).unwrap();
        let cfg = OptimizeConfig::new(s, 1);
        let problem = Problem::new(&cfg, &line, 1.0).unwrap();
        let x = initialize_pe(problem.hull(), s, None, 1.0).unwrap();
        let cheb = crate::polynomial::chebyshev_pe(s).unwrap();
        let mut expected: Vec<f64> = cheb.iter().map(|c| c.0).collect();
        expected.reverse();
        for (a, b) in x.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn analytic_disk_solution_needs_no_iterations() {
        let s = 8;
        let dt = s as f64 * DX;
        let cfg = OptimizeConfig::new(s, 1);
        let problem = Problem::new(&cfg, &circle(), dt).unwrap();
        let disk = disk_polynomial_pe(s, 1).unwrap();
        let mut x = vec![disk.real_pe()[0]];
        let mut y = Vec::new();
        for r in disk.upper_pe().iter().rev() {
            x.push(r.re);
            y.push(r.im - problem.hull().height_and_slope(r.re).0);
        }
        assert!(y.iter().all(|v| v.abs() <= problem.y_bound()));
        let out = problem.stage2(&x, &y);
        assert!(out.feasible, "violation {}", out.max_violation);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn perturbed_disk_start_recovers() {
        let s = 8;
        let dt = 0.995 * s as f64 * DX;
        let cfg = OptimizeConfig::new(s, 1);
        let spectrum = circle();
        let problem = Problem::new(&cfg, &spectrum, dt).unwrap();
        let mut x = initialize_pe(problem.hull(), s, None, dt).unwrap();
        for (k, v) in x.iter_mut().enumerate() {
            *v *= if k.is_multiple_of(2) { 1.01 } else { 0.99 };
            *v = v.max(problem.bounds().0);
        }
        let (out, _, _) = problem.solve(&x, None);
        assert!(out.feasible, "violation {}", out.max_violation);
    }

    #[test]
    fn twice_the_optimum_is_infeasible() {
        let s = 8;
        let mut cfg = OptimizeConfig::new(s, 1);
        cfg.mode = Mode::Feasibility;
        cfg.dt = Some(2.0 * s as f64 * DX);
        let out = find_max_dt(&cfg, &circle()).unwrap();
        assert!(matches!(out.status, Status::Infeasible | Status::MaxIter));
        assert!(out.max_violation > 0.0);
    }

    #[test]
    fn zero_eps_stage2_matches_stage1() {
        let s = 8;
        let dt = 0.9 * s as f64 * DX;
        let mut cfg = OptimizeConfig::new(s, 2);
        cfg.eps = 0.0;
        let spectrum = circle();
        let problem = Problem::new(&cfg, &spectrum, dt).unwrap();
        let x0 = initialize_pe(problem.hull(), s, None, dt).unwrap();
        let a = problem.stage1(&x0);
        let b = problem.stage2(&x0, &[0.0; 3]);
        assert_eq!(a.x, b.x);
        assert!(b.y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn maximize_disk_second_order() {
        let cfg = OptimizeConfig::new(8, 2);
        let out = find_max_dt(&cfg, &circle()).unwrap();
        assert_eq!(out.status, Status::Optimal);
        let ratio = out.achieved_dt / DX;
        assert!((ratio - 7.0).abs() < 0.07, "ratio {ratio}");
        assert!(check_order_constraints(&out.polynomial.pe, 2)[0].abs() <= ORDER_TOL);
        assert!(out.max_violation <= cfg.constraint_tol);
        assert!(out.stage2_corrections.iter().all(|y| y.abs() <= cfg.eps * out.achieved_dt * 250.0 + 1e-15));
    }

    #[test]
    fn scaling_a_feasible_solution_down_stays_feasible() {
        let cfg = OptimizeConfig::new(8, 2);
        let spectrum = circle();
        let out = find_max_dt(&cfg, &spectrum).unwrap();
        for f in [0.9, 0.5, 0.1] {
            let smaller = out.polynomial.rescaled(f * out.achieved_dt);
            assert!(verify_stability(&smaller, &spectrum) <= cfg.constraint_tol);
        }
    }

    #[test]
    fn verify_examples() {
        let s = 8;
        let spectrum = circle();
        let disk = disk_polynomial_pe(s, 1).unwrap();
        let poly = StabilityPolynomial::new(disk, 1, s as f64 * DX).unwrap();
        assert!(verify_stability(&poly, &spectrum) <= 1e-12);
        let inflated = StabilityPolynomial::new(poly.pe.clone(), 1, 1.01 * poly.dt).unwrap();
        assert!(verify_stability(&inflated, &spectrum) > 0.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizeConfig::new(8, 2);
        cfg.mode = Mode::Feasibility;
        assert!(cfg.validate().is_err());
        cfg.dt_ref = Some(0.1);
        assert!(cfg.validate().is_err());
        cfg.s_ref = Some(16);
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.scaled_reference(), Some(0.05));
        cfg.eps = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut cfg = OptimizeConfig::new(8, 2);
        cfg.exec = Exec::Sequential;
        let a = find_max_dt(&cfg, &circle()).unwrap();
        cfg.exec = Exec::Parallel;
        let b = find_max_dt(&cfg, &circle()).unwrap();
        assert_eq!(a.achieved_dt.to_bits(), b.achieved_dt.to_bits());
        assert_eq!(a.polynomial, b.polynomial);
    }
}
